//! 3-D scatter export of a feature CSV.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tracelab_core::embedder::project_3d;

use crate::error::Result;
use crate::{features, io};

pub const VIZ_CSV: &str = "viz.csv";
pub const VIZ_JSON: &str = "viz.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VizSummary {
    pub points: usize,
    /// Points per tag.
    pub tags: BTreeMap<String, usize>,
    /// Variance along each of the three axes.
    pub variances: [f64; 3],
    pub total_variance: f64,
    pub rank_deficient: bool,
}

/// Projects the features of `features_csv` to three dimensions and writes
/// `viz.csv` (`x,y,z,tag`) and `viz.json` under `dir`.
pub fn emit_viz(features_csv: &Path, dir: &Path) -> Result<(PathBuf, VizSummary)> {
    let rows = features::read(features_csv)?;
    let vectors: Vec<_> = rows.iter().map(|(_, f)| *f).collect();
    let proj = project_3d(&vectors)?;
    let mut csv = String::from("x,y,z,tag\n");
    let mut tags = BTreeMap::new();
    for ((entry, _), p) in rows.iter().zip(&proj.points) {
        csv.push_str(&format!("{},{},{},{}\n", p[0], p[1], p[2], entry.tag()));
        *tags.entry(entry.tag().to_string()).or_insert(0) += 1;
    }
    let path = dir.join(VIZ_CSV);
    io::write_file(&path, csv.as_bytes())?;
    let summary = VizSummary {
        points: rows.len(),
        tags,
        variances: proj.variances,
        total_variance: proj.total_variance,
        rank_deficient: proj.rank_deficient,
    };
    io::write_json(&dir.join(VIZ_JSON), &summary)?;
    Ok((path, summary))
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use tracelab_core::channels::ChannelKind;
    use tracelab_core::detector::Label;
    use tracelab_core::embedder::{FeatureVector, FEATURE_DIM};

    use super::*;
    use crate::manifest::{Entry, Split};

    fn write_features(path: &Path) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let groups = [(Label::Real, None), (Label::Fake, Some(ChannelKind::Continuous)), (Label::Fake, Some(ChannelKind::Token))];
        let mut rows = Vec::new();
        for (g, &(label, channel)) in groups.iter().enumerate() {
            for i in 0..10 {
                let v: Vec<f64> = (0..FEATURE_DIM).map(|d| rng.random::<f64>() + if d == g { 5.0 } else { 0.0 }).collect();
                let entry = Entry { file: format!("{g}/{i}.png"), label, source: i, split: Split::Test, channel };
                rows.push((entry, FeatureVector::from_slice(&v).unwrap()));
            }
        }
        features::write(path, &rows).unwrap();
    }

    #[test]
    fn output_is_deterministic_and_tagged() {
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("features.csv");
        write_features(&csv);
        let (a, summary) = emit_viz(&csv, &dir.path().join("a")).unwrap();
        let (b, again) = emit_viz(&csv, &dir.path().join("b")).unwrap();
        assert_eq!(summary, again);
        assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
        assert_eq!(summary.points, 30);
        let tags: Vec<(&str, usize)> = summary.tags.iter().map(|(k, v)| (k.as_str(), *v)).collect();
        assert_eq!(tags, [("continuous", 10), ("real", 10), ("token", 10)]);
        assert!(summary.variances[0] >= summary.variances[1] && summary.variances[1] >= summary.variances[2]);
        assert!(!summary.rank_deficient);
        let text = std::fs::read_to_string(dir.path().join("a").join(VIZ_CSV)).unwrap();
        assert_eq!(text.lines().count(), 31);
        assert_eq!(text.lines().next(), Some("x,y,z,tag"));
    }
}
