//! Experiment configuration, read from JSON or TOML by file extension.
//! Every stage seed is derived from the single top-level `seed`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tracelab_core::channels::ChannelKind;
use tracelab_core::corpus::CorpusConfig;
use tracelab_core::detector::{Architecture, Mode, TrainConfig, PROB_FLOOR};
use tracelab_core::rng::sub_seed;

use crate::error::{config_err, LabError, Result};
use crate::io;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    WithinChannel,
    CrossChannel,
    SparseVsFull,
    Property1,
    VarianceProbe,
    Visualize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSection {
    pub count: usize,
    pub size: usize,
    pub gamma: f64,
    pub shape_density: f64,
    pub train_fraction: f64,
}

impl Default for CorpusSection {
    fn default() -> Self {
        let c = CorpusConfig::default();
        Self { count: c.count, size: c.size, gamma: c.gamma, shape_density: c.shape_density, train_fraction: 0.75 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelsSection {
    pub kinds: Vec<ChannelKind>,
    /// Latent dimension of the continuous channel.
    pub d: usize,
    pub patch_size: usize,
    pub codebook_size: usize,
    pub steps: usize,
    pub t_start: usize,
}

impl Default for ChannelsSection {
    fn default() -> Self {
        Self { kinds: ChannelKind::ALL.to_vec(), d: 8, patch_size: 8, codebook_size: 64, steps: 8, t_start: 4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionSection {
    /// Medoids per constructed set.
    pub k: usize,
}

impl Default for SelectionSection {
    fn default() -> Self {
        Self { k: 25 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub architecture: Architecture,
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub mode: Mode,
    pub prob_floor: f64,
    pub standardize: bool,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            architecture: t.architecture,
            batch_size: t.batch_size,
            epochs: t.epochs,
            learning_rate: t.learning_rate,
            mode: t.mode,
            prob_floor: PROB_FLOOR,
            standardize: t.standardize,
        }
    }
}

impl TrainSection {
    pub fn to_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            architecture: self.architecture,
            batch_size: self.batch_size,
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            mode: self.mode,
            seed,
            prob_floor: self.prob_floor,
            standardize: self.standardize,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeSection {
    pub batch_size: usize,
    pub trials: usize,
    /// Correlations for the synthetic-gradient probe.
    pub synthetic_rho: Vec<f64>,
    pub synthetic_pairs: usize,
    pub synthetic_dim: usize,
    pub synthetic_trials: usize,
}

impl Default for ProbeSection {
    fn default() -> Self {
        Self {
            batch_size: 32,
            trials: 10_000,
            synthetic_rho: vec![0.0, 0.5, 0.9],
            synthetic_pairs: 4096,
            synthetic_dim: 16,
            synthetic_trials: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Property1Section {
    pub d: usize,
    pub fit_fraction: f64,
    pub train_fraction: f64,
    pub seeds: usize,
    pub foreign_gamma: Option<f64>,
}

impl Default for Property1Section {
    fn default() -> Self {
        Self { d: 8, fit_fraction: 0.25, train_fraction: 0.5, seeds: 5, foreign_gamma: Some(1.0) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub seed: u64,
    /// Root under which run directories are created; not part of the run
    /// stamp.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    pub corpus: CorpusSection,
    pub channels: ChannelsSection,
    pub selection: SelectionSection,
    pub train: TrainSection,
    pub probe: ProbeSection,
    pub property1: Property1Section,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            kind: ExperimentKind::WithinChannel,
            seed: 2024,
            out: None,
            corpus: CorpusSection::default(),
            channels: ChannelsSection::default(),
            selection: SelectionSection::default(),
            train: TrainSection::default(),
            probe: ProbeSection::default(),
            property1: Property1Section::default(),
        }
    }
}

/// Offsets of the per-stage seeds derived from the top-level seed.
pub mod seeds {
    pub const SPLIT: u64 = 1;
    pub const TOKEN: u64 = 2;
    pub const NOISE: u64 = 3;
    pub const TRAIN: u64 = 4;
    pub const SELECT: u64 = 5;
    pub const PROBE: u64 = 6;
    pub const PROPERTY1: u64 = 7;
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = io::read_file(path)?;
        let text = String::from_utf8(bytes).map_err(|e| LabError::format(path, e))?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("toml") => toml::from_str(&text).map_err(|e| {
                let line = e.span().map_or(0, |s| text[..s.start].matches('\n').count() as u64 + 1);
                LabError::Parse { path: path.to_path_buf(), line, message: e.message().to_string() }
            }),
            Some("json") => serde_json::from_str(&text).map_err(|e| LabError::Parse {
                path: path.to_path_buf(),
                line: e.line() as u64,
                message: e.to_string(),
            }),
            _ => Err(LabError::format(path, "config must end in .json or .toml")),
        }
    }

    pub fn stage_seed(&self, offset: u64) -> u64 {
        sub_seed(self.seed, offset)
    }

    pub fn corpus_config(&self) -> CorpusConfig {
        CorpusConfig {
            count: self.corpus.count,
            size: self.corpus.size,
            seed: self.seed,
            gamma: self.corpus.gamma,
            shape_density: self.corpus.shape_density,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        self.train.to_config(self.stage_seed(seeds::TRAIN))
    }

    pub fn validate(&self) -> Result<()> {
        self.corpus_config().validate()?;
        if !(self.corpus.train_fraction > 0.0 && self.corpus.train_fraction < 1.0) {
            return Err(config_err!("corpus.train_fraction must lie in (0, 1)"));
        }
        if self.channels.kinds.is_empty() {
            return Err(config_err!("channels.kinds must name at least one channel"));
        }
        let mut kinds = self.channels.kinds.clone();
        kinds.sort();
        kinds.dedup();
        if kinds.len() != self.channels.kinds.len() {
            return Err(config_err!("channels.kinds lists a channel twice"));
        }
        if self.channels.t_start > self.channels.steps {
            return Err(config_err!("channels.t_start exceeds channels.steps"));
        }
        if self.selection.k == 0 {
            return Err(config_err!("selection.k must be at least 1"));
        }
        self.train_config().validate()?;
        if self.probe.batch_size == 0 || self.probe.trials < 2 {
            return Err(config_err!("probe needs batch_size >= 1 and trials >= 2"));
        }
        if self.property1.seeds == 0 {
            return Err(config_err!("property1.seeds must be at least 1"));
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form, without the output root.
    pub fn stamp(&self) -> String {
        let canonical = ExperimentConfig { out: None, ..self.clone() };
        let bytes = serde_json::to_vec(&canonical).expect("config serializes");
        tracelab_core::hex(&Sha256::digest(&bytes))
    }
}

/// What the run directory echoes back: the resolved configuration plus the
/// values that were deliberately scaled for desk-scale runs.
#[derive(Debug, Serialize)]
pub struct ResolvedConfig {
    pub tool_version: &'static str,
    pub embedder_hash: String,
    pub stamp: String,
    pub config: ExperimentConfig,
    pub derived_seeds: DerivedSeeds,
    pub reference_values: ReferenceValues,
}

#[derive(Debug, Serialize)]
pub struct DerivedSeeds {
    pub corpus: u64,
    pub split: u64,
    pub token: u64,
    pub noise: u64,
    pub train: u64,
    pub select: u64,
    pub probe: u64,
    pub property1: u64,
}

/// Settings of the full-scale method that the desk-scale defaults replace.
#[derive(Debug, Serialize)]
pub struct ReferenceValues {
    /// Used for fine-tuning a large backbone; a fixed embedder with a small
    /// head needs a far larger step.
    pub learning_rate: f64,
    /// Medoids per set for corpora of ~10^5 images.
    pub selection_k: usize,
    pub feature_dim: usize,
}

impl ExperimentConfig {
    pub fn resolved(&self) -> ResolvedConfig {
        ResolvedConfig {
            tool_version: env!("CARGO_PKG_VERSION"),
            embedder_hash: tracelab_core::embedder::Embedder::new().spec_hash(),
            stamp: self.stamp(),
            config: ExperimentConfig { out: None, ..self.clone() },
            derived_seeds: DerivedSeeds {
                corpus: self.seed,
                split: self.stage_seed(seeds::SPLIT),
                token: self.stage_seed(seeds::TOKEN),
                noise: self.stage_seed(seeds::NOISE),
                train: self.stage_seed(seeds::TRAIN),
                select: self.stage_seed(seeds::SELECT),
                probe: self.stage_seed(seeds::PROBE),
                property1: self.stage_seed(seeds::PROPERTY1),
            },
            reference_values: ReferenceValues { learning_rate: 5e-7, selection_k: 100, feature_dim: 2048 },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(name: &str, text: &str) -> (tempfile::TempDir, PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(name);
        std::fs::write(&path, text).unwrap();
        (dir, path)
    }

    #[test]
    fn toml_and_json_load_with_defaults() {
        let (_d, path) = write(
            "c.toml",
            "kind = \"cross_channel\"\nseed = 9\n\n[corpus]\ncount = 40\n\n[channels]\nkinds = [\"token\", \"denoise\"]\n",
        );
        let c = ExperimentConfig::load(&path).unwrap();
        assert_eq!(c.kind, ExperimentKind::CrossChannel);
        assert_eq!(c.seed, 9);
        assert_eq!(c.corpus.count, 40);
        assert_eq!(c.corpus.size, CorpusSection::default().size);
        assert_eq!(c.channels.kinds, [ChannelKind::Token, ChannelKind::Denoise]);
        c.validate().unwrap();

        let (_d, path) = write("c.json", &serde_json::to_string(&c).unwrap());
        assert_eq!(ExperimentConfig::load(&path).unwrap(), c);
    }

    #[test]
    fn unknown_fields_are_rejected_with_their_line() {
        let (_d, path) = write("c.toml", "seed = 1\n\n[train]\nepochs = 2\nmomentum = 0.9\n");
        match ExperimentConfig::load(&path) {
            Err(LabError::Parse { line, message, .. }) => {
                assert_eq!(line, 5);
                assert!(message.contains("momentum"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        let (_d, path) = write("c.json", "{\n\"seed\": 1,\n\"colour\": 2\n}");
        assert!(matches!(ExperimentConfig::load(&path), Err(LabError::Parse { line: 3, .. })));
        let (_d, path) = write("c.yaml", "seed: 1");
        assert!(ExperimentConfig::load(&path).is_err());
    }

    #[test]
    fn validation_catches_inconsistent_sections() {
        let mut c = ExperimentConfig::default();
        c.validate().unwrap();
        c.channels.t_start = c.channels.steps + 1;
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::default();
        c.channels.kinds = vec![ChannelKind::Token, ChannelKind::Token];
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::default();
        c.corpus.train_fraction = 1.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn stamp_ignores_the_output_root_and_tracks_everything_else() {
        let a = ExperimentConfig::default();
        let b = ExperimentConfig { out: Some(PathBuf::from("/elsewhere")), ..a.clone() };
        assert_eq!(a.stamp(), b.stamp());
        assert_eq!(a.stamp().len(), 64);
        let c = ExperimentConfig { seed: a.seed + 1, ..a.clone() };
        assert_ne!(a.stamp(), c.stamp());
        assert_ne!(a.stage_seed(seeds::TRAIN), a.stage_seed(seeds::SELECT));
        let r = a.resolved();
        assert_eq!(r.stamp, a.stamp());
        assert_eq!(r.derived_seeds.train, a.train_config().seed);
    }
}
