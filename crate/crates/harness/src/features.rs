//! Feature CSV: provenance columns `file,label,source,split,channel`
//! followed by `f0..f127`.

use std::path::Path;

use tracelab_core::channels::ChannelKind;
use tracelab_core::detector::Label;
use tracelab_core::embedder::{FeatureVector, FEATURE_DIM};

use crate::error::{LabError, Result};
use crate::io;
use crate::manifest::{Entry, Split};

const PROVENANCE: [&str; 5] = ["file", "label", "source", "split", "channel"];

pub fn header() -> Vec<String> {
    PROVENANCE.iter().map(|s| s.to_string()).chain((0..FEATURE_DIM).map(|i| format!("f{i}"))).collect()
}

pub fn to_csv(rows: &[(Entry, FeatureVector)]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let fail = |e: csv::Error| LabError::format("<features>", e);
    w.write_record(header()).map_err(fail)?;
    for (e, f) in rows {
        let label = match e.label {
            Label::Real => "real",
            Label::Fake => "fake",
        };
        let mut rec = vec![
            e.file.clone(),
            label.to_string(),
            e.source.to_string(),
            e.split.name().to_string(),
            e.channel.map_or(String::new(), |c| c.name().to_string()),
        ];
        rec.extend(f.iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(fail)?;
    }
    w.into_inner().map_err(|e| LabError::format("<features>", e.error()))
}

pub fn write(path: &Path, rows: &[(Entry, FeatureVector)]) -> Result<()> {
    io::write_file(path, &to_csv(rows)?)
}

pub fn read(path: &Path) -> Result<Vec<(Entry, FeatureVector)>> {
    let bytes = io::read_file(path)?;
    parse(path, &bytes)
}

/// Parses feature CSV bytes; errors name the offending line of `path`.
pub fn parse(path: &Path, bytes: &[u8]) -> Result<Vec<(Entry, FeatureVector)>> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(bytes);
    let err = |line: u64, message: String| LabError::Parse { path: path.to_path_buf(), line, message };
    let headers = r.headers().map_err(|e| err(1, e.to_string()))?.clone();
    let want = header();
    if headers.len() != want.len() || headers.iter().zip(&want).any(|(a, b)| a != b) {
        return Err(err(1, format!("expected header {}", want.join(","))));
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| err(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let label = match &rec[1] {
            "real" => Label::Real,
            "fake" => Label::Fake,
            other => return Err(err(line, format!("unknown label {other:?}"))),
        };
        let source = rec[2].parse().map_err(|_| err(line, format!("bad source index {:?}", &rec[2])))?;
        let split = match &rec[3] {
            "train" => Split::Train,
            "test" => Split::Test,
            other => return Err(err(line, format!("unknown split {other:?}"))),
        };
        let channel = match &rec[4] {
            "" => None,
            name => Some(ChannelKind::parse(name).ok_or_else(|| err(line, format!("unknown channel {name:?}")))?),
        };
        let values = rec
            .iter()
            .skip(PROVENANCE.len())
            .enumerate()
            .map(|(i, v)| v.parse::<f64>().map_err(|_| err(line, format!("column f{i}: {v:?} is not a number"))))
            .collect::<Result<Vec<f64>>>()?;
        let f = FeatureVector::from_slice(&values).map_err(|e| err(line, e.to_string()))?;
        out.push((Entry { file: rec[0].to_string(), label, source, split, channel }, f));
    }
    Ok(out)
}
