//! Dataset manifests: JSON lists of image files with label, provenance and
//! split. File paths are stored relative to the manifest's directory.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tracelab_core::channels::ChannelKind;
use tracelab_core::corpus::CorpusConfig;
use tracelab_core::detector::Label;
use tracelab_core::embedder::{Embedder, FeatureVector};
use tracelab_core::Image;

use crate::error::{LabError, Result};
use crate::io;

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub file: String,
    pub label: Label,
    /// Index of the real corpus image this entry is, or was built from.
    pub source: usize,
    pub split: Split,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel: Option<ChannelKind>,
}

impl Entry {
    /// `real` or the channel name.
    pub fn tag(&self) -> &'static str {
        match (self.label, self.channel) {
            (Label::Real, _) => "real",
            (Label::Fake, Some(c)) => c.name(),
            (Label::Fake, None) => "fake",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusInfo {
    pub config: CorpusConfig,
    pub train_fraction: f64,
    pub split_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelInfo {
    pub kind: ChannelKind,
    pub params_hash: String,
    pub taxonomy_category: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corpus: Option<CorpusInfo>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub channels: Vec<ChannelInfo>,
    pub entries: Vec<Entry>,
}

impl DatasetManifest {
    pub fn new(entries: Vec<Entry>) -> Self {
        Self { version: MANIFEST_VERSION, corpus: None, channels: Vec::new(), entries }
    }
}

/// A manifest together with where it was read from.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub path: PathBuf,
    pub manifest: DatasetManifest,
}

impl Loaded {
    pub fn read(path: &Path) -> Result<Self> {
        let manifest: DatasetManifest = io::read_json(path)?;
        if manifest.version != MANIFEST_VERSION {
            return Err(LabError::format(path, format!("unsupported manifest version {}", manifest.version)));
        }
        Ok(Self { path: path.to_path_buf(), manifest })
    }

    pub fn dir(&self) -> &Path {
        self.path.parent().unwrap_or(Path::new("."))
    }

    pub fn resolve(&self, entry: &Entry) -> PathBuf {
        self.dir().join(&entry.file)
    }

    fn entry_err(&self, index: usize, e: LabError) -> LabError {
        LabError::Entry {
            manifest: self.path.clone(),
            index,
            file: self.manifest.entries[index].file.clone(),
            source: Box::new(e),
        }
    }

    /// Entries passing `keep`, in manifest order, with their decoded images.
    pub fn load_images(&self, keep: impl Fn(&Entry) -> bool + Sync) -> Result<Vec<(Entry, Image)>> {
        self.manifest
            .entries
            .par_iter()
            .enumerate()
            .filter(|(_, e)| keep(e))
            .map(|(i, e)| Ok((e.clone(), io::load_png(&self.resolve(e)).map_err(|err| self.entry_err(i, err))?)))
            .collect()
    }

    /// Entries passing `keep`, in manifest order, embedded.
    pub fn load_features(&self, embedder: &Embedder, keep: impl Fn(&Entry) -> bool + Sync) -> Result<Vec<(Entry, FeatureVector)>> {
        self.manifest
            .entries
            .par_iter()
            .enumerate()
            .filter(|(_, e)| keep(e))
            .map(|(i, e)| {
                let img = io::load_png(&self.resolve(e)).map_err(|err| self.entry_err(i, err))?;
                let f = embedder.embed(&img).map_err(|err| self.entry_err(i, err.into()))?;
                Ok((e.clone(), f))
            })
            .collect()
    }
}

/// Entries from several manifests, with feature vectors, in input order.
pub fn load_features(paths: &[PathBuf], embedder: &Embedder, split: Option<Split>) -> Result<Vec<(Entry, FeatureVector)>> {
    let mut out = Vec::new();
    for p in paths {
        let m = Loaded::read(p)?;
        out.extend(m.load_features(embedder, |e| split.is_none_or(|s| e.split == s))?);
    }
    Ok(out)
}

/// An entry with its embedding.
pub type Row = (Entry, FeatureVector);

/// Splits labelled features into real and fake rows.
pub fn by_label(rows: &[Row]) -> (Vec<&Row>, Vec<&Row>) {
    rows.iter().partition(|(e, _)| e.label == Label::Real)
}
