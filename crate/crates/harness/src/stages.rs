//! One function per pipeline stage. Each reads its inputs from disk and
//! writes its outputs under a directory, so the CLI subcommands and the
//! composite runner share one code path.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tracelab_core::channels::{
    fit_continuous, fit_denoise, fit_token, Channel, ChannelKind, ConstructOptions,
};
use tracelab_core::corpus::{generate_corpus, split_indices, CorpusConfig};
use tracelab_core::detector::{
    evaluate, synthetic_pairs, train, variance_probe, variance_probe_gradients, DetectorModel, Label,
    Mode, MetricsReport, TrainConfig, TrainOutcome, VarianceReport,
};
use tracelab_core::embedder::{Embedder, FeatureVector};
use tracelab_core::property1::{property1_experiment, Property1Config, Property1Report};
use tracelab_core::selection::select_sparse;
use tracelab_core::Image;

use crate::config::{ChannelsSection, ProbeSection};
use crate::error::{config_err, LabError, Result};
use crate::features;
use crate::io;
use crate::manifest::{by_label, ChannelInfo, CorpusInfo, DatasetManifest, Entry, Loaded, Split};

pub const CORPUS_MANIFEST: &str = "corpus.json";
pub const CONSTRUCT_MANIFEST: &str = "manifest.json";
pub const SPARSE_MANIFEST: &str = "sparse.json";
pub const SELECTION_FILE: &str = "selection.json";
pub const MODEL_FILE: &str = "model.json";
pub const LOSS_TRACE: &str = "loss_trace.csv";
pub const METRICS_CSV: &str = "metrics.csv";
pub const METRICS_JSON: &str = "metrics.json";
pub const FEATURES_CSV: &str = "features.csv";
pub const FILE_VERSION: u32 = 1;

fn png_name(index: usize) -> String {
    format!("{index:05}.png")
}

fn save_all(dir: &Path, images: &[(usize, Image)]) -> Result<()> {
    io::create_dir(dir)?;
    images.par_iter().try_for_each(|(i, img)| io::save_png(&dir.join(png_name(*i)), img))
}

// ---------------------------------------------------------------- corpus

/// Generates the corpus, stores it as 8-bit PNGs under `dir/real/` and
/// writes `dir/corpus.json` with every image assigned to a split.
pub fn corpus_gen(config: &CorpusConfig, train_fraction: f64, split_seed: u64, dir: &Path) -> Result<PathBuf> {
    let images = generate_corpus(config)?;
    let (train_idx, _) = split_indices(images.len(), train_fraction, split_seed)?;
    save_corpus(&images, dir)?;
    let mut split = vec![Split::Test; images.len()];
    for i in train_idx {
        split[i] = Split::Train;
    }
    let entries = (0..images.len())
        .map(|i| Entry { file: format!("real/{}", png_name(i)), label: Label::Real, source: i, split: split[i], channel: None })
        .collect();
    let mut manifest = DatasetManifest::new(entries);
    manifest.corpus = Some(CorpusInfo { config: config.clone(), train_fraction, split_seed });
    let path = dir.join(CORPUS_MANIFEST);
    io::write_json(&path, &manifest)?;
    Ok(path)
}

/// Writes `images` as `dir/real/<index>.png`.
pub fn save_corpus(images: &[Image], dir: &Path) -> Result<()> {
    let indexed: Vec<(usize, Image)> = images.iter().cloned().enumerate().collect();
    save_all(&dir.join("real"), &indexed)
}

/// Real images of a manifest in manifest order, optionally restricted to a
/// split.
pub fn load_corpus(path: &Path, split: Option<Split>) -> Result<(Loaded, Vec<(Entry, Image)>)> {
    let loaded = Loaded::read(path)?;
    let images = loaded.load_images(|e| e.label == Label::Real && split.is_none_or(|s| e.split == s))?;
    Ok((loaded, images))
}

// -------------------------------------------------------------- channels

/// Fitted channel with the options its constructions use.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelFile {
    pub version: u32,
    pub kind: ChannelKind,
    pub params_hash: String,
    pub taxonomy_category: String,
    pub options: ConstructOptions,
    pub channel: Channel,
}

impl ChannelFile {
    pub fn new(channel: Channel, options: ConstructOptions) -> Self {
        let kind = channel.kind();
        Self {
            version: FILE_VERSION,
            kind,
            params_hash: channel.params_hash(&options),
            taxonomy_category: kind.taxonomy_category().to_string(),
            options,
            channel,
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let file: ChannelFile = io::read_json(path)?;
        if file.version != FILE_VERSION {
            return Err(LabError::format(path, format!("unsupported channel file version {}", file.version)));
        }
        file.channel.validate()?;
        if file.channel.kind() != file.kind || file.channel.params_hash(&file.options) != file.params_hash {
            return Err(LabError::format(path, "channel parameters do not match the recorded hash"));
        }
        Ok(file)
    }

    pub fn info(&self) -> ChannelInfo {
        ChannelInfo { kind: self.kind, params_hash: self.params_hash.clone(), taxonomy_category: self.taxonomy_category.clone() }
    }
}

pub fn fit_channel(kind: ChannelKind, corpus: &[Image], params: &ChannelsSection, token_seed: u64) -> Result<Channel> {
    Ok(match kind {
        ChannelKind::Continuous => Channel::Continuous(fit_continuous(corpus, params.d)?),
        ChannelKind::Token => Channel::Token(fit_token(corpus, params.patch_size, params.codebook_size, token_seed)?),
        ChannelKind::Denoise => Channel::Denoise(fit_denoise(corpus, params.steps)?),
    })
}

/// Fits `kind` on the train-split reals of the corpus manifest and writes
/// `<dir>/<kind>.channel.json`.
pub fn channel_fit(
    corpus_manifest: &Path,
    kind: ChannelKind,
    params: &ChannelsSection,
    token_seed: u64,
    noise_seed: u64,
    dir: &Path,
) -> Result<PathBuf> {
    let (_, rows) = load_corpus(corpus_manifest, Some(Split::Train))?;
    let images: Vec<Image> = rows.into_iter().map(|(_, img)| img).collect();
    let channel = fit_channel(kind, &images, params, token_seed)?;
    let file = ChannelFile::new(channel, ConstructOptions { t_start: params.t_start, noise_seed });
    let path = dir.join(format!("{}.channel.json", kind.name()));
    io::write_json(&path, &file)?;
    Ok(path)
}

// ------------------------------------------------------------- construct

/// Re-expresses an entry of `from` relative to the directory `to`.
fn rebase(from: &Loaded, entry: &Entry, to: &Path) -> Result<Entry> {
    Ok(Entry { file: io::relative(&from.resolve(entry), to)?, ..entry.clone() })
}

/// Contaminates every real image of the corpus, writing `<dir>/images/*.png`
/// and `<dir>/manifest.json`. The manifest lists the real counterparts
/// first, then the constructions; each construction inherits the split of
/// its source.
pub fn construct(channel_file: &Path, corpus_manifest: &Path, dir: &Path) -> Result<PathBuf> {
    let file = ChannelFile::read(channel_file)?;
    let (corpus, rows) = load_corpus(corpus_manifest, None)?;
    let images: Vec<Image> = rows.iter().map(|(_, img)| img.clone()).collect();
    let sources: Vec<usize> = rows.iter().map(|(e, _)| e.source).collect();
    // same contract as `construct_negatives`, mapped in parallel
    let fakes = images
        .par_iter()
        .zip(&sources)
        .map(|(x, &s)| file.channel.contaminate(x, s, &file.options).map_err(|e| e.at(s)))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let indexed: Vec<(usize, Image)> = sources.iter().copied().zip(fakes).collect();
    save_all(&dir.join("images"), &indexed)?;

    let mut entries = rows.iter().map(|(e, _)| rebase(&corpus, e, dir)).collect::<Result<Vec<_>>>()?;
    entries.extend(rows.iter().map(|(e, _)| Entry {
        file: format!("images/{}", png_name(e.source)),
        label: Label::Fake,
        source: e.source,
        split: e.split,
        channel: Some(file.kind),
    }));
    let mut manifest = DatasetManifest::new(entries);
    manifest.corpus = corpus.manifest.corpus.clone();
    manifest.channels = vec![file.info()];
    let path = dir.join(CONSTRUCT_MANIFEST);
    io::write_json(&path, &manifest)?;
    Ok(path)
}

// ----------------------------------------------------------------- embed

/// Embeds the entries of several manifests; `file` becomes the resolved
/// path. Real entries shared between manifests (same source index) are kept
/// once.
pub fn embed_manifests(paths: &[PathBuf], split: Option<Split>) -> Result<Vec<(Entry, FeatureVector)>> {
    let embedder = Embedder::new();
    let mut seen = std::collections::BTreeSet::new();
    let mut out = Vec::new();
    for p in paths {
        let m = Loaded::read(p)?;
        let rows = m.load_features(&embedder, |e| {
            split.is_none_or(|s| e.split == s) && (e.label == Label::Fake || !seen.contains(&e.source))
        })?;
        for (e, f) in rows {
            if e.label == Label::Real && !seen.insert(e.source) {
                continue;
            }
            let file = m.resolve(&e).to_string_lossy().into_owned();
            out.push((Entry { file, ..e }, f));
        }
    }
    Ok(out)
}

/// Writes `<dir>/features.csv` with file paths relative to `dir`.
pub fn embed(paths: &[PathBuf], split: Option<Split>, dir: &Path) -> Result<PathBuf> {
    io::create_dir(dir)?;
    let rows = embed_manifests(paths, split)?
        .into_iter()
        .map(|(e, f)| Ok((Entry { file: io::relative(Path::new(&e.file), dir)?, ..e }, f)))
        .collect::<Result<Vec<_>>>()?;
    let path = dir.join(FEATURES_CSV);
    features::write(&path, &rows)?;
    Ok(path)
}

// ---------------------------------------------------------------- select

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetReport {
    pub manifest: String,
    pub channel: Option<ChannelKind>,
    pub candidates: usize,
    /// Indices into the manifest's entry list.
    pub entries: Vec<usize>,
    pub sources: Vec<usize>,
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub version: u32,
    pub k: usize,
    pub seed: u64,
    pub split: Split,
    pub sets: Vec<SetReport>,
}

/// Runs k-medoids over the train-split constructions of each manifest and
/// writes `selection.json` plus the sparse training manifest: the selected
/// constructions and, once per source, their real counterparts.
pub fn select(paths: &[PathBuf], k: usize, seed: u64, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    if paths.is_empty() {
        return Err(config_err!("select needs at least one constructed manifest"));
    }
    io::create_dir(dir)?;
    let embedder = Embedder::new();
    let loaded = paths.iter().map(|p| Loaded::read(p)).collect::<Result<Vec<_>>>()?;
    let is_candidate = |e: &Entry| e.label == Label::Fake && e.split == Split::Train;
    let sets = loaded.iter().map(|m| m.load_features(&embedder, is_candidate)).collect::<Result<Vec<_>>>()?;
    let feats: Vec<Vec<FeatureVector>> = sets.iter().map(|s| s.iter().map(|(_, f)| *f).collect()).collect();
    let refs: Vec<&[FeatureVector]> = feats.iter().map(Vec::as_slice).collect();
    let selections = select_sparse(&refs, k, seed)?;

    let mut reports = Vec::new();
    let mut fakes = Vec::new();
    let mut reals: BTreeMap<usize, Entry> = BTreeMap::new();
    for ((m, sel), path) in loaded.iter().zip(&selections).zip(paths) {
        let candidates: Vec<usize> =
            m.manifest.entries.iter().enumerate().filter(|(_, e)| is_candidate(e)).map(|(i, _)| i).collect();
        let chosen: Vec<usize> = sel.selected.iter().map(|&s| candidates[s]).collect();
        for &i in &chosen {
            let e = &m.manifest.entries[i];
            fakes.push(rebase(m, e, dir)?);
            if let std::collections::btree_map::Entry::Vacant(slot) = reals.entry(e.source) {
                let real = m
                    .manifest
                    .entries
                    .iter()
                    .find(|r| r.label == Label::Real && r.source == e.source)
                    .ok_or_else(|| LabError::format(&m.path, format!("no real counterpart for source {}", e.source)))?;
                slot.insert(rebase(m, real, dir)?);
            }
        }
        reports.push(SetReport {
            manifest: io::relative(path, dir)?,
            channel: m.manifest.channels.first().map(|c| c.kind),
            candidates: candidates.len(),
            sources: chosen.iter().map(|&i| m.manifest.entries[i].source).collect(),
            entries: chosen,
            deviation: sel.deviation,
        });
    }
    let report = SelectionReport { version: FILE_VERSION, k, seed, split: Split::Train, sets: reports };
    let selection_path = dir.join(SELECTION_FILE);
    io::write_json(&selection_path, &report)?;

    let mut entries: Vec<Entry> = reals.into_values().collect();
    entries.extend(fakes);
    let mut manifest = DatasetManifest::new(entries);
    manifest.channels = loaded.iter().flat_map(|m| m.manifest.channels.clone()).collect();
    let sparse_path = dir.join(SPARSE_MANIFEST);
    io::write_json(&sparse_path, &manifest)?;
    Ok((selection_path, sparse_path))
}

// ----------------------------------------------------------------- train

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub version: u32,
    pub train: TrainConfig,
    pub n_real: usize,
    pub n_fake: usize,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub steps: usize,
    pub model: DetectorModel,
}

impl ModelFile {
    pub fn read(path: &Path) -> Result<Self> {
        let file: ModelFile = io::read_json(path)?;
        if file.version != FILE_VERSION {
            return Err(LabError::format(path, format!("unsupported model file version {}", file.version)));
        }
        file.model.validate()?;
        Ok(file)
    }
}

/// Real and fake feature rows of a split. In paired mode the real list is
/// aligned with the fakes through the source index.
pub fn training_sets(rows: &[(Entry, FeatureVector)], mode: Mode) -> Result<(Vec<FeatureVector>, Vec<FeatureVector>)> {
    let (reals, fakes) = by_label(rows);
    let fake: Vec<FeatureVector> = fakes.iter().map(|(_, f)| *f).collect();
    let real = match mode {
        Mode::Independent => reals.iter().map(|(_, f)| *f).collect(),
        Mode::Paired => {
            let by_source: BTreeMap<usize, FeatureVector> = reals.iter().map(|(e, f)| (e.source, *f)).collect();
            fakes
                .iter()
                .map(|(e, _)| {
                    by_source.get(&e.source).copied().ok_or_else(|| {
                        config_err!("paired mode: construction {} has no real counterpart in the set", e.file)
                    })
                })
                .collect::<Result<Vec<_>>>()?
        }
    };
    Ok((real, fake))
}

/// Trains on the train split of the manifests and writes `model.json` and
/// `loss_trace.csv` (epoch 0 is the loss before the first update).
pub fn train_stage(paths: &[PathBuf], config: &TrainConfig, dir: &Path) -> Result<(PathBuf, TrainOutcome)> {
    let rows = embed_manifests(paths, Some(Split::Train))?;
    let (real, fake) = training_sets(&rows, config.mode)?;
    let outcome = train(&real, &fake, config)?;
    let file = ModelFile {
        version: FILE_VERSION,
        train: config.clone(),
        n_real: real.len(),
        n_fake: fake.len(),
        initial_loss: outcome.initial_loss,
        final_loss: outcome.loss_trace.last().copied().unwrap_or(outcome.initial_loss),
        steps: outcome.steps,
        model: outcome.model.clone(),
    };
    let path = dir.join(MODEL_FILE);
    io::write_json(&path, &file)?;
    let mut trace = String::from("epoch,loss\n");
    for (epoch, loss) in std::iter::once(outcome.initial_loss).chain(outcome.loss_trace.iter().copied()).enumerate() {
        trace.push_str(&format!("{epoch},{loss}\n"));
    }
    io::write_file(&dir.join(LOSS_TRACE), trace.as_bytes())?;
    Ok((path, outcome))
}

// ------------------------------------------------------------------ eval

/// One metrics row: which model, which evaluation set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub model: String,
    pub test_set: String,
    pub report: MetricsReport,
}

pub fn metrics_csv(rows: &[MetricsRow]) -> String {
    let mut s = String::from(
        "model,test_set,n_real,n_fake,accuracy,balanced_accuracy,average_precision,single_class,\
         true_positive,false_negative,true_negative,false_positive\n",
    );
    for r in rows {
        let m = &r.report;
        let ap = m.average_precision.map_or(String::new(), |v| v.to_string());
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.model,
            r.test_set,
            m.n_real,
            m.n_fake,
            m.accuracy,
            m.balanced_accuracy,
            ap,
            m.single_class,
            m.true_positive,
            m.false_negative,
            m.true_negative,
            m.false_positive
        ));
    }
    s
}

pub fn write_metrics(dir: &Path, rows: &[MetricsRow]) -> Result<()> {
    io::write_file(&dir.join(METRICS_CSV), metrics_csv(rows).as_bytes())?;
    io::write_json(&dir.join(METRICS_JSON), rows)
}

/// Evaluates on one split of the manifests' union.
pub fn evaluate_manifests(model: &DetectorModel, paths: &[PathBuf], split: Split) -> Result<MetricsReport> {
    let rows = embed_manifests(paths, Some(split))?;
    let (real, fake) = training_sets(&rows, Mode::Independent)?;
    Ok(evaluate(model, &real, &fake)?)
}

/// Evaluates the model on the test split of each manifest separately and
/// writes `metrics.csv` / `metrics.json`.
pub fn eval_stage(model_path: &Path, paths: &[PathBuf], names: &[String], dir: &Path) -> Result<Vec<MetricsRow>> {
    let file = ModelFile::read(model_path)?;
    let model_name = model_path.parent().and_then(|p| p.file_name()).map_or("model".into(), |n| n.to_string_lossy().into_owned());
    let rows = paths
        .iter()
        .zip(names)
        .map(|(p, name)| {
            Ok(MetricsRow {
                model: model_name.clone(),
                test_set: name.clone(),
                report: evaluate_manifests(&file.model, std::slice::from_ref(p), Split::Test)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    write_metrics(dir, &rows)?;
    Ok(rows)
}

/// Display name of a manifest: its channel, or its file stem.
pub fn manifest_name(path: &Path) -> Result<String> {
    let m = Loaded::read(path)?;
    Ok(match m.manifest.channels.as_slice() {
        [one] => one.kind.name().to_string(),
        _ => path.file_stem().map_or("set".into(), |s| s.to_string_lossy().into_owned()),
    })
}

// ---------------------------------------------------------------- probes

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticProbe {
    pub rho: f64,
    pub expected_ratio: f64,
    pub report: VarianceReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceOutput {
    pub version: u32,
    pub seed: u64,
    pub pipeline: Option<VarianceReport>,
    pub synthetic: Vec<SyntheticProbe>,
}

pub fn synthetic_probes(probe: &ProbeSection, seed: u64) -> Result<Vec<SyntheticProbe>> {
    probe
        .synthetic_rho
        .iter()
        .enumerate()
        .map(|(i, &rho)| {
            let s = tracelab_core::rng::sub_seed(seed, i as u64);
            let (g, gp) = synthetic_pairs(probe.synthetic_pairs, probe.synthetic_dim, rho, s)?;
            let report = variance_probe_gradients(&g, &gp, probe.batch_size, probe.synthetic_trials, s)?;
            Ok(SyntheticProbe { rho, expected_ratio: 1.0 + rho, report })
        })
        .collect()
}

/// Gradient-variance probe at the fixed model over the train split of a
/// constructed manifest, pairing each construction with its source.
pub fn pipeline_probe(model: &DetectorModel, manifest: &Path, probe: &ProbeSection, seed: u64) -> Result<VarianceReport> {
    let rows = embed_manifests(&[manifest.to_path_buf()], Some(Split::Train))?;
    let (real, fake) = training_sets(&rows, Mode::Paired)?;
    Ok(variance_probe(model, &real, &fake, probe.batch_size, probe.trials, seed)?)
}

pub fn variance_csv(out: &VarianceOutput) -> String {
    let mut s = String::from(
        "probe,rho,expected_ratio,pairs,batch_size,trials,var_paired,var_indep,cov_term,cov_direct,ratio,relative_gap,low_trials\n",
    );
    let mut row = |name: &str, rho: String, expected: String, r: &VarianceReport| {
        s.push_str(&format!(
            "{name},{rho},{expected},{},{},{},{},{},{},{},{},{},{}\n",
            r.pairs, r.batch_size, r.trials, r.var_paired, r.var_indep, r.cov_term, r.cov_direct, r.ratio, r.relative_gap, r.low_trials
        ));
    };
    if let Some(r) = &out.pipeline {
        row("pipeline", String::new(), String::new(), r);
    }
    for p in &out.synthetic {
        row("synthetic", p.rho.to_string(), p.expected_ratio.to_string(), &p.report);
    }
    s
}

pub fn write_variance(dir: &Path, out: &VarianceOutput) -> Result<()> {
    io::write_json(&dir.join("variance.json"), out)?;
    io::write_file(&dir.join("variance.csv"), variance_csv(out).as_bytes())
}

pub fn property1_stage(corpus_manifest: &Path, config: &Property1Config, dir: &Path) -> Result<Property1Report> {
    let (_, rows) = load_corpus(corpus_manifest, None)?;
    let images: Vec<Image> = rows.into_iter().map(|(_, img)| img).collect();
    let report = property1_experiment(&images, config)?;
    io::write_json(&dir.join("property1.json"), &report)?;
    let mut s = String::from("encoder,seed,loss\n");
    for enc in std::iter::once(&report.matched).chain(&report.mismatched) {
        for (seed, loss) in report.seeds.iter().zip(&enc.losses) {
            s.push_str(&format!("{},{seed},{loss}\n", enc.encoder));
        }
    }
    io::write_file(&dir.join("property1.csv"), s.as_bytes())?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_corpus(dir: &Path) -> PathBuf {
        let config = CorpusConfig { count: 8, size: 16, seed: 5, ..Default::default() };
        corpus_gen(&config, 0.5, 11, dir).unwrap()
    }

    #[test]
    fn corpus_store_is_byte_idempotent() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = small_corpus(&dir.path().join("a"));
        let (_, rows) = load_corpus(&manifest, None).unwrap();
        let images: Vec<Image> = rows.into_iter().map(|(_, img)| img).collect();
        save_corpus(&images, &dir.path().join("b")).unwrap();
        for i in 0..8 {
            let name = format!("real/{}", png_name(i));
            assert_eq!(
                std::fs::read(dir.path().join("a").join(&name)).unwrap(),
                std::fs::read(dir.path().join("b").join(&name)).unwrap()
            );
        }
        let (_, train) = load_corpus(&manifest, Some(Split::Train)).unwrap();
        assert_eq!(train.len(), 4);
    }

    #[test]
    fn constructed_manifest_pairs_every_real_with_its_fake() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = small_corpus(&dir.path().join("corpus"));
        let params = ChannelsSection { d: 3, codebook_size: 8, ..Default::default() };
        let file = channel_fit(&corpus, ChannelKind::Continuous, &params, 1, 2, &dir.path().join("channels")).unwrap();
        assert!(ChannelFile::read(&file).is_ok());
        let manifest = construct(&file, &corpus, &dir.path().join("construct")).unwrap();
        let m = Loaded::read(&manifest).unwrap();
        let e = &m.manifest.entries;
        assert_eq!(e.len(), 16);
        for i in 0..8 {
            assert_eq!(e[i].label, Label::Real);
            assert_eq!(e[i + 8].label, Label::Fake);
            assert_eq!(e[i].source, e[i + 8].source);
            assert_eq!(e[i].split, e[i + 8].split);
            assert!(m.resolve(&e[i]).exists() && m.resolve(&e[i + 8]).exists());
        }
        assert_eq!(m.manifest.channels.len(), 1);

        let rows = embed_manifests(&[manifest.clone(), manifest], Some(Split::Train)).unwrap();
        assert_eq!(rows.iter().filter(|(e, _)| e.label == Label::Real).count(), 4, "shared reals kept once");
        assert_eq!(rows.iter().filter(|(e, _)| e.label == Label::Fake).count(), 8);
        let (real, fake) = training_sets(&rows[..8], Mode::Paired).unwrap();
        assert_eq!(real.len(), fake.len());
    }

    #[test]
    fn tampered_channel_files_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = small_corpus(&dir.path().join("corpus"));
        let params = ChannelsSection { d: 3, ..Default::default() };
        let file = channel_fit(&corpus, ChannelKind::Continuous, &params, 1, 2, &dir.path().join("channels")).unwrap();
        let mut value: serde_json::Value = io::read_json(&file).unwrap();
        value["params_hash"] = serde_json::Value::String("0".repeat(64));
        io::write_json(&file, &value).unwrap();
        assert!(ChannelFile::read(&file).is_err());
    }
}
