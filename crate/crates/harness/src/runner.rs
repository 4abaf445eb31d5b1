//! Config-driven composite runs. Every artifact lands under
//! `<out>/run-<stamp>/`, where the stamp is a prefix of the config hash.
//! A failing stage leaves the partial outputs plus `error.json`.

use std::path::{Path, PathBuf};

use tracelab_core::channels::ChannelKind;
use tracelab_core::property1::Property1Config;

use crate::config::{seeds, ExperimentConfig, ExperimentKind};
use crate::error::{config_err, LabError, Result};
use crate::io;
use crate::manifest::Split;
use crate::stages::{self, MetricsRow, ModelFile, VarianceOutput};
use crate::viz;

pub const CONFIG_ECHO: &str = "config.json";
pub const ERROR_FILE: &str = "error.json";
pub const ACCURACY_MATRIX: &str = "accuracy_matrix.csv";

pub fn run_dir(config: &ExperimentConfig, out_root: &Path) -> PathBuf {
    out_root.join(format!("run-{}", &config.stamp()[..12]))
}

/// Writes the error record for `err` into `dir`, if the directory can be
/// created.
pub fn write_error(dir: &Path, err: &LabError) {
    let _ = io::write_json(&dir.join(ERROR_FILE), &err.record());
}

fn stage<T>(name: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    f().map_err(|e| e.in_stage(name))
}

/// Runs the experiment and returns its run directory.
pub fn run_experiment(config: &ExperimentConfig, out_root: &Path) -> Result<PathBuf> {
    config.validate()?;
    let dir = run_dir(config, out_root);
    io::create_dir(&dir)?;
    let stale = dir.join(ERROR_FILE);
    if stale.exists() {
        std::fs::remove_file(&stale).map_err(LabError::io(&stale))?;
    }
    let result = io::write_json(&dir.join(CONFIG_ECHO), &config.resolved()).and_then(|()| execute(config, &dir));
    if let Err(e) = &result {
        write_error(&dir, e);
    }
    result.map(|()| dir)
}

struct Prepared {
    corpus: PathBuf,
    /// Constructed manifest per configured channel.
    sets: Vec<(ChannelKind, PathBuf)>,
}

fn prepare(config: &ExperimentConfig, dir: &Path, with_channels: bool) -> Result<Prepared> {
    let corpus = stage("corpus", || {
        stages::corpus_gen(
            &config.corpus_config(),
            config.corpus.train_fraction,
            config.stage_seed(seeds::SPLIT),
            &dir.join("corpus"),
        )
    })?;
    let mut sets = Vec::new();
    if with_channels {
        for &kind in &config.channels.kinds {
            let file = stage(&format!("channel-fit:{}", kind.name()), || {
                stages::channel_fit(
                    &corpus,
                    kind,
                    &config.channels,
                    config.stage_seed(seeds::TOKEN),
                    config.stage_seed(seeds::NOISE),
                    &dir.join("channels"),
                )
            })?;
            let manifest = stage(&format!("construct:{}", kind.name()), || {
                stages::construct(&file, &corpus, &dir.join("construct").join(kind.name()))
            })?;
            sets.push((kind, manifest));
        }
    }
    Ok(Prepared { corpus, sets })
}

fn train_model(config: &ExperimentConfig, name: &str, manifests: &[PathBuf], dir: &Path) -> Result<PathBuf> {
    stage(&format!("train:{name}"), || {
        stages::train_stage(manifests, &config.train_config(), &dir.join("models").join(name)).map(|(p, _)| p)
    })
}

fn eval_rows(model: &Path, name: &str, sets: &[(String, Vec<PathBuf>)]) -> Result<Vec<MetricsRow>> {
    stage(&format!("eval:{name}"), || {
        let file = ModelFile::read(model)?;
        sets.iter()
            .map(|(set, paths)| {
                Ok(MetricsRow {
                    model: name.to_string(),
                    test_set: set.clone(),
                    report: stages::evaluate_manifests(&file.model, paths, Split::Test)?,
                })
            })
            .collect()
    })
}

fn per_channel(p: &Prepared) -> Vec<(String, Vec<PathBuf>)> {
    p.sets.iter().map(|(k, m)| (k.name().to_string(), vec![m.clone()])).collect()
}

fn execute(config: &ExperimentConfig, dir: &Path) -> Result<()> {
    match config.kind {
        ExperimentKind::WithinChannel => {
            let p = prepare(config, dir, true)?;
            let mut rows = Vec::new();
            for (kind, manifest) in &p.sets {
                let model = train_model(config, kind.name(), std::slice::from_ref(manifest), dir)?;
                rows.extend(eval_rows(&model, kind.name(), &[(kind.name().to_string(), vec![manifest.clone()])])?);
            }
            stages::write_metrics(dir, &rows)
        }
        ExperimentKind::CrossChannel => {
            let p = prepare(config, dir, true)?;
            let targets = per_channel(&p);
            let mut rows = Vec::new();
            for (kind, manifest) in &p.sets {
                let model = train_model(config, kind.name(), std::slice::from_ref(manifest), dir)?;
                rows.extend(eval_rows(&model, kind.name(), &targets)?);
            }
            stages::write_metrics(dir, &rows)?;
            io::write_file(&dir.join(ACCURACY_MATRIX), accuracy_matrix(&p, &rows).as_bytes())
        }
        ExperimentKind::SparseVsFull => {
            let p = prepare(config, dir, true)?;
            let all: Vec<PathBuf> = p.sets.iter().map(|(_, m)| m.clone()).collect();
            let (_, sparse) = stage("select", || {
                stages::select(&all, config.selection.k, config.stage_seed(seeds::SELECT), &dir.join("select"))
            })?;
            let sparse_model = train_model(config, "sparse", &[sparse], dir)?;
            let full_model = train_model(config, "full", &all, dir)?;
            let mut targets = per_channel(&p);
            targets.push(("all".to_string(), all));
            let mut rows = eval_rows(&sparse_model, "sparse", &targets)?;
            rows.extend(eval_rows(&full_model, "full", &targets)?);
            stages::write_metrics(dir, &rows)
        }
        ExperimentKind::VarianceProbe => {
            let p = prepare(config, dir, true)?;
            let manifest = p
                .sets
                .iter()
                .find(|(k, _)| *k == ChannelKind::Continuous)
                .map(|(_, m)| m.clone())
                .ok_or_else(|| config_err!("variance_probe needs the continuous channel in channels.kinds"))?;
            let model = train_model(config, "continuous", std::slice::from_ref(&manifest), dir)?;
            stage("probe", || {
                let file = ModelFile::read(&model)?;
                let seed = config.stage_seed(seeds::PROBE);
                let out = VarianceOutput {
                    version: stages::FILE_VERSION,
                    seed,
                    pipeline: Some(stages::pipeline_probe(&file.model, &manifest, &config.probe, seed)?),
                    synthetic: stages::synthetic_probes(&config.probe, seed)?,
                };
                stages::write_variance(dir, &out)
            })
        }
        ExperimentKind::Property1 => {
            let p = prepare(config, dir, false)?;
            stage("property1", || stages::property1_stage(&p.corpus, &property1_config(config), dir).map(drop))
        }
        ExperimentKind::Visualize => {
            let p = prepare(config, dir, true)?;
            let all: Vec<PathBuf> = p.sets.iter().map(|(_, m)| m.clone()).collect();
            stage("viz", || {
                let csv = stages::embed(&all, Some(Split::Test), dir)?;
                viz::emit_viz(&csv, dir).map(drop)
            })
        }
    }
}

pub fn property1_config(config: &ExperimentConfig) -> Property1Config {
    let s = &config.property1;
    Property1Config {
        d: s.d,
        fit_fraction: s.fit_fraction,
        train_fraction: s.train_fraction,
        seeds: s.seeds,
        seed: config.stage_seed(seeds::PROPERTY1),
        foreign_gamma: s.foreign_gamma,
        train: config.train_config(),
    }
}

/// Train-channel by test-channel accuracy table.
fn accuracy_matrix(p: &Prepared, rows: &[MetricsRow]) -> String {
    let names: Vec<&str> = p.sets.iter().map(|(k, _)| k.name()).collect();
    let mut s = format!("train_channel,{}\n", names.join(","));
    for train in &names {
        let cells: Vec<String> = names
            .iter()
            .map(|test| {
                rows.iter()
                    .find(|r| r.model == *train && r.test_set == *test)
                    .map_or(String::new(), |r| r.report.accuracy.to_string())
            })
            .collect();
        s.push_str(&format!("{train},{}\n", cells.join(",")));
    }
    s
}
