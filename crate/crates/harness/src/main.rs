use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tracelab_harness::config::{seeds, ExperimentConfig, ExperimentKind};
use tracelab_harness::manifest::Split;
use tracelab_harness::stages::{self, ModelFile, VarianceOutput};
use tracelab_harness::{io, runner, taxonomy, viz, LabError, Result};
use tracelab_core::channels::ChannelKind;

#[derive(Parser)]
#[command(name = "tracelab", version, about = "Generation-trace detector experiments on synthetic corpora")]
struct Cli {
    /// Experiment configuration (.json or .toml).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configuration's top-level seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (default: the configuration's `out`, else `out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic real corpus and its train/test split.
    CorpusGen,
    /// Fit channels on the train split of a corpus.
    ChannelFit {
        #[arg(long)]
        corpus: PathBuf,
        /// Channel to fit; defaults to every channel in the configuration.
        #[arg(long, value_parser = parse_channel)]
        kind: Option<ChannelKind>,
    },
    /// Contaminate every corpus image with a fitted channel.
    Construct {
        #[arg(long)]
        channel: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
    },
    /// Write the feature CSV of one or more manifests.
    Embed {
        #[arg(long = "manifest", required = true)]
        manifests: Vec<PathBuf>,
        #[arg(long, value_parser = parse_split)]
        split: Option<Split>,
    },
    /// Select k medoids per constructed set and write the sparse manifest.
    Select {
        #[arg(long = "manifest", required = true)]
        manifests: Vec<PathBuf>,
        #[arg(long)]
        k: Option<usize>,
    },
    /// Train a detector on the train split of the manifests.
    Train {
        #[arg(long = "manifest", required = true)]
        manifests: Vec<PathBuf>,
    },
    /// Evaluate a model on the test split of each manifest.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long = "manifest", required = true)]
        manifests: Vec<PathBuf>,
    },
    /// Gradient-variance probe of paired against independent batches.
    ProbeVariance {
        /// Fixed detector; omit to run the synthetic probes only.
        #[arg(long, requires = "manifest")]
        model: Option<PathBuf>,
        /// Constructed manifest whose train split supplies the pairs.
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Matched against mismatched encoders on the continuous channel.
    ProbeProperty1 {
        #[arg(long)]
        corpus: PathBuf,
    },
    /// Project a feature CSV to 3-D.
    Viz {
        #[arg(long)]
        features: PathBuf,
    },
    /// Run a complete experiment from the configuration.
    Run {
        #[arg(long, value_parser = parse_kind)]
        kind: Option<ExperimentKind>,
    },
    /// List the generator taxonomy registry.
    Taxonomy {
        #[arg(long)]
        category: Option<String>,
    },
}

fn parse_enum<T: serde::de::DeserializeOwned>(s: &str) -> std::result::Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.replace('-', "_"))).map_err(|e| e.to_string())
}

fn parse_channel(s: &str) -> std::result::Result<ChannelKind, String> {
    ChannelKind::parse(s).ok_or_else(|| format!("unknown channel {s:?}"))
}

fn parse_split(s: &str) -> std::result::Result<Split, String> {
    parse_enum(s)
}

fn parse_kind(s: &str) -> std::result::Result<ExperimentKind, String> {
    parse_enum(s)
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn out_dir(cli: &Cli, config: &ExperimentConfig) -> PathBuf {
    cli.out.clone().or_else(|| config.out.clone()).unwrap_or_else(|| PathBuf::from("out"))
}

fn names(paths: &[PathBuf]) -> Result<Vec<String>> {
    paths.iter().map(|p| stages::manifest_name(p)).collect()
}

fn execute(cli: &Cli) -> Result<Vec<PathBuf>> {
    let mut config = load_config(cli)?;
    let out = &out_dir(cli, &config);
    match &cli.command {
        Command::CorpusGen => {
            config.validate()?;
            let path = stages::corpus_gen(&config.corpus_config(), config.corpus.train_fraction, config.stage_seed(seeds::SPLIT), out)?;
            Ok(vec![path])
        }
        Command::ChannelFit { corpus, kind } => {
            config.validate()?;
            let kinds = kind.map_or_else(|| config.channels.kinds.clone(), |k| vec![k]);
            kinds
                .into_iter()
                .map(|k| {
                    stages::channel_fit(corpus, k, &config.channels, config.stage_seed(seeds::TOKEN), config.stage_seed(seeds::NOISE), out)
                })
                .collect()
        }
        Command::Construct { channel, corpus } => Ok(vec![stages::construct(channel, corpus, out)?]),
        Command::Embed { manifests, split } => Ok(vec![stages::embed(manifests, *split, out)?]),
        Command::Select { manifests, k } => {
            let k = k.unwrap_or(config.selection.k);
            let (a, b) = stages::select(manifests, k, config.stage_seed(seeds::SELECT), out)?;
            Ok(vec![a, b])
        }
        Command::Train { manifests } => {
            config.validate()?;
            Ok(vec![stages::train_stage(manifests, &config.train_config(), out)?.0])
        }
        Command::Eval { model, manifests } => {
            stages::eval_stage(model, manifests, &names(manifests)?, out)?;
            Ok(vec![out.join(stages::METRICS_CSV), out.join(stages::METRICS_JSON)])
        }
        Command::ProbeVariance { model, manifest, trials } => {
            if let Some(t) = trials {
                config.probe.trials = *t;
            }
            config.validate()?;
            let seed = config.stage_seed(seeds::PROBE);
            let pipeline = match (model, manifest) {
                (Some(m), Some(d)) => Some(stages::pipeline_probe(&ModelFile::read(m)?.model, d, &config.probe, seed)?),
                (None, None) => None,
                _ => return Err(LabError::Config("--model and --manifest go together".into())),
            };
            let report = VarianceOutput {
                version: stages::FILE_VERSION,
                seed,
                pipeline,
                synthetic: stages::synthetic_probes(&config.probe, seed)?,
            };
            stages::write_variance(out, &report)?;
            Ok(vec![out.join("variance.json"), out.join("variance.csv")])
        }
        Command::ProbeProperty1 { corpus } => {
            config.validate()?;
            stages::property1_stage(corpus, &runner::property1_config(&config), out)?;
            Ok(vec![out.join("property1.json"), out.join("property1.csv")])
        }
        Command::Viz { features } => Ok(vec![viz::emit_viz(features, out)?.0]),
        Command::Run { kind } => {
            if let Some(k) = kind {
                config.kind = *k;
            }
            Ok(vec![runner::run_experiment(&config, out)?])
        }
        Command::Taxonomy { category } => {
            let entries = tracelab_core::taxonomy::taxonomy_list(category.as_deref())?;
            let path = out.join(taxonomy::TAXONOMY_FILE);
            taxonomy::write(&path, &entries)?;
            for e in &entries {
                println!("{}\t{}", e.tag(), e.name);
            }
            Ok(vec![path])
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            return fail(&cli, &LabError::Config(format!("thread pool: {e}")));
        }
    }
    match execute(&cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => fail(&cli, &e),
    }
}

fn fail(cli: &Cli, err: &LabError) -> ExitCode {
    let record = serde_json::to_string(&err.record()).unwrap_or_else(|_| err.to_string());
    eprintln!("{record}");
    let out = load_config(cli).map_or_else(|_| out_dir(cli, &ExperimentConfig::default()), |c| out_dir(cli, &c));
    if !matches!(cli.command, Command::Run { .. }) && io::create_dir(&out).is_ok() {
        runner::write_error(&out, err);
    }
    ExitCode::FAILURE
}

#[cfg(test)]
mod tests {
    use std::path::Path;

    use super::*;

    const SMALL: &str = "seed = 3\n[corpus]\ncount = 12\nsize = 16\ntrain_fraction = 0.5\n\
        [channels]\nd = 3\ncodebook_size = 8\nsteps = 4\nt_start = 2\n[train]\nepochs = 3\n\
        [probe]\ntrials = 20\nbatch_size = 2\nsynthetic_pairs = 32\nsynthetic_trials = 50\n";

    fn cli(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("tracelab").chain(args.iter().copied())).unwrap()
    }

    fn run(config: &Path, out: &Path, args: &[&str]) -> Vec<PathBuf> {
        let mut full = vec!["--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
        full.extend_from_slice(args);
        execute(&cli(&full)).unwrap()
    }

    #[test]
    fn arguments_parse() {
        let c = cli(&["--seed", "5", "channel-fit", "--corpus", "c.json", "--kind", "denoise"]);
        assert_eq!(c.seed, Some(5));
        assert!(matches!(c.command, Command::ChannelFit { kind: Some(ChannelKind::Denoise), .. }));
        let c = cli(&["run", "--kind", "sparse-vs-full"]);
        assert!(matches!(c.command, Command::Run { kind: Some(ExperimentKind::SparseVsFull) }));
        let c = cli(&["embed", "--manifest", "a.json", "--manifest", "b.json", "--split", "test"]);
        assert!(matches!(&c.command, Command::Embed { manifests, split: Some(Split::Test) } if manifests.len() == 2));
        for bad in [
            &["run", "--kind", "nope"][..],
            &["channel-fit", "--corpus", "c", "--kind", "gan"],
            &["train"],
            &["probe-variance", "--model", "m.json"],
        ] {
            assert!(Cli::try_parse_from(std::iter::once("tracelab").chain(bad.iter().copied())).is_err(), "{bad:?}");
        }
    }

    #[test]
    fn output_root_precedence() {
        let c = cli(&["taxonomy"]);
        let mut config = ExperimentConfig::default();
        assert_eq!(out_dir(&c, &config), PathBuf::from("out"));
        config.out = Some(PathBuf::from("from-config"));
        assert_eq!(out_dir(&c, &config), PathBuf::from("from-config"));
        let c = cli(&["--out", "flag", "taxonomy"]);
        assert_eq!(out_dir(&c, &config), PathBuf::from("flag"));
    }

    #[test]
    fn stage_commands_chain() {
        let tmp = tempfile::tempdir().unwrap();
        let config = tmp.path().join("c.toml");
        std::fs::write(&config, SMALL).unwrap();
        let p = |s: &str| tmp.path().join(s);
        let s = |p: &Path| p.to_str().unwrap().to_string();

        let corpus = run(&config, &p("corpus"), &["corpus-gen"]).remove(0);
        let channels = run(&config, &p("channels"), &["channel-fit", "--corpus", &s(&corpus)]);
        assert_eq!(channels.len(), 3);
        let mut manifests = Vec::new();
        for (i, ch) in channels.iter().enumerate() {
            let out = p(&format!("construct{i}"));
            manifests.push(run(&config, &out, &["construct", "--channel", &s(ch), "--corpus", &s(&corpus)]).remove(0));
        }
        let flags: Vec<String> = manifests.iter().flat_map(|m| ["--manifest".to_string(), s(m)]).collect();
        let flags: Vec<&str> = flags.iter().map(String::as_str).collect();

        let features = run(&config, &p("embed"), &[&["embed"][..], &flags].concat()).remove(0);
        run(&config, &p("viz"), &["viz", "--features", &s(&features)]);
        assert!(p("viz").join(viz::VIZ_JSON).exists());

        let sel = run(&config, &p("select"), &[&["select", "--k", "2"][..], &flags].concat());
        let model = run(&config, &p("train"), &["train", "--manifest", &s(&sel[1])]).remove(0);
        let metrics = run(&config, &p("eval"), &[&["eval", "--model", &s(&model)][..], &flags].concat());
        let text = std::fs::read_to_string(&metrics[0]).unwrap();
        assert_eq!(text.lines().count(), 4);

        run(&config, &p("probe"), &["probe-variance", "--model", &s(&model), "--manifest", &s(&manifests[0])]);
        assert!(p("probe").join("variance.csv").exists());
        run(&config, &p("taxonomy"), &["taxonomy", "--category", "VQ.de-tokenizer"]);
        let entries = taxonomy::read(&p("taxonomy").join(taxonomy::TAXONOMY_FILE)).unwrap();
        assert!(entries.len() >= 6);
    }

    #[test]
    fn errors_surface_from_execute() {
        let tmp = tempfile::tempdir().unwrap();
        let missing = tmp.path().join("missing.toml");
        let c = cli(&["--config", missing.to_str().unwrap(), "taxonomy"]);
        assert_eq!(execute(&c).unwrap_err().kind(), "io");
        let c = cli(&["--out", tmp.path().to_str().unwrap(), "taxonomy", "--category", "nope"]);
        assert_eq!(execute(&c).unwrap_err().kind(), "config");
    }
}
