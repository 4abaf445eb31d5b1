//! Matched versus mismatched encoders for the continuous channel.
//!
//! For every seed the corpus is split into fit / train / test parts. The
//! decoder `φ*` and its own encoder `E*` are fit on the fit part. A detector
//! is trained on train reals against `φ*(E(x))` for each candidate encoder
//! `E`, and always evaluated by its held-out cross-entropy against
//! `φ*(E*(x))` on the test reals.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::channels::{fit_continuous, mismatched, Subspace};
use crate::corpus::{generate_corpus, split_indices, CorpusConfig};
use crate::detector::{loss, train, TrainConfig};
use crate::embedder::{Embedder, FeatureVector};
use crate::error::{config_err, Result};
use crate::image::Image;
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Property1Config {
    /// Latent dimension of the continuous channel.
    pub d: usize,
    /// Share of the corpus used to fit the channel.
    pub fit_fraction: f64,
    /// Share of the remainder used to train the detector; the rest is test.
    pub train_fraction: f64,
    pub seeds: usize,
    pub seed: u64,
    /// Spectral exponent of the corpus the foreign PCA encoder is fit on;
    /// `None` skips that encoder.
    pub foreign_gamma: Option<f64>,
    pub train: TrainConfig,
}

impl Default for Property1Config {
    fn default() -> Self {
        Self {
            d: 8,
            fit_fraction: 0.25,
            train_fraction: 0.5,
            seeds: 5,
            seed: 11,
            foreign_gamma: Some(1.0),
            train: TrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderLosses {
    pub encoder: String,
    /// Held-out loss per seed.
    pub losses: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation across seeds.
    pub sd: f64,
}

impl EncoderLosses {
    fn new(encoder: &str, losses: Vec<f64>) -> Self {
        let n = losses.len() as f64;
        let mean = losses.iter().sum::<f64>() / n;
        let sd = if losses.len() > 1 {
            libm::sqrt(losses.iter().map(|l| (l - mean) * (l - mean)).sum::<f64>() / (n - 1.0))
        } else {
            0.0
        };
        Self { encoder: encoder.to_string(), losses, mean, sd }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Property1Report {
    pub d: usize,
    pub ambient: usize,
    pub seeds: Vec<u64>,
    pub matched: EncoderLosses,
    pub mismatched: Vec<EncoderLosses>,
    /// Loss of the constant prediction 1/2.
    pub chance_loss: f64,
}

fn pick(images: &[Image], idx: &[usize]) -> Vec<Image> {
    idx.iter().map(|&i| images[i].clone()).collect()
}

pub fn property1_experiment(corpus: &[Image], config: &Property1Config) -> Result<Property1Report> {
    if config.seeds == 0 {
        return Err(config_err!("at least one seed is required"));
    }
    let first = corpus.first().ok_or_else(|| config_err!("empty corpus"))?;
    let (h, w) = (first.height(), first.width());
    let ambient = first.len();
    if config.d > ambient {
        return Err(config_err!("d = {} exceeds the ambient dimension {ambient}", config.d));
    }
    if h != w {
        return Err(config_err!("foreign corpus generation needs square images, got {h}x{w}"));
    }
    let reals: Vec<Image> = corpus.iter().map(Image::quantized).collect();
    let embedder = Embedder::new();
    let mut seeds = Vec::with_capacity(config.seeds);
    let mut matched = Vec::new();
    let mut random = Vec::new();
    let mut foreign = Vec::new();
    for k in 0..config.seeds {
        let seed = rng::sub_seed(config.seed, k as u64);
        seeds.push(seed);
        let (fit_idx, rest) = split_indices(reals.len(), config.fit_fraction, seed)?;
        let (tr, te) = split_indices(rest.len(), config.train_fraction, rng::sub_seed(seed, 1))?;
        let train_real = pick(&reals, &tr.iter().map(|&i| rest[i]).collect::<Vec<_>>());
        let test_real = pick(&reals, &te.iter().map(|&i| rest[i]).collect::<Vec<_>>());
        let channel = fit_continuous(&pick(&reals, &fit_idx), config.d)?;

        let embed_through = |encoder: &Subspace, images: &[Image]| -> Result<Vec<FeatureVector>> {
            images
                .iter()
                .enumerate()
                .map(|(i, x)| embedder.embed(&channel.roundtrip_with_encoder(encoder, x)?.quantized()).map_err(|e| e.at(i)))
                .collect()
        };
        let train_feats = embedder.embed_batch(&train_real)?;
        let test_feats = embedder.embed_batch(&test_real)?;
        let test_fakes = embed_through(channel.basis(), &test_real)?;
        let train_cfg = TrainConfig { seed: rng::sub_seed(seed, 2), ..config.train.clone() };
        let held_out = |encoder: &Subspace| -> Result<f64> {
            let fakes = embed_through(encoder, &train_real)?;
            let out = train(&train_feats, &fakes, &train_cfg)?;
            loss(&out.model, &test_feats, &test_fakes)
        };

        matched.push(held_out(channel.basis())?);
        let rnd = mismatched::random_orthonormal(ambient, config.d, rng::sub_seed(seed, 3))?;
        random.push(held_out(&rnd.basis)?);
        if let Some(gamma) = config.foreign_gamma {
            let foreign_cfg = CorpusConfig {
                count: fit_idx.len(),
                size: h,
                seed: rng::sub_seed(seed, 4),
                gamma,
                ..CorpusConfig::default()
            };
            let other: Vec<Image> = generate_corpus(&foreign_cfg)?.iter().map(Image::quantized).collect();
            let enc = mismatched::foreign_corpus_pca(&other, config.d, foreign_cfg.seed)?;
            foreign.push(held_out(&enc.basis)?);
        }
    }
    let mut mismatched = alloc::vec![EncoderLosses::new(mismatched::EncoderKind::RandomOrthonormal.name(), random)];
    if !foreign.is_empty() {
        mismatched.push(EncoderLosses::new(mismatched::EncoderKind::ForeignCorpusPca.name(), foreign));
    }
    Ok(Property1Report {
        d: config.d,
        ambient,
        seeds,
        matched: EncoderLosses::new("matched", matched),
        mismatched,
        chance_loss: 2.0 * core::f64::consts::LN_2,
    })
}
