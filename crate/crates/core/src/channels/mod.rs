//! Desk-scale stand-ins for a generator's final component, and the offline
//! construction of contaminated (negative) samples from real images.

pub mod continuous;
pub mod denoise;
pub mod mismatched;
pub mod token;

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use continuous::{fit_continuous, ContinuousChannel, Subspace};
pub use denoise::{fit_denoise, DenoiseChannel};
pub use mismatched::{make_mismatched_encoder, EncoderKind, EncoderSource, MismatchedEncoder};
pub use token::{fit_token, TokenChannel};

use crate::error::Result;
use crate::image::Image;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKind {
    Continuous,
    Token,
    Denoise,
}

impl ChannelKind {
    pub const ALL: [ChannelKind; 3] = [
        ChannelKind::Continuous,
        ChannelKind::Token,
        ChannelKind::Denoise,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ChannelKind::Continuous => "continuous",
            ChannelKind::Token => "token",
            ChannelKind::Denoise => "denoise",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }

    /// Taxonomy code of the generator family the channel stands in for.
    pub fn taxonomy_category(self) -> &'static str {
        match self {
            ChannelKind::Continuous => "VAE.decoder-1.1",
            ChannelKind::Token => "VQ.de-tokenizer-2.2",
            ChannelKind::Denoise => "Diffusion.denoiser-3.3",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Channel {
    Continuous(ContinuousChannel),
    Token(TokenChannel),
    Denoise(DenoiseChannel),
}

/// Per-run knobs of the construction that are not fitted parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstructOptions {
    /// Start level of the denoise channel; ignored by the others.
    pub t_start: usize,
    /// Base seed; image `i` draws its noise from `sub_seed(noise_seed, i)`.
    pub noise_seed: u64,
}

impl Default for ConstructOptions {
    fn default() -> Self {
        Self {
            t_start: 4,
            noise_seed: 0,
        }
    }
}

impl Channel {
    pub fn kind(&self) -> ChannelKind {
        match self {
            Channel::Continuous(_) => ChannelKind::Continuous,
            Channel::Token(_) => ChannelKind::Token,
            Channel::Denoise(_) => ChannelKind::Denoise,
        }
    }

    /// Clamped roundtrip of one real image with source index `source`.
    pub fn roundtrip(&self, x: &Image, source: usize, opts: &ConstructOptions) -> Result<Image> {
        match self {
            Channel::Continuous(c) => c.roundtrip(x),
            Channel::Token(c) => c.roundtrip(x),
            Channel::Denoise(c) => c.roundtrip(
                x,
                opts.t_start,
                rng::sub_seed(opts.noise_seed, source as u64),
            ),
        }
    }

    /// Roundtrip followed by 8-bit quantization, the form every stored
    /// sample takes.
    pub fn contaminate(&self, x: &Image, source: usize, opts: &ConstructOptions) -> Result<Image> {
        Ok(self.roundtrip(x, source, opts)?.quantized())
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Channel::Continuous(c) => c.validate(),
            Channel::Token(c) => c.validate(),
            Channel::Denoise(c) => c.validate(),
        }
    }

    /// SHA-256 over the fitted parameters and construction options, hex.
    pub fn params_hash(&self, opts: &ConstructOptions) -> String {
        let mut h = Sha256::new();
        h.update(self.kind().name().as_bytes());
        match self {
            Channel::Continuous(c) => c.hash_into(&mut h),
            Channel::Token(c) => c.hash_into(&mut h),
            Channel::Denoise(c) => {
                c.hash_into(&mut h);
                h.update((opts.t_start as u64).to_le_bytes());
                h.update(opts.noise_seed.to_le_bytes());
            }
        }
        crate::hex(&h.finalize())
    }
}

/// Contaminates every image of `corpus`; `sources[i]` is the corpus index
/// of `corpus[i]` (it keys the per-image noise stream). Errors carry the
/// source index.
pub fn construct_negatives(
    channel: &Channel,
    corpus: &[Image],
    sources: &[usize],
    opts: &ConstructOptions,
) -> Result<Vec<Image>> {
    if corpus.len() != sources.len() {
        return Err(crate::error::shape_err!(
            "{} images but {} source indices",
            corpus.len(),
            sources.len()
        ));
    }
    corpus
        .iter()
        .zip(sources)
        .map(|(x, &s)| channel.contaminate(x, s, opts).map_err(|e| e.at(s)))
        .collect()
}
