//! Encoders other than the one fitted jointly with the decoder.

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::continuous::{fit_continuous, Subspace};
use crate::error::{config_err, Result};
use crate::image::Image;
use crate::linalg;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderKind {
    RandomOrthonormal,
    ForeignCorpusPca,
}

impl EncoderKind {
    pub fn name(self) -> &'static str {
        match self {
            EncoderKind::RandomOrthonormal => "random_orthonormal",
            EncoderKind::ForeignCorpusPca => "foreign_corpus_pca",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MismatchedEncoder {
    pub kind: EncoderKind,
    pub basis: Subspace,
    pub seed: u64,
}

/// Where a mismatched encoder comes from.
pub enum EncoderSource<'a> {
    Random {
        ambient: usize,
        seed: u64,
    },
    /// PCA of a corpus drawn from a different distribution; `seed` is the
    /// seed that corpus was generated with, kept for provenance.
    Foreign {
        corpus: &'a [Image],
        seed: u64,
    },
}

pub fn make_mismatched_encoder(source: EncoderSource<'_>, d: usize) -> Result<MismatchedEncoder> {
    match source {
        EncoderSource::Random { ambient, seed } => random_orthonormal(ambient, d, seed),
        EncoderSource::Foreign { corpus, seed } => foreign_corpus_pca(corpus, d, seed),
    }
}

/// Seeded Gaussian `D x d` matrix, orthonormalized column by column.
pub fn random_orthonormal(ambient: usize, d: usize, seed: u64) -> Result<MismatchedEncoder> {
    if d > ambient {
        return Err(config_err!(
            "encoder dimension {d} exceeds ambient dimension {ambient}"
        ));
    }
    let basis = if d == ambient {
        Subspace::complete(ambient)
    } else {
        let mut rng = rng::seeded(seed);
        let cols: Vec<Vec<f64>> = (0..d)
            .map(|_| {
                (0..ambient)
                    .map(|_| rng.sample::<f64, _>(StandardNormal))
                    .collect()
            })
            .collect();
        Subspace::from_columns(ambient, linalg::orthonormalize(cols)?)?
    };
    Ok(MismatchedEncoder {
        kind: EncoderKind::RandomOrthonormal,
        basis,
        seed,
    })
}

pub fn foreign_corpus_pca(corpus: &[Image], d: usize, seed: u64) -> Result<MismatchedEncoder> {
    let fitted = fit_continuous(corpus, d)?;
    Ok(MismatchedEncoder {
        kind: EncoderKind::ForeignCorpusPca,
        basis: fitted.basis().clone(),
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_basis_is_orthonormal_and_seeded() {
        let a = random_orthonormal(300, 6, 4).unwrap();
        assert!(linalg::orthonormality_error(a.basis.columns()) < 1e-8);
        assert_eq!(a, random_orthonormal(300, 6, 4).unwrap());
        assert_ne!(a, random_orthonormal(300, 6, 5).unwrap());
        assert!(random_orthonormal(3, 4, 0).is_err());
        assert!(random_orthonormal(5, 5, 0).unwrap().basis.is_complete());
    }
}
