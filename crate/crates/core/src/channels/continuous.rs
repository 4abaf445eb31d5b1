//! Continuous-latent channel: the optimal linear autoencoder of the corpus.
//! The encoder maps an image to its coordinates on the top principal
//! directions, the decoder maps coordinates back to pixels.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{config_err, shape_err, Error, Result};
use crate::image::Image;
use crate::linalg;

/// Column-orthonormal basis of a subspace of `R^ambient`. A complete basis is
/// kept implicit (identity) so that `d = D` never materializes a `D x D`
/// matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subspace {
    ambient: usize,
    complete: bool,
    columns: Vec<Vec<f64>>,
}

pub const ORTHONORMAL_TOL: f64 = 1e-8;

impl Subspace {
    pub fn complete(ambient: usize) -> Self {
        Self {
            ambient,
            complete: true,
            columns: Vec::new(),
        }
    }

    pub fn from_columns(ambient: usize, columns: Vec<Vec<f64>>) -> Result<Self> {
        if columns.iter().any(|c| c.len() != ambient) {
            return Err(shape_err!(
                "basis column length differs from ambient dimension {ambient}"
            ));
        }
        if columns.len() > ambient {
            return Err(config_err!(
                "{} columns exceed ambient dimension {ambient}",
                columns.len()
            ));
        }
        let err = linalg::orthonormality_error(&columns);
        if !(err <= ORTHONORMAL_TOL) {
            return Err(Error::Numeric(alloc::format!(
                "basis is not orthonormal (error {err:e})"
            )));
        }
        Ok(Self {
            ambient,
            complete: false,
            columns,
        })
    }

    pub fn ambient(&self) -> usize {
        self.ambient
    }

    pub fn dim(&self) -> usize {
        if self.complete {
            self.ambient
        } else {
            self.columns.len()
        }
    }

    pub fn is_complete(&self) -> bool {
        self.complete
    }

    /// Explicit columns; empty when the basis is complete.
    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    /// `W^T v`.
    pub fn coefficients(&self, v: &[f64]) -> Vec<f64> {
        if self.complete {
            v.to_vec()
        } else {
            self.columns.iter().map(|c| linalg::dot(c, v)).collect()
        }
    }

    /// `W c`.
    pub fn expand(&self, coeffs: &[f64]) -> Vec<f64> {
        if self.complete {
            return coeffs.to_vec();
        }
        let mut out = vec![0.0; self.ambient];
        for (c, col) in coeffs.iter().zip(&self.columns) {
            for (o, w) in out.iter_mut().zip(col) {
                *o += c * w;
            }
        }
        out
    }

    /// Orthogonal projection `W W^T v`.
    pub fn project(&self, v: &[f64]) -> Vec<f64> {
        if self.complete {
            v.to_vec()
        } else {
            self.expand(&self.coefficients(v))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuousChannel {
    height: usize,
    width: usize,
    mean: Vec<f64>,
    basis: Subspace,
    requested_dim: usize,
    /// Leading eigenvalues of the (population) pixel covariance, descending.
    /// Empty when the basis is complete.
    eigenvalues: Vec<f64>,
}

/// Relative eigenvalue cutoff below which a direction counts as null.
const RANK_TOL: f64 = 1e-10;

/// Fits mean and top-`d` principal directions of the corpus pixels.
///
/// Uses the `D x D` covariance when `D <= n` and the `n x n` Gram matrix
/// otherwise; both yield the same nonzero spectrum. When the covariance has
/// rank `r < d` only `r` directions are kept and [`ContinuousChannel::is_rank_deficient`]
/// reports it. `d = D` yields the complete basis.
pub fn fit_continuous(corpus: &[Image], d: usize) -> Result<ContinuousChannel> {
    let first = corpus
        .first()
        .ok_or_else(|| config_err!("cannot fit a channel on an empty corpus"))?;
    let (height, width) = (first.height(), first.width());
    let dim = first.len();
    if d > dim {
        return Err(config_err!(
            "latent dimension {d} exceeds pixel dimension {dim}"
        ));
    }
    if let Some(i) = corpus.iter().position(|im| !im.same_shape(first)) {
        return Err(shape_err!("corpus image {i} differs in size from image 0"));
    }
    let n = corpus.len();
    let mut mean = vec![0.0; dim];
    for im in corpus {
        for (m, v) in mean.iter_mut().zip(im.as_slice()) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);

    if d == dim {
        return Ok(ContinuousChannel {
            height,
            width,
            mean,
            basis: Subspace::complete(dim),
            requested_dim: d,
            eigenvalues: Vec::new(),
        });
    }

    let centered: Vec<Vec<f64>> = corpus
        .iter()
        .map(|im| {
            im.as_slice()
                .iter()
                .zip(&mean)
                .map(|(v, m)| v - m)
                .collect()
        })
        .collect();

    let (eigenvalues, directions) = if dim <= n {
        let mut cov = vec![0.0; dim * dim];
        for row in &centered {
            for i in 0..dim {
                let ri = row[i];
                if ri == 0.0 {
                    continue;
                }
                let line = &mut cov[i * dim..(i + 1) * dim];
                for (c, rj) in line.iter_mut().zip(row) {
                    *c += ri * rj;
                }
            }
        }
        cov.iter_mut().for_each(|c| *c /= n as f64);
        let eig = linalg::symmetric_eigen(dim, &cov)?;
        (eig.values, eig.vectors)
    } else {
        let mut gram = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let g = linalg::dot(&centered[i], &centered[j]) / n as f64;
                gram[i * n + j] = g;
                gram[j * n + i] = g;
            }
        }
        let eig = linalg::symmetric_eigen(n, &gram)?;
        // only the leading `d` directions are ever kept
        let dirs = eig
            .values
            .iter()
            .zip(&eig.vectors)
            .take(d)
            .map(|(&lambda, v)| {
                let mut u = vec![0.0; dim];
                if lambda > 0.0 {
                    for (vi, row) in v.iter().zip(&centered) {
                        for (o, x) in u.iter_mut().zip(row) {
                            *o += vi * x;
                        }
                    }
                    let s = libm::sqrt(n as f64 * lambda);
                    u.iter_mut().for_each(|o| *o /= s);
                }
                u
            })
            .collect();
        (eig.values, dirs)
    };

    let top = eigenvalues.first().copied().unwrap_or(0.0).max(0.0);
    let rank = eigenvalues
        .iter()
        .take_while(|&&l| l > RANK_TOL * top && l > 0.0)
        .count();
    let keep = d.min(rank);
    let mut cols: Vec<Vec<f64>> = directions.into_iter().take(keep).collect();
    cols = linalg::orthonormalize(cols)?;
    for c in cols.iter_mut() {
        linalg::fix_sign(c);
    }
    Ok(ContinuousChannel {
        height,
        width,
        mean,
        basis: Subspace::from_columns(dim, cols)?,
        requested_dim: d,
        eigenvalues: eigenvalues.into_iter().map(|l| l.max(0.0)).collect(),
    })
}

impl ContinuousChannel {
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn basis(&self) -> &Subspace {
        &self.basis
    }

    /// Latent dimension actually in use.
    pub fn latent_dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn requested_dim(&self) -> usize {
        self.requested_dim
    }

    /// True when the corpus covariance had fewer than `d` nonzero directions.
    pub fn is_rank_deficient(&self) -> bool {
        self.basis.dim() < self.requested_dim
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    fn check(&self, x: &Image) -> Result<()> {
        if x.height() != self.height || x.width() != self.width {
            return Err(shape_err!(
                "image is {}x{}, channel expects {}x{}",
                x.height(),
                x.width(),
                self.height,
                self.width
            ));
        }
        Ok(())
    }

    /// Matched encoder: `W^T (x - mu)`.
    pub fn encode(&self, x: &Image) -> Result<Vec<f64>> {
        self.check(x)?;
        Ok(self.basis.coefficients(&self.centered(x)))
    }

    /// Decoder before clamping: `mu + W z`.
    pub fn decode_raw(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.basis.dim() {
            return Err(shape_err!(
                "latent has {} entries, channel uses {}",
                z.len(),
                self.basis.dim()
            ));
        }
        let mut out = self.basis.expand(z);
        out.iter_mut().zip(&self.mean).for_each(|(o, m)| *o += m);
        Ok(out)
    }

    /// `mu + W W^T (x - mu)` without clamping.
    pub fn project(&self, x: &Image) -> Result<Vec<f64>> {
        let z = self.encode(x)?;
        self.decode_raw(&z)
    }

    /// Clamped roundtrip through the matched encoder and the decoder.
    pub fn roundtrip(&self, x: &Image) -> Result<Image> {
        if self.basis.is_complete() {
            self.check(x)?;
            return Ok(x.clone());
        }
        Image::from_clamped(self.height, self.width, self.project(x)?)
    }

    /// Decoder applied to the latent a foreign encoder subspace produces:
    /// the image is read only through `encoder`, then expressed in this
    /// channel's coordinates, `mu + W W^T P_E (x - mu)`.
    pub fn roundtrip_with_encoder(&self, encoder: &Subspace, x: &Image) -> Result<Image> {
        self.check(x)?;
        if encoder.ambient() != self.mean.len() {
            return Err(shape_err!(
                "encoder ambient {} differs from {}",
                encoder.ambient(),
                self.mean.len()
            ));
        }
        if self.basis.is_complete() && encoder.is_complete() {
            return Ok(x.clone());
        }
        let seen = encoder.project(&self.centered(x));
        let mut out = self.basis.project(&seen);
        out.iter_mut().zip(&self.mean).for_each(|(o, m)| *o += m);
        Image::from_clamped(self.height, self.width, out)
    }

    fn centered(&self, x: &Image) -> Vec<f64> {
        x.as_slice()
            .iter()
            .zip(&self.mean)
            .map(|(v, m)| v - m)
            .collect()
    }

    pub(crate) fn hash_into(&self, h: &mut impl sha2::Digest) {
        h.update((self.height as u64).to_le_bytes());
        h.update((self.width as u64).to_le_bytes());
        h.update((self.requested_dim as u64).to_le_bytes());
        h.update([u8::from(self.basis.is_complete())]);
        for v in self
            .mean
            .iter()
            .chain(self.basis.columns().iter().flatten())
        {
            h.update(v.to_le_bytes());
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dim = self.height * self.width * 3;
        if self.mean.len() != dim || self.basis.ambient() != dim {
            return Err(shape_err!(
                "continuous channel parameters do not match {}x{}",
                self.height,
                self.width
            ));
        }
        Subspace::from_columns(dim, self.basis.columns.clone()).map(|_| ())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_corpus, CorpusConfig};

    fn corpus(count: usize) -> Vec<Image> {
        generate_corpus(&CorpusConfig {
            count,
            size: 16,
            seed: 11,
            gamma: 2.0,
            shape_density: 0.3,
        })
        .unwrap()
    }

    #[test]
    fn mean_is_a_fixed_point() {
        let c = corpus(12);
        let ch = fit_continuous(&c, 3).unwrap();
        let mu = Image::new(16, 16, ch.mean().to_vec()).unwrap();
        let out = ch.project(&mu).unwrap();
        for (a, b) in out.iter().zip(ch.mean()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_dim_returns_mean() {
        let c = corpus(6);
        let ch = fit_continuous(&c, 0).unwrap();
        let out = ch.roundtrip(&c[3]).unwrap();
        for (a, b) in out.as_slice().iter().zip(ch.mean()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn too_large_dim_and_rank_deficiency() {
        let c = corpus(5);
        assert!(fit_continuous(&c, 16 * 16 * 3 + 1).is_err());
        assert!(fit_continuous(&[], 1).is_err());
        // five centered images span at most four directions
        let ch = fit_continuous(&c, 7).unwrap();
        assert_eq!(ch.latent_dim(), 4);
        assert!(ch.is_rank_deficient());
    }

    #[test]
    fn hand_case_projection() {
        // D = 2, d = 1, W = [1, 0]^T, mu = 0: (0.3, 0.4) -> (0.3, 0)
        let s = Subspace::from_columns(2, alloc::vec![alloc::vec![1.0, 0.0]]).unwrap();
        let p = s.project(&[0.3, 0.4]);
        assert_eq!(p, alloc::vec![0.3, 0.0]);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let ch = fit_continuous(&corpus(4), 2).unwrap();
        let other = Image::constant(24, 24, [0.5; 3]).unwrap();
        assert!(matches!(ch.roundtrip(&other), Err(Error::Shape(_))));
    }
}
