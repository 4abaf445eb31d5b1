//! Fixed, hand-designed 128-dimensional image embedding.
//!
//! | dims     | content                                                         |
//! |----------|-----------------------------------------------------------------|
//! | 0..8     | mean over 8x8 luma blocks of the energy in each radial DCT band |
//! | 8..16    | standard deviation over blocks of the same band energies        |
//! | 16..48   | normalized histogram of the 3x3 Laplacian of luma, 32 bins on `[-1, 1]` |
//! | 48..128  | Gaussian random projection (seed 42) of the 16x16 bilinear luma thumbnail |

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Deref;

use rand::Rng;
use rand_distr::StandardNormal;
use sha2::{Digest, Sha256};

use crate::dct::{self, Dct8, BLOCK, BLOCK_LEN};
use crate::error::{shape_err, Error, Result};
use crate::image::{Image, MIN_SIZE};
use crate::linalg;
use crate::rng;

pub const FEATURE_DIM: usize = 128;
pub const DCT_BANDS: usize = 8;
pub const HIST_BINS: usize = 32;
pub const THUMB: usize = 16;
pub const PROJ_DIM: usize = FEATURE_DIM - 2 * DCT_BANDS - HIST_BINS;
pub const EMBEDDER_SEED: u64 = 42;

const HIST_OFFSET: usize = 2 * DCT_BANDS;
const PROJ_OFFSET: usize = HIST_OFFSET + HIST_BINS;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector([f64; FEATURE_DIM]);

impl FeatureVector {
    pub fn from_slice(values: &[f64]) -> Result<Self> {
        let arr: [f64; FEATURE_DIM] = values.try_into().map_err(|_| {
            shape_err!(
                "feature vector needs {FEATURE_DIM} values, got {}",
                values.len()
            )
        })?;
        if arr.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(
                "feature vector has non-finite entries".into(),
            ));
        }
        Ok(Self(arr))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl Deref for FeatureVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl AsRef<[f64]> for FeatureVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Radial band of DCT coefficient `(u, v)`: `floor(8 r / (7 sqrt 2))`,
/// capped at 7.
pub fn band_of(u: usize, v: usize) -> usize {
    let r = libm::sqrt((u * u + v * v) as f64);
    let rmax = 7.0 * core::f64::consts::SQRT_2;
    ((r / rmax * DCT_BANDS as f64) as usize).min(DCT_BANDS - 1)
}

pub fn hist_bin(r: f64) -> usize {
    let r = r.clamp(-1.0, 1.0);
    (((r + 1.0) / 2.0 * HIST_BINS as f64) as usize).min(HIST_BINS - 1)
}

#[derive(Debug, Clone)]
pub struct Embedder {
    dct: Dct8,
    bands: [usize; BLOCK_LEN],
    /// `PROJ_DIM x THUMB^2`, row-major.
    projection: Vec<f64>,
}

impl Default for Embedder {
    fn default() -> Self {
        Self::new()
    }
}

impl Embedder {
    pub fn new() -> Self {
        let mut bands = [0; BLOCK_LEN];
        for u in 0..BLOCK {
            for v in 0..BLOCK {
                bands[u * BLOCK + v] = band_of(u, v);
            }
        }
        let mut rng = rng::seeded(EMBEDDER_SEED);
        let scale = 1.0 / THUMB as f64;
        let projection = (0..PROJ_DIM * THUMB * THUMB)
            .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
            .collect();
        Self {
            dct: Dct8::default(),
            bands,
            projection,
        }
    }

    /// Stable identifier of the embedding definition: SHA-256 over layout
    /// constants and the projection matrix bytes.
    pub fn spec_hash(&self) -> String {
        let mut h = Sha256::new();
        for c in [FEATURE_DIM, DCT_BANDS, HIST_BINS, THUMB, PROJ_DIM] {
            h.update((c as u64).to_le_bytes());
        }
        h.update(EMBEDDER_SEED.to_le_bytes());
        for b in self.bands {
            h.update([b as u8]);
        }
        for v in &self.projection {
            h.update(v.to_le_bytes());
        }
        crate::hex(&h.finalize())
    }

    pub fn embed(&self, x: &Image) -> Result<FeatureVector> {
        let (h, w) = (x.height(), x.width());
        if h < MIN_SIZE || w < MIN_SIZE {
            return Err(shape_err!(
                "image {h}x{w} is smaller than {MIN_SIZE}x{MIN_SIZE}"
            ));
        }
        let luma = x.luminance();
        let mut out = [0.0; FEATURE_DIM];

        // (a) radial DCT band energies over whole 8x8 blocks
        let (bh, bw) = (h / BLOCK, w / BLOCK);
        let mut per_band: Vec<Vec<f64>> = (0..DCT_BANDS).map(|_| Vec::with_capacity(bh * bw)).collect();
        let mut band_sizes = [0usize; DCT_BANDS];
        for &b in &self.bands {
            band_sizes[b] += 1;
        }
        for by in 0..bh {
            for bx in 0..bw {
                let coef = self.dct.forward(&dct::read_block(&luma, w, by, bx));
                let mut e = [0.0; DCT_BANDS];
                for (c, &b) in coef.iter().zip(&self.bands) {
                    e[b] += c * c;
                }
                for b in 0..DCT_BANDS {
                    per_band[b].push(e[b] / band_sizes[b] as f64);
                }
            }
        }
        for (b, energies) in per_band.iter().enumerate() {
            let n = energies.len() as f64;
            let mean = energies.iter().sum::<f64>() / n;
            let var = energies
                .iter()
                .map(|e| (e - mean) * (e - mean))
                .sum::<f64>()
                / n;
            out[b] = mean;
            out[DCT_BANDS + b] = libm::sqrt(var);
        }

        // (b) Laplacian residual histogram over interior pixels
        let mut count = 0usize;
        for y in 1..h - 1 {
            for x in 1..w - 1 {
                let c = luma[y * w + x];
                let r = luma[(y - 1) * w + x]
                    + luma[(y + 1) * w + x]
                    + luma[y * w + x - 1]
                    + luma[y * w + x + 1]
                    - 4.0 * c;
                out[HIST_OFFSET + hist_bin(r)] += 1.0;
                count += 1;
            }
        }
        for v in &mut out[HIST_OFFSET..PROJ_OFFSET] {
            *v /= count as f64;
        }

        // (c) random projection of the bilinear thumbnail
        let thumb = bilinear_resize(&luma, h, w, THUMB, THUMB);
        for (k, row) in self.projection.chunks_exact(THUMB * THUMB).enumerate() {
            out[PROJ_OFFSET + k] = linalg::dot(row, &thumb);
        }
        FeatureVector::from_slice(&out)
    }

    /// Order-preserving; the first failing image is reported by index.
    pub fn embed_batch(&self, images: &[Image]) -> Result<Vec<FeatureVector>> {
        images
            .iter()
            .enumerate()
            .map(|(i, x)| self.embed(x).map_err(|e| e.at(i)))
            .collect()
    }
}

/// Samples at pixel centres with bilinear interpolation (edge clamped).
pub fn bilinear_resize(src: &[f64], h: usize, w: usize, oh: usize, ow: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(oh * ow);
    let (sy, sx) = (h as f64 / oh as f64, w as f64 / ow as f64);
    for i in 0..oh {
        let fy = ((i as f64 + 0.5) * sy - 0.5).clamp(0.0, (h - 1) as f64);
        let y0 = fy as usize;
        let y1 = (y0 + 1).min(h - 1);
        let ty = fy - y0 as f64;
        for j in 0..ow {
            let fx = ((j as f64 + 0.5) * sx - 0.5).clamp(0.0, (w - 1) as f64);
            let x0 = fx as usize;
            let x1 = (x0 + 1).min(w - 1);
            let tx = fx - x0 as f64;
            let top = src[y0 * w + x0] * (1.0 - tx) + src[y0 * w + x1] * tx;
            let bottom = src[y1 * w + x0] * (1.0 - tx) + src[y1 * w + x1] * tx;
            out.push(top * (1.0 - ty) + bottom * ty);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Projection3d {
    pub points: Vec<[f64; 3]>,
    /// Variance captured by each of the three components.
    pub variances: [f64; 3],
    pub total_variance: f64,
    /// Set when fewer than three components carry variance; the missing
    /// coordinates are zero.
    pub rank_deficient: bool,
}

/// Projects rows onto the top three principal components of the set. Each
/// component's largest-magnitude loading is positive.
pub fn project_3d<R: AsRef<[f64]>>(rows: &[R]) -> Result<Projection3d> {
    let n = rows.len();
    if n < 4 {
        return Err(shape_err!(
            "need at least 4 vectors for a 3-D projection, got {n}"
        ));
    }
    let dim = rows[0].as_ref().len();
    if rows.iter().any(|r| r.as_ref().len() != dim) {
        return Err(shape_err!("feature vectors differ in length"));
    }
    let mut mean = vec![0.0; dim];
    for r in rows {
        for (m, v) in mean.iter_mut().zip(r.as_ref()) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let centered: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| r.as_ref().iter().zip(&mean).map(|(v, m)| v - m).collect())
        .collect();
    let mut cov = vec![0.0; dim * dim];
    for row in &centered {
        for i in 0..dim {
            for j in 0..dim {
                cov[i * dim + j] += row[i] * row[j];
            }
        }
    }
    cov.iter_mut().for_each(|c| *c /= n as f64);
    let total_variance: f64 = (0..dim).map(|i| cov[i * dim + i]).sum();
    let eig = linalg::symmetric_eigen(dim, &cov)?;
    let top = eig.values.first().copied().unwrap_or(0.0).max(0.0);
    let mut variances = [0.0; 3];
    let mut comps: Vec<Option<&Vec<f64>>> = Vec::with_capacity(3);
    for k in 0..3 {
        let v = eig.values.get(k).copied().unwrap_or(0.0);
        if v > 1e-12 * top && v > 0.0 {
            variances[k] = v;
            comps.push(Some(&eig.vectors[k]));
        } else {
            comps.push(None);
        }
    }
    let rank_deficient = comps.iter().any(Option::is_none);
    let points = centered
        .iter()
        .map(|row| {
            let mut p = [0.0; 3];
            for (k, c) in comps.iter().enumerate() {
                if let Some(c) = c {
                    p[k] = linalg::dot(row, c);
                }
            }
            p
        })
        .collect();
    Ok(Projection3d {
        points,
        variances,
        total_variance,
        rank_deficient,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_constants() {
        assert_eq!(PROJ_DIM, 80);
        assert_eq!(band_of(0, 0), 0);
        assert_eq!(band_of(7, 7), 7);
        assert_eq!(hist_bin(0.0), 16);
        assert_eq!(hist_bin(-1.0), 0);
        assert_eq!(hist_bin(1.0), 31);
    }

    #[test]
    fn constant_image_histogram_is_a_spike() {
        let e = Embedder::new();
        let f = e
            .embed(&Image::constant(16, 16, [0.3, 0.6, 0.1]).unwrap())
            .unwrap();
        assert_eq!(f[HIST_OFFSET + 16], 1.0);
        assert_eq!(f[HIST_OFFSET..PROJ_OFFSET].iter().sum::<f64>(), 1.0);
        // no AC energy, no spread over blocks
        assert!(f[1..DCT_BANDS].iter().all(|v| v.abs() < 1e-20));
        assert!(f[DCT_BANDS..2 * DCT_BANDS].iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn rejects_tiny_and_short_vectors() {
        assert!(FeatureVector::from_slice(&[0.0; 3]).is_err());
        assert!(project_3d(&[[0.0; 4]; 3]).is_err());
    }

    #[test]
    fn duplicate_points_project_identically() {
        let rows: Vec<Vec<f64>> = (0..8)
            .map(|i| (0..6).map(|j| libm::sin((i * 7 + j * 3) as f64)).collect())
            .collect();
        let mut with_dup = rows.clone();
        with_dup.push(rows[2].clone());
        let p = project_3d(&with_dup).unwrap();
        assert_eq!(p.points[2], p.points[8]);
    }
}
