//! Noise-then-denoise channel. The image is pushed to noise level `t_start`
//! of a variance-preserving schedule and walked back to level 0 with a
//! deterministic (DDIM-style) update whose clean-image estimate is a per-band
//! Wiener shrinkage in the 8x8 DCT domain.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dct::{self, Dct8, BLOCK, BLOCK_LEN};
use crate::error::{config_err, shape_err, Result};
use crate::image::{Image, CHANNELS};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenoiseChannel {
    steps: usize,
    alphas: Vec<f64>,
    betas: Vec<f64>,
    /// Per colour plane, mean of each of the 64 DCT coefficients.
    band_mean: Vec<Vec<f64>>,
    /// Per colour plane, population variance of each DCT coefficient.
    band_var: Vec<Vec<f64>>,
}

/// `beta_t = t / T`, `alpha_t = sqrt(1 - beta_t^2)` for `t = 0..=T`.
pub fn schedule(steps: usize) -> (Vec<f64>, Vec<f64>) {
    let betas: Vec<f64> = (0..=steps).map(|t| t as f64 / steps as f64).collect();
    let alphas = betas
        .iter()
        .map(|b| libm::sqrt((1.0 - b * b).max(0.0)))
        .collect();
    (alphas, betas)
}

fn check_blocks(x: &Image) -> Result<()> {
    if !x.height().is_multiple_of(BLOCK) || !x.width().is_multiple_of(BLOCK) {
        return Err(shape_err!(
            "image {}x{} is not a whole number of 8x8 blocks",
            x.height(),
            x.width()
        ));
    }
    Ok(())
}

/// Band variances at or below this are round-off of a constant band.
const VAR_FLOOR: f64 = 1e-14;

pub fn fit_denoise(corpus: &[Image], steps: usize) -> Result<DenoiseChannel> {
    if steps == 0 {
        return Err(config_err!("number of steps must be at least 1"));
    }
    if corpus.is_empty() {
        return Err(config_err!("cannot fit band statistics on an empty corpus"));
    }
    let dct = Dct8::default();
    let mut sum = vec![vec![0.0; BLOCK_LEN]; CHANNELS];
    let mut sum_sq = vec![vec![0.0; BLOCK_LEN]; CHANNELS];
    let mut count = 0usize;
    for (i, im) in corpus.iter().enumerate() {
        check_blocks(im).map_err(|e| e.at(i))?;
        for c in 0..CHANNELS {
            let plane = im.plane(c);
            for coef in dct::blocks(&dct, &plane, im.height(), im.width()) {
                for (b, v) in coef.iter().enumerate() {
                    sum[c][b] += v;
                    sum_sq[c][b] += v * v;
                }
            }
        }
        count += (im.height() / BLOCK) * (im.width() / BLOCK);
    }
    let n = count as f64;
    let band_mean: Vec<Vec<f64>> = sum
        .iter()
        .map(|s| s.iter().map(|v| v / n).collect())
        .collect();
    let band_var = sum_sq
        .iter()
        .zip(&band_mean)
        .map(|(sq, m)| {
            sq.iter()
                .zip(m)
                .map(|(q, mu)| {
                    let v = q / n - mu * mu;
                    if v > VAR_FLOOR {
                        v
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    let (alphas, betas) = schedule(steps);
    Ok(DenoiseChannel {
        steps,
        alphas,
        betas,
        band_mean,
        band_var,
    })
}

impl DenoiseChannel {
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn alpha(&self, t: usize) -> f64 {
        self.alphas[t]
    }

    pub fn beta(&self, t: usize) -> f64 {
        self.betas[t]
    }

    pub fn band_variances(&self) -> &[Vec<f64>] {
        &self.band_var
    }

    pub fn band_means(&self) -> &[Vec<f64>] {
        &self.band_mean
    }

    /// Wiener gains `var / (var + (beta_t / alpha_t)^2)` per plane and band;
    /// zero for bands without signal variance and at `alpha_t = 0`.
    pub fn gains(&self, t: usize) -> Vec<Vec<f64>> {
        let (a, b) = (self.alphas[t], self.betas[t]);
        self.band_var
            .iter()
            .map(|vars| {
                vars.iter()
                    .map(|&v| {
                        if v <= 0.0 || a <= 0.0 {
                            0.0
                        } else {
                            let noise = (b / a) * (b / a);
                            v / (v + noise)
                        }
                    })
                    .collect()
            })
            .collect()
    }

    /// Clean-image estimate from an iterate at noise level `t`.
    fn estimate_clean(
        &self,
        dct: &Dct8,
        planes: &[Vec<f64>],
        h: usize,
        w: usize,
        t: usize,
    ) -> Vec<Vec<f64>> {
        let gains = self.gains(t);
        let alpha = self.alphas[t];
        let mut out = vec![vec![0.0; h * w]; CHANNELS];
        for c in 0..CHANNELS {
            for by in 0..h / BLOCK {
                for bx in 0..w / BLOCK {
                    let coef = dct.forward(&dct::read_block(&planes[c], w, by, bx));
                    let mut est = [0.0; BLOCK_LEN];
                    for b in 0..BLOCK_LEN {
                        let mu = self.band_mean[c][b];
                        est[b] = if alpha > 0.0 {
                            mu + gains[c][b] * (coef[b] / alpha - mu)
                        } else {
                            mu
                        };
                    }
                    dct::write_block(&mut out[c], w, by, bx, &dct.inverse(&est));
                }
            }
        }
        out
    }

    /// Noise to level `t_start` with `N(0, I)` noise drawn from `noise_seed`,
    /// then deterministic steps back to level 0. `t_start = 0` returns `x`.
    pub fn roundtrip(&self, x: &Image, t_start: usize, noise_seed: u64) -> Result<Image> {
        if t_start > self.steps {
            return Err(config_err!(
                "start level {t_start} exceeds the {} schedule steps",
                self.steps
            ));
        }
        check_blocks(x)?;
        if t_start == 0 {
            return Ok(x.clone());
        }
        let (h, w) = (x.height(), x.width());
        let mut rng = rng::seeded(noise_seed);
        let (a0, b0) = (self.alphas[t_start], self.betas[t_start]);
        let mut iterate: Vec<Vec<f64>> = (0..CHANNELS)
            .map(|c| {
                x.plane(c)
                    .into_iter()
                    .map(|v| {
                        let e: f64 = rng.sample(StandardNormal);
                        a0 * v + b0 * e
                    })
                    .collect()
            })
            .collect();
        let dct = Dct8::default();
        let mut clean = iterate.clone();
        for t in (0..t_start).rev() {
            clean = self.estimate_clean(&dct, &iterate, h, w, t + 1);
            let (a_next, b_next) = (self.alphas[t + 1], self.betas[t + 1]);
            let (a_t, b_t) = (self.alphas[t], self.betas[t]);
            for c in 0..CHANNELS {
                for (y, x0) in iterate[c].iter_mut().zip(&clean[c]) {
                    let eps = (*y - a_next * x0) / b_next;
                    *y = a_t * x0 + b_t * eps;
                }
            }
        }
        // at t = 0 the iterate equals the last clean estimate
        let planes: [Vec<f64>; 3] = [clean[0].clone(), clean[1].clone(), clean[2].clone()];
        Image::from_planes(h, w, &planes)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.steps >= 1
            && self.alphas.len() == self.steps + 1
            && self.betas.len() == self.steps + 1
            && self.band_mean.len() == CHANNELS
            && self.band_var.len() == CHANNELS
            && self
                .band_mean
                .iter()
                .chain(&self.band_var)
                .all(|b| b.len() == BLOCK_LEN)
            && self
                .band_var
                .iter()
                .flatten()
                .all(|v| *v >= 0.0 && v.is_finite());
        if !ok {
            return Err(shape_err!("denoise channel parameters are malformed"));
        }
        Ok(())
    }

    pub(crate) fn hash_into(&self, h: &mut impl sha2::Digest) {
        h.update((self.steps as u64).to_le_bytes());
        for v in self.band_mean.iter().chain(&self.band_var).flatten() {
            h.update(v.to_le_bytes());
        }
    }
}
