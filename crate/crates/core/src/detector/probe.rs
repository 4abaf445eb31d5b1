//! Empirical variance of the paired and the independent mini-batch gradient
//! estimators at a fixed model.
//!
//! With per-pair gradients `g_i` (real term) and `g'_i` (constructed term)
//! and batches drawn with replacement, the paired estimator
//! `mean_i (g_i + g'_i)` and the independent estimator
//! `mean_i g_i + mean_j g'_j` differ in variance exactly by
//! `(2 / B) tr Cov(g, g')`. The probe measures both variances by simulation
//! and reports that covariance term computed directly from the pairs. Each
//! trial draws one real-side batch `B` and one independent batch `B'`; the
//! paired estimator uses `(B, B)`, the independent one `(B, B')`.
//! Gradients are taken of the loss terms, i.e. the negatives of
//! `∇ ln θ(x)` and `∇ ln(1 - θ(x'))`; negating both leaves every variance
//! and covariance unchanged.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::model::{DetectorModel, Label};
use crate::error::{config_err, shape_err, Result};
use crate::rng;

/// Fewer trials than this are flagged as too few for the statistical checks.
pub const MIN_TRIALS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceReport {
    pub pairs: usize,
    pub params: usize,
    pub batch_size: usize,
    pub trials: usize,
    /// Trace of the covariance of the paired estimator over trials.
    pub var_paired: f64,
    /// Same for the independent estimator.
    pub var_indep: f64,
    /// `var_paired - var_indep`.
    pub cov_term: f64,
    /// `(2 / B) Σ_p Cov(g_p, g'_p)` over the pairs.
    pub cov_direct: f64,
    /// `var_paired / var_indep`.
    pub ratio: f64,
    /// `|cov_term - cov_direct| / |cov_direct|`.
    pub relative_gap: f64,
    pub low_trials: bool,
}

/// Running mean and summed squared deviation per coordinate.
struct Welford {
    n: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Welford {
    fn new(dim: usize) -> Self {
        Self { n: 0, mean: vec![0.0; dim], m2: vec![0.0; dim] }
    }

    fn push(&mut self, x: &[f64]) {
        self.n += 1;
        let n = self.n as f64;
        for ((m, s), v) in self.mean.iter_mut().zip(&mut self.m2).zip(x) {
            let d = v - *m;
            *m += d / n;
            *s += d * (v - *m);
        }
    }

    /// Sum of unbiased per-coordinate variances.
    fn total_variance(&self) -> f64 {
        self.m2.iter().sum::<f64>() / (self.n - 1) as f64
    }
}

/// Runs the probe on precomputed per-pair gradients.
pub fn variance_probe_gradients(g: &[Vec<f64>], g_prime: &[Vec<f64>], batch_size: usize, trials: usize, seed: u64) -> Result<VarianceReport> {
    let n = g.len();
    if n == 0 || g_prime.len() != n {
        return Err(shape_err!("need equally many real and constructed gradients, got {n} and {}", g_prime.len()));
    }
    if batch_size == 0 {
        return Err(config_err!("batch size must be at least 1"));
    }
    if trials < 2 {
        return Err(config_err!("at least two trials are needed for a variance"));
    }
    let dim = g[0].len();
    if let Some(i) = g.iter().chain(g_prime).position(|v| v.len() != dim) {
        return Err(shape_err!("gradient {i} has length {} instead of {dim}", g.iter().chain(g_prime).nth(i).map_or(0, |v| v.len())));
    }

    let mut rng = rng::stream(seed, rng::TAG_PROBE);
    let mut paired = Welford::new(dim);
    let mut indep = Welford::new(dim);
    let mut est_p = vec![0.0; dim];
    let mut est_i = vec![0.0; dim];
    let w = 1.0 / batch_size as f64;
    let mut real_idx = vec![0usize; batch_size];
    for _ in 0..trials {
        // both estimators share the real-side batch (common random numbers),
        // so their variance difference is measured with far less noise
        real_idx.iter_mut().for_each(|i| *i = rng.random_range(0..n));
        est_p.iter_mut().for_each(|v| *v = 0.0);
        est_i.iter_mut().for_each(|v| *v = 0.0);
        for &i in &real_idx {
            let j = rng.random_range(0..n);
            for (((ep, ei), a), (b, c)) in est_p.iter_mut().zip(est_i.iter_mut()).zip(&g[i]).zip(g_prime[i].iter().zip(&g_prime[j])) {
                *ep += w * (a + b);
                *ei += w * (a + c);
            }
        }
        paired.push(&est_p);
        indep.push(&est_i);
    }

    // population covariance over the pairs, matching sampling with replacement
    let nf = n as f64;
    let mut cov = 0.0;
    for p in 0..dim {
        let ma = g.iter().map(|v| v[p]).sum::<f64>() / nf;
        let mb = g_prime.iter().map(|v| v[p]).sum::<f64>() / nf;
        cov += g.iter().zip(g_prime).map(|(a, b)| (a[p] - ma) * (b[p] - mb)).sum::<f64>() / nf;
    }
    let cov_direct = 2.0 * w * cov;
    let (var_paired, var_indep) = (paired.total_variance(), indep.total_variance());
    let cov_term = var_paired - var_indep;
    Ok(VarianceReport {
        pairs: n,
        params: dim,
        batch_size,
        trials,
        var_paired,
        var_indep,
        cov_term,
        cov_direct,
        ratio: var_paired / var_indep,
        relative_gap: (cov_term - cov_direct).abs() / cov_direct.abs(),
        low_trials: trials < MIN_TRIALS,
    })
}

/// Real-term and fake-term gradient rows.
pub type GradientPairs = (Vec<Vec<f64>>, Vec<Vec<f64>>);

/// Per-example loss-term gradients for aligned real / constructed features.
pub fn pair_gradients<R: AsRef<[f64]>, S: AsRef<[f64]>>(model: &DetectorModel, real: &[R], fake: &[S]) -> Result<GradientPairs> {
    if real.len() != fake.len() {
        return Err(shape_err!("{} real but {} constructed examples; pairs must align", real.len(), fake.len()));
    }
    let g = real.iter().enumerate().map(|(i, x)| model.example_gradient(x.as_ref(), Label::Real).map_err(|e| e.at(i))).collect::<Result<_>>()?;
    let gp = fake.iter().enumerate().map(|(i, x)| model.example_gradient(x.as_ref(), Label::Fake).map_err(|e| e.at(i))).collect::<Result<_>>()?;
    Ok((g, gp))
}

/// Probe at a fixed model over aligned pairs `(real[i], fake[i])`.
pub fn variance_probe<R: AsRef<[f64]>, S: AsRef<[f64]>>(model: &DetectorModel, real: &[R], fake: &[S], batch_size: usize, trials: usize, seed: u64) -> Result<VarianceReport> {
    let (g, gp) = pair_gradients(model, real, fake)?;
    variance_probe_gradients(&g, &gp, batch_size, trials, seed)
}

/// Synthetic gradient pairs `g = z1`, `g' = ρ z1 + sqrt(1 - ρ²) z2` with
/// standard normal `z1, z2`, so each coordinate pair has correlation `ρ`
/// and equal unit variances.
pub fn synthetic_pairs(n: usize, dim: usize, rho: f64, seed: u64) -> Result<GradientPairs> {
    if !(-1.0..=1.0).contains(&rho) {
        return Err(config_err!("correlation {rho} outside [-1, 1]"));
    }
    let mut rng = rng::seeded(seed);
    let c = libm::sqrt(1.0 - rho * rho);
    let mut g = Vec::with_capacity(n);
    let mut gp = Vec::with_capacity(n);
    for _ in 0..n {
        let z1: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let z2: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        gp.push(z1.iter().zip(&z2).map(|(a, b)| rho * a + c * b).collect());
        g.push(z1);
    }
    Ok((g, gp))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_batch_and_misaligned_pairs_are_rejected() {
        let (g, gp) = synthetic_pairs(10, 3, 0.5, 1).unwrap();
        assert!(variance_probe_gradients(&g, &gp, 0, 100, 0).is_err());
        assert!(variance_probe_gradients(&g, &gp[..5], 4, 100, 0).is_err());
        assert!(synthetic_pairs(4, 2, 1.5, 0).is_err());
        let r = variance_probe_gradients(&g, &gp, 4, 100, 0).unwrap();
        assert!(r.low_trials);
    }

    #[test]
    fn identical_pairs_double_the_variance() {
        let (g, _) = synthetic_pairs(500, 4, 0.0, 3).unwrap();
        let r = variance_probe_gradients(&g, &g, 8, 20_000, 5).unwrap();
        assert!((r.ratio - 2.0).abs() < 0.1, "{r:?}");
    }
}
