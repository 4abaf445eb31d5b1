//! The detector head: a linear score or a one-hidden-layer ReLU network over
//! standardized features, squashed by a clamped sigmoid. Parameters are kept
//! in one flat vector so that gradients, SGD and the variance probe can treat
//! them uniformly.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, shape_err, Result};
use crate::linalg;

/// Default probability floor: predictions live in `[floor, 1 - floor]`.
pub const PROB_FLOOR: f64 = 1e-7;

/// Width of the hidden layer of the shallow network.
pub const HIDDEN: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Architecture {
    Linear,
    Mlp { hidden: usize },
}

impl Architecture {
    pub fn mlp() -> Self {
        Architecture::Mlp { hidden: HIDDEN }
    }

    pub fn param_count(self, input: usize) -> usize {
        match self {
            Architecture::Linear => input + 1,
            Architecture::Mlp { hidden } => hidden * input + 2 * hidden + 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Architecture::Linear => "linear",
            Architecture::Mlp { .. } => "mlp",
        }
    }
}

/// Per-feature affine map `z = (x - mean) * inv_std`, fit on training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub inv_std: Vec<f64>,
}

impl Standardizer {
    pub fn identity(dim: usize) -> Self {
        Self { mean: vec![0.0; dim], inv_std: vec![1.0; dim] }
    }

    /// Population mean and standard deviation per column; columns with
    /// (near) zero spread are centred but not scaled.
    pub fn fit<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let first = rows.first().ok_or_else(|| config_err!("cannot standardize an empty set"))?;
        let dim = first.as_ref().len();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; dim];
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != dim {
                return Err(shape_err!("row has length {} instead of {dim}", r.len()).at(i));
            }
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r.as_ref()).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let inv_std = var
            .iter()
            .map(|s| {
                let sd = libm::sqrt(s / n);
                if sd > 1e-12 {
                    1.0 / sd
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Self { mean, inv_std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.mean).zip(&self.inv_std).map(|((v, m), s)| (v - m) * s).collect()
    }
}

/// Which term of the objective an example contributes to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    /// Positive class, label 1.
    Real,
    /// Constructed negative, label 0.
    Fake,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorModel {
    pub architecture: Architecture,
    pub standardizer: Standardizer,
    pub prob_floor: f64,
    /// Linear: `[w (F), b]`. Mlp: `[W1 (H x F, row-major), b1 (H), w2 (H), b2]`.
    pub params: Vec<f64>,
}

#[inline]
fn sigmoid(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + libm::exp(-s))
    } else {
        let e = libm::exp(s);
        e / (1.0 + e)
    }
}

impl DetectorModel {
    pub fn zeros(architecture: Architecture, standardizer: Standardizer) -> Self {
        let n = architecture.param_count(standardizer.dim());
        Self { architecture, standardizer, prob_floor: PROB_FLOOR, params: vec![0.0; n] }
    }

    /// Linear heads start at zero. Hidden weights are drawn from
    /// `N(0, 2 / F)`, output weights from `N(0, 1 / H)`, biases are zero.
    pub fn init(architecture: Architecture, standardizer: Standardizer, rng: &mut impl Rng) -> Self {
        let mut m = Self::zeros(architecture, standardizer);
        if let Architecture::Mlp { hidden } = architecture {
            let f = m.input_dim();
            let s1 = libm::sqrt(2.0 / f as f64);
            let s2 = libm::sqrt(1.0 / hidden as f64);
            for w in &mut m.params[..hidden * f] {
                *w = s1 * rng.sample::<f64, _>(StandardNormal);
            }
            let w2 = hidden * f + hidden;
            for w in &mut m.params[w2..w2 + hidden] {
                *w = s2 * rng.sample::<f64, _>(StandardNormal);
            }
        }
        m
    }

    pub fn input_dim(&self) -> usize {
        self.standardizer.dim()
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn validate(&self) -> Result<()> {
        let want = self.architecture.param_count(self.input_dim());
        if self.params.len() != want {
            return Err(shape_err!("{} parameters for a {} head, expected {want}", self.params.len(), self.architecture.name()));
        }
        if self.standardizer.inv_std.len() != self.input_dim() {
            return Err(shape_err!("standardizer mean and scale lengths differ"));
        }
        if let Architecture::Mlp { hidden: 0 } = self.architecture {
            return Err(config_err!("hidden layer must have at least one unit"));
        }
        if !(self.prob_floor > 0.0 && self.prob_floor < 0.5) {
            return Err(config_err!("probability floor {} must lie in (0, 0.5)", self.prob_floor));
        }
        if self.params.iter().any(|p| !p.is_finite()) {
            return Err(config_err!("non-finite parameter"));
        }
        Ok(())
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(shape_err!("feature length {} does not match model input {}", x.len(), self.input_dim()));
        }
        Ok(())
    }

    /// Pre-sigmoid score.
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        Ok(self.score_std(&self.standardizer.apply(x)))
    }

    fn score_std(&self, z: &[f64]) -> f64 {
        let f = z.len();
        let p = &self.params;
        match self.architecture {
            Architecture::Linear => linalg::dot(&p[..f], z) + p[f],
            Architecture::Mlp { hidden } => {
                let (b1, w2, b2) = (hidden * f, hidden * f + hidden, hidden * f + 2 * hidden);
                let mut s = p[b2];
                for h in 0..hidden {
                    let a = linalg::dot(&p[h * f..(h + 1) * f], z) + p[b1 + h];
                    if a > 0.0 {
                        s += p[w2 + h] * a;
                    }
                }
                s
            }
        }
    }

    fn clamp(&self, p: f64) -> f64 {
        p.clamp(self.prob_floor, 1.0 - self.prob_floor)
    }

    /// Probability that `x` is real.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        Ok(self.clamp(sigmoid(self.score(x)?)))
    }

    /// Loss term of one example: `-ln θ(x)` for a real, `-ln(1 - θ(x))` for
    /// a fake.
    pub fn example_loss(&self, x: &[f64], label: Label) -> Result<f64> {
        let s = self.score(x)?;
        Ok(match label {
            Label::Real => -libm::log(self.clamp(sigmoid(s))),
            Label::Fake => -libm::log(self.clamp(sigmoid(-s))),
        })
    }

    /// Adds `weight * ∇(example loss)` into `out`. Clamped predictions have
    /// zero gradient.
    pub fn accumulate_gradient(&self, x: &[f64], label: Label, weight: f64, out: &mut [f64]) -> Result<()> {
        self.check(x)?;
        if out.len() != self.params.len() {
            return Err(shape_err!("gradient buffer has length {} instead of {}", out.len(), self.params.len()));
        }
        let z = self.standardizer.apply(x);
        let s = self.score_std(&z);
        let p = sigmoid(s);
        if p < self.prob_floor || p > 1.0 - self.prob_floor {
            return Ok(());
        }
        // d(loss)/d(score)
        let ds = weight
            * match label {
                Label::Real => -sigmoid(-s),
                Label::Fake => p,
            };
        let f = z.len();
        let params = &self.params;
        match self.architecture {
            Architecture::Linear => {
                for (o, v) in out[..f].iter_mut().zip(&z) {
                    *o += ds * v;
                }
                out[f] += ds;
            }
            Architecture::Mlp { hidden } => {
                let (b1, w2, b2) = (hidden * f, hidden * f + hidden, hidden * f + 2 * hidden);
                out[b2] += ds;
                for h in 0..hidden {
                    let a = linalg::dot(&params[h * f..(h + 1) * f], &z) + params[b1 + h];
                    if a > 0.0 {
                        out[w2 + h] += ds * a;
                        let dh = ds * params[w2 + h];
                        for (o, v) in out[h * f..(h + 1) * f].iter_mut().zip(&z) {
                            *o += dh * v;
                        }
                        out[b1 + h] += dh;
                    }
                }
            }
        }
        Ok(())
    }

    /// Gradient of one example's loss term.
    pub fn example_gradient(&self, x: &[f64], label: Label) -> Result<Vec<f64>> {
        let mut g = vec![0.0; self.params.len()];
        self.accumulate_gradient(x, label, 1.0, &mut g)?;
        Ok(g)
    }
}

fn mean_term<R: AsRef<[f64]>>(model: &DetectorModel, rows: &[R], label: Label) -> Result<f64> {
    let mut s = 0.0;
    for (i, r) in rows.iter().enumerate() {
        s += model.example_loss(r.as_ref(), label).map_err(|e| e.at(i))?;
    }
    Ok(s / rows.len() as f64)
}

/// Batch-mean cross-entropy: `-mean ln θ(real) - mean ln(1 - θ(fake))`.
pub fn loss<R: AsRef<[f64]>, S: AsRef<[f64]>>(model: &DetectorModel, real: &[R], fake: &[S]) -> Result<f64> {
    if real.is_empty() || fake.is_empty() {
        return Err(config_err!("loss needs at least one real and one fake example"));
    }
    Ok(mean_term(model, real, Label::Real)? + mean_term(model, fake, Label::Fake)?)
}

/// Analytic gradient of [`loss`] with respect to the flat parameter vector.
pub fn gradient<R: AsRef<[f64]>, S: AsRef<[f64]>>(model: &DetectorModel, real: &[R], fake: &[S]) -> Result<Vec<f64>> {
    if real.is_empty() || fake.is_empty() {
        return Err(config_err!("gradient needs a non-empty real and fake batch"));
    }
    let mut g = vec![0.0; model.param_count()];
    let wr = 1.0 / real.len() as f64;
    for (i, r) in real.iter().enumerate() {
        model.accumulate_gradient(r.as_ref(), Label::Real, wr, &mut g).map_err(|e| e.at(i))?;
    }
    let wf = 1.0 / fake.len() as f64;
    for (i, r) in fake.iter().enumerate() {
        model.accumulate_gradient(r.as_ref(), Label::Fake, wf, &mut g).map_err(|e| e.at(i))?;
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear(w0: f64, bias: f64, dim: usize) -> DetectorModel {
        let mut m = DetectorModel::zeros(Architecture::Linear, Standardizer::identity(dim));
        m.params[0] = w0;
        m.params[dim] = bias;
        m
    }

    #[test]
    fn zero_model_predicts_half_and_uniform_loss() {
        let m = DetectorModel::zeros(Architecture::mlp(), Standardizer::identity(4));
        assert_eq!(m.predict(&[1.0, 2.0, 3.0, 4.0]).unwrap(), 0.5);
        let l = loss(&m, &[[0.0; 4]], &[[1.0; 4]]).unwrap();
        assert!((l - 2.0 * core::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn hand_sigmoid_and_bias_monotonicity() {
        let m = linear(1.0, 0.0, 3);
        assert!((m.predict(&[2.0, 5.0, -1.0]).unwrap() - 0.880_797_077_977_882_3).abs() < 1e-12);
        let x = [0.3, -0.2, 0.1];
        let mut last = 0.0;
        for b in [-2.0, -1.0, 0.0, 1.0, 2.0] {
            let p = linear(1.0, b, 3).predict(&x).unwrap();
            assert!(p > last);
            last = p;
        }
    }

    #[test]
    fn prediction_is_clamped_and_saturated_gradient_vanishes() {
        let m = linear(1.0, 0.0, 1);
        assert_eq!(m.predict(&[100.0]).unwrap(), 1.0 - PROB_FLOOR);
        assert_eq!(m.predict(&[-100.0]).unwrap(), PROB_FLOOR);
        assert!(m.example_gradient(&[100.0], Label::Real).unwrap().iter().all(|&g| g == 0.0));
        let g = gradient(&m, &[[30.0]], &[[-30.0]]).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn duplicated_batch_has_same_gradient() {
        let m = linear(0.5, 0.1, 2);
        let a = gradient(&m, &[[1.0, 2.0]], &[[0.5, -1.0]]).unwrap();
        let b = gradient(&m, &[[1.0, 2.0]; 3], &[[0.5, -1.0]; 2]).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn errors() {
        let m = linear(1.0, 0.0, 2);
        assert!(m.predict(&[1.0]).is_err());
        assert!(loss(&m, &[[0.0; 2]; 0], &[[1.0; 2]]).is_err());
        assert!(gradient(&m, &[[0.0; 2]], &[[1.0; 2]; 0]).is_err());
        assert!(Standardizer::fit::<Vec<f64>>(&[]).is_err());
        let mut bad = m.clone();
        bad.params.pop();
        assert!(bad.validate().is_err());
    }

    #[test]
    fn standardizer_centres_and_scales() {
        let s = Standardizer::fit(&[[1.0, 5.0], [3.0, 5.0]]).unwrap();
        assert_eq!(s.apply(&[1.0, 5.0]), vec![-1.0, 0.0]);
        assert_eq!(s.apply(&[3.0, 7.0]), vec![1.0, 2.0]);
    }
}
