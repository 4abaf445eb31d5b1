//! Accuracy at a fixed threshold, balanced accuracy and average precision,
//! with real images as the positive class.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::model::DetectorModel;
use crate::error::{config_err, shape_err, Result};

pub const THRESHOLD: f64 = 0.5;

/// Average precision `Σ (R_n - R_{n-1}) P_n` over the distinct score
/// thresholds in decreasing order; examples with equal scores enter
/// together. `labels[i]` is true for positives.
pub fn average_precision(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(shape_err!("{} scores but {} labels", scores.len(), labels.len()));
    }
    if let Some(i) = scores.iter().position(|s| s.is_nan()) {
        return Err(config_err!("score {i} is NaN"));
    }
    let positives = labels.iter().filter(|&&l| l).count();
    if positives == 0 || positives == labels.len() {
        return Err(config_err!("average precision is undefined without both classes"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut ap = 0.0;
    let mut recall_prev = 0.0;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let recall = tp as f64 / positives as f64;
        let precision = tp as f64 / (tp + fp) as f64;
        ap += (recall - recall_prev) * precision;
        recall_prev = recall;
    }
    Ok(ap)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n_real: usize,
    pub n_fake: usize,
    pub threshold: f64,
    /// Reals scored at or above the threshold.
    pub true_positive: usize,
    pub false_negative: usize,
    /// Fakes scored below the threshold.
    pub true_negative: usize,
    pub false_positive: usize,
    pub accuracy: f64,
    pub balanced_accuracy: f64,
    /// `None` when the evaluation set lacks one of the classes.
    pub average_precision: Option<f64>,
    /// Set when only one class is present; accuracy is then all there is.
    pub single_class: bool,
}

impl MetricsReport {
    pub fn from_scores(real_scores: &[f64], fake_scores: &[f64]) -> Result<Self> {
        let (n_real, n_fake) = (real_scores.len(), fake_scores.len());
        if n_real + n_fake == 0 {
            return Err(config_err!("cannot evaluate an empty set"));
        }
        let tp = real_scores.iter().filter(|&&s| s >= THRESHOLD).count();
        let tn = fake_scores.iter().filter(|&&s| s < THRESHOLD).count();
        let accuracy = (tp + tn) as f64 / (n_real + n_fake) as f64;
        let mut recalls = Vec::with_capacity(2);
        if n_real > 0 {
            recalls.push(tp as f64 / n_real as f64);
        }
        if n_fake > 0 {
            recalls.push(tn as f64 / n_fake as f64);
        }
        let balanced_accuracy = recalls.iter().sum::<f64>() / recalls.len() as f64;
        let single_class = n_real == 0 || n_fake == 0;
        let average_precision = if single_class {
            None
        } else {
            let scores: Vec<f64> = real_scores.iter().chain(fake_scores).copied().collect();
            let labels: Vec<bool> = (0..n_real + n_fake).map(|i| i < n_real).collect();
            Some(average_precision(&scores, &labels)?)
        };
        Ok(Self {
            n_real,
            n_fake,
            threshold: THRESHOLD,
            true_positive: tp,
            false_negative: n_real - tp,
            true_negative: tn,
            false_positive: n_fake - tn,
            accuracy,
            balanced_accuracy,
            average_precision,
            single_class,
        })
    }
}

/// Scores every example with the model and summarizes.
pub fn evaluate<R: AsRef<[f64]>, S: AsRef<[f64]>>(model: &DetectorModel, real: &[R], fake: &[S]) -> Result<MetricsReport> {
    let score = |rows: &[&[f64]]| -> Result<Vec<f64>> {
        rows.iter().enumerate().map(|(i, r)| model.predict(r).map_err(|e| e.at(i))).collect()
    };
    let real: Vec<&[f64]> = real.iter().map(|r| r.as_ref()).collect();
    let fake: Vec<&[f64]> = fake.iter().map(|r| r.as_ref()).collect();
    MetricsReport::from_scores(&score(&real)?, &score(&fake)?)
}
