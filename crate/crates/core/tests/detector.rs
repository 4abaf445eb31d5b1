use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tracelab_core::detector::{
    average_precision, evaluate, gradient, loss, synthetic_pairs, train, variance_probe, variance_probe_gradients,
    Architecture, DetectorModel, Label, MetricsReport, Mode, Standardizer, TrainConfig, MIN_TRIALS,
};

/// AP by recounting the whole set at every distinct threshold.
fn brute_force_ap(scores: &[f64], labels: &[bool]) -> f64 {
    let positives = labels.iter().filter(|&&l| l).count() as f64;
    let mut ts = scores.to_vec();
    ts.sort_by(|a, b| b.partial_cmp(a).unwrap());
    ts.dedup();
    let (mut ap, mut prev) = (0.0, 0.0);
    for t in ts {
        let tp = scores.iter().zip(labels).filter(|(s, l)| **s >= t && **l).count() as f64;
        let k = scores.iter().filter(|s| **s >= t).count() as f64;
        ap += (tp / positives - prev) * tp / k;
        prev = tp / positives;
    }
    ap
}

fn gaussian_rows(rng: &mut ChaCha8Rng, n: usize, dim: usize, shift: f64) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0) + shift).collect()).collect()
}

#[test]
fn average_precision_hand_cases() {
    assert!((average_precision(&[0.9, 0.8, 0.3], &[true, false, true]).unwrap() - 5.0 / 6.0).abs() < 1e-15);
    assert_eq!(average_precision(&[0.9, 0.1], &[false, true]).unwrap(), 0.5);
    // a full tie is a single threshold: precision = prevalence
    assert_eq!(average_precision(&[0.5; 4], &[true, false, false, false]).unwrap(), 0.25);
    assert!(average_precision(&[0.2, 0.3], &[true, true]).is_err());
    assert!(average_precision(&[0.2], &[true, false]).is_err());
}

#[test]
fn metrics_report_counts() {
    let m = MetricsReport::from_scores(&[0.9, 0.6, 0.4], &[0.1, 0.5]).unwrap();
    assert_eq!((m.true_positive, m.false_negative, m.true_negative, m.false_positive), (2, 1, 1, 1));
    assert_eq!(m.accuracy, 3.0 / 5.0);
    assert_eq!(m.balanced_accuracy, (2.0 / 3.0 + 0.5) / 2.0);
    assert_eq!(m.average_precision, Some(brute_force_ap(&[0.9, 0.6, 0.4, 0.1, 0.5], &[true, true, true, false, false])));
    let single = MetricsReport::from_scores(&[0.9, 0.2], &[]).unwrap();
    assert!(single.single_class && single.average_precision.is_none());
    assert_eq!(single.accuracy, 0.5);
}

#[test]
fn gradients_match_central_differences_without_standardization() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for arch in [Architecture::Linear, Architecture::Mlp { hidden: 7 }] {
        let real = gaussian_rows(&mut rng, 4, 5, 0.3);
        let fake = gaussian_rows(&mut rng, 3, 5, -0.3);
        let mut model = DetectorModel::init(arch, Standardizer::identity(5), &mut rng);
        model.params.iter_mut().for_each(|p| *p += rng.random_range(-0.2..0.2));
        let g = gradient(&model, &real, &fake).unwrap();
        for i in 0..g.len() {
            let orig = model.params[i];
            model.params[i] = orig + 1e-6;
            let up = loss(&model, &real, &fake).unwrap();
            model.params[i] = orig - 1e-6;
            let down = loss(&model, &real, &fake).unwrap();
            model.params[i] = orig;
            let fd = (up - down) / 2e-6;
            assert!((fd - g[i]).abs() <= 1e-6 * (1.0 + g[i].abs()), "{} param {i}: {fd} vs {}", arch.name(), g[i]);
        }
    }
}

#[test]
fn per_example_terms_sum_to_the_batch_loss() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let real = gaussian_rows(&mut rng, 5, 6, 0.0);
    let fake = gaussian_rows(&mut rng, 2, 6, 0.0);
    let model = DetectorModel::init(Architecture::mlp(), Standardizer::fit(&real).unwrap(), &mut rng);
    let want = real.iter().map(|x| model.example_loss(x, Label::Real).unwrap()).sum::<f64>() / 5.0
        + fake.iter().map(|x| model.example_loss(x, Label::Fake).unwrap()).sum::<f64>() / 2.0;
    assert!((loss(&model, &real, &fake).unwrap() - want).abs() < 1e-12);
    let p = model.predict(&real[0]).unwrap();
    assert!((model.example_loss(&real[0], Label::Real).unwrap() + p.ln()).abs() < 1e-12);
}

#[test]
fn training_separates_shifted_clouds_for_both_architectures() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let real = gaussian_rows(&mut rng, 120, 8, 0.6);
    let fake = gaussian_rows(&mut rng, 90, 8, -0.6);
    let (test_r, test_f) = (gaussian_rows(&mut rng, 50, 8, 0.6), gaussian_rows(&mut rng, 50, 8, -0.6));
    for arch in [Architecture::Linear, Architecture::mlp()] {
        let cfg = TrainConfig { architecture: arch, epochs: 30, ..Default::default() };
        let out = train(&real, &fake, &cfg).unwrap();
        assert_eq!(out.loss_trace.len(), 30);
        assert!(out.loss_trace[29] < 0.5 * out.initial_loss);
        assert_eq!(out.steps, 30 * 120usize.div_ceil(32));
        let m = evaluate(&out.model, &test_r, &test_f).unwrap();
        assert!(m.accuracy > 0.95, "{}: {}", arch.name(), m.accuracy);
        let again = train(&real, &fake, &cfg).unwrap();
        assert_eq!(again, out);
        let reseeded = train(&real, &fake, &TrainConfig { seed: 8, ..cfg.clone() }).unwrap();
        assert_ne!(reseeded.model.params, out.model.params);
    }
    let paired = TrainConfig { mode: Mode::Paired, ..Default::default() };
    assert!(train(&real, &fake, &paired).is_err());
    assert!(train(&real[..90], &fake, &paired).is_ok());
}

#[test]
fn model_json_roundtrip_is_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let rows = gaussian_rows(&mut rng, 10, 4, 0.0);
    let model = DetectorModel::init(Architecture::mlp(), Standardizer::fit(&rows).unwrap(), &mut rng);
    let json = serde_json::to_string(&model).unwrap();
    let back: DetectorModel = serde_json::from_str(&json).unwrap();
    assert_eq!(back, model);
}

/// Closed-form variances for batches drawn uniformly with replacement:
/// Var(paired) = tr Cov(g + g') / B, Var(indep) = (tr Cov g + tr Cov g') / B.
fn closed_form(g: &[Vec<f64>], gp: &[Vec<f64>], b: usize) -> (f64, f64) {
    let n = g.len() as f64;
    let trace = |rows: &Vec<Vec<f64>>| {
        let dim = rows[0].len();
        (0..dim)
            .map(|d| {
                let m = rows.iter().map(|r| r[d]).sum::<f64>() / n;
                rows.iter().map(|r| (r[d] - m).powi(2)).sum::<f64>() / n
            })
            .sum::<f64>()
    };
    let sum: Vec<Vec<f64>> = g.iter().zip(gp).map(|(a, c)| a.iter().zip(c).map(|(x, y)| x + y).collect()).collect();
    (trace(&sum) / b as f64, (trace(&g.to_vec()) + trace(&gp.to_vec())) / b as f64)
}

#[test]
fn probe_matches_closed_form_variances() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for sign in [1.0, -1.0] {
        let g: Vec<Vec<f64>> = (0..40).map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let gp: Vec<Vec<f64>> = g
            .iter()
            .map(|r| r.iter().map(|v| sign * 0.8 * v + 0.3 * rng.random_range(-1.0..1.0)).collect())
            .collect();
        let (paired, indep) = closed_form(&g, &gp, 8);
        let r = variance_probe_gradients(&g, &gp, 8, 60_000, 17).unwrap();
        assert!((r.var_paired / paired - 1.0).abs() < 0.03, "paired {} vs {paired}", r.var_paired);
        assert!((r.var_indep / indep - 1.0).abs() < 0.03, "indep {} vs {indep}", r.var_indep);
        assert!((r.cov_direct - (paired - indep)).abs() < 1e-12);
        assert_eq!(r.cov_term, r.var_paired - r.var_indep);
        assert!(!r.low_trials);
    }
    let few = variance_probe_gradients(&vec![vec![1.0]; 4], &vec![vec![0.0]; 4], 2, MIN_TRIALS - 1, 1).unwrap();
    assert!(few.low_trials);
}

#[test]
fn synthetic_ratio_is_one_plus_rho() {
    for (i, rho) in [0.0, 0.5, 0.9].into_iter().enumerate() {
        let (g, gp) = synthetic_pairs(4096, 16, rho, i as u64).unwrap();
        let r = variance_probe_gradients(&g, &gp, 32, 100_000, 40 + i as u64).unwrap();
        let tol = if rho == 0.0 { 0.05 } else { 0.10 };
        assert!((r.ratio - (1.0 + rho)).abs() <= tol * (1.0 + rho), "rho {rho}: ratio {}", r.ratio);
    }
}

#[test]
fn model_probe_uses_the_model_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let real = gaussian_rows(&mut rng, 30, 4, 0.2);
    let fake: Vec<Vec<f64>> = real.iter().map(|r| r.iter().map(|v| v + 0.05 * rng.random_range(-1.0..1.0)).collect()).collect();
    let model = DetectorModel::init(Architecture::Linear, Standardizer::fit(&real).unwrap(), &mut rng);
    let r = variance_probe(&model, &real, &fake, 4, 20_000, 3).unwrap();
    assert_eq!((r.pairs, r.params, r.batch_size), (30, 5, 4));
    assert!(r.var_paired > 0.0 && r.var_indep > 0.0);
    assert!(r.relative_gap < 0.15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ap_equals_threshold_enumeration(raw in prop::collection::vec((0u8..12, any::<bool>()), 2..100)) {
        prop_assume!(raw.iter().any(|r| r.1) && raw.iter().any(|r| !r.1));
        let scores: Vec<f64> = raw.iter().map(|r| r.0 as f64 / 11.0).collect();
        let labels: Vec<bool> = raw.iter().map(|r| r.1).collect();
        let ap = average_precision(&scores, &labels).unwrap();
        prop_assert!((ap - brute_force_ap(&scores, &labels)).abs() <= 1e-9);
        prop_assert!(ap > 0.0 && ap <= 1.0 + 1e-12);
    }

    #[test]
    fn metrics_are_bounded_and_consistent(real in prop::collection::vec(0.0f64..1.0, 0..40), fake in prop::collection::vec(0.0f64..1.0, 1..40)) {
        let m = MetricsReport::from_scores(&real, &fake).unwrap();
        prop_assert_eq!(m.true_positive + m.false_negative, real.len());
        prop_assert_eq!(m.true_negative + m.false_positive, fake.len());
        prop_assert!((0.0..=1.0).contains(&m.accuracy) && (0.0..=1.0).contains(&m.balanced_accuracy));
        prop_assert_eq!(m.single_class, real.is_empty());
    }

    #[test]
    fn predictions_are_clamped_probabilities(seed: u64, scale in 0.0f64..1e3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut model = DetectorModel::init(Architecture::mlp(), Standardizer::identity(3), &mut rng);
        model.params.iter_mut().for_each(|p| *p *= scale);
        let x: Vec<f64> = (0..3).map(|_| rng.random_range(-5.0..5.0)).collect();
        let p = model.predict(&x).unwrap();
        prop_assert!(p >= model.prob_floor && p <= 1.0 - model.prob_floor);
    }
}
