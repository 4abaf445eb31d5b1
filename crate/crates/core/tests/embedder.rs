use std::f64::consts::PI;

use tracelab_core::corpus::{generate_corpus, CorpusConfig};
use tracelab_core::embedder::{band_of, hist_bin, project_3d, Embedder, DCT_BANDS, FEATURE_DIM, HIST_BINS};
use tracelab_core::Image;

fn corpus(count: usize, size: usize, seed: u64) -> Vec<Image> {
    generate_corpus(&CorpusConfig { count, size, seed, ..Default::default() }).unwrap()
}

/// Orthonormal 2-D DCT-II of an 8x8 block straight from the definition.
fn dct2(block: &[f64; 64]) -> [f64; 64] {
    let c = |k: usize| if k == 0 { (1.0f64 / 8.0).sqrt() } else { (2.0f64 / 8.0).sqrt() };
    let mut out = [0.0; 64];
    for u in 0..8 {
        for v in 0..8 {
            let mut s = 0.0;
            for y in 0..8 {
                for x in 0..8 {
                    s += block[y * 8 + x]
                        * ((2 * y + 1) as f64 * u as f64 * PI / 16.0).cos()
                        * ((2 * x + 1) as f64 * v as f64 * PI / 16.0).cos();
                }
            }
            out[u * 8 + v] = c(u) * c(v) * s;
        }
    }
    out
}

#[test]
fn spectral_and_residual_features_match_direct_computation() {
    let embedder = Embedder::new();
    for img in corpus(3, 32, 4) {
        let f = embedder.embed(&img).unwrap();
        let (h, w) = (img.height(), img.width());
        let luma: Vec<f64> = (0..h * w)
            .map(|i| 0.299 * img.as_slice()[3 * i] + 0.587 * img.as_slice()[3 * i + 1] + 0.114 * img.as_slice()[3 * i + 2])
            .collect();
        let mut sizes = [0usize; DCT_BANDS];
        for u in 0..8 {
            for v in 0..8 {
                sizes[band_of(u, v)] += 1;
            }
        }
        let mut energies: Vec<Vec<f64>> = vec![Vec::new(); DCT_BANDS];
        for by in 0..h / 8 {
            for bx in 0..w / 8 {
                let mut block = [0.0; 64];
                for y in 0..8 {
                    for x in 0..8 {
                        block[y * 8 + x] = luma[(by * 8 + y) * w + bx * 8 + x];
                    }
                }
                let coef = dct2(&block);
                let mut e = [0.0; DCT_BANDS];
                for u in 0..8 {
                    for v in 0..8 {
                        e[band_of(u, v)] += coef[u * 8 + v].powi(2);
                    }
                }
                for b in 0..DCT_BANDS {
                    energies[b].push(e[b] / sizes[b] as f64);
                }
            }
        }
        for b in 0..DCT_BANDS {
            let n = energies[b].len() as f64;
            let mean = energies[b].iter().sum::<f64>() / n;
            let sd = (energies[b].iter().map(|e| (e - mean).powi(2)).sum::<f64>() / n).sqrt();
            assert!((f[b] - mean).abs() < 1e-12 * (1.0 + mean), "band {b} mean");
            assert!((f[DCT_BANDS + b] - sd).abs() < 1e-12 * (1.0 + sd), "band {b} sd");
        }

        let mut hist = [0.0; HIST_BINS];
        let mut count = 0.0;
        for y in 1..h - 1 {
            for x in 1..w - 1 {
                let r = luma[(y - 1) * w + x] + luma[(y + 1) * w + x] + luma[y * w + x - 1] + luma[y * w + x + 1]
                    - 4.0 * luma[y * w + x];
                hist[hist_bin(r)] += 1.0;
                count += 1.0;
            }
        }
        let offset = 2 * DCT_BANDS;
        for (k, v) in hist.iter().enumerate() {
            assert!((f[offset + k] - v / count).abs() < 1e-15);
        }
        assert!((f[offset..offset + HIST_BINS].iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn band_and_bin_edges() {
    assert_eq!(band_of(0, 0), 0);
    assert_eq!(band_of(7, 7), DCT_BANDS - 1);
    assert_eq!(hist_bin(-5.0), 0);
    assert_eq!(hist_bin(1.0), HIST_BINS - 1);
    assert_eq!(hist_bin(0.0), HIST_BINS / 2);
}

#[test]
fn thumbnail_projection_is_linear_at_native_size() {
    // at 16x16 the thumbnail is the luminance itself, so the projection
    // block is linear in the image
    let embedder = Embedder::new();
    let c = corpus(2, 16, 8);
    let mid: Vec<f64> = c[0].as_slice().iter().zip(c[1].as_slice()).map(|(a, b)| 0.5 * (a + b)).collect();
    let mid = Image::new(16, 16, mid).unwrap();
    let (fa, fb, fm) = (embedder.embed(&c[0]).unwrap(), embedder.embed(&c[1]).unwrap(), embedder.embed(&mid).unwrap());
    for k in 2 * DCT_BANDS + HIST_BINS..FEATURE_DIM {
        assert!((fm[k] - 0.5 * (fa[k] + fb[k])).abs() < 1e-12);
    }
}

#[test]
fn embedding_is_deterministic_and_batch_preserves_order() {
    let c = corpus(4, 32, 2);
    let a = Embedder::new();
    let b = Embedder::new();
    assert_eq!(a.spec_hash(), b.spec_hash());
    let batch = a.embed_batch(&c).unwrap();
    for (x, f) in c.iter().zip(&batch) {
        assert_eq!(b.embed(x).unwrap(), *f);
    }
    assert!(batch.iter().all(|f| f.len() == FEATURE_DIM));
}

fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for _ in 0..60 {
        let off: f64 = (0..n).map(|i| (0..n).filter(|&j| j != i).map(|j| a[i][j] * a[i][j]).sum::<f64>()).sum();
        if off < 1e-28 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = if theta == 0.0 { 1.0 } else { theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt()) };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (kp, kq) = (a[k][p], a[k][q]);
                    a[k][p] = c * kp - s * kq;
                    a[k][q] = s * kp + c * kq;
                }
                for k in 0..n {
                    let (pk, qk) = (a[p][k], a[q][k]);
                    a[p][k] = c * pk - s * qk;
                    a[q][k] = s * pk + c * qk;
                }
            }
        }
    }
    let mut v: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    v.sort_by(|x, y| y.partial_cmp(x).unwrap());
    v
}

#[test]
fn projection_variances_are_the_top_eigenvalues() {
    let embedder = Embedder::new();
    let feats = embedder.embed_batch(&corpus(40, 32, 6)).unwrap();
    let proj = project_3d(&feats).unwrap();
    let n = feats.len() as f64;
    let mean: Vec<f64> = (0..FEATURE_DIM).map(|d| feats.iter().map(|f| f[d]).sum::<f64>() / n).collect();
    let cov: Vec<Vec<f64>> = (0..FEATURE_DIM)
        .map(|i| (0..FEATURE_DIM).map(|j| feats.iter().map(|f| (f[i] - mean[i]) * (f[j] - mean[j])).sum::<f64>() / n).collect())
        .collect();
    let eig = jacobi_eigenvalues(cov);
    for k in 0..3 {
        assert!((proj.variances[k] - eig[k]).abs() <= 1e-9 * eig[0], "component {k}");
        // the points' spread along each axis is that component's variance
        let axis_var = proj.points.iter().map(|p| p[k] * p[k]).sum::<f64>() / n;
        assert!((axis_var - eig[k]).abs() <= 1e-9 * eig[0]);
    }
    assert!(proj.variances[0] >= proj.variances[1] && proj.variances[1] >= proj.variances[2]);
    assert!((proj.total_variance - eig.iter().sum::<f64>()).abs() < 1e-9 * proj.total_variance);
    assert_eq!(project_3d(&feats).unwrap(), proj);
}

#[test]
fn projection_of_a_planar_set_is_rank_deficient() {
    let rows: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, (i * i) as f64, 0.0, 0.0]).collect();
    let proj = project_3d(&rows).unwrap();
    assert!(proj.rank_deficient);
    assert!(proj.points.iter().all(|p| p[2] == 0.0));
    assert!(project_3d(&rows[..3]).is_err());
}
