//! Discrete-token channel: non-overlapping patches are replaced by their
//! nearest entry of a k-means codebook.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, shape_err, Result};
use crate::image::{Image, CHANNELS};
use crate::rng;

pub const MAX_ITERATIONS: usize = 100;
pub const TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenChannel {
    patch_size: usize,
    codebook: Vec<Vec<f64>>,
    /// Lloyd iterations run during fitting.
    iterations: usize,
    /// Mean squared patch-to-centroid distance at the end of fitting.
    inertia: f64,
}

/// Flattens the non-overlapping `p x p` patches of `x` in raster order;
/// patch entries are ordered `(dy, dx, c)`.
pub fn patches(x: &Image, p: usize) -> Result<Vec<Vec<f64>>> {
    if p == 0 || !x.height().is_multiple_of(p) || !x.width().is_multiple_of(p) {
        return Err(shape_err!(
            "image {}x{} is not divisible into {p}x{p} patches",
            x.height(),
            x.width()
        ));
    }
    let mut out = Vec::with_capacity((x.height() / p) * (x.width() / p));
    for py in 0..x.height() / p {
        for px in 0..x.width() / p {
            let mut v = Vec::with_capacity(p * p * CHANNELS);
            for dy in 0..p {
                for dx in 0..p {
                    for c in 0..CHANNELS {
                        v.push(x.get(py * p + dy, px * p + dx, c));
                    }
                }
            }
            out.push(v);
        }
    }
    Ok(out)
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    sq_dist_below(a, b, f64::INFINITY)
}

/// Squared distance with four interleaved partial sums. Once a running total
/// exceeds `bound` the (partial, already too large) total is returned.
fn sq_dist_below(a: &[f64], b: &[f64], bound: f64) -> f64 {
    let mut acc = [0.0; 4];
    let mut total = 0.0;
    let (ca, cb) = (a.chunks_exact(16), b.chunks_exact(16));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for i in 0..16 {
            let d = x[i] - y[i];
            acc[i % 4] += d * d;
        }
        total = (acc[0] + acc[1]) + (acc[2] + acc[3]);
        if total > bound {
            return total;
        }
    }
    for (x, y) in ra.iter().zip(rb) {
        let d = x - y;
        total += d * d;
    }
    total
}

/// Index and squared distance of the nearest centroid; ties go to the lowest
/// index.
pub fn nearest(codebook: &[Vec<f64>], v: &[f64]) -> (usize, f64) {
    nearest_from(codebook, v, 0)
}

/// [`nearest`], evaluating centroid `hint` first so that the partial-sum
/// cutoff prunes the others early.
fn nearest_from(codebook: &[Vec<f64>], v: &[f64], hint: usize) -> (usize, f64) {
    let mut best = (hint, sq_dist(&codebook[hint], v));
    for (i, c) in codebook.iter().enumerate() {
        if i == hint {
            continue;
        }
        let d = sq_dist_below(c, v, best.1);
        if d < best.1 || (d == best.1 && i < best.0) {
            best = (i, d);
        }
    }
    best
}

#[derive(Debug, Clone)]
pub struct KMeans {
    pub centroids: Vec<Vec<f64>>,
    pub assignment: Vec<usize>,
    pub inertia: f64,
    pub iterations: usize,
}

/// Seeded k-means++ initialization followed by Lloyd iterations. Stops when
/// no assignment changes, when the relative inertia decrease drops below
/// `tol`, or after `max_iter` updates.
pub fn kmeans(
    points: &[Vec<f64>],
    k: usize,
    seed: u64,
    max_iter: usize,
    tol: f64,
) -> Result<KMeans> {
    let n = points.len();
    if k == 0 || k > n {
        return Err(config_err!(
            "codebook size {k} must lie in 1..={n} (number of patches)"
        ));
    }
    let mut rng = rng::seeded(seed);

    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut chosen = vec![false; n];
    let first = rng.random_range(0..n);
    chosen[first] = true;
    centroids.push(points[first].clone());
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &d) in d2.iter().enumerate() {
                if d > 0.0 {
                    acc += d;
                    pick = Some(i);
                    if acc > target {
                        break;
                    }
                }
            }
            pick.unwrap_or(0)
        } else {
            chosen.iter().position(|&c| !c).unwrap_or(0)
        };
        chosen[pick] = true;
        centroids.push(points[pick].clone());
        let c = centroids.last().unwrap();
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, c));
        }
    }

    let dim = points[0].len();
    let mut assignment = vec![0usize; n];
    let mut dists = vec![0.0; n];
    let assign =
        |centroids: &[Vec<f64>], assignment: &mut [usize], dists: &mut [f64]| -> (bool, f64) {
            let mut changed = false;
            let mut inertia = 0.0;
            for (i, p) in points.iter().enumerate() {
                let (j, d) = nearest_from(centroids, p, assignment[i]);
                if assignment[i] != j {
                    changed = true;
                    assignment[i] = j;
                }
                dists[i] = d;
                inertia += d;
            }
            (changed, inertia)
        };
    let (_, mut inertia) = assign(&centroids, &mut assignment, &mut dists);
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &a) in points.iter().zip(&assignment) {
            counts[a] += 1;
            for (s, v) in sums[a].iter_mut().zip(p) {
                *s += v;
            }
        }
        let mut taken = vec![false; n];
        for j in 0..k {
            if counts[j] > 0 {
                let inv = 1.0 / counts[j] as f64;
                centroids[j] = sums[j].iter().map(|s| s * inv).collect();
            } else {
                // re-seed an empty cluster with the worst-fitted point
                let mut far = None;
                for i in 0..n {
                    if !taken[i] && far.is_none_or(|f: usize| dists[i] > dists[f]) {
                        far = Some(i);
                    }
                }
                if let Some(f) = far {
                    taken[f] = true;
                    centroids[j] = points[f].clone();
                }
            }
        }
        let prev = inertia;
        let (changed, now) = assign(&centroids, &mut assignment, &mut dists);
        inertia = now;
        if !changed || prev - now <= tol * prev {
            break;
        }
    }
    Ok(KMeans {
        centroids,
        assignment,
        inertia,
        iterations,
    })
}

/// Fits a `k`-entry codebook over every patch of every corpus image.
pub fn fit_token(corpus: &[Image], patch_size: usize, k: usize, seed: u64) -> Result<TokenChannel> {
    if corpus.is_empty() {
        return Err(config_err!("cannot fit a codebook on an empty corpus"));
    }
    let mut points = Vec::new();
    for (i, im) in corpus.iter().enumerate() {
        points.extend(patches(im, patch_size).map_err(|e| e.at(i))?);
    }
    if k > points.len() {
        return Err(config_err!(
            "codebook size {k} exceeds the {} available patches",
            points.len()
        ));
    }
    let km = kmeans(&points, k, seed, MAX_ITERATIONS, TOLERANCE)?;
    Ok(TokenChannel {
        patch_size,
        codebook: km.centroids,
        iterations: km.iterations,
        inertia: km.inertia / points.len() as f64,
    })
}

impl TokenChannel {
    pub fn from_codebook(patch_size: usize, codebook: Vec<Vec<f64>>) -> Result<Self> {
        let ch = Self {
            patch_size,
            codebook,
            iterations: 0,
            inertia: f64::NAN,
        };
        ch.validate()?;
        Ok(ch)
    }

    pub fn patch_size(&self) -> usize {
        self.patch_size
    }

    pub fn codebook(&self) -> &[Vec<f64>] {
        &self.codebook
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn inertia(&self) -> f64 {
        self.inertia
    }

    /// Codebook indices of every patch (the token map).
    pub fn encode(&self, x: &Image) -> Result<Vec<usize>> {
        Ok(patches(x, self.patch_size)?
            .iter()
            .map(|p| nearest(&self.codebook, p).0)
            .collect())
    }

    /// Replaces each patch with its nearest centroid, then clamps.
    pub fn roundtrip(&self, x: &Image) -> Result<Image> {
        let tokens = self.encode(x)?;
        let p = self.patch_size;
        let per_row = x.width() / p;
        let mut data = vec![0.0; x.len()];
        for (t, &code) in tokens.iter().enumerate() {
            let (py, px) = (t / per_row, t % per_row);
            let centroid = &self.codebook[code];
            for dy in 0..p {
                for dx in 0..p {
                    for c in 0..CHANNELS {
                        let dst = ((py * p + dy) * x.width() + px * p + dx) * CHANNELS + c;
                        data[dst] = centroid[(dy * p + dx) * CHANNELS + c];
                    }
                }
            }
        }
        Image::from_clamped(x.height(), x.width(), data)
    }

    pub fn validate(&self) -> Result<()> {
        let len = self.patch_size * self.patch_size * CHANNELS;
        if self.patch_size == 0 || self.codebook.is_empty() {
            return Err(config_err!(
                "token channel needs a positive patch size and at least one centroid"
            ));
        }
        if self
            .codebook
            .iter()
            .any(|c| c.len() != len || c.iter().any(|v| !v.is_finite()))
        {
            return Err(shape_err!("codebook entries must be {len} finite values"));
        }
        Ok(())
    }

    pub(crate) fn hash_into(&self, h: &mut impl sha2::Digest) {
        h.update((self.patch_size as u64).to_le_bytes());
        h.update((self.codebook.len() as u64).to_le_bytes());
        for v in self.codebook.iter().flatten() {
            h.update(v.to_le_bytes());
        }
    }
}
