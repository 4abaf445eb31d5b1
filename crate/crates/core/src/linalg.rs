//! Small dense helpers shared by the channel fits, the embedder and PCA
//! projection.

use alloc::vec::Vec;
use nalgebra::DMatrix;

use crate::error::{shape_err, Error, Result};

/// `Σ f(a_i, b_i)` with four interleaved partial sums, which lets the
/// compiler vectorize the loop while keeping a fixed summation order.
#[inline]
fn sum4(a: &[f64], b: &[f64], f: impl Fn(f64, f64) -> f64) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| f(*x, *y)).sum();
    for (x, y) in ca.zip(cb) {
        for i in 0..4 {
            acc[i] += f(x[i], y[i]);
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    sum4(a, b, |x, y| x * y)
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    sum4(a, b, |x, y| (x - y) * (x - y))
}

/// Eigenpairs of a symmetric matrix, sorted by descending eigenvalue.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    /// `vectors[i]` belongs to `values[i]`; unit length, the entry of largest
    /// magnitude (lowest index on ties) is positive.
    pub vectors: Vec<Vec<f64>>,
}

/// Row-major `n x n` symmetric input.
pub fn symmetric_eigen(n: usize, data: &[f64]) -> Result<SymmetricEigen> {
    if data.len() != n * n {
        return Err(shape_err!(
            "expected {} entries for a {n}x{n} matrix, got {}",
            n * n,
            data.len()
        ));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric(
            "non-finite entry in symmetric matrix".into(),
        ));
    }
    let m = DMatrix::from_row_slice(n, n, data);
    let eig = m.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let mut values = Vec::with_capacity(n);
    let mut vectors = Vec::with_capacity(n);
    for i in order {
        values.push(eig.eigenvalues[i]);
        let mut v: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
        fix_sign(&mut v);
        vectors.push(v);
    }
    Ok(SymmetricEigen { values, vectors })
}

/// Flips `v` so that its largest-magnitude entry is positive.
pub fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|&x| x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Modified Gram–Schmidt with one re-orthogonalization pass. Fails when a
/// column is (numerically) inside the span of the previous ones.
pub fn orthonormalize(mut cols: Vec<Vec<f64>>) -> Result<Vec<Vec<f64>>> {
    for i in 0..cols.len() {
        let original = norm(&cols[i]);
        for _pass in 0..2 {
            for j in 0..i {
                let (done, rest) = cols.split_at_mut(i);
                let proj = dot(&done[j], &rest[0]);
                for (x, q) in rest[0].iter_mut().zip(&done[j]) {
                    *x -= proj * q;
                }
            }
        }
        let n = norm(&cols[i]);
        if !(n > 1e-10 * original.max(1e-300)) {
            return Err(Error::Numeric(alloc::format!(
                "column {i} is linearly dependent"
            )));
        }
        cols[i].iter_mut().for_each(|x| *x /= n);
    }
    Ok(cols)
}

/// `max |<c_i, c_j> - delta_ij|` over all pairs.
pub fn orthonormality_error(cols: &[Vec<f64>]) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..cols.len() {
        for j in i..cols.len() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((dot(&cols[i], &cols[j]) - target).abs());
        }
    }
    worst
}
