//! Sparse sample selection: Euclidean distances, k-medoids with PAM's BUILD
//! initialization followed by an eager swap phase that evaluates every
//! candidate in `O(n)` from cached nearest / second-nearest medoid
//! distances (the FasterPAM bookkeeping), and the per-set union.
//!
//! Single swaps can stall in a local optimum, so after the BUILD start the
//! swap phase is repeated from a few seeded random medoid sets.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{config_err, shape_err, Result};
use crate::{linalg, rng};

/// Dense symmetric matrix with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DistanceMatrix {
    pub fn from_row_major(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(shape_err!(
                "expected {} entries for {n}x{n}, got {}",
                n * n,
                data.len()
            ));
        }
        for i in 0..n {
            if data[i * n + i] != 0.0 {
                return Err(config_err!("diagonal entry {i} is not zero"));
            }
            for j in 0..i {
                let (a, b) = (data[i * n + j], data[j * n + i]);
                if !(a >= 0.0) || (a - b).abs() > 1e-9 {
                    return Err(config_err!("entries ({i},{j}) are negative or asymmetric"));
                }
            }
        }
        Ok(Self { n, data })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }
}

/// Pairwise Euclidean distances between equal-length vectors.
pub fn distance_matrix<R: AsRef<[f64]>>(features: &[R]) -> Result<DistanceMatrix> {
    let n = features.len();
    if n < 2 {
        return Err(shape_err!("need at least two vectors, got {n}"));
    }
    let dim = features[0].as_ref().len();
    if let Some(i) = features.iter().position(|f| f.as_ref().len() != dim) {
        return Err(shape_err!(
            "vector {i} has length {} instead of {dim}",
            features[i].as_ref().len()
        ));
    }
    let mut data = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let d = libm::sqrt(linalg::sq_dist(features[i].as_ref(), features[j].as_ref()));
            data[i * n + j] = d;
            data[j * n + i] = d;
        }
    }
    Ok(DistanceMatrix { n, data })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MedoidSolution {
    /// Point indices, in medoid-slot order.
    pub medoids: Vec<usize>,
    /// Sum over points of the distance to the nearest medoid.
    pub deviation: f64,
    /// Deviation after BUILD, before any swap.
    pub build_deviation: f64,
    /// Swaps accepted on the way to the returned solution.
    pub swaps: usize,
    /// For every point, the slot of its nearest medoid.
    pub assignment: Vec<usize>,
}

/// Total deviation of a medoid set, summed in point order.
pub fn total_deviation(dist: &DistanceMatrix, medoids: &[usize]) -> f64 {
    (0..dist.len())
        .map(|o| {
            medoids
                .iter()
                .map(|&m| dist.get(o, m))
                .fold(f64::INFINITY, f64::min)
        })
        .sum()
}

#[derive(Debug, Clone, Copy)]
struct Near {
    slot: usize,
    d: f64,
}

#[derive(Debug, Clone, Copy)]
struct Cache {
    near: Near,
    second: Near,
}

fn assign(dist: &DistanceMatrix, medoids: &[usize]) -> Vec<Cache> {
    (0..dist.len())
        .map(|o| {
            let mut near = Near {
                slot: usize::MAX,
                d: f64::INFINITY,
            };
            let mut second = Near {
                slot: usize::MAX,
                d: f64::INFINITY,
            };
            for (s, &m) in medoids.iter().enumerate() {
                let d = dist.get(o, m);
                // a point that is itself a medoid always belongs to that slot
                if d < near.d || o == m {
                    second = near;
                    near = Near { slot: s, d };
                } else if d < second.d {
                    second = Near { slot: s, d };
                }
            }
            Cache { near, second }
        })
        .collect()
}

/// PAM BUILD: the first medoid minimizes total distance, each further one
/// maximizes the decrease of the total deviation. Ties go to the lowest index.
pub fn build(dist: &DistanceMatrix, k: usize) -> Vec<usize> {
    let n = dist.len();
    let mut medoids = Vec::with_capacity(k);
    let mut is_medoid = vec![false; n];
    let mut best = (0, f64::INFINITY);
    for i in 0..n {
        let s: f64 = dist.row(i).iter().sum();
        if s < best.1 {
            best = (i, s);
        }
    }
    medoids.push(best.0);
    is_medoid[best.0] = true;
    let mut nearest: Vec<f64> = dist.row(best.0).to_vec();
    while medoids.len() < k {
        let mut pick = (usize::MAX, f64::NEG_INFINITY);
        for i in (0..n).filter(|&i| !is_medoid[i]) {
            let gain: f64 = (0..n).map(|j| (nearest[j] - dist.get(i, j)).max(0.0)).sum();
            if gain > pick.1 {
                pick = (i, gain);
            }
        }
        medoids.push(pick.0);
        is_medoid[pick.0] = true;
        for (j, nj) in nearest.iter_mut().enumerate() {
            *nj = nj.min(dist.get(pick.0, j));
        }
    }
    medoids
}

/// Change of total deviation from swapping each medoid slot for `j`, evaluated
/// for all slots at once. Returns the best `(change, slot)`; ties go to the
/// lowest slot.
fn best_swap(dist: &DistanceMatrix, cache: &[Cache], removal: &[f64], j: usize) -> (f64, usize) {
    let mut delta = removal.to_vec();
    let mut shared = 0.0;
    for (o, c) in cache.iter().enumerate() {
        let djo = dist.get(j, o);
        if djo < c.near.d {
            // j takes o over whichever medoid leaves
            shared += djo - c.near.d;
            delta[c.near.slot] += c.near.d - c.second.d;
        } else if djo < c.second.d {
            // only matters when o's nearest medoid is the one removed
            delta[c.near.slot] += djo - c.second.d;
        }
    }
    let mut best = (f64::INFINITY, 0);
    for (s, &d) in delta.iter().enumerate() {
        if d < best.0 {
            best = (d, s);
        }
    }
    (best.0 + shared, best.1)
}

fn removal_losses(cache: &[Cache], k: usize) -> Vec<f64> {
    let mut loss = vec![0.0; k];
    for c in cache {
        loss[c.near.slot] += c.second.d - c.near.d;
    }
    loss
}

/// Estimated changes above `SCREEN_EPS * loss` are not worth verifying.
/// Anything below is checked by recomputing the deviation, so acceptance is
/// decided on the exact floating-point objective.
const SCREEN_EPS: f64 = 1e-12;

/// Seeded random starts tried after the BUILD start.
pub const DEFAULT_RESTARTS: usize = 64;

/// Eager swap phase: the first improving candidate in index order is swapped
/// into its best slot, until a full pass over all non-medoids finds no
/// strictly improving swap. Returns the number of swaps.
fn swap_phase(dist: &DistanceMatrix, medoids: &mut [usize]) -> usize {
    let (n, k) = (dist.len(), medoids.len());
    if k == n {
        return 0;
    }
    let mut swaps = 0;
    let mut cache = assign(dist, medoids);
    let mut removal = removal_losses(&cache, k);
    let mut loss = total_deviation(dist, medoids);
    let mut last_swap = None;
    'passes: loop {
        for j in 0..n {
            if last_swap == Some(j) {
                break 'passes;
            }
            if medoids[cache[j].near.slot] == j {
                continue;
            }
            let (change, slot) = best_swap(dist, &cache, &removal, j);
            if change < SCREEN_EPS * loss.max(1.0) {
                let old = core::mem::replace(&mut medoids[slot], j);
                let new_loss = total_deviation(dist, medoids);
                // strict decrease of the exact objective rules out cycling
                if new_loss < loss {
                    cache = assign(dist, medoids);
                    removal = removal_losses(&cache, k);
                    loss = new_loss;
                    swaps += 1;
                    last_swap = Some(j);
                } else {
                    medoids[slot] = old;
                }
            }
        }
        if last_swap.is_none() {
            break;
        }
    }
    swaps
}

/// k-medoids with [`DEFAULT_RESTARTS`] seeded restarts.
pub fn kmedoids(dist: &DistanceMatrix, k: usize, seed: u64) -> Result<MedoidSolution> {
    kmedoids_with_restarts(dist, k, seed, DEFAULT_RESTARTS)
}

/// k-medoids: BUILD followed by the swap phase, then the swap phase again
/// from `restarts` uniformly drawn medoid sets. The lowest deviation wins;
/// ties keep the earlier start, so the BUILD solution is kept unless a
/// restart is strictly better.
pub fn kmedoids_with_restarts(dist: &DistanceMatrix, k: usize, seed: u64, restarts: usize) -> Result<MedoidSolution> {
    let n = dist.len();
    if k == 0 || k > n {
        return Err(config_err!("k = {k} must lie in 1..={n}"));
    }
    let mut medoids = build(dist, k);
    let build_deviation = total_deviation(dist, &medoids);
    let mut swaps = swap_phase(dist, &mut medoids);
    let mut deviation = total_deviation(dist, &medoids);
    if k < n {
        let mut rng = rng::stream(seed, rng::TAG_SELECT);
        for _ in 0..restarts {
            let mut start = rand::seq::index::sample(&mut rng, n, k).into_vec();
            let s = swap_phase(dist, &mut start);
            let dev = total_deviation(dist, &start);
            if dev < deviation {
                (medoids, swaps, deviation) = (start, s, dev);
            }
        }
    }
    let cache = assign(dist, &medoids);
    Ok(MedoidSolution {
        deviation,
        build_deviation,
        swaps,
        assignment: cache.iter().map(|c| c.near.slot).collect(),
        medoids,
    })
}

/// Per-set selection result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetSelection {
    /// Index into the set.
    pub selected: Vec<usize>,
    pub deviation: f64,
}

/// Runs k-medoids independently on each set of feature vectors and returns
/// the selected indices per set; the union of the selections is the sparse
/// training set.
pub fn select_sparse<R: AsRef<[f64]>>(
    sets: &[&[R]],
    k: usize,
    seed: u64,
) -> Result<Vec<SetSelection>> {
    sets.iter()
        .enumerate()
        .map(|(i, set)| {
            if k > set.len() {
                return Err(config_err!(
                    "k = {k} exceeds the size {} of set {i}",
                    set.len()
                ));
            }
            if k == set.len() {
                // every point is its own medoid
                return Ok(SetSelection {
                    selected: (0..k).collect(),
                    deviation: 0.0,
                });
            }
            let dist = distance_matrix(set).map_err(|e| e.at(i))?;
            let sol = kmedoids(&dist, k, seed).map_err(|e| e.at(i))?;
            let mut selected = sol.medoids.clone();
            selected.sort_unstable();
            Ok(SetSelection {
                selected,
                deviation: sol.deviation,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(points: &[f64]) -> DistanceMatrix {
        let rows: Vec<Vec<f64>> = points.iter().map(|&p| vec![p]).collect();
        distance_matrix(&rows).unwrap()
    }

    #[test]
    fn pythagorean_pair() {
        let d = distance_matrix(&[vec![0.0, 0.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(d.get(0, 1), 5.0);
        assert_eq!(d.get(1, 0), 5.0);
        assert_eq!(d.get(0, 0), 0.0);
    }

    #[test]
    fn one_medoid_on_a_line() {
        let sol = kmedoids(&line(&[0.0, 1.0, 10.0]), 1, 0).unwrap();
        assert_eq!(sol.medoids, vec![1]);
        assert_eq!(sol.deviation, 10.0);
    }

    #[test]
    fn k_equals_n_has_zero_deviation() {
        let sol = kmedoids(&line(&[0.0, 2.0, 5.0, 9.0]), 4, 0).unwrap();
        assert_eq!(sol.deviation, 0.0);
        let mut m = sol.medoids.clone();
        m.sort_unstable();
        assert_eq!(m, vec![0, 1, 2, 3]);
    }

    #[test]
    fn errors() {
        assert!(kmedoids(&line(&[0.0, 1.0]), 3, 0).is_err());
        assert!(kmedoids(&line(&[0.0, 1.0]), 0, 0).is_err());
        assert!(distance_matrix(&[vec![0.0], vec![1.0, 2.0]]).is_err());
        assert!(distance_matrix(&[vec![0.0]]).is_err());
        assert!(DistanceMatrix::from_row_major(2, vec![0.0, 1.0, 2.0, 0.0]).is_err());
    }

    #[test]
    fn two_clusters_are_found() {
        let sol = kmedoids(&line(&[0.0, 0.1, 0.2, 10.0, 10.1, 10.2]), 2, 0).unwrap();
        let mut m = sol.medoids.clone();
        m.sort_unstable();
        assert_eq!(m, vec![1, 4]);
        assert!(sol.deviation <= sol.build_deviation);
    }
}
