//! Synthetic "real" image corpus: Gaussian random fields with a `1/f^gamma`
//! power spectrum, overlaid with flat geometric patches.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};
use crate::image::Image;
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusConfig {
    pub count: usize,
    /// Side length of the square images.
    pub size: usize,
    pub seed: u64,
    /// Spectral exponent of the random field.
    pub gamma: f64,
    /// Expected shape coverage knob in `[0, 1]`; `0` disables shapes.
    pub shape_density: f64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            count: 512,
            size: 64,
            seed: 2024,
            gamma: 2.0,
            shape_density: 0.5,
        }
    }
}

impl CorpusConfig {
    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(config_err!("corpus count must be at least 1"));
        }
        if self.size < 16 || !self.size.is_multiple_of(8) {
            return Err(config_err!(
                "corpus size {} must be >= 16 and a multiple of 8",
                self.size
            ));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(config_err!(
                "spectral exponent must be positive, got {}",
                self.gamma
            ));
        }
        if !(0.0..=1.0).contains(&self.shape_density) {
            return Err(config_err!(
                "shape_density must lie in [0,1], got {}",
                self.shape_density
            ));
        }
        Ok(())
    }

    /// Seed of the private stream that draws image `index`.
    pub fn image_seed(&self, index: usize) -> u64 {
        rng::sub_seed(self.seed ^ rng::TAG_CORPUS, index as u64)
    }
}

/// Mean level and field amplitude of the synthetic images.
const FIELD_STD: f64 = 0.16;
const SHARED_WEIGHT: f64 = 0.8;
const CHANNEL_WEIGHT: f64 = 0.6;
const MAX_SHAPES: f64 = 8.0;

pub fn generate_corpus(config: &CorpusConfig) -> Result<Vec<Image>> {
    config.validate()?;
    let table = Twiddles::new(config.size);
    (0..config.count)
        .map(|i| render(config, &table, i))
        .collect()
}

/// One image of the corpus; `generate_corpus(c)[i] == generate_image(c, i)`.
pub fn generate_image(config: &CorpusConfig, index: usize) -> Result<Image> {
    config.validate()?;
    render(config, &Twiddles::new(config.size), index)
}

fn render(config: &CorpusConfig, table: &Twiddles, index: usize) -> Result<Image> {
    let n = config.size;
    let mut rng = rng::seeded(config.image_seed(index));
    let shared = power_law_field(table, config.gamma, &mut rng);
    let mut planes: [Vec<f64>; 3] = [vec![0.0; n * n], vec![0.0; n * n], vec![0.0; n * n]];
    for plane in planes.iter_mut() {
        let own = power_law_field(table, config.gamma, &mut rng);
        let z: f64 = rng.sample(StandardNormal);
        let base = (0.5 + 0.12 * z).clamp(0.25, 0.75);
        for ((p, s), o) in plane.iter_mut().zip(&shared).zip(&own) {
            *p = base + FIELD_STD * (SHARED_WEIGHT * s + CHANNEL_WEIGHT * o);
        }
    }

    let expected = config.shape_density * MAX_SHAPES;
    let mut shapes = libm::floor(expected) as usize;
    if rng.random::<f64>() < expected - libm::floor(expected) {
        shapes += 1;
    }
    for _ in 0..shapes {
        paint_shape(&mut planes, n, &mut rng);
    }
    Image::from_planes(n, n, &planes)
}

fn paint_shape(planes: &mut [Vec<f64>; 3], n: usize, rng: &mut impl Rng) {
    let nf = n as f64;
    let disk = rng.random::<bool>();
    let cy = rng.random::<f64>() * nf;
    let cx = rng.random::<f64>() * nf;
    let ry = nf / 16.0 + rng.random::<f64>() * (nf / 4.0 - nf / 16.0);
    let rx = if disk {
        ry
    } else {
        nf / 16.0 + rng.random::<f64>() * (nf / 4.0 - nf / 16.0)
    };
    let color: [f64; 3] = [rng.random(), rng.random(), rng.random()];
    for y in 0..n {
        for x in 0..n {
            let dy = y as f64 + 0.5 - cy;
            let dx = x as f64 + 0.5 - cx;
            let inside = if disk {
                dy * dy + dx * dx <= ry * ry
            } else {
                dy.abs() <= ry && dx.abs() <= rx
            };
            if inside {
                for (plane, c) in planes.iter_mut().zip(color) {
                    plane[y * n + x] = c;
                }
            }
        }
    }
}

struct Twiddles {
    n: usize,
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl Twiddles {
    fn new(n: usize) -> Self {
        let step = 2.0 * core::f64::consts::PI / n as f64;
        Self {
            n,
            cos: (0..n).map(|k| libm::cos(step * k as f64)).collect(),
            sin: (0..n).map(|k| libm::sin(step * k as f64)).collect(),
        }
    }
}

/// Real part of the inverse DFT of complex white noise shaped by
/// `|f|^(-gamma/2)`, standardized to zero mean and unit variance.
fn power_law_field(t: &Twiddles, gamma: f64, rng: &mut impl Rng) -> Vec<f64> {
    let n = t.n;
    let signed = |k: usize| {
        if k <= n / 2 {
            k as f64
        } else {
            k as f64 - n as f64
        }
    };
    let mut re = vec![0.0; n * n];
    let mut im = vec![0.0; n * n];
    for ky in 0..n {
        for kx in 0..n {
            let (fy, fx) = (signed(ky), signed(kx));
            let f2 = fy * fy + fx * fx;
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            if f2 > 0.0 {
                let amp = libm::pow(f2, -gamma / 4.0);
                re[ky * n + kx] = amp * a;
                im[ky * n + kx] = amp * b;
            }
        }
    }
    // rows: G[ky][x] = sum_kx F[ky][kx] e^{+i 2 pi kx x / n}
    let mut gr = vec![0.0; n * n];
    let mut gi = vec![0.0; n * n];
    for ky in 0..n {
        for x in 0..n {
            let (mut sr, mut si) = (0.0, 0.0);
            for kx in 0..n {
                let w = (kx * x) % n;
                let (c, s) = (t.cos[w], t.sin[w]);
                let (fr, fi) = (re[ky * n + kx], im[ky * n + kx]);
                sr += fr * c - fi * s;
                si += fr * s + fi * c;
            }
            gr[ky * n + x] = sr;
            gi[ky * n + x] = si;
        }
    }
    // columns, real part only
    let mut out = vec![0.0; n * n];
    for y in 0..n {
        for x in 0..n {
            let mut s = 0.0;
            for ky in 0..n {
                let w = (ky * y) % n;
                s += gr[ky * n + x] * t.cos[w] - gi[ky * n + x] * t.sin[w];
            }
            out[y * n + x] = s;
        }
    }
    let mean = out.iter().sum::<f64>() / out.len() as f64;
    let var = out.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / out.len() as f64;
    let sd = libm::sqrt(var).max(1e-300);
    out.iter_mut().for_each(|v| *v = (*v - mean) / sd);
    out
}

/// Seeded partition of `0..n` into sorted train and test index lists; the
/// train part holds `round(n * train_fraction)` items.
pub fn split_indices(n: usize, train_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(config_err!(
            "train fraction must lie in (0,1), got {train_fraction}"
        ));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng::stream(seed, rng::TAG_SPLIT));
    let n_train = libm::round(n as f64 * train_fraction) as usize;
    let mut train = perm[..n_train].to_vec();
    let mut test = perm[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

pub fn split_corpus<T: Clone>(
    items: &[T],
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<T>, Vec<T>)> {
    let (train, test) = split_indices(items.len(), train_fraction, seed)?;
    Ok((
        train.iter().map(|&i| items[i].clone()).collect(),
        test.iter().map(|&i| items[i].clone()).collect(),
    ))
}
