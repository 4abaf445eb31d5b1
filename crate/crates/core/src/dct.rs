//! Orthonormal 8x8 DCT-II over image planes.

use alloc::vec::Vec;

pub const BLOCK: usize = 8;
pub const BLOCK_LEN: usize = BLOCK * BLOCK;

/// `C[k][n] = a_k cos(pi (2n + 1) k / 16)`, rows orthonormal.
fn basis() -> [[f64; BLOCK]; BLOCK] {
    let mut c = [[0.0; BLOCK]; BLOCK];
    for (k, row) in c.iter_mut().enumerate() {
        let a = if k == 0 {
            libm::sqrt(1.0 / BLOCK as f64)
        } else {
            libm::sqrt(2.0 / BLOCK as f64)
        };
        for (n, v) in row.iter_mut().enumerate() {
            *v = a * libm::cos(
                core::f64::consts::PI * (2 * n + 1) as f64 * k as f64 / (2 * BLOCK) as f64,
            );
        }
    }
    c
}

/// Precomputed transform. Coefficient `(u, v)` of a block is stored at
/// `u * 8 + v` with `u` the vertical frequency.
#[derive(Debug, Clone)]
pub struct Dct8 {
    c: [[f64; BLOCK]; BLOCK],
}

impl Default for Dct8 {
    fn default() -> Self {
        Self { c: basis() }
    }
}

impl Dct8 {
    pub fn forward(&self, block: &[f64; BLOCK_LEN]) -> [f64; BLOCK_LEN] {
        // C X C^T
        let mut tmp = [0.0; BLOCK_LEN];
        for u in 0..BLOCK {
            for x in 0..BLOCK {
                let mut s = 0.0;
                for y in 0..BLOCK {
                    s += self.c[u][y] * block[y * BLOCK + x];
                }
                tmp[u * BLOCK + x] = s;
            }
        }
        let mut out = [0.0; BLOCK_LEN];
        for u in 0..BLOCK {
            for v in 0..BLOCK {
                let mut s = 0.0;
                for x in 0..BLOCK {
                    s += tmp[u * BLOCK + x] * self.c[v][x];
                }
                out[u * BLOCK + v] = s;
            }
        }
        out
    }

    pub fn inverse(&self, coef: &[f64; BLOCK_LEN]) -> [f64; BLOCK_LEN] {
        // C^T Y C
        let mut tmp = [0.0; BLOCK_LEN];
        for y in 0..BLOCK {
            for v in 0..BLOCK {
                let mut s = 0.0;
                for u in 0..BLOCK {
                    s += self.c[u][y] * coef[u * BLOCK + v];
                }
                tmp[y * BLOCK + v] = s;
            }
        }
        let mut out = [0.0; BLOCK_LEN];
        for y in 0..BLOCK {
            for x in 0..BLOCK {
                let mut s = 0.0;
                for v in 0..BLOCK {
                    s += tmp[y * BLOCK + v] * self.c[v][x];
                }
                out[y * BLOCK + x] = s;
            }
        }
        out
    }
}

pub fn read_block(plane: &[f64], width: usize, by: usize, bx: usize) -> [f64; BLOCK_LEN] {
    let mut b = [0.0; BLOCK_LEN];
    for dy in 0..BLOCK {
        let row = (by * BLOCK + dy) * width + bx * BLOCK;
        b[dy * BLOCK..(dy + 1) * BLOCK].copy_from_slice(&plane[row..row + BLOCK]);
    }
    b
}

pub fn write_block(plane: &mut [f64], width: usize, by: usize, bx: usize, b: &[f64; BLOCK_LEN]) {
    for dy in 0..BLOCK {
        let row = (by * BLOCK + dy) * width + bx * BLOCK;
        plane[row..row + BLOCK].copy_from_slice(&b[dy * BLOCK..(dy + 1) * BLOCK]);
    }
}

/// Forward transform of every 8x8 block of a plane whose sides are
/// multiples of 8, in raster block order.
pub fn blocks(dct: &Dct8, plane: &[f64], height: usize, width: usize) -> Vec<[f64; BLOCK_LEN]> {
    let mut out = Vec::with_capacity((height / BLOCK) * (width / BLOCK));
    for by in 0..height / BLOCK {
        for bx in 0..width / BLOCK {
            out.push(dct.forward(&read_block(plane, width, by, bx)));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_and_parseval() {
        let dct = Dct8::default();
        let mut b = [0.0; BLOCK_LEN];
        for (i, v) in b.iter_mut().enumerate() {
            *v = libm::sin(i as f64 * 0.37) + 0.1 * i as f64;
        }
        let f = dct.forward(&b);
        let back = dct.inverse(&f);
        for (x, y) in b.iter().zip(back.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
        let e1: f64 = b.iter().map(|x| x * x).sum();
        let e2: f64 = f.iter().map(|x| x * x).sum();
        assert!((e1 - e2).abs() < 1e-10);
    }

    #[test]
    fn constant_block_has_only_dc() {
        let dct = Dct8::default();
        let f = dct.forward(&[0.5; BLOCK_LEN]);
        assert!((f[0] - 4.0).abs() < 1e-12);
        assert!(f[1..].iter().all(|v| v.abs() < 1e-12));
    }
}
