//! Fixed three-channel image with values in `[0, 1]`.

use alloc::vec::Vec;

use crate::error::{config_err, shape_err, Result};

pub const CHANNELS: usize = 3;
pub const MIN_SIZE: usize = 16;

/// Row-major, channel-interleaved (HWC) RGB image.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl Image {
    /// Validates range, shape and minimum size.
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if height < MIN_SIZE || width < MIN_SIZE {
            return Err(shape_err!(
                "image {height}x{width} is smaller than {MIN_SIZE}x{MIN_SIZE}"
            ));
        }
        if data.len() != height * width * CHANNELS {
            return Err(shape_err!(
                "expected {} values for {height}x{width}x3, got {}",
                height * width * CHANNELS,
                data.len()
            ));
        }
        if let Some(bad) = data.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(config_err!(
                "pixel value {} at offset {bad} outside [0,1]",
                data[bad]
            ));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    /// Clamps every value into `[0, 1]` (NaN maps to 0).
    pub fn from_clamped(height: usize, width: usize, mut data: Vec<f64>) -> Result<Self> {
        for v in data.iter_mut() {
            *v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
        }
        Self::new(height, width, data)
    }

    pub fn from_fn(
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width * CHANNELS);
        for y in 0..height {
            for x in 0..width {
                for c in 0..CHANNELS {
                    data.push(f(y, x, c));
                }
            }
        }
        Self::from_clamped(height, width, data)
    }

    pub fn constant(height: usize, width: usize, rgb: [f64; 3]) -> Result<Self> {
        Self::from_fn(height, width, |_, _, c| rgb[c])
    }

    pub fn from_u8(height: usize, width: usize, bytes: &[u8]) -> Result<Self> {
        let data = bytes.iter().map(|&b| f64::from(b) / 255.0).collect();
        Self::new(height, width, data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Number of scalar values, `h * w * 3`.
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * CHANNELS + c]
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.height == other.height && self.width == other.width
    }

    /// 8-bit encoding, rounding to nearest.
    pub fn to_u8(&self) -> Vec<u8> {
        self.data.iter().map(|&v| quantize_u8(v)).collect()
    }

    /// Snaps every value onto the `k / 255` grid used at rest.
    pub fn quantized(&self) -> Image {
        Image {
            height: self.height,
            width: self.width,
            data: self
                .data
                .iter()
                .map(|&v| f64::from(quantize_u8(v)) / 255.0)
                .collect(),
        }
    }

    /// One plane of the image, row-major.
    pub fn plane(&self, c: usize) -> Vec<f64> {
        self.data
            .iter()
            .skip(c)
            .step_by(CHANNELS)
            .copied()
            .collect()
    }

    /// Rec. 601 luma, row-major.
    pub fn luminance(&self) -> Vec<f64> {
        self.data
            .chunks_exact(CHANNELS)
            .map(|p| 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2])
            .collect()
    }

    /// Reassembles an image from three planes, clamping into range.
    pub fn from_planes(height: usize, width: usize, planes: &[Vec<f64>; 3]) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width * CHANNELS);
        for i in 0..height * width {
            for plane in planes {
                data.push(plane[i]);
            }
        }
        Self::from_clamped(height, width, data)
    }
}

#[inline]
pub fn quantize_u8(v: f64) -> u8 {
    libm::round(v.clamp(0.0, 1.0) * 255.0) as u8
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn rejects_small_and_out_of_range() {
        assert!(Image::new(8, 16, vec![0.0; 8 * 16 * 3]).is_err());
        let mut data = vec![0.5; 16 * 16 * 3];
        data[7] = 1.5;
        assert!(Image::new(16, 16, data).is_err());
        assert!(Image::new(16, 16, vec![0.5; 10]).is_err());
    }

    #[test]
    fn quantization_is_within_half_step() {
        let img =
            Image::from_fn(16, 16, |y, x, c| ((y * 31 + x * 7 + c) % 97) as f64 / 96.0).unwrap();
        let q = img.quantized();
        for (a, b) in img.as_slice().iter().zip(q.as_slice()) {
            assert!((a - b).abs() <= 0.5 / 255.0 + 1e-12);
        }
        assert_eq!(q.quantized(), q);
    }
}
