//! Dense float32 canvases laid out row-major as (height, width, channels).
//!
//! Every tiled-sampling buffer in the crate (the extended panorama, the
//! individual windows, the stitch block and the cropped output) is a
//! [`Canvas`]. Canvases are plain values: operations return new canvases
//! instead of mutating in place, and every constructor rejects non-finite
//! data so that NaN never reaches the blending arithmetic.

mod image_io;
pub mod ptsr;
mod rng;

pub use image_io::{export_image, import_image, ValueRange};
pub use ptsr::{read_tensor, write_tensor, RawTensor};
pub use rng::{derive_seed, Rng, ALGORITHM as RNG_ALGORITHM};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TensorError {
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("shape mismatch: expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        expected: (usize, usize, usize),
        actual: (usize, usize, usize),
    },
    #[error("non-finite value at flat index {index}")]
    NonFinite { index: usize },
    #[error("format error in field `{field}`: {detail}")]
    Format { field: &'static str, detail: String },
    #[error("unsupported channel count {0} (expected 1 or 3)")]
    UnsupportedChannels(usize),
    #[error("image codec error: {0}")]
    Image(#[from] image::ImageError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, TensorError>;

#[derive(Debug, Clone, PartialEq)]
pub struct Canvas {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f32>,
}

fn check_dims(height: usize, width: usize, channels: usize) -> Result<usize> {
    if height == 0 || width == 0 || channels == 0 {
        return Err(TensorError::Dimension(format!(
            "all dimensions must be positive, got {height}x{width}x{channels}"
        )));
    }
    height
        .checked_mul(width)
        .and_then(|n| n.checked_mul(channels))
        .ok_or_else(|| TensorError::Dimension("element count overflows usize".into()))
}

fn check_finite(data: &[f32]) -> Result<()> {
    match data.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(TensorError::NonFinite { index }),
        None => Ok(()),
    }
}

impl Canvas {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        let len = check_dims(height, width, channels)?;
        if data.len() != len {
            return Err(TensorError::Dimension(format!(
                "data length {} does not match {height}x{width}x{channels}",
                data.len()
            )));
        }
        check_finite(&data)?;
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: f32) -> Result<Self> {
        let len = check_dims(height, width, channels)?;
        check_finite(&[value])?;
        Ok(Self {
            height,
            width,
            channels,
            data: vec![value; len],
        })
    }

    pub fn zeros(height: usize, width: usize, channels: usize) -> Result<Self> {
        Self::filled(height, width, channels, 0.0)
    }

    /// Builds a canvas by evaluating `f(row, col, channel)` at every cell.
    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Result<Self> {
        let len = check_dims(height, width, channels)?;
        let mut data = Vec::with_capacity(len);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(y, x, c));
                }
            }
        }
        Self::new(height, width, channels, data)
    }

    /// Canvas of i.i.d. standard normal draws from `rng`, in row-major order.
    pub fn gaussian(height: usize, width: usize, channels: usize, rng: &mut Rng) -> Result<Self> {
        let len = check_dims(height, width, channels)?;
        let data = (0..len).map(|_| rng.standard_normal() as f32).collect();
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn index(&self, y: usize, x: usize, c: usize) -> usize {
        (y * self.width + x) * self.channels + c
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> f32 {
        self.data[self.index(y, x, c)]
    }

    /// Values of column `x` for every (row, channel), row-major.
    pub fn column(&self, x: usize) -> Vec<f32> {
        let mut out = Vec::with_capacity(self.height * self.channels);
        for y in 0..self.height {
            let start = self.index(y, x, 0);
            out.extend_from_slice(&self.data[start..start + self.channels]);
        }
        out
    }

    /// Full-height copy of columns `[start, start + width)`.
    pub fn columns(&self, start: usize, width: usize) -> Result<Self> {
        if width == 0 || start + width > self.width {
            return Err(TensorError::Dimension(format!(
                "column range [{start}, {}) outside canvas width {}",
                start + width,
                self.width
            )));
        }
        let row = width * self.channels;
        let mut data = Vec::with_capacity(self.height * row);
        for y in 0..self.height {
            let from = self.index(y, start, 0);
            data.extend_from_slice(&self.data[from..from + row]);
        }
        Ok(Self {
            height: self.height,
            width,
            channels: self.channels,
            data,
        })
    }

    /// Concatenates canvases of equal height and channel count along the width.
    pub fn hconcat(parts: &[&Canvas]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| TensorError::Dimension("nothing to concatenate".into()))?;
        let (height, channels) = (first.height, first.channels);
        let mut width = 0;
        for p in parts {
            if p.height != height || p.channels != channels {
                return Err(TensorError::ShapeMismatch {
                    expected: (height, p.width, channels),
                    actual: p.shape(),
                });
            }
            width += p.width;
        }
        let mut data = Vec::with_capacity(height * width * channels);
        for y in 0..height {
            for p in parts {
                let row = p.width * channels;
                let from = y * row;
                data.extend_from_slice(&p.data[from..from + row]);
            }
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    fn same_shape(&self, other: &Canvas) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(TensorError::ShapeMismatch {
                expected: self.shape(),
                actual: other.shape(),
            });
        }
        Ok(())
    }

    fn zip_with(&self, other: &Canvas, f: impl Fn(f32, f32) -> f32) -> Result<Self> {
        self.same_shape(other)?;
        let data: Vec<f32> = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Self::new(self.height, self.width, self.channels, data)
    }

    pub fn add(&self, other: &Canvas) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Canvas) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    /// Elementwise quotient; a zero divisor produces a non-finite error.
    pub fn divide(&self, other: &Canvas) -> Result<Self> {
        self.zip_with(other, |a, b| a / b)
    }

    pub fn scale(&self, factor: f32) -> Result<Self> {
        let data = self.data.iter().map(|&v| v * factor).collect();
        Self::new(self.height, self.width, self.channels, data)
    }

    pub fn map(&self, f: impl Fn(f32) -> f32) -> Result<Self> {
        let data = self.data.iter().map(|&v| f(v)).collect();
        Self::new(self.height, self.width, self.channels, data)
    }

    pub fn max_abs_diff(&self, other: &Canvas) -> Result<f32> {
        self.same_shape(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f32::max))
    }

    /// Copies column `src` onto column `dst` in place.
    pub(crate) fn copy_column(&mut self, src: usize, dst: usize) {
        for y in 0..self.height {
            let s = self.index(y, src, 0);
            let d = self.index(y, dst, 0);
            self.data.copy_within(s..s + self.channels, d);
        }
    }

    /// Overwrites columns starting at `start` with `patch`. Shapes must already agree.
    pub(crate) fn paste_columns(&mut self, start: usize, patch: &Canvas) {
        let row = patch.width * self.channels;
        for y in 0..self.height {
            let d = self.index(y, start, 0);
            let s = y * row;
            self.data[d..d + row].copy_from_slice(&patch.data[s..s + row]);
        }
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }
}

/// `gaussian_fill`: canvas of standard normal draws.
pub fn gaussian_fill(height: usize, width: usize, channels: usize, rng: &mut Rng) -> Result<Canvas> {
    Canvas::gaussian(height, width, channels, rng)
}
