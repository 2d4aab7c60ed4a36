use std::path::Path;

use image::{GrayImage, RgbImage};
use serde::{Deserialize, Serialize};

use super::{Canvas, Result, TensorError};

/// Value interval mapped linearly onto the 8-bit range `[0, 255]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValueRange {
    pub min: f32,
    pub max: f32,
}

impl ValueRange {
    pub fn new(min: f32, max: f32) -> Result<Self> {
        if !(min.is_finite() && max.is_finite() && max > min) {
            return Err(TensorError::Dimension(format!("invalid value range [{min}, {max}]")));
        }
        Ok(Self { min, max })
    }

    fn to_byte(self, v: f32) -> u8 {
        let scaled = (v as f64 - self.min as f64) / (self.max as f64 - self.min as f64) * 255.0;
        // round half up, then clamp
        (scaled + 0.5).floor().clamp(0.0, 255.0) as u8
    }

    fn decode_byte(self, b: u8) -> f32 {
        (self.min as f64 + b as f64 / 255.0 * (self.max as f64 - self.min as f64)) as f32
    }
}

impl Default for ValueRange {
    fn default() -> Self {
        Self { min: -1.0, max: 1.0 }
    }
}

pub fn export_image(canvas: &Canvas, path: impl AsRef<Path>, range: ValueRange) -> Result<()> {
    let (h, w, c) = canvas.shape();
    let bytes: Vec<u8> = canvas.data().iter().map(|&v| range.to_byte(v)).collect();
    match c {
        1 => GrayImage::from_raw(w as u32, h as u32, bytes)
            .expect("buffer sized from canvas")
            .save(path)?,
        3 => RgbImage::from_raw(w as u32, h as u32, bytes)
            .expect("buffer sized from canvas")
            .save(path)?,
        other => return Err(TensorError::UnsupportedChannels(other)),
    }
    Ok(())
}

/// Loads an 8-bit PNG as a 1- or 3-channel canvas, inverting the export map.
pub fn import_image(path: impl AsRef<Path>, range: ValueRange) -> Result<Canvas> {
    let img = image::open(path)?;
    let (w, h, c, raw) = match img {
        image::DynamicImage::ImageLuma8(g) => (g.width(), g.height(), 1, g.into_raw()),
        other => {
            let rgb = other.to_rgb8();
            (rgb.width(), rgb.height(), 3, rgb.into_raw())
        }
    };
    let data = raw.into_iter().map(|b| range.decode_byte(b)).collect();
    Canvas::new(h as usize, w as usize, c, data)
}
