use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EvalError, Result};
use crate::tensor::{Canvas, Rng};

/// Top-left corner and size of a square patch in one image of a set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchLocation {
    pub image_index: usize,
    pub x: usize,
    pub y: usize,
    pub size: usize,
}

/// Draws `count` patch locations uniformly: image index first, then the row
/// offset, then the column offset. Every location lies fully inside its
/// image (no wraparound).
pub fn sample_locations(
    image_dims: &[(usize, usize)],
    count: usize,
    size: usize,
    rng: &mut Rng,
) -> Result<Vec<PatchLocation>> {
    if image_dims.is_empty() || count == 0 || size == 0 {
        return Err(EvalError::Config(
            "need at least one image, one patch and a positive size".into(),
        ));
    }
    if let Some((i, &(h, w))) = image_dims.iter().enumerate().find(|(_, &(h, w))| size > h || size > w) {
        return Err(EvalError::Config(format!(
            "patch size {size} exceeds image {i} of size {h}x{w}"
        )));
    }
    let n = image_dims.len() as u64;
    Ok((0..count)
        .map(|_| {
            let image_index = rng.below(n) as usize;
            let (h, w) = image_dims[image_index];
            let y = rng.below((h - size + 1) as u64) as usize;
            let x = rng.below((w - size + 1) as u64) as usize;
            PatchLocation {
                image_index,
                x,
                y,
                size,
            }
        })
        .collect())
}

pub fn crop_patch(images: &[Canvas], loc: &PatchLocation) -> Result<Canvas> {
    let image = images.get(loc.image_index).ok_or_else(|| {
        EvalError::Config(format!(
            "location refers to image {} of {}",
            loc.image_index,
            images.len()
        ))
    })?;
    if loc.y + loc.size > image.height() || loc.x + loc.size > image.width() {
        return Err(EvalError::Config(format!(
            "patch {loc:?} does not fit image of size {}x{}",
            image.height(),
            image.width()
        )));
    }
    let (_, w, c) = image.shape();
    let mut data = Vec::with_capacity(loc.size * loc.size * c);
    for y in loc.y..loc.y + loc.size {
        let start = (y * w + loc.x) * c;
        data.extend_from_slice(&image.data()[start..start + loc.size * c]);
    }
    Ok(Canvas::new(loc.size, loc.size, c, data)?)
}

pub fn crop_patches(images: &[Canvas], locations: &[PatchLocation]) -> Result<Vec<Canvas>> {
    locations.iter().map(|l| crop_patch(images, l)).collect()
}

pub fn save_locations(locations: &[PatchLocation], path: impl AsRef<Path>) -> Result<()> {
    let json = serde_json::to_string_pretty(locations).map_err(|e| EvalError::Io(e.to_string()))?;
    std::fs::write(path, json).map_err(|e| EvalError::Io(e.to_string()))
}

pub fn load_locations(path: impl AsRef<Path>) -> Result<Vec<PatchLocation>> {
    let text = std::fs::read_to_string(path).map_err(|e| EvalError::Io(e.to_string()))?;
    serde_json::from_str(&text).map_err(|e| EvalError::Io(e.to_string()))
}
