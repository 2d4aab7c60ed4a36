//! Tiled diffusion sampling for 360° equirectangular panoramas.
//!
//! The engine drives any [`sampler::Denoiser`] over overlapping windows of a
//! wide canvas, blends their outputs by per-column weighted averaging, and
//! (in stitch mode) adds a wraparound block built from the two canvas edges
//! so the final crop joins seamlessly at 0°/360°.

pub mod backends;
pub mod caption;
pub mod evalkit;
pub mod sampler;
pub mod tensor;
pub mod tiling;
