use serde::{Deserialize, Serialize};

use super::SamplerError;
use crate::tiling::{ConcatOrder, OrderMode, StitchPlan, TilingPlan};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[serde(alias = "multi")]
    MultiDiffusion,
    #[default]
    #[serde(alias = "stitch")]
    StitchDiffusion,
}

/// Full description of one sampling run. All sizes are in canvas cells
/// (latent cells for a latent backend, pixels for pixel-space mocks).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub height: usize,
    pub window_width: usize,
    pub canvas_width: usize,
    pub stride: usize,
    pub channels: usize,
    pub steps: usize,
    pub seed: u64,
    pub mode: Mode,
    pub stitch_passes: usize,
    pub stitch_order: OrderMode,
    pub concat_order: ConcatOrder,
    pub periodic_init: bool,
    pub enforce_periodicity: bool,
    pub max_inflight: usize,
}

impl Default for SamplerConfig {
    /// Latent-space geometry of a 512×1024 panorama: H = 64, W = 128,
    /// stride 16, canvas 2H + W = 256, four latent channels, 50 steps.
    fn default() -> Self {
        Self::for_height(64, 16)
    }
}

impl SamplerConfig {
    /// Panorama geometry for output height `height`: window `2H`, canvas
    /// `4H`, the given stride and otherwise default settings.
    pub fn for_height(height: usize, stride: usize) -> Self {
        Self {
            height,
            window_width: 2 * height,
            canvas_width: 4 * height,
            stride,
            channels: 4,
            steps: 50,
            seed: 0,
            mode: Mode::StitchDiffusion,
            stitch_passes: 2,
            stitch_order: OrderMode::Pre,
            concat_order: ConcatOrder::RightmostFirst,
            periodic_init: true,
            enforce_periodicity: false,
            max_inflight: 1,
        }
    }

    /// Width of one full turn of the panorama, `2H`.
    pub fn period(&self) -> usize {
        2 * self.height
    }

    pub fn validate(&self) -> Result<(), SamplerError> {
        let fail = |msg: String| Err(SamplerError::Config(msg));
        if self.height == 0 || self.channels == 0 {
            return fail("height and channels must be positive".into());
        }
        if self.steps == 0 {
            return fail("steps must be at least 1".into());
        }
        if self.max_inflight == 0 {
            return fail("max_inflight must be at least 1".into());
        }
        if self.window_width == 0 || !self.window_width.is_multiple_of(2) {
            return fail(format!("window width {} must be positive and even", self.window_width));
        }
        if self.canvas_width <= self.window_width {
            return fail(format!(
                "canvas width {} must exceed window width {}",
                self.canvas_width, self.window_width
            ));
        }
        if self.mode == Mode::StitchDiffusion {
            let expected = 2 * self.height + self.window_width;
            if self.canvas_width != expected {
                return fail(format!(
                    "stitch mode needs canvas width 2H + W = {expected}, got {}",
                    self.canvas_width
                ));
            }
            if self.stitch_passes == 0 {
                return fail("stitch mode needs at least one stitch pass".into());
            }
        }
        if (self.periodic_init || self.enforce_periodicity) && self.canvas_width <= self.period() {
            return fail(format!(
                "periodic options need canvas width above 2H = {}",
                self.period()
            ));
        }
        self.tiling()?;
        Ok(())
    }

    pub fn tiling(&self) -> Result<TilingPlan, SamplerError> {
        Ok(TilingPlan::new(self.canvas_width, self.window_width, self.stride)?)
    }

    pub fn stitch_plan(&self) -> Result<Option<StitchPlan>, SamplerError> {
        match self.mode {
            Mode::MultiDiffusion => Ok(None),
            Mode::StitchDiffusion => Ok(Some(
                StitchPlan::new(self.window_width, self.stitch_passes)?
                    .with_concat_order(self.concat_order)
                    .with_order_mode(self.stitch_order),
            )),
        }
    }
}
