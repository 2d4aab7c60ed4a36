//! Geometry of the extended canvas: sliding windows, the wraparound stitch
//! block, per-column coverage weights and the final crop.
//!
//! All regions span the full canvas height, so coverage is a function of the
//! column alone. [`WeightMap`] and [`Accumulator`] store one weight per column
//! and broadcast it over rows and channels.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tensor::{Canvas, TensorError};

#[derive(Debug, Error)]
pub enum TilingError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("bounds error: {0}")]
    Bounds(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

pub type Result<T> = std::result::Result<T, TilingError>;

/// Horizontal sliding-window layout over a canvas of width `canvas_width`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TilingPlan {
    canvas_width: usize,
    window_width: usize,
    stride: usize,
    starts: Vec<usize>,
}

impl TilingPlan {
    pub fn new(canvas_width: usize, window_width: usize, stride: usize) -> Result<Self> {
        if window_width == 0 || stride == 0 {
            return Err(TilingError::Config(format!(
                "window width ({window_width}) and stride ({stride}) must be positive"
            )));
        }
        if canvas_width < window_width {
            return Err(TilingError::Config(format!(
                "canvas width {canvas_width} is smaller than window width {window_width}"
            )));
        }
        let span = canvas_width - window_width;
        if !span.is_multiple_of(stride) {
            return Err(TilingError::Config(format!(
                "stride {stride} does not divide canvas width minus window width ({span})"
            )));
        }
        if span > 0 && stride > window_width {
            return Err(TilingError::Config(format!(
                "stride {stride} exceeds window width {window_width} and would leave columns uncovered"
            )));
        }
        let n = span / stride + 1;
        let starts = (0..n).map(|i| i * stride).collect();
        Ok(Self {
            canvas_width,
            window_width,
            stride,
            starts,
        })
    }

    pub fn canvas_width(&self) -> usize {
        self.canvas_width
    }

    pub fn window_width(&self) -> usize {
        self.window_width
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn len(&self) -> usize {
        self.starts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.starts.is_empty()
    }

    pub fn starts(&self) -> &[usize] {
        &self.starts
    }

    pub fn regions(&self) -> impl Iterator<Item = Region> + '_ {
        self.starts.iter().map(|&start| Region::Window {
            start,
            width: self.window_width,
        })
    }
}

/// `plan_windows`: the window layout for `(W′, W, ω)`.
pub fn plan_windows(canvas_width: usize, window_width: usize, stride: usize) -> Result<TilingPlan> {
    TilingPlan::new(canvas_width, window_width, stride)
}

/// How the two edge strips are joined into the stitch block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConcatOrder {
    /// Rightmost strip then leftmost strip; the wraparound junction sits at
    /// the block center.
    #[default]
    RightmostFirst,
    /// Leftmost strip then rightmost strip; the junction falls on the block
    /// edges.
    LeftmostFirst,
}

/// When the stitch-block passes run relative to the window passes of a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OrderMode {
    /// Stitch passes enter the same weighted sum as the windows.
    #[default]
    Pre,
    /// Windows are fused first; the edges are then overwritten with the mean
    /// of the stitch passes over the fused result.
    Post,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StitchPlan {
    half: usize,
    passes: usize,
    concat_order: ConcatOrder,
    order_mode: OrderMode,
}

impl StitchPlan {
    /// Stitch block of width `window_width` with `passes` pre-denoising
    /// passes. Zero passes is accepted and contributes nothing.
    pub fn new(window_width: usize, passes: usize) -> Result<Self> {
        if window_width == 0 || !window_width.is_multiple_of(2) {
            return Err(TilingError::Config(format!(
                "stitch block needs a positive even window width, got {window_width}"
            )));
        }
        Ok(Self {
            half: window_width / 2,
            passes,
            concat_order: ConcatOrder::default(),
            order_mode: OrderMode::default(),
        })
    }

    pub fn with_concat_order(mut self, order: ConcatOrder) -> Self {
        self.concat_order = order;
        self
    }

    pub fn with_order_mode(mut self, mode: OrderMode) -> Self {
        self.order_mode = mode;
        self
    }

    pub fn half(&self) -> usize {
        self.half
    }

    pub fn block_width(&self) -> usize {
        2 * self.half
    }

    pub fn passes(&self) -> usize {
        self.passes
    }

    pub fn concat_order(&self) -> ConcatOrder {
        self.concat_order
    }

    pub fn order_mode(&self) -> OrderMode {
        self.order_mode
    }

    pub fn region(&self) -> Region {
        Region::Stitch {
            half: self.half,
            order: self.concat_order,
        }
    }
}

/// A full-height area of the canvas that maps to one denoiser input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    Window { start: usize, width: usize },
    Stitch { half: usize, order: ConcatOrder },
}

impl Region {
    pub fn width(&self) -> usize {
        match *self {
            Region::Window { width, .. } => width,
            Region::Stitch { half, .. } => 2 * half,
        }
    }

    /// `(canvas_start, patch_start, len)` column runs making up the region.
    fn runs(&self, canvas_width: usize) -> Result<Vec<(usize, usize, usize)>> {
        match *self {
            Region::Window { start, width } => {
                if width == 0 || start + width > canvas_width {
                    return Err(TilingError::Bounds(format!(
                        "window [{start}, {}) outside canvas width {canvas_width}",
                        start + width
                    )));
                }
                Ok(vec![(start, 0, width)])
            }
            Region::Stitch { half, order } => {
                if half == 0 || 2 * half > canvas_width {
                    return Err(TilingError::Config(format!(
                        "stitch half-width {half} exceeds half of canvas width {canvas_width}"
                    )));
                }
                let right = canvas_width - half;
                Ok(match order {
                    ConcatOrder::RightmostFirst => vec![(right, 0, half), (0, half, half)],
                    ConcatOrder::LeftmostFirst => vec![(0, 0, half), (right, half, half)],
                })
            }
        }
    }

    pub fn extract(&self, canvas: &Canvas) -> Result<Canvas> {
        let runs = self.runs(canvas.width())?;
        let pieces = runs
            .iter()
            .map(|&(start, _, len)| canvas.columns(start, len))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let refs: Vec<&Canvas> = pieces.iter().collect();
        Ok(Canvas::hconcat(&refs)?)
    }

    /// Writes `patch` back over the region, replacing current values.
    pub fn paste(&self, canvas: &mut Canvas, patch: &Canvas) -> Result<()> {
        let runs = self.runs(canvas.width())?;
        check_patch(self, canvas.height(), canvas.channels(), patch)?;
        for (start, from, len) in runs {
            canvas.paste_columns(start, &patch.columns(from, len)?);
        }
        Ok(())
    }
}

fn check_patch(region: &Region, height: usize, channels: usize, patch: &Canvas) -> Result<()> {
    let expected = (height, region.width(), channels);
    if patch.shape() != expected {
        return Err(TilingError::Shape(format!(
            "patch shape {:?} does not match region shape {expected:?}",
            patch.shape()
        )));
    }
    Ok(())
}

/// `extract_window`: columns `[start, start + width)`.
pub fn extract_window(canvas: &Canvas, start: usize, width: usize) -> Result<Canvas> {
    Region::Window { start, width }.extract(canvas)
}

/// `extract_stitch_block`: the two edge strips joined per the plan's order.
pub fn extract_stitch_block(canvas: &Canvas, plan: &StitchPlan) -> Result<Canvas> {
    plan.region().extract(canvas)
}

/// Per-column weights broadcast over rows and channels.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMap {
    columns: Vec<f64>,
}

impl WeightMap {
    pub fn width(&self) -> usize {
        self.columns.len()
    }

    pub fn at(&self, _row: usize, col: usize) -> f64 {
        self.columns[col]
    }

    pub fn columns(&self) -> &[f64] {
        &self.columns
    }

    /// Materializes the map as a canvas of the given height and channel count.
    pub fn to_canvas(&self, height: usize, channels: usize) -> Result<Canvas> {
        let cols = &self.columns;
        Ok(Canvas::from_fn(height, cols.len(), channels, |_, x, _| cols[x] as f32)?)
    }
}

/// Running weighted sums for one fused step. Values are held in f64 so that
/// fusing identical contributions reproduces them exactly.
#[derive(Debug, Clone)]
pub struct Accumulator {
    height: usize,
    width: usize,
    channels: usize,
    value: Vec<f64>,
    weight: Vec<f64>,
}

impl Accumulator {
    pub fn new(height: usize, width: usize, channels: usize) -> Self {
        Self {
            height,
            width,
            channels,
            value: vec![0.0; height * width * channels],
            weight: vec![0.0; width],
        }
    }

    pub fn for_canvas(canvas: &Canvas) -> Self {
        let (h, w, c) = canvas.shape();
        Self::new(h, w, c)
    }

    /// `scatter_accumulate`: adds `weight × patch` over the region and
    /// `weight` to the region's coverage.
    pub fn scatter(&mut self, region: &Region, patch: &Canvas, weight: f64) -> Result<()> {
        let runs = region.runs(self.width)?;
        check_patch(region, self.height, self.channels, patch)?;
        let c = self.channels;
        let pw = patch.width();
        let src = patch.data();
        for (start, from, len) in runs {
            for y in 0..self.height {
                let dst = (y * self.width + start) * c;
                let s = (y * pw + from) * c;
                for (acc, &v) in self.value[dst..dst + len * c].iter_mut().zip(&src[s..s + len * c]) {
                    *acc += weight * v as f64;
                }
            }
            for w in &mut self.weight[start..start + len] {
                *w += weight;
            }
        }
        Ok(())
    }

    pub fn weight_map(&self) -> WeightMap {
        WeightMap {
            columns: self.weight.clone(),
        }
    }

    pub fn value_at(&self, y: usize, x: usize, c: usize) -> f64 {
        self.value[(y * self.width + x) * self.channels + c]
    }

    /// Per-cell weighted mean. Fails if any column received no weight.
    pub fn finish(&self) -> Result<Canvas> {
        if let Some(col) = self.weight.iter().position(|&w| w <= 0.0) {
            return Err(TilingError::Config(format!("column {col} is not covered")));
        }
        let c = self.channels;
        let mut data = Vec::with_capacity(self.value.len());
        for y in 0..self.height {
            for x in 0..self.width {
                let w = self.weight[x];
                let base = (y * self.width + x) * c;
                data.extend(self.value[base..base + c].iter().map(|&v| (v / w) as f32));
            }
        }
        Ok(Canvas::new(self.height, self.width, self.channels, data)?)
    }
}

/// `coverage_map`: window coverage count per column plus the stitch passes
/// on stitch-covered columns.
pub fn coverage_map(tiling: &TilingPlan, stitch: Option<&StitchPlan>) -> WeightMap {
    let width = tiling.canvas_width();
    // difference array over column boundaries
    let mut delta = vec![0i64; width + 1];
    for &s in tiling.starts() {
        delta[s] += 1;
        delta[s + tiling.window_width()] -= 1;
    }
    if let Some(plan) = stitch {
        let k = plan.passes() as i64;
        let h = plan.half().min(width);
        delta[0] += k;
        delta[h] -= k;
        delta[width - h] += k;
        delta[width] -= k;
    }
    let mut running = 0i64;
    let columns = delta[..width]
        .iter()
        .map(|d| {
            running += d;
            running as f64
        })
        .collect();
    WeightMap { columns }
}

/// `global_crop`: drops `window_width / 2` columns from each side.
pub fn global_crop(canvas: &Canvas, window_width: usize) -> Result<Canvas> {
    if window_width >= canvas.width() {
        return Err(TilingError::Config(format!(
            "window width {window_width} leaves nothing to crop from width {}",
            canvas.width()
        )));
    }
    if !window_width.is_multiple_of(2) {
        return Err(TilingError::Config(format!(
            "window width {window_width} must be even to crop symmetrically"
        )));
    }
    let half = window_width / 2;
    Ok(canvas.columns(half, canvas.width() - window_width)?)
}
