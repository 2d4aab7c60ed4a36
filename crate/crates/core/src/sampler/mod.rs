//! Blended denoising loops over the extended canvas.
//!
//! A step crops every sliding window (and, in stitch mode, the wraparound
//! stitch block) out of the current canvas, sends each crop through the
//! denoiser, and fuses the results by the per-cell weighted mean. That mean
//! is the closed-form minimizer of the summed squared deviation between the
//! new canvas and every denoised crop. Requests may complete in any order;
//! fusion always adds stitch passes first, then windows, by index.

mod config;
mod denoiser;
mod dispatch;
mod manifest;

use std::time::Instant;

use thiserror::Error;

pub use config::{Mode, SamplerConfig};
pub use denoiser::{BatchError, Conditioning, DenoiseError, DenoiseRequest, Denoiser};
pub use dispatch::dispatch_ordered;
pub use manifest::RunManifest;

use crate::tensor::{derive_seed, Canvas, Rng, TensorError};
use crate::tiling::{global_crop, Accumulator, OrderMode, Region, StitchPlan, TilingError, TilingPlan};

const LANE_WINDOW: u64 = 0;
const LANE_STITCH: u64 = 1;

/// Which request of a step failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RequestKind {
    Window(usize),
    StitchPass(usize),
}

impl std::fmt::Display for RequestKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RequestKind::Window(i) => write!(f, "window {i}"),
            RequestKind::StitchPass(j) => write!(f, "stitch pass {j}"),
        }
    }
}

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("denoiser failed at step {t}, {request}: {source}")]
    Denoise {
        t: usize,
        request: RequestKind,
        #[source]
        source: DenoiseError,
    },
    #[error(transparent)]
    Tiling(#[from] TilingError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

pub type Result<T> = std::result::Result<T, SamplerError>;

/// Per-step parameters shared by both step functions.
#[derive(Debug, Clone, Copy)]
pub struct StepContext {
    pub t: usize,
    pub total_steps: usize,
    pub run_seed: u64,
    pub max_inflight: usize,
}

impl StepContext {
    pub fn new(t: usize, total_steps: usize, run_seed: u64) -> Self {
        Self {
            t,
            total_steps,
            run_seed,
            max_inflight: 1,
        }
    }

    pub fn with_max_inflight(mut self, n: usize) -> Self {
        self.max_inflight = n;
        self
    }

    pub fn window_seed(&self, index: usize) -> u64 {
        derive_seed(self.run_seed, &[self.t as u64, LANE_WINDOW, index as u64])
    }

    pub fn stitch_seed(&self, pass: usize) -> u64 {
        derive_seed(self.run_seed, &[self.t as u64, LANE_STITCH, pass as u64])
    }
}

/// `init_canvas`: Gaussian noise of shape H × W′ × C. With `periodic_init`
/// every column `c ≥ 2H` copies column `c − 2H`.
pub fn init_canvas(config: &SamplerConfig, rng: &mut Rng) -> Result<Canvas> {
    let mut canvas = Canvas::gaussian(config.height, config.canvas_width, config.channels, rng)?;
    if config.periodic_init {
        let period = config.period();
        for col in period..canvas.width() {
            canvas.copy_column(col - period, col);
        }
    }
    Ok(canvas)
}

/// Replaces each column class `{c, c + 2H, c + 4H, …}` by its mean so the
/// canvas becomes exactly `2H`-periodic.
pub fn enforce_periodicity(canvas: &mut Canvas, period: usize) {
    let (h, w, ch) = canvas.shape();
    if period == 0 || period >= w {
        return;
    }
    let stride = w * ch;
    let data = canvas.data_mut();
    for residue in 0..period {
        let members: Vec<usize> = (residue..w).step_by(period).collect();
        let count = members.len() as f64;
        for y in 0..h {
            for c in 0..ch {
                let sum: f64 = members.iter().map(|&x| data[y * stride + x * ch + c] as f64).sum();
                let mean = (sum / count) as f32;
                for &x in &members {
                    data[y * stride + x * ch + c] = mean;
                }
            }
        }
    }
}

fn check_output(request: &DenoiseRequest<'_>, out: &Canvas) -> std::result::Result<(), DenoiseError> {
    if out.shape() != request.patch.shape() {
        return Err(DenoiseError::Protocol(format!(
            "denoiser returned shape {:?} for input {:?}",
            out.shape(),
            request.patch.shape()
        )));
    }
    Ok(())
}

/// Sends `patches` through the denoiser and maps failures back to the
/// request kind that produced them.
fn denoise_all(
    denoiser: &dyn Denoiser,
    ctx: &StepContext,
    conditioning: &Conditioning,
    patches: &[(RequestKind, Canvas, u64)],
) -> Result<Vec<Canvas>> {
    let requests: Vec<DenoiseRequest<'_>> = patches
        .iter()
        .map(|(_, patch, seed)| DenoiseRequest {
            patch,
            t: ctx.t,
            total_steps: ctx.total_steps,
            conditioning,
            seed: *seed,
        })
        .collect();
    let fail = |index: usize, source| SamplerError::Denoise {
        t: ctx.t,
        request: patches[index].0,
        source,
    };
    let outputs = dispatch_ordered(denoiser, &requests, ctx.max_inflight).map_err(|e| fail(e.index, e.source))?;
    for (index, (req, out)) in requests.iter().zip(&outputs).enumerate() {
        check_output(req, out).map_err(|e| fail(index, e))?;
    }
    Ok(outputs)
}

fn window_requests(jt: &Canvas, ctx: &StepContext, tiling: &TilingPlan) -> Result<Vec<(RequestKind, Canvas, u64)>> {
    tiling
        .regions()
        .enumerate()
        .map(|(i, r)| Ok((RequestKind::Window(i), r.extract(jt)?, ctx.window_seed(i))))
        .collect()
}

fn stitch_requests(block: &Canvas, ctx: &StepContext, stitch: &StitchPlan) -> Vec<(RequestKind, Canvas, u64)> {
    (0..stitch.passes())
        .map(|j| (RequestKind::StitchPass(j), block.clone(), ctx.stitch_seed(j)))
        .collect()
}

fn check_width(jt: &Canvas, tiling: &TilingPlan) -> Result<()> {
    if jt.width() != tiling.canvas_width() {
        return Err(SamplerError::Config(format!(
            "canvas width {} does not match plan width {}",
            jt.width(),
            tiling.canvas_width()
        )));
    }
    Ok(())
}

/// `multidiffusion_step`: fuses the denoised windows of `jt` by per-cell
/// mean with unit weights.
pub fn multidiffusion_step(
    jt: &Canvas,
    ctx: &StepContext,
    tiling: &TilingPlan,
    denoiser: &dyn Denoiser,
    conditioning: &Conditioning,
) -> Result<Canvas> {
    check_width(jt, tiling)?;
    let requests = window_requests(jt, ctx, tiling)?;
    let outputs = denoise_all(denoiser, ctx, conditioning, &requests)?;
    let mut acc = Accumulator::for_canvas(jt);
    for (region, out) in tiling.regions().zip(&outputs) {
        acc.scatter(&region, out, 1.0)?;
    }
    Ok(acc.finish()?)
}

/// `stitchdiffusion_step`: as [`multidiffusion_step`] plus `K` denoisings of
/// the stitch block.
///
/// In [`OrderMode::Pre`] the stitch passes are denoised from `jt` alongside
/// the windows and every output enters one weighted sum whose normalizer is
/// the coverage map. In [`OrderMode::Post`] the windows are fused first and
/// the edge strips are then overwritten by the mean of the stitch passes over
/// the fused canvas.
pub fn stitchdiffusion_step(
    jt: &Canvas,
    ctx: &StepContext,
    tiling: &TilingPlan,
    stitch: &StitchPlan,
    denoiser: &dyn Denoiser,
    conditioning: &Conditioning,
) -> Result<Canvas> {
    check_width(jt, tiling)?;
    let region = stitch.region();
    match stitch.order_mode() {
        OrderMode::Pre => {
            let block = region.extract(jt)?;
            let mut requests = stitch_requests(&block, ctx, stitch);
            requests.extend(window_requests(jt, ctx, tiling)?);
            let outputs = denoise_all(denoiser, ctx, conditioning, &requests)?;
            let mut acc = Accumulator::for_canvas(jt);
            let regions = std::iter::repeat_n(region, stitch.passes()).chain(tiling.regions());
            for (r, out) in regions.zip(&outputs) {
                acc.scatter(&r, out, 1.0)?;
            }
            Ok(acc.finish()?)
        }
        OrderMode::Post => {
            let mut fused = multidiffusion_step(jt, ctx, tiling, denoiser, conditioning)?;
            if stitch.passes() == 0 {
                return Ok(fused);
            }
            let block = region.extract(&fused)?;
            let requests = stitch_requests(&block, ctx, stitch);
            let outputs = denoise_all(denoiser, ctx, conditioning, &requests)?;
            let mut acc = Accumulator::for_canvas(&block);
            let whole = Region::Window {
                start: 0,
                width: block.width(),
            };
            for out in &outputs {
                acc.scatter(&whole, out, 1.0)?;
            }
            region.paste(&mut fused, &acc.finish()?)?;
            Ok(fused)
        }
    }
}

/// Result of a full run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    /// Initial noise canvas J_T.
    pub initial: Canvas,
    /// Final extended canvas J_0.
    pub canvas: Canvas,
    /// Cropped panorama, width `W′ − W`.
    pub panorama: Canvas,
    /// Wall time of each step in seconds, in execution order (t = T first).
    pub step_seconds: Vec<f64>,
}

/// `run`: `T` fused steps from the initial noise canvas, then the global crop.
pub fn run(config: &SamplerConfig, denoiser: &dyn Denoiser, conditioning: &Conditioning) -> Result<RunOutput> {
    config.validate()?;
    let tiling = config.tiling()?;
    let stitch = config.stitch_plan()?;
    let mut rng = Rng::new(config.seed);
    let initial = init_canvas(config, &mut rng)?;
    let mut canvas = initial.clone();
    let mut step_seconds = Vec::with_capacity(config.steps);
    for t in (1..=config.steps).rev() {
        let started = Instant::now();
        let ctx = StepContext::new(t, config.steps, config.seed).with_max_inflight(config.max_inflight);
        canvas = match &stitch {
            Some(plan) => stitchdiffusion_step(&canvas, &ctx, &tiling, plan, denoiser, conditioning)?,
            None => multidiffusion_step(&canvas, &ctx, &tiling, denoiser, conditioning)?,
        };
        if config.enforce_periodicity {
            enforce_periodicity(&mut canvas, config.period());
        }
        step_seconds.push(started.elapsed().as_secs_f64());
    }
    let panorama = global_crop(&canvas, config.window_width)?;
    Ok(RunOutput {
        initial,
        canvas,
        panorama,
        step_seconds,
    })
}
