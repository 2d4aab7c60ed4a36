//! In-process denoisers for tests and desk-scale experiments.

use super::MockSchedule;
use crate::sampler::{DenoiseError, DenoiseRequest, Denoiser};
use crate::tensor::{derive_seed, Canvas, Rng};

fn tensor_err(e: crate::tensor::TensorError) -> DenoiseError {
    DenoiseError::Data(e.to_string())
}

/// Returns every patch unchanged.
#[derive(Debug, Clone, Copy, Default)]
pub struct MockIdentity;

impl Denoiser for MockIdentity {
    fn name(&self) -> String {
        "mock:identity".into()
    }

    fn denoise(&self, request: &DenoiseRequest<'_>) -> Result<Canvas, DenoiseError> {
        Ok(request.patch.clone())
    }
}

/// Returns a patch filled with a fixed value.
#[derive(Debug, Clone, Copy)]
pub struct MockConstant(pub f32);

impl Denoiser for MockConstant {
    fn name(&self) -> String {
        format!("mock:constant={}", self.0)
    }

    fn denoise(&self, request: &DenoiseRequest<'_>) -> Result<Canvas, DenoiseError> {
        let (h, w, c) = request.patch.shape();
        Canvas::filled(h, w, c, self.0).map_err(tensor_err)
    }
}

pub fn mock_identity() -> MockIdentity {
    MockIdentity
}

pub fn mock_constant(value: f32) -> MockConstant {
    MockConstant(value)
}

#[derive(Debug, Clone)]
enum Strength {
    Schedule(MockSchedule),
    Fixed(f64),
}

/// Blends each patch toward its horizontal box blur:
/// `(1 − λ_t)·patch + λ_t·blur(patch)` with `λ_t = σ_t / (σ_t + α_t)`.
///
/// The blur has width `2r + 1` and mirrors at the patch edges without
/// repeating the edge column (`-1 → 1`).
#[derive(Debug, Clone)]
pub struct MockBlur {
    radius: usize,
    strength: Strength,
}

impl MockBlur {
    pub fn new(radius: usize, schedule: MockSchedule) -> Result<Self, DenoiseError> {
        Self::check_radius(radius)?;
        Ok(Self {
            radius,
            strength: Strength::Schedule(schedule),
        })
    }

    /// Same blend with a step-independent `λ` in `[0, 1]`.
    pub fn with_fixed_strength(radius: usize, lambda: f64) -> Result<Self, DenoiseError> {
        Self::check_radius(radius)?;
        if !(0.0..=1.0).contains(&lambda) {
            return Err(DenoiseError::Config(format!("lambda {lambda} outside [0, 1]")));
        }
        Ok(Self {
            radius,
            strength: Strength::Fixed(lambda),
        })
    }

    fn check_radius(radius: usize) -> Result<(), DenoiseError> {
        if radius == 0 {
            return Err(DenoiseError::Config("blur radius must be at least 1".into()));
        }
        Ok(())
    }

    fn lambda(&self, t: usize) -> Result<f64, DenoiseError> {
        match &self.strength {
            Strength::Schedule(s) => s.lambda(t),
            Strength::Fixed(l) => Ok(*l),
        }
    }
}

fn reflect(i: isize, width: usize) -> usize {
    let last = width as isize - 1;
    let mut i = i;
    if i < 0 {
        i = -i;
    }
    if i > last {
        i = 2 * last - i;
    }
    i as usize
}

/// Horizontal box blur of width `2r + 1` with mirrored edges. Requires
/// `r < width`.
pub(crate) fn box_blur(patch: &Canvas, radius: usize) -> Vec<f64> {
    let (h, w, c) = patch.shape();
    let r = radius as isize;
    let norm = 1.0 / (2 * radius + 1) as f64;
    let mut out = vec![0.0; h * w * c];
    for y in 0..h {
        for x in 0..w {
            for ch in 0..c {
                let sum: f64 = (-r..=r)
                    .map(|d| patch.get(y, reflect(x as isize + d, w), ch) as f64)
                    .sum();
                out[(y * w + x) * c + ch] = sum * norm;
            }
        }
    }
    out
}

impl Denoiser for MockBlur {
    fn name(&self) -> String {
        format!("mock:blur(r={})", self.radius)
    }

    fn denoise(&self, request: &DenoiseRequest<'_>) -> Result<Canvas, DenoiseError> {
        let patch = request.patch;
        if self.radius >= patch.width() {
            return Err(DenoiseError::Config(format!(
                "blur radius {} must be below patch width {}",
                self.radius,
                patch.width()
            )));
        }
        let lambda = self.lambda(request.t)?;
        if lambda == 0.0 {
            return Ok(patch.clone());
        }
        let blurred = box_blur(patch, self.radius);
        let data = patch
            .data()
            .iter()
            .zip(&blurred)
            .map(|(&v, &b)| ((1.0 - lambda) * v as f64 + lambda * b) as f32)
            .collect();
        let (h, w, c) = patch.shape();
        Canvas::new(h, w, c, data).map_err(tensor_err)
    }
}

pub fn mock_blur(radius: usize, schedule: MockSchedule) -> Result<MockBlur, DenoiseError> {
    MockBlur::new(radius, schedule)
}

/// Stochastic mock: `α_t·patch + σ_t·ε`, with `ε` standard normal drawn from
/// a generator seeded by `(request seed, t)`.
#[derive(Debug, Clone)]
pub struct MockSeededNoise {
    schedule: MockSchedule,
}

impl MockSeededNoise {
    pub fn new(schedule: MockSchedule) -> Self {
        Self { schedule }
    }
}

impl Denoiser for MockSeededNoise {
    fn name(&self) -> String {
        "mock:noise".into()
    }

    fn denoise(&self, request: &DenoiseRequest<'_>) -> Result<Canvas, DenoiseError> {
        let alpha = self.schedule.alpha(request.t)?;
        let sigma = self.schedule.sigma(request.t)?;
        let mut rng = Rng::new(derive_seed(request.seed, &[request.t as u64]));
        let patch = request.patch;
        let data = patch
            .data()
            .iter()
            .map(|&v| {
                let noise = if sigma > 0.0 {
                    sigma * rng.standard_normal()
                } else {
                    0.0
                };
                (alpha * v as f64 + noise) as f32
            })
            .collect();
        let (h, w, c) = patch.shape();
        Canvas::new(h, w, c, data).map_err(tensor_err)
    }
}

pub fn mock_seeded_noise(schedule: MockSchedule) -> MockSeededNoise {
    MockSeededNoise::new(schedule)
}
