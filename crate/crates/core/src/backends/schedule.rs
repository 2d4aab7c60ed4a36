use serde::{Deserialize, Serialize};

use crate::sampler::DenoiseError;

/// Signal/noise coefficients `(α_t, σ_t)` for steps `t = 1..=T`, used only by
/// the mock backends. α lies in (0, 1], σ ≥ 0, and α does not decrease as t
/// decreases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockSchedule {
    alpha: Vec<f64>,
    sigma: Vec<f64>,
}

impl MockSchedule {
    /// `alpha[i]` and `sigma[i]` belong to step `t = i + 1`.
    pub fn new(alpha: Vec<f64>, sigma: Vec<f64>) -> Result<Self, DenoiseError> {
        if alpha.is_empty() || alpha.len() != sigma.len() {
            return Err(DenoiseError::Config(format!(
                "schedule needs equal, non-empty alpha/sigma (got {} and {})",
                alpha.len(),
                sigma.len()
            )));
        }
        if let Some(a) = alpha.iter().find(|&&a| !(a > 0.0 && a <= 1.0)) {
            return Err(DenoiseError::Config(format!("alpha {a} outside (0, 1]")));
        }
        if let Some(s) = sigma.iter().find(|&&s| !(s >= 0.0 && s.is_finite())) {
            return Err(DenoiseError::Config(format!("sigma {s} must be finite and >= 0")));
        }
        if alpha.windows(2).any(|w| w[1] > w[0]) {
            return Err(DenoiseError::Config("alpha must not increase with t".into()));
        }
        Ok(Self { alpha, sigma })
    }

    /// Cosine schedule: `α_t = cos(u·π/2)`, `σ_t = sin(u·π/2)` with
    /// `u = t / (T + 1)`.
    pub fn cosine(steps: usize) -> Self {
        let (alpha, sigma) = (1..=steps)
            .map(|t| {
                let angle = t as f64 / (steps + 1) as f64 * std::f64::consts::FRAC_PI_2;
                (angle.cos(), angle.sin())
            })
            .unzip();
        Self { alpha, sigma }
    }

    /// Noise-free schedule (`α = 1`, `σ = 0`) of `steps` steps.
    pub fn noiseless(steps: usize) -> Self {
        Self {
            alpha: vec![1.0; steps],
            sigma: vec![0.0; steps],
        }
    }

    pub fn steps(&self) -> usize {
        self.alpha.len()
    }

    fn slot(&self, t: usize) -> Result<usize, DenoiseError> {
        if t == 0 || t > self.alpha.len() {
            return Err(DenoiseError::Config(format!(
                "step {t} outside schedule of {} steps",
                self.alpha.len()
            )));
        }
        Ok(t - 1)
    }

    pub fn alpha(&self, t: usize) -> Result<f64, DenoiseError> {
        Ok(self.alpha[self.slot(t)?])
    }

    pub fn sigma(&self, t: usize) -> Result<f64, DenoiseError> {
        Ok(self.sigma[self.slot(t)?])
    }

    /// Mixing strength `σ_t / (σ_t + α_t)`.
    pub fn lambda(&self, t: usize) -> Result<f64, DenoiseError> {
        let i = self.slot(t)?;
        Ok(self.sigma[i] / (self.sigma[i] + self.alpha[i]))
    }
}
