use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EvalError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample standard deviation (`n − 1` denominator); zero for one sample.
    pub std: f64,
}

impl MeanStd {
    pub fn from_samples(samples: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(EvalError::Config("no samples to summarize".into()));
        }
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let std = if samples.len() > 1 {
            (samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Ok(Self { mean, std })
    }
}

/// Metrics over repeated generations, serialized as the report JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub clip_score: MeanStd,
    pub fid: MeanStd,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seam_ratio: Option<MeanStd>,
    pub repeats: usize,
    pub embedding_source: String,
}

impl EvalReport {
    /// One entry per repeat in `clip` and `fid`; `seam` may be empty.
    pub fn from_runs(clip: &[f64], fid: &[f64], seam: &[f64], embedding_source: impl Into<String>) -> Result<Self> {
        if clip.len() != fid.len() || (!seam.is_empty() && seam.len() != clip.len()) {
            return Err(EvalError::Config(format!(
                "repeat counts disagree: clip {}, fid {}, seam {}",
                clip.len(),
                fid.len(),
                seam.len()
            )));
        }
        Ok(Self {
            clip_score: MeanStd::from_samples(clip)?,
            fid: MeanStd::from_samples(fid)?,
            seam_ratio: if seam.is_empty() {
                None
            } else {
                Some(MeanStd::from_samples(seam)?)
            },
            repeats: clip.len(),
            embedding_source: embedding_source.into(),
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let json = serde_json::to_string_pretty(self).map_err(|e| EvalError::Io(e.to_string()))?;
        std::fs::write(path, json).map_err(|e| EvalError::Io(e.to_string()))
    }
}
