use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::dispatch::dispatch_ordered;
use crate::tensor::Canvas;

/// Text conditioning for a denoise request. At least one of the two fields
/// is present.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conditioning {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    prompt: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    embedding_id: Option<String>,
}

impl Conditioning {
    pub fn prompt(prompt: impl Into<String>) -> Self {
        Self {
            prompt: Some(prompt.into()),
            embedding_id: None,
        }
    }

    pub fn embedding(id: impl Into<String>) -> Self {
        Self {
            prompt: None,
            embedding_id: Some(id.into()),
        }
    }

    pub fn new(prompt: Option<String>, embedding_id: Option<String>) -> Option<Self> {
        (prompt.is_some() || embedding_id.is_some()).then_some(Self { prompt, embedding_id })
    }

    pub fn with_embedding_id(mut self, id: impl Into<String>) -> Self {
        self.embedding_id = Some(id.into());
        self
    }

    pub fn prompt_text(&self) -> Option<&str> {
        self.prompt.as_deref()
    }

    pub fn embedding_id(&self) -> Option<&str> {
        self.embedding_id.as_deref()
    }
}

/// One per-step denoiser call: a patch at step `t` of `total_steps`.
#[derive(Debug, Clone, Copy)]
pub struct DenoiseRequest<'a> {
    pub patch: &'a Canvas,
    pub t: usize,
    pub total_steps: usize,
    pub conditioning: &'a Conditioning,
    pub seed: u64,
}

#[derive(Debug, Error)]
pub enum DenoiseError {
    #[error("transport error{}: {message}", if *.retryable { " (retryable)" } else { "" })]
    Transport { message: String, retryable: bool },
    #[error("backend returned HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("backend configuration error: {0}")]
    Config(String),
}

#[derive(Debug, Error)]
#[error("request {index}: {source}")]
pub struct BatchError {
    pub index: usize,
    #[source]
    pub source: DenoiseError,
}

/// A per-step denoiser: maps a noisy patch at step `t` to a less noisy patch
/// of the same shape. Implementations must be deterministic in
/// `(patch, t, conditioning, seed)` and safe to call concurrently.
pub trait Denoiser: Send + Sync {
    /// Identifier recorded in run manifests.
    fn name(&self) -> String;

    fn denoise(&self, request: &DenoiseRequest<'_>) -> Result<Canvas, DenoiseError>;

    /// Results are returned in request order.
    fn denoise_batch(&self, requests: &[DenoiseRequest<'_>]) -> Result<Vec<Canvas>, BatchError> {
        dispatch_ordered(self, requests, 1)
    }
}

impl<D: Denoiser + ?Sized> Denoiser for &D {
    fn name(&self) -> String {
        (**self).name()
    }

    fn denoise(&self, request: &DenoiseRequest<'_>) -> Result<Canvas, DenoiseError> {
        (**self).denoise(request)
    }

    fn denoise_batch(&self, requests: &[DenoiseRequest<'_>]) -> Result<Vec<Canvas>, BatchError> {
        (**self).denoise_batch(requests)
    }
}

impl<D: Denoiser + ?Sized> Denoiser for Box<D> {
    fn name(&self) -> String {
        (**self).name()
    }

    fn denoise(&self, request: &DenoiseRequest<'_>) -> Result<Canvas, DenoiseError> {
        (**self).denoise(request)
    }

    fn denoise_batch(&self, requests: &[DenoiseRequest<'_>]) -> Result<Vec<Canvas>, BatchError> {
        (**self).denoise_batch(requests)
    }
}
