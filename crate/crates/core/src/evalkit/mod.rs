//! Patch-based evaluation: recorded-location cropping, CLIP-score, FID and a
//! wraparound seam metric. Embeddings are supplied from outside (files or a
//! backend's `/embed_image`); no vision model runs in-process.

mod locations;
mod metrics;
mod report;
mod seam;

use thiserror::Error;

pub use locations::{crop_patch, crop_patches, load_locations, sample_locations, save_locations, PatchLocation};
pub use metrics::{clip_score, fid, matrix_sqrt_psd, EmbeddingSet};
pub use report::{EvalReport, MeanStd};
pub use seam::{seam_discontinuity, seam_stats, SeamStats};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("embedding {index} has zero norm")]
    DegenerateEmbedding { index: usize },
    #[error("need at least {needed} samples per set, found {found}")]
    InsufficientSamples { needed: usize, found: usize },
    #[error("numerical domain error: {0}")]
    NumericalDomain(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error(transparent)]
    Tensor(#[from] crate::tensor::TensorError),
}

pub type Result<T> = std::result::Result<T, EvalError>;
