//! JSON bodies of the denoiser HTTP protocol. Tensors travel as base64
//! (standard alphabet, padded) of their PTSR encoding.
//!
//! ```text
//! POST /denoise      {"tensor", "t", "total_steps", "prompt"?, "embedding_id"?, "seed"} -> {"tensor"}
//! POST /embed_text   {"prompt"}  -> {"embedding_id"}
//! POST /embed_image  {"tensor"}  -> {"embedding"}   (rank-1 PTSR)
//! GET  /health                   -> {"model", "latent_channels"}
//! ```

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::tensor::ptsr::RawTensor;
use crate::tensor::{Canvas, TensorError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenoiseBody {
    pub tensor: String,
    pub t: usize,
    pub total_steps: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding_id: Option<String>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorBody {
    pub tensor: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedTextBody {
    pub prompt: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedTextReply {
    pub embedding_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedImageReply {
    pub embedding: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub model: String,
    pub latent_channels: usize,
}

pub fn encode_tensor(tensor: &RawTensor) -> String {
    STANDARD.encode(tensor.encode())
}

pub fn encode_canvas(canvas: &Canvas) -> String {
    encode_tensor(&RawTensor::from(canvas))
}

pub fn decode_tensor(b64: &str) -> Result<RawTensor, TensorError> {
    let bytes = STANDARD.decode(b64).map_err(|e| TensorError::Format {
        field: "base64",
        detail: e.to_string(),
    })?;
    RawTensor::decode(&bytes)
}
