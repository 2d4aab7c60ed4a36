//! PTSR tensor files.
//!
//! Layout (all integers little-endian):
//!
//! | offset | size      | field                         |
//! |--------|-----------|-------------------------------|
//! | 0      | 4         | magic, ASCII `PTSR`           |
//! | 4      | 1         | version, always 1             |
//! | 5      | 1         | dtype code, 0 = float32       |
//! | 6      | 1         | rank                          |
//! | 7      | 4 × rank  | dims, u32 each                |
//! | …      | 4 × numel | payload, f32, row-major       |
//!
//! Canvases are stored as rank 3 `(height, width, channels)`; embedding sets
//! as rank 2 and single embeddings as rank 1.

use std::path::Path;

use super::{Canvas, Result, TensorError};

pub const MAGIC: &[u8; 4] = b"PTSR";
pub const VERSION: u8 = 1;
pub const DTYPE_F32: u8 = 0;

/// A tensor of any rank as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTensor {
    pub dims: Vec<usize>,
    pub data: Vec<f32>,
}

fn format_err(field: &'static str, detail: impl Into<String>) -> TensorError {
    TensorError::Format {
        field,
        detail: detail.into(),
    }
}

impl RawTensor {
    pub fn new(dims: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        let numel: usize = dims.iter().product();
        if numel != data.len() {
            return Err(TensorError::Dimension(format!(
                "dims {dims:?} imply {numel} elements, data has {}",
                data.len()
            )));
        }
        if dims.len() > u8::MAX as usize {
            return Err(TensorError::Dimension(format!("rank {} too large", dims.len())));
        }
        if dims.iter().any(|&d| d > u32::MAX as usize) {
            return Err(TensorError::Dimension(format!("dims {dims:?} exceed u32")));
        }
        Ok(Self { dims, data })
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(7 + 4 * self.dims.len() + 4 * self.data.len());
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        out.push(DTYPE_F32);
        out.push(self.dims.len() as u8);
        for &d in &self.dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 {
            return Err(format_err("magic", "truncated header"));
        }
        if &bytes[..4] != MAGIC {
            return Err(format_err("magic", "bad magic"));
        }
        let version = *bytes.get(4).ok_or_else(|| format_err("version", "truncated header"))?;
        if version != VERSION {
            return Err(format_err("version", format!("unsupported version {version}")));
        }
        let dtype = *bytes.get(5).ok_or_else(|| format_err("dtype", "truncated header"))?;
        if dtype != DTYPE_F32 {
            return Err(format_err("dtype", format!("unsupported dtype code {dtype}")));
        }
        let rank = *bytes.get(6).ok_or_else(|| format_err("rank", "truncated header"))? as usize;
        let dims_end = 7 + 4 * rank;
        if bytes.len() < dims_end {
            return Err(format_err("dims", format!("expected {rank} dims, header truncated")));
        }
        let dims: Vec<usize> = bytes[7..dims_end]
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]) as usize)
            .collect();
        let numel = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| format_err("dims", "element count overflows"))?;
        let payload = &bytes[dims_end..];
        let expected = numel
            .checked_mul(4)
            .ok_or_else(|| format_err("dims", "payload size overflows"))?;
        if payload.len() < expected {
            return Err(format_err(
                "payload",
                format!("truncated: expected {expected} bytes, found {}", payload.len()),
            ));
        }
        if payload.len() > expected {
            return Err(format_err(
                "payload",
                format!("{} trailing bytes", payload.len() - expected),
            ));
        }
        let data = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Ok(Self { dims, data })
    }

    pub fn into_canvas(self) -> Result<Canvas> {
        match self.dims[..] {
            [h, w, c] => Canvas::new(h, w, c, self.data),
            _ => Err(format_err(
                "rank",
                format!("expected rank 3 canvas, found rank {}", self.dims.len()),
            )),
        }
    }
}

impl From<&Canvas> for RawTensor {
    fn from(c: &Canvas) -> Self {
        Self {
            dims: vec![c.height(), c.width(), c.channels()],
            data: c.data().to_vec(),
        }
    }
}

pub fn encode_canvas(canvas: &Canvas) -> Vec<u8> {
    RawTensor::from(canvas).encode()
}

pub fn decode_canvas(bytes: &[u8]) -> Result<Canvas> {
    RawTensor::decode(bytes)?.into_canvas()
}

pub fn write_raw(tensor: &RawTensor, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, tensor.encode())?;
    Ok(())
}

pub fn read_raw(path: impl AsRef<Path>) -> Result<RawTensor> {
    RawTensor::decode(&std::fs::read(path)?)
}

pub fn write_tensor(canvas: &Canvas, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, encode_canvas(canvas))?;
    Ok(())
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<Canvas> {
    decode_canvas(&std::fs::read(path)?)
}
