use serde::{Deserialize, Serialize};

use super::{EvalError, Result};
use crate::tensor::Canvas;

const EPS: f64 = 1e-12;

/// Horizontal continuity of a panorama across its wraparound edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeamStats {
    /// Mean absolute difference between the last and first columns.
    pub d_wrap: f64,
    /// Mean over adjacent column pairs of their mean absolute difference.
    pub d_interior: f64,
    /// `d_wrap / max(d_interior, 1e-12)`.
    pub ratio: f64,
}

fn column_gap(canvas: &Canvas, a: usize, b: usize) -> f64 {
    let (h, _, c) = canvas.shape();
    let mut sum = 0.0;
    for y in 0..h {
        for ch in 0..c {
            sum += (canvas.get(y, a, ch) as f64 - canvas.get(y, b, ch) as f64).abs();
        }
    }
    sum / (h * c) as f64
}

pub fn seam_stats(panorama: &Canvas) -> Result<SeamStats> {
    let w = panorama.width();
    if w < 3 {
        return Err(EvalError::Config(format!("seam metric needs width >= 3, got {w}")));
    }
    let d_wrap = column_gap(panorama, w - 1, 0);
    let d_interior = (0..w - 1).map(|x| column_gap(panorama, x, x + 1)).sum::<f64>() / (w - 1) as f64;
    Ok(SeamStats {
        d_wrap,
        d_interior,
        ratio: d_wrap / d_interior.max(EPS),
    })
}

/// `seam_discontinuity`: the seam ratio of a panorama.
pub fn seam_discontinuity(panorama: &Canvas) -> Result<f64> {
    Ok(seam_stats(panorama)?.ratio)
}
