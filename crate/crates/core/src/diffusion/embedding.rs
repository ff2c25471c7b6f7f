use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sinusoidal timestep encoding: `[sin(t w_k)] ++ [cos(t w_k)]`,
/// `w_k = 10000^(-k / (dim/2))`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeEmbedding {
    dim: usize,
}

impl TimeEmbedding {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 || dim % 2 != 0 {
            return Err(Error::domain(format!("embedding dim must be even and positive, got {dim}")));
        }
        Ok(TimeEmbedding { dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn encode(&self, t: usize) -> Vec<f64> {
        let half = self.dim / 2;
        let mut out = vec![0.0; self.dim];
        for k in 0..half {
            let w = 10000f64.powf(-(k as f64) / half as f64);
            let (s, c) = (t as f64 * w).sin_cos();
            out[k] = s;
            out[half + k] = c;
        }
        out
    }
}
