//! Checkpoint file: `"SGMC"`, u32 format version, u32 header length, a JSON
//! header, then the parameters as little-endian f64. All integers are
//! little-endian.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::desk::{DeskConfig, DeskDenoiser, DESK_ARCH};
use super::predictor::Trainable;
use super::schedule::ScheduleSpec;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"SGMC";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lineage {
    pub init_seed: u64,
    pub train_seed: u64,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointHeader {
    pub architecture: String,
    pub config: DeskConfig,
    pub schedule: ScheduleSpec,
    pub lineage: Lineage,
    pub param_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub params: Vec<f64>,
}

impl Checkpoint {
    pub fn from_model(model: &DeskDenoiser, schedule: ScheduleSpec, lineage: Lineage) -> Self {
        Checkpoint {
            header: CheckpointHeader {
                architecture: DESK_ARCH.to_string(),
                config: model.config(),
                schedule,
                lineage,
                param_count: model.param_count(),
            },
            params: model.params().to_vec(),
        }
    }

    pub fn model(&self) -> Result<DeskDenoiser> {
        DeskDenoiser::from_params(self.header.config, self.params.clone())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let json = serde_json::to_vec(&self.header).expect("header serializes");
        let mut out = Vec::with_capacity(12 + json.len() + 8 * self.params.len());
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        for p in &self.params {
            out.extend_from_slice(&p.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let parse = |offset, message: &str| Error::Parse {
            offset,
            message: message.to_string(),
        };
        if bytes.len() < 12 {
            return Err(Error::Truncation {
                expected: 12,
                found: bytes.len(),
            });
        }
        if &bytes[..4] != CHECKPOINT_MAGIC {
            return Err(parse(0, "bad checkpoint magic"));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
        if version != CHECKPOINT_VERSION {
            return Err(parse(4, &format!("unsupported checkpoint version {version}")));
        }
        let hlen = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
        let body = 12 + hlen;
        if bytes.len() < body {
            return Err(Error::Truncation {
                expected: body,
                found: bytes.len(),
            });
        }
        let header: CheckpointHeader =
            serde_json::from_slice(&bytes[12..body]).map_err(|e| parse(12, &format!("header: {e}")))?;
        if header.architecture != DESK_ARCH {
            return Err(parse(12, &format!("unknown architecture {:?}", header.architecture)));
        }
        let expected = body + 8 * header.param_count;
        if bytes.len() != expected {
            return Err(Error::Truncation {
                expected,
                found: bytes.len(),
            });
        }
        let params = bytes[body..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        let ck = Checkpoint { header, params };
        ck.model()?;
        Ok(ck)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ck() -> Checkpoint {
        let cfg = DeskConfig { base_channels: 2, levels: 2, time_dim: 4 };
        let m = DeskDenoiser::new(cfg, 4).unwrap();
        Checkpoint::from_model(&m, ScheduleSpec::default(), Lineage { init_seed: 4, train_seed: 9, steps: 12 })
    }

    #[test]
    fn round_trip() {
        let c = ck();
        let back = Checkpoint::from_bytes(&c.to_bytes()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.model().unwrap().params(), c.params.as_slice());
    }

    #[test]
    fn corrupt_inputs() {
        let b = ck().to_bytes();
        assert!(matches!(Checkpoint::from_bytes(&b[..b.len() - 1]), Err(Error::Truncation { .. })));
        let mut m = b.clone();
        m[0] = b'X';
        assert!(matches!(Checkpoint::from_bytes(&m), Err(Error::Parse { offset: 0, .. })));
        let mut v = b.clone();
        v[4] = 9;
        assert!(matches!(Checkpoint::from_bytes(&v), Err(Error::Parse { offset: 4, .. })));
        let mut h = b;
        h[13] = b'!';
        assert!(matches!(Checkpoint::from_bytes(&h), Err(Error::Parse { offset: 12, .. })));
    }
}
