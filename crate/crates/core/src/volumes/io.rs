//! `.svol`: a fixed 64-byte little-endian header followed by the raw payload.
//!
//! ```text
//! offset size field
//!      0    4 magic "SGMV"
//!      4    2 version (u16) = 1
//!      6    1 dtype: 1 = u8, 2 = u16, 3 = f32
//!      7   12 dims nx, ny, nz (3 x u32)
//!     19   12 spacing sx, sy, sz in mm (3 x f32)
//!     31    1 modality: 0 = labels, 1 = CT HU, 2 = MR signal, 3 = normalized
//!     32    4 value range lo (f32), scalar volumes only, else 0
//!     36    4 value range hi (f32), scalar volumes only, else 0
//!     40   24 subject id, UTF-8, NUL padded, label volumes only, else 0
//!     64    - payload, x-fastest, nx * ny * nz elements of dtype
//! ```

use std::path::Path;

use crate::error::{Error, Result};

use super::{Dims, LabelVolume, Modality, ScalarVolume, Spacing};

pub const MAGIC: &[u8; 4] = b"SGMV";
pub const FORMAT_VERSION: u16 = 1;
pub const HEADER_LEN: usize = 64;
const SUBJECT_OFFSET: usize = 40;
const SUBJECT_MAX: usize = HEADER_LEN - SUBJECT_OFFSET;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DType {
    U8,
    U16,
    F32,
}

impl DType {
    fn code(self) -> u8 {
        match self {
            DType::U8 => 1,
            DType::U16 => 2,
            DType::F32 => 3,
        }
    }

    fn from_code(c: u8) -> Option<Self> {
        match c {
            1 => Some(DType::U8),
            2 => Some(DType::U16),
            3 => Some(DType::F32),
            _ => None,
        }
    }

    pub fn size(self) -> usize {
        match self {
            DType::U8 => 1,
            DType::U16 => 2,
            DType::F32 => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VolumeHeader {
    pub version: u16,
    pub dtype: DType,
    pub dims: Dims,
    pub spacing: Spacing,
    /// `None` for label volumes.
    pub modality: Option<Modality>,
    pub value_range: (f32, f32),
    pub subject_id: String,
}

impl VolumeHeader {
    pub fn to_bytes(&self) -> Result<[u8; HEADER_LEN]> {
        let mut b = [0u8; HEADER_LEN];
        b[0..4].copy_from_slice(MAGIC);
        b[4..6].copy_from_slice(&self.version.to_le_bytes());
        b[6] = self.dtype.code();
        for (i, n) in [self.dims.nx, self.dims.ny, self.dims.nz].into_iter().enumerate() {
            let n = u32::try_from(n).map_err(|_| Error::Validation(format!("dimension {n} exceeds u32")))?;
            b[7 + 4 * i..11 + 4 * i].copy_from_slice(&n.to_le_bytes());
        }
        for (i, s) in [self.spacing.sx, self.spacing.sy, self.spacing.sz].into_iter().enumerate() {
            b[19 + 4 * i..23 + 4 * i].copy_from_slice(&s.to_le_bytes());
        }
        b[31] = self.modality.map_or(0, Modality::code);
        b[32..36].copy_from_slice(&self.value_range.0.to_le_bytes());
        b[36..40].copy_from_slice(&self.value_range.1.to_le_bytes());
        let id = self.subject_id.as_bytes();
        if id.len() > SUBJECT_MAX || id.contains(&0) {
            return Err(Error::Validation(format!(
                "subject id {:?} must be at most {SUBJECT_MAX} bytes without NUL",
                self.subject_id
            )));
        }
        b[SUBJECT_OFFSET..SUBJECT_OFFSET + id.len()].copy_from_slice(id);
        Ok(b)
    }

    pub fn parse(bytes: &[u8]) -> Result<Self> {
        let perr = |offset: usize, message: String| Error::Parse { offset, message };
        if bytes.len() < HEADER_LEN {
            return Err(perr(bytes.len(), format!("header needs {HEADER_LEN} bytes, file has {}", bytes.len())));
        }
        if &bytes[0..4] != MAGIC {
            return Err(perr(0, "bad magic tag".into()));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != FORMAT_VERSION {
            return Err(perr(4, format!("unsupported version {version}")));
        }
        let dtype = DType::from_code(bytes[6]).ok_or_else(|| perr(6, format!("unknown dtype code {}", bytes[6])))?;
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let f32_at = |o: usize| f32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let mut dims = [0usize; 3];
        for (i, d) in dims.iter_mut().enumerate() {
            *d = u32_at(7 + 4 * i) as usize;
            if *d == 0 {
                return Err(perr(7 + 4 * i, "dimension must be >= 1".into()));
            }
        }
        let mut spacing = [0f32; 3];
        for (i, s) in spacing.iter_mut().enumerate() {
            *s = f32_at(19 + 4 * i);
            if !(s.is_finite() && *s > 0.0) {
                return Err(perr(19 + 4 * i, format!("spacing must be > 0, got {s}")));
            }
        }
        let modality = match bytes[31] {
            0 => None,
            c => Some(Modality::from_code(c).ok_or_else(|| perr(31, format!("unknown modality code {c}")))?),
        };
        match (modality, dtype) {
            (None, DType::U8 | DType::U16) | (Some(_), DType::F32) => {}
            _ => return Err(perr(31, format!("modality code {} incompatible with dtype {dtype:?}", bytes[31]))),
        }
        let value_range = (f32_at(32), f32_at(36));
        let id_bytes = &bytes[SUBJECT_OFFSET..HEADER_LEN];
        let end = id_bytes.iter().position(|&b| b == 0).unwrap_or(SUBJECT_MAX);
        if let Some(p) = id_bytes[end..].iter().position(|&b| b != 0) {
            return Err(perr(SUBJECT_OFFSET + end + p, "non-zero byte after subject id terminator".into()));
        }
        let subject_id = std::str::from_utf8(&id_bytes[..end])
            .map_err(|e| perr(SUBJECT_OFFSET + e.valid_up_to(), "subject id is not UTF-8".into()))?
            .to_string();
        if modality.is_none() && value_range != (0.0, 0.0) {
            return Err(perr(32, "label volumes must not declare a value range".into()));
        }
        if modality.is_some() && !subject_id.is_empty() {
            return Err(perr(SUBJECT_OFFSET, "scalar volumes carry no subject id".into()));
        }
        Ok(VolumeHeader {
            version,
            dtype,
            dims: Dims::new(dims[0], dims[1], dims[2]),
            spacing: Spacing::new(spacing[0], spacing[1], spacing[2]),
            modality,
            value_range,
            subject_id,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Volume {
    Label(LabelVolume),
    Scalar(ScalarVolume),
}

impl Volume {
    pub fn into_label(self) -> Result<LabelVolume> {
        match self {
            Volume::Label(v) => Ok(v),
            Volume::Scalar(_) => Err(Error::Validation("expected a label volume, found scalar".into())),
        }
    }

    pub fn into_scalar(self) -> Result<ScalarVolume> {
        match self {
            Volume::Scalar(v) => Ok(v),
            Volume::Label(_) => Err(Error::Validation("expected a scalar volume, found labels".into())),
        }
    }

    pub fn dims(&self) -> Dims {
        match self {
            Volume::Label(v) => v.dims(),
            Volume::Scalar(v) => v.dims(),
        }
    }
}

impl From<LabelVolume> for Volume {
    fn from(v: LabelVolume) -> Self {
        Volume::Label(v)
    }
}

impl From<ScalarVolume> for Volume {
    fn from(v: ScalarVolume) -> Self {
        Volume::Scalar(v)
    }
}

/// Labels are written as u8 when every id fits, otherwise u16.
pub fn encode_label(v: &LabelVolume) -> Result<Vec<u8>> {
    let dtype = if v.data().iter().all(|&c| c <= u8::MAX as u16) { DType::U8 } else { DType::U16 };
    let header = VolumeHeader {
        version: FORMAT_VERSION,
        dtype,
        dims: v.dims(),
        spacing: v.spacing(),
        modality: None,
        value_range: (0.0, 0.0),
        subject_id: v.subject_id().to_string(),
    };
    let mut out = Vec::with_capacity(HEADER_LEN + v.data().len() * dtype.size());
    out.extend_from_slice(&header.to_bytes()?);
    match dtype {
        DType::U8 => out.extend(v.data().iter().map(|&c| c as u8)),
        _ => v.data().iter().for_each(|c| out.extend_from_slice(&c.to_le_bytes())),
    }
    Ok(out)
}

pub fn encode_scalar(v: &ScalarVolume) -> Result<Vec<u8>> {
    let header = VolumeHeader {
        version: FORMAT_VERSION,
        dtype: DType::F32,
        dims: v.dims(),
        spacing: v.spacing(),
        modality: Some(v.modality()),
        value_range: v.value_range(),
        subject_id: String::new(),
    };
    let mut out = Vec::with_capacity(HEADER_LEN + v.data().len() * 4);
    out.extend_from_slice(&header.to_bytes()?);
    v.data().iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes()));
    Ok(out)
}

pub fn encode_volume(v: &Volume) -> Result<Vec<u8>> {
    match v {
        Volume::Label(l) => encode_label(l),
        Volume::Scalar(s) => encode_scalar(s),
    }
}

pub fn decode_volume(bytes: &[u8]) -> Result<Volume> {
    let header = VolumeHeader::parse(bytes)?;
    let n = header.dims.len();
    let payload = &bytes[HEADER_LEN..];
    let expected = n * header.dtype.size();
    if payload.len() != expected {
        return Err(Error::Truncation {
            expected,
            found: payload.len(),
        });
    }
    match header.modality {
        None => {
            let data: Vec<u16> = match header.dtype {
                DType::U8 => payload.iter().map(|&b| b as u16).collect(),
                _ => payload.chunks_exact(2).map(|c| u16::from_le_bytes([c[0], c[1]])).collect(),
            };
            Ok(Volume::Label(LabelVolume::new(header.dims, header.spacing, data, header.subject_id)?))
        }
        Some(modality) => {
            let data: Vec<f32> = payload
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            Ok(Volume::Scalar(ScalarVolume::new(
                header.dims,
                header.spacing,
                data,
                modality,
                header.value_range,
            )?))
        }
    }
}

pub fn read_volume(path: impl AsRef<Path>) -> Result<Volume> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_volume(&bytes)
}

pub fn write_volume(path: impl AsRef<Path>, v: &Volume) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_volume(v)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn write_label_volume(path: impl AsRef<Path>, v: &LabelVolume) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_label(v)?).map_err(|e| Error::io(path, e))
}

pub fn write_scalar_volume(path: impl AsRef<Path>, v: &ScalarVolume) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_scalar(v)?).map_err(|e| Error::io(path, e))
}
