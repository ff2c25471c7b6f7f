//! Label and scalar volumes, axial slices, `.svol` I/O and resampling.
//!
//! Voxels are stored x-fastest: `index = x + nx * (y + ny * z)`. Downstream
//! code works slice by slice, so volumes are mostly containers of axial
//! [`Slice`]s.

mod io;
mod normalize;
mod resample;
mod slice;

pub use io::{
    decode_volume, encode_label, encode_scalar, encode_volume, read_volume, write_label_volume,
    write_scalar_volume, write_volume, DType, Volume, VolumeHeader, FORMAT_VERSION, HEADER_LEN, MAGIC,
};
pub use normalize::{denormalize, denormalize_value, normalize, normalize_value, Window};
pub use resample::resample_axial;
pub use slice::Slice;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
}

impl Dims {
    pub fn new(nx: usize, ny: usize, nz: usize) -> Self {
        Dims { nx, ny, nz }
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn slice_len(&self) -> usize {
        self.nx * self.ny
    }

    fn validate(&self) -> Result<()> {
        if self.nx == 0 || self.ny == 0 || self.nz == 0 {
            return Err(Error::Validation(format!("dims must be >= 1, got {self:?}")));
        }
        Ok(())
    }
}

/// Voxel size in millimetres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spacing {
    pub sx: f32,
    pub sy: f32,
    pub sz: f32,
}

impl Spacing {
    pub fn new(sx: f32, sy: f32, sz: f32) -> Self {
        Spacing { sx, sy, sz }
    }

    pub fn isotropic(s: f32) -> Self {
        Spacing::new(s, s, s)
    }

    fn validate(&self) -> Result<()> {
        let ok = |v: f32| v.is_finite() && v > 0.0;
        if !(ok(self.sx) && ok(self.sy) && ok(self.sz)) {
            return Err(Error::Validation(format!("spacing must be > 0, got {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    CtHu,
    MrSignal,
    Normalized,
}

impl Modality {
    pub(crate) fn code(self) -> u8 {
        match self {
            Modality::CtHu => 1,
            Modality::MrSignal => 2,
            Modality::Normalized => 3,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        match code {
            1 => Some(Modality::CtHu),
            2 => Some(Modality::MrSignal),
            3 => Some(Modality::Normalized),
            _ => None,
        }
    }
}

/// Grid of organ-class identifiers; 0 is background (air).
#[derive(Debug, Clone, PartialEq)]
pub struct LabelVolume {
    dims: Dims,
    spacing: Spacing,
    data: Vec<u16>,
    subject_id: String,
}

impl LabelVolume {
    pub fn new(dims: Dims, spacing: Spacing, data: Vec<u16>, subject_id: impl Into<String>) -> Result<Self> {
        dims.validate()?;
        spacing.validate()?;
        if data.len() != dims.len() {
            return Err(Error::shape(format!(
                "label data has {} voxels, dims {:?} need {}",
                data.len(),
                dims,
                dims.len()
            )));
        }
        Ok(LabelVolume {
            dims,
            spacing,
            data,
            subject_id: subject_id.into(),
        })
    }

    pub fn filled(dims: Dims, spacing: Spacing, class: u16, subject_id: impl Into<String>) -> Result<Self> {
        Self::new(dims, spacing, vec![class; dims.len()], subject_id)
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn spacing(&self) -> Spacing {
        self.spacing
    }

    pub fn data(&self) -> &[u16] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u16] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<u16> {
        self.data
    }

    pub fn subject_id(&self) -> &str {
        &self.subject_id
    }

    pub fn set_subject_id(&mut self, id: impl Into<String>) {
        self.subject_id = id.into();
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> u16 {
        self.data[x + self.dims.nx * (y + self.dims.ny * z)]
    }

    /// Axial slice `z` as a flat row-major slice of class ids.
    pub fn slice_labels(&self, z: usize) -> &[u16] {
        let n = self.dims.slice_len();
        &self.data[z * n..(z + 1) * n]
    }

    pub fn same_grid(&self, dims: Dims, spacing: Spacing) -> bool {
        self.dims == dims && self.spacing == spacing
    }

    /// Sorted distinct class ids present in the volume.
    pub fn classes(&self) -> Vec<u16> {
        let mut seen = vec![false; u16::MAX as usize + 1];
        for &c in &self.data {
            seen[c as usize] = true;
        }
        seen.iter()
            .enumerate()
            .filter(|(_, &s)| s)
            .map(|(c, _)| c as u16)
            .collect()
    }

    /// Voxel count per class id, indexed by class.
    pub fn class_histogram(&self) -> std::collections::BTreeMap<u16, usize> {
        let mut h = std::collections::BTreeMap::new();
        for &c in &self.data {
            *h.entry(c).or_insert(0) += 1;
        }
        h
    }
}

/// Grid of finite real intensities with declared bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarVolume {
    dims: Dims,
    spacing: Spacing,
    data: Vec<f32>,
    modality: Modality,
    value_range: (f32, f32),
}

impl ScalarVolume {
    pub fn new(
        dims: Dims,
        spacing: Spacing,
        data: Vec<f32>,
        modality: Modality,
        value_range: (f32, f32),
    ) -> Result<Self> {
        dims.validate()?;
        spacing.validate()?;
        if data.len() != dims.len() {
            return Err(Error::shape(format!(
                "scalar data has {} voxels, dims {:?} need {}",
                data.len(),
                dims,
                dims.len()
            )));
        }
        let (lo, hi) = value_range;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::Validation(format!("invalid value range ({lo}, {hi})")));
        }
        if modality == Modality::Normalized && value_range != (-1.0, 1.0) {
            return Err(Error::Validation(format!(
                "normalized volumes must declare range (-1, 1), got ({lo}, {hi})"
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!("non-finite value at voxel {i}")));
        }
        if let Some(i) = data.iter().position(|&v| v < lo || v > hi) {
            return Err(Error::Validation(format!(
                "value {} at voxel {i} outside declared range ({lo}, {hi})",
                data[i]
            )));
        }
        Ok(ScalarVolume {
            dims,
            spacing,
            data,
            modality,
            value_range,
        })
    }

    /// Builds a volume from axial slices; values are rounded to `f32`.
    pub fn from_slices(
        slices: &[Slice],
        spacing: Spacing,
        modality: Modality,
        value_range: (f32, f32),
    ) -> Result<Self> {
        let first = slices
            .first()
            .ok_or_else(|| Error::shape("cannot build a volume from zero slices"))?;
        let dims = Dims::new(first.width(), first.height(), slices.len());
        let mut data = Vec::with_capacity(dims.len());
        for s in slices {
            if s.width() != dims.nx || s.height() != dims.ny {
                return Err(Error::shape("slices differ in size"));
            }
            data.extend(s.data().iter().map(|&v| v as f32));
        }
        Self::new(dims, spacing, data, modality, value_range)
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn spacing(&self) -> Spacing {
        self.spacing
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn modality(&self) -> Modality {
        self.modality
    }

    pub fn value_range(&self) -> (f32, f32) {
        self.value_range
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> f32 {
        self.data[x + self.dims.nx * (y + self.dims.ny * z)]
    }

    /// Axial slice `z` widened to `f64`.
    pub fn slice(&self, z: usize) -> Slice {
        let n = self.dims.slice_len();
        let data = self.data[z * n..(z + 1) * n].iter().map(|&v| v as f64).collect();
        Slice::from_vec(self.dims.nx, self.dims.ny, data).expect("slice length matches dims")
    }

    pub fn slices(&self) -> Vec<Slice> {
        (0..self.dims.nz).map(|z| self.slice(z)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_construction() {
        let d = Dims::new(2, 2, 1);
        let s = Spacing::isotropic(1.0);
        assert!(LabelVolume::new(Dims::new(0, 2, 1), s, vec![], "x").is_err());
        assert!(LabelVolume::new(d, Spacing::new(1.0, 0.0, 1.0), vec![0; 4], "x").is_err());
        assert!(LabelVolume::new(d, s, vec![0; 3], "x").is_err());
        assert!(ScalarVolume::new(d, s, vec![0.0, f32::NAN, 0.0, 0.0], Modality::CtHu, (-1.0, 1.0)).is_err());
        assert!(ScalarVolume::new(d, s, vec![0.0, 2.0, 0.0, 0.0], Modality::CtHu, (-1.0, 1.0)).is_err());
        assert!(ScalarVolume::new(d, s, vec![0.0; 4], Modality::Normalized, (0.0, 1.0)).is_err());
        assert!(ScalarVolume::new(d, s, vec![0.0; 4], Modality::Normalized, (-1.0, 1.0)).is_ok());
    }

    #[test]
    fn indexing_is_x_fastest() {
        let v = LabelVolume::new(Dims::new(2, 3, 2), Spacing::isotropic(1.0), (0..12).collect(), "s").unwrap();
        assert_eq!(v.get(1, 0, 0), 1);
        assert_eq!(v.get(0, 1, 0), 2);
        assert_eq!(v.get(0, 0, 1), 6);
        assert_eq!(v.slice_labels(1), &[6, 7, 8, 9, 10, 11]);
    }
}
