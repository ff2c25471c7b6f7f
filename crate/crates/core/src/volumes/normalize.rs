use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{Modality, ScalarVolume};

/// Intensity window mapped onto `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub lo: f64,
    pub hi: f64,
}

impl Window {
    /// CT window in HU; its width 2624 is also the CT metric dynamic range.
    pub const CT: Window = Window { lo: -1024.0, hi: 1600.0 };
    /// MR display range.
    pub const MR: Window = Window { lo: 0.0, hi: 255.0 };

    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        let w = Window { lo, hi };
        w.validate()?;
        Ok(w)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn for_modality(m: Modality) -> Window {
        match m {
            Modality::CtHu => Window::CT,
            Modality::MrSignal => Window::MR,
            Modality::Normalized => Window { lo: -1.0, hi: 1.0 },
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.hi > self.lo) {
            return Err(Error::domain(format!("window needs hi > lo, got ({}, {})", self.lo, self.hi)));
        }
        Ok(())
    }
}

/// Affine map `lo -> -1`, `hi -> +1` with clamping outside the window.
#[inline]
pub fn normalize_value(x: f64, w: Window) -> f64 {
    let c = x.clamp(w.lo, w.hi);
    (2.0 * (c - w.lo) / (w.hi - w.lo) - 1.0).clamp(-1.0, 1.0)
}

#[inline]
pub fn denormalize_value(v: f64, w: Window) -> f64 {
    let c = v.clamp(-1.0, 1.0);
    (w.lo + (c + 1.0) * 0.5 * (w.hi - w.lo)).clamp(w.lo, w.hi)
}

pub fn normalize(v: &ScalarVolume, w: Window) -> Result<ScalarVolume> {
    w.validate()?;
    let data = v.data().iter().map(|&x| normalize_value(x as f64, w) as f32).collect();
    ScalarVolume::new(v.dims(), v.spacing(), data, Modality::Normalized, (-1.0, 1.0))
}

/// Maps a normalized volume back into `w`, tagging it with `modality`.
pub fn denormalize(v: &ScalarVolume, w: Window, modality: Modality) -> Result<ScalarVolume> {
    w.validate()?;
    let data = v.data().iter().map(|&x| denormalize_value(x as f64, w) as f32).collect();
    ScalarVolume::new(v.dims(), v.spacing(), data, modality, (w.lo as f32, w.hi as f32))
}
