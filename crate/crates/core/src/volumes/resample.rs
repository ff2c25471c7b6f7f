//! In-plane resampling of axial slices; z is left untouched.
//!
//! The first voxel centre stays fixed. An axis of `n` voxels at spacing `s`
//! becomes `floor((n - 1) * s / t) + 1` voxels at target spacing `t`, and output
//! voxel `i` samples input coordinate `i * t / s`.

use crate::error::{Error, Result};

use super::{Dims, LabelVolume, ScalarVolume, Spacing, Volume};

struct Axis {
    n_out: usize,
    step: f64,
}

impl Axis {
    fn new(n: usize, from: f32, to: f32) -> Self {
        let extent = (n - 1) as f64 * from as f64 / to as f64;
        Axis {
            n_out: (extent + 1e-6).floor() as usize + 1,
            step: to as f64 / from as f64,
        }
    }
}

pub fn resample_axial(v: &Volume, target: (f32, f32)) -> Result<Volume> {
    if !(target.0.is_finite() && target.1.is_finite() && target.0 > 0.0 && target.1 > 0.0) {
        return Err(Error::domain(format!("target spacing must be > 0, got {target:?}")));
    }
    Ok(match v {
        Volume::Label(l) => Volume::Label(resample_labels(l, target)?),
        Volume::Scalar(s) => Volume::Scalar(resample_scalar(s, target)?),
    })
}

fn plan(dims: Dims, spacing: Spacing, target: (f32, f32)) -> (Axis, Axis, Dims, Spacing) {
    let ax = Axis::new(dims.nx, spacing.sx, target.0);
    let ay = Axis::new(dims.ny, spacing.sy, target.1);
    let out_dims = Dims::new(ax.n_out, ay.n_out, dims.nz);
    (ax, ay, out_dims, Spacing::new(target.0, target.1, spacing.sz))
}

/// Nearest neighbour, so no class id is ever invented.
fn resample_labels(v: &LabelVolume, target: (f32, f32)) -> Result<LabelVolume> {
    let sp = v.spacing();
    if (sp.sx, sp.sy) == target {
        return Ok(v.clone());
    }
    let dims = v.dims();
    let (ax, ay, out_dims, out_sp) = plan(dims, sp, target);
    let nearest = |i: usize, axis: &Axis, n: usize| ((i as f64 * axis.step + 0.5).floor() as usize).min(n - 1);
    let mut data = Vec::with_capacity(out_dims.len());
    for z in 0..dims.nz {
        let src = v.slice_labels(z);
        for y in 0..ay.n_out {
            let sy = nearest(y, &ay, dims.ny);
            for x in 0..ax.n_out {
                data.push(src[sy * dims.nx + nearest(x, &ax, dims.nx)]);
            }
        }
    }
    LabelVolume::new(out_dims, out_sp, data, v.subject_id())
}

fn resample_scalar(v: &ScalarVolume, target: (f32, f32)) -> Result<ScalarVolume> {
    let sp = v.spacing();
    if (sp.sx, sp.sy) == target {
        return Ok(v.clone());
    }
    let dims = v.dims();
    let (ax, ay, out_dims, out_sp) = plan(dims, sp, target);
    let (lo, hi) = v.value_range();
    let taps = |i: usize, axis: &Axis, n: usize| {
        let c = (i as f64 * axis.step).min((n - 1) as f64);
        let i0 = c.floor() as usize;
        let i1 = (i0 + 1).min(n - 1);
        (i0, i1, c - i0 as f64)
    };
    let mut data = Vec::with_capacity(out_dims.len());
    for z in 0..dims.nz {
        let off = z * dims.slice_len();
        let src = &v.data()[off..off + dims.slice_len()];
        let at = |x: usize, y: usize| src[y * dims.nx + x] as f64;
        for y in 0..ay.n_out {
            let (y0, y1, fy) = taps(y, &ay, dims.ny);
            for x in 0..ax.n_out {
                let (x0, x1, fx) = taps(x, &ax, dims.nx);
                let top = at(x0, y0) * (1.0 - fx) + at(x1, y0) * fx;
                let bot = at(x0, y1) * (1.0 - fx) + at(x1, y1) * fx;
                let val = (top * (1.0 - fy) + bot * fy) as f32;
                data.push(val.clamp(lo, hi));
            }
        }
    }
    ScalarVolume::new(out_dims, out_sp, data, v.modality(), v.value_range())
}
