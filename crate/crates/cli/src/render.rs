//! Slice rendering: window/level, then 8-bit quantization
//! `q = round_half_even(255 * (clamp(v, lo, hi) - lo) / (hi - lo))`,
//! encoded as 8-bit grayscale PNG.

use anyhow::{bail, Context};
use priorsynth::volumes::{Volume, Window};
use priorsynth::Modality;

/// Default window of label volumes: class ids 0..=16.
pub const LABEL_WINDOW: Window = Window { lo: 0.0, hi: 16.0 };

#[inline]
pub fn quantize(v: f64, w: Window) -> u8 {
    let c = v.clamp(w.lo, w.hi);
    (255.0 * (c - w.lo) / (w.hi - w.lo)).round_ties_even() as u8
}

/// Parses `ct`, `mr` or `LO,HI`.
pub fn parse_window(s: &str) -> anyhow::Result<Window> {
    match s.trim().to_ascii_lowercase().as_str() {
        "ct" => return Ok(Window::CT),
        "mr" => return Ok(Window::MR),
        _ => {}
    }
    let (lo, hi) = s.split_once(',').context("window must be `ct`, `mr` or LO,HI")?;
    let lo: f64 = lo.trim().parse().context("window lower bound")?;
    let hi: f64 = hi.trim().parse().context("window upper bound")?;
    Ok(Window::new(lo, hi)?)
}

pub fn default_window(v: &Volume) -> Window {
    match v {
        Volume::Label(_) => LABEL_WINDOW,
        Volume::Scalar(s) if s.modality() == Modality::Normalized => Window { lo: -1.0, hi: 1.0 },
        Volume::Scalar(s) => Window::for_modality(s.modality()),
    }
}

/// Quantized pixels of axial slice `z`, row-major.
pub fn slice_pixels(v: &Volume, z: usize, w: Window) -> anyhow::Result<Vec<u8>> {
    let d = v.dims();
    if z >= d.nz {
        bail!("slice {z} out of range 0..{}", d.nz);
    }
    let n = d.slice_len();
    Ok(match v {
        Volume::Label(l) => l.slice_labels(z).iter().map(|&c| quantize(c as f64, w)).collect(),
        Volume::Scalar(s) => s.data()[z * n..(z + 1) * n].iter().map(|&x| quantize(x as f64, w)).collect(),
    })
}

pub fn encode_png(width: usize, height: usize, pixels: &[u8]) -> anyhow::Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, width as u32, height as u32);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Eight);
        let mut wr = enc.write_header()?;
        wr.write_image_data(pixels)?;
    }
    Ok(out)
}

pub fn render_slice_png(v: &Volume, z: usize, w: Window) -> anyhow::Result<Vec<u8>> {
    let d = v.dims();
    encode_png(d.nx, d.ny, &slice_pixels(v, z, w)?)
}
