use crate::error::{Error, Result};
use crate::volumes::Slice;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

/// Window side used for an `h x w` image: 11, or the largest odd size that fits.
pub fn ssim_window_size(width: usize, height: usize) -> usize {
    let s = SSIM_WINDOW.min(width).min(height);
    if s % 2 == 0 {
        s - 1
    } else {
        s
    }
}

/// Normalised 1-D Gaussian taps; the 2-D window is their outer product.
pub fn gaussian_taps(size: usize, sigma: f64) -> Vec<f64> {
    let c = (size as f64 - 1.0) / 2.0;
    let g: Vec<f64> = (0..size).map(|i| (-((i as f64 - c).powi(2)) / (2.0 * sigma * sigma)).exp()).collect();
    let s: f64 = g.iter().sum();
    g.into_iter().map(|v| v / s).collect()
}

/// Separable "valid" filtering; output is `(w - k + 1) x (h - k + 1)`.
fn filter_valid(data: &[f64], w: usize, h: usize, taps: &[f64]) -> Vec<f64> {
    let k = taps.len();
    let (ow, oh) = (w - k + 1, h - k + 1);
    let mut rows = vec![0.0; ow * h];
    for y in 0..h {
        for x in 0..ow {
            rows[y * ow + x] = (0..k).map(|i| taps[i] * data[y * w + x + i]).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..k).map(|i| taps[i] * rows[(y + i) * ow + x]).sum();
        }
    }
    out
}

/// Mean SSIM over every fully contained Gaussian window,
/// with `C1 = (K1 L)^2` and `C2 = (K2 L)^2`.
pub fn ssim(a: &Slice, b: &Slice, dynamic_range: f64) -> Result<f64> {
    a.check_same_shape(b)?;
    if !(dynamic_range > 0.0 && dynamic_range.is_finite()) {
        return Err(Error::domain(format!("dynamic range must be positive, got {dynamic_range}")));
    }
    if a.is_empty() {
        return Err(Error::shape("empty slice"));
    }
    let (w, h) = (a.width(), a.height());
    let taps = gaussian_taps(ssim_window_size(w, h), SSIM_SIGMA);
    let c1 = (SSIM_K1 * dynamic_range).powi(2);
    let c2 = (SSIM_K2 * dynamic_range).powi(2);
    let (da, db) = (a.data(), b.data());
    let prod = |f: &dyn Fn(usize) -> f64| (0..da.len()).map(f).collect::<Vec<f64>>();
    let mu_a = filter_valid(da, w, h, &taps);
    let mu_b = filter_valid(db, w, h, &taps);
    let aa = filter_valid(&prod(&|i| da[i] * da[i]), w, h, &taps);
    let bb = filter_valid(&prod(&|i| db[i] * db[i]), w, h, &taps);
    let ab = filter_valid(&prod(&|i| da[i] * db[i]), w, h, &taps);
    let mut total = 0.0;
    for i in 0..mu_a.len() {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let va = aa[i] - ma * ma;
        let vb = bb[i] - mb * mb;
        let cov = ab[i] - ma * mb;
        total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
    }
    Ok(total / mu_a.len() as f64)
}
