//! Feature similarity: phase congruency from a log-Gabor bank
//! (4 scales x 4 orientations, minimum wavelength 6, scale factor 2,
//! sigma_f 0.55, angular ratio 1.2, noise k = 2) and Scharr gradient
//! magnitude, with `T1 = 0.85`, `T2 = 160` for images in `[0, 255]`.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::volumes::Slice;

pub const FSIM_MIN_DIM: usize = 32;
const NSCALE: usize = 4;
const NORIENT: usize = 4;
const MIN_WAVELENGTH: f64 = 6.0;
const MULT: f64 = 2.0;
const SIGMA_ONF: f64 = 0.55;
const D_THETA_ON_SIGMA: f64 = 1.2;
const NOISE_K: f64 = 2.0;
const EPSILON: f64 = 1e-4;
const T1: f64 = 0.85;
const T2: f64 = 160.0;

fn fft2(data: &mut [Complex64], w: usize, h: usize, inverse: bool) {
    let mut planner = FftPlanner::new();
    let (fw, fh) = if inverse {
        (planner.plan_fft_inverse(w), planner.plan_fft_inverse(h))
    } else {
        (planner.plan_fft_forward(w), planner.plan_fft_forward(h))
    };
    for row in data.chunks_mut(w) {
        fw.process(row);
    }
    let mut col = vec![Complex64::new(0.0, 0.0); h];
    for x in 0..w {
        for y in 0..h {
            col[y] = data[y * w + x];
        }
        fh.process(&mut col);
        for y in 0..h {
            data[y * w + x] = col[y];
        }
    }
    if inverse {
        let k = 1.0 / (w * h) as f64;
        data.iter_mut().for_each(|v| *v *= k);
    }
}

/// Normalised frequency of FFT index `i` on an axis of length `n`: zero at
/// index 0, `k / n` for even `n` and `k / (n - 1)` for odd `n`.
fn freq(i: usize, n: usize) -> f64 {
    let k = if i < n.div_ceil(2) { i as f64 } else { i as f64 - n as f64 };
    if n % 2 == 1 {
        k / (n - 1).max(1) as f64
    } else {
        k / n as f64
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Phase congruency map in `[0, 1]`.
pub fn phase_congruency(img: &Slice) -> Vec<f64> {
    let (w, h) = (img.width(), img.height());
    let n = w * h;
    let mut spectrum: Vec<Complex64> = img.data().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft2(&mut spectrum, w, h, false);

    let mut radius = vec![0.0; n];
    let mut sin_t = vec![0.0; n];
    let mut cos_t = vec![0.0; n];
    let mut lowpass = vec![0.0; n];
    for y in 0..h {
        for x in 0..w {
            let (fx, fy) = (freq(x, w), freq(y, h));
            let i = y * w + x;
            let r = (fx * fx + fy * fy).sqrt();
            lowpass[i] = 1.0 / (1.0 + (r / 0.45).powi(30));
            radius[i] = if i == 0 { 1.0 } else { r };
            let th = (-fy).atan2(fx);
            sin_t[i] = th.sin();
            cos_t[i] = th.cos();
        }
    }
    let log_gabor: Vec<Vec<f64>> = (0..NSCALE)
        .map(|s| {
            let fo = 1.0 / (MIN_WAVELENGTH * MULT.powi(s as i32));
            let d = 2.0 * SIGMA_ONF.ln().powi(2);
            let mut g: Vec<f64> = (0..n).map(|i| (-(radius[i] / fo).ln().powi(2) / d).exp() * lowpass[i]).collect();
            g[0] = 0.0;
            g
        })
        .collect();
    let theta_sigma = PI / NORIENT as f64 / D_THETA_ON_SIGMA;
    let sqrt_n = (n as f64).sqrt();

    let mut energy_all = vec![0.0; n];
    let mut an_all = vec![0.0; n];
    for o in 0..NORIENT {
        let angl = o as f64 * PI / NORIENT as f64;
        let (sa, ca) = angl.sin_cos();
        let spread: Vec<f64> = (0..n)
            .map(|i| {
                let ds = sin_t[i] * ca - cos_t[i] * sa;
                let dc = cos_t[i] * ca + sin_t[i] * sa;
                let dt = ds.atan2(dc).abs();
                (-dt * dt / (2.0 * theta_sigma * theta_sigma)).exp()
            })
            .collect();
        let mut sum_e = vec![0.0; n];
        let mut sum_o = vec![0.0; n];
        let mut sum_an = vec![0.0; n];
        let mut eo: Vec<Vec<Complex64>> = Vec::with_capacity(NSCALE);
        let mut ifft_filters: Vec<Vec<f64>> = Vec::with_capacity(NSCALE);
        let mut em_n = 0.0;
        for (s, lg) in log_gabor.iter().enumerate() {
            let filter: Vec<f64> = lg.iter().zip(&spread).map(|(a, b)| a * b).collect();
            let mut f: Vec<Complex64> = filter.iter().map(|&v| Complex64::new(v, 0.0)).collect();
            fft2(&mut f, w, h, true);
            ifft_filters.push(f.iter().map(|c| c.re * sqrt_n).collect());
            let mut resp: Vec<Complex64> = spectrum.iter().zip(&filter).map(|(c, f)| c * f).collect();
            fft2(&mut resp, w, h, true);
            for i in 0..n {
                sum_an[i] += resp[i].norm();
                sum_e[i] += resp[i].re;
                sum_o[i] += resp[i].im;
            }
            if s == 0 {
                em_n = filter.iter().map(|v| v * v).sum();
            }
            eo.push(resp);
        }
        let mut energy = vec![0.0; n];
        for i in 0..n {
            let xe = (sum_e[i] * sum_e[i] + sum_o[i] * sum_o[i]).sqrt() + EPSILON;
            let (me, mo) = (sum_e[i] / xe, sum_o[i] / xe);
            for r in &eo {
                let (e, od) = (r[i].re, r[i].im);
                energy[i] += e * me + od * mo - (e * mo - od * me).abs();
            }
        }
        let median_e2n = median(eo[0].iter().map(|c| c.norm_sqr()).collect());
        let mean_e2n = -median_e2n / 0.5f64.ln();
        let noise_power = mean_e2n / em_n;
        let mut sum_an2 = 0.0;
        let mut sum_aiaj = 0.0;
        for i in 0..n {
            for si in 0..NSCALE {
                let a = ifft_filters[si][i];
                sum_an2 += a * a;
                for sj in si + 1..NSCALE {
                    sum_aiaj += a * ifft_filters[sj][i];
                }
            }
        }
        let est_noise_energy2 = 2.0 * noise_power * sum_an2 + 4.0 * noise_power * sum_aiaj;
        let tau = (est_noise_energy2 / 2.0).sqrt();
        let est_noise_energy = tau * (PI / 2.0).sqrt();
        let est_noise_sigma = ((2.0 - PI / 2.0) * tau * tau).sqrt();
        let threshold = (est_noise_energy + NOISE_K * est_noise_sigma) / 1.7;
        for i in 0..n {
            energy_all[i] += (energy[i] - threshold).max(0.0);
            an_all[i] += sum_an[i];
        }
    }
    energy_all.iter().zip(&an_all).map(|(e, a)| e / (a + EPSILON)).collect()
}

/// Scharr gradient magnitude with zero padding.
pub fn gradient_magnitude(img: &Slice) -> Vec<f64> {
    let (w, h) = (img.width() as isize, img.height() as isize);
    let at = |x: isize, y: isize| if x < 0 || y < 0 || x >= w || y >= h { 0.0 } else { img.get(x as usize, y as usize) };
    let mut out = Vec::with_capacity((w * h) as usize);
    for y in 0..h {
        for x in 0..w {
            let gx = (3.0 * (at(x - 1, y - 1) - at(x + 1, y - 1))
                + 10.0 * (at(x - 1, y) - at(x + 1, y))
                + 3.0 * (at(x - 1, y + 1) - at(x + 1, y + 1)))
                / 16.0;
            let gy = (3.0 * (at(x - 1, y - 1) - at(x - 1, y + 1))
                + 10.0 * (at(x, y - 1) - at(x, y + 1))
                + 3.0 * (at(x + 1, y - 1) - at(x + 1, y + 1)))
                / 16.0;
            out.push((gx * gx + gy * gy).sqrt());
        }
    }
    out
}

/// Box-average then decimate by `f = max(1, round(min_dim / 256))`.
fn downsample(img: &Slice) -> Slice {
    let f = ((img.width().min(img.height()) as f64 / 256.0).round() as usize).max(1);
    if f == 1 {
        return img.clone();
    }
    let (w, h) = (img.width(), img.height());
    let off = (f - 1) / 2;
    let avg = Slice::from_fn(w, h, |x, y| {
        let mut s = 0.0;
        for j in 0..f {
            for i in 0..f {
                let (sx, sy) = (x as isize + i as isize - off as isize, y as isize + j as isize - off as isize);
                if sx >= 0 && sy >= 0 && (sx as usize) < w && (sy as usize) < h {
                    s += img.get(sx as usize, sy as usize);
                }
            }
        }
        s / (f * f) as f64
    });
    Slice::from_fn(w.div_ceil(f), h.div_ceil(f), |x, y| avg.get(x * f, y * f))
}

/// FSIM for grey-level images on a `[0, 255]` scale.
pub fn fsim(a: &Slice, b: &Slice) -> Result<f64> {
    a.check_same_shape(b)?;
    if a.width().min(a.height()) < FSIM_MIN_DIM {
        return Err(Error::domain(format!(
            "fsim needs both dimensions >= {FSIM_MIN_DIM}, got {}x{}",
            a.width(),
            a.height()
        )));
    }
    let (a, b) = (downsample(a), downsample(b));
    let (pa, pb) = (phase_congruency(&a), phase_congruency(&b));
    let (ga, gb) = (gradient_magnitude(&a), gradient_magnitude(&b));
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..pa.len() {
        let s_pc = (2.0 * pa[i] * pb[i] + T1) / (pa[i] * pa[i] + pb[i] * pb[i] + T1);
        let s_g = (2.0 * ga[i] * gb[i] + T2) / (ga[i] * ga[i] + gb[i] * gb[i] + T2);
        let pcm = pa[i].max(pb[i]);
        num += s_pc * s_g * pcm;
        den += pcm;
    }
    if den == 0.0 {
        return Ok(1.0);
    }
    Ok((num / den).clamp(0.0, 1.0))
}

/// FSIM after mapping `[lo, hi]` linearly onto `[0, 255]` (values clamped).
pub fn fsim_in_range(a: &Slice, b: &Slice, range: (f64, f64)) -> Result<f64> {
    let (lo, hi) = range;
    if !(lo < hi) {
        return Err(Error::domain(format!("invalid range ({lo}, {hi})")));
    }
    let m = |s: &Slice| s.map(|v| ((v - lo) / (hi - lo)).clamp(0.0, 1.0) * 255.0);
    fsim(&m(a), &m(b))
}
