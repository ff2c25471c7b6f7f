use crate::error::{Error, Result};
use crate::volumes::Slice;

fn mse(a: &Slice, b: &Slice) -> Result<f64> {
    a.check_same_shape(b)?;
    if a.is_empty() {
        return Err(Error::shape("empty slice"));
    }
    let s: f64 = a.data().iter().zip(b.data()).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok(s / a.len() as f64)
}

/// `10 log10(peak^2 / MSE)`; identical inputs give `f64::INFINITY`.
pub fn psnr(a: &Slice, b: &Slice, peak: f64) -> Result<f64> {
    if !(peak > 0.0 && peak.is_finite()) {
        return Err(Error::domain(format!("peak must be positive, got {peak}")));
    }
    let m = mse(a, b)?;
    if m == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / m).log10())
}

pub fn mae(a: &Slice, b: &Slice) -> Result<f64> {
    a.check_same_shape(b)?;
    if a.is_empty() {
        return Err(Error::shape("empty slice"));
    }
    let s: f64 = a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).sum();
    Ok(s / a.len() as f64)
}

/// Bin counts over `[lo, hi]` (the last bin is closed); values outside are ignored.
pub fn histogram(values: &[f64], bins: usize, range: (f64, f64)) -> Result<Vec<u64>> {
    let (lo, hi) = range;
    if bins < 2 {
        return Err(Error::domain(format!("need at least 2 bins, got {bins}")));
    }
    if !(lo < hi && lo.is_finite() && hi.is_finite()) {
        return Err(Error::domain(format!("invalid histogram range ({lo}, {hi})")));
    }
    let mut counts = vec![0u64; bins];
    let width = (hi - lo) / bins as f64;
    for &v in values {
        if v < lo || v > hi || v.is_nan() {
            continue;
        }
        let i = (((v - lo) / width) as usize).min(bins - 1);
        counts[i] += 1;
    }
    Ok(counts)
}

pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::shape("pearson needs equal non-empty inputs"));
    }
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::Degenerate("zero-variance input to correlation".into()));
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// Pearson correlation of the two images' bin counts.
pub fn hist_cc(a: &Slice, b: &Slice, bins: usize, range: (f64, f64)) -> Result<f64> {
    let ha = histogram(a.data(), bins, range)?;
    let hb = histogram(b.data(), bins, range)?;
    let f = |h: Vec<u64>| h.into_iter().map(|c| c as f64).collect::<Vec<f64>>();
    pearson(&f(ha), &f(hb)).map_err(|e| match e {
        Error::Degenerate(_) => Error::Degenerate("histogram has zero variance".into()),
        other => other,
    })
}
