//! Direct, unoptimized reference implementations of the image metrics.

/// Mean SSIM from explicit 2-D Gaussian windows and two-pass moments.
pub fn ssim(a: &[f64], b: &[f64], w: usize, h: usize, l: f64) -> f64 {
    let mut k = 11.min(w).min(h);
    if k % 2 == 0 {
        k -= 1;
    }
    let c = (k as f64 - 1.0) / 2.0;
    let mut win = vec![0.0; k * k];
    for j in 0..k {
        for i in 0..k {
            let r2 = (i as f64 - c).powi(2) + (j as f64 - c).powi(2);
            win[j * k + i] = (-r2 / (2.0 * 1.5 * 1.5)).exp();
        }
    }
    let total: f64 = win.iter().sum();
    win.iter_mut().for_each(|v| *v /= total);
    let (c1, c2) = ((0.01 * l).powi(2), (0.03 * l).powi(2));
    let mut acc = 0.0;
    let mut count = 0;
    for oy in 0..=h - k {
        for ox in 0..=w - k {
            let px = |d: &[f64], i: usize, j: usize| d[(oy + j) * w + ox + i];
            let (mut ma, mut mb) = (0.0, 0.0);
            for j in 0..k {
                for i in 0..k {
                    ma += win[j * k + i] * px(a, i, j);
                    mb += win[j * k + i] * px(b, i, j);
                }
            }
            let (mut va, mut vb, mut cov) = (0.0, 0.0, 0.0);
            for j in 0..k {
                for i in 0..k {
                    let (da, db) = (px(a, i, j) - ma, px(b, i, j) - mb);
                    va += win[j * k + i] * da * da;
                    vb += win[j * k + i] * db * db;
                    cov += win[j * k + i] * da * db;
                }
            }
            acc += (2.0 * ma * mb + c1) * (2.0 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            count += 1;
        }
    }
    acc / count as f64
}

pub fn mae(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        s += (a[i] - b[i]).abs();
    }
    s / a.len() as f64
}

pub fn psnr(a: &[f64], b: &[f64], peak: f64) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        s += (a[i] - b[i]) * (a[i] - b[i]);
    }
    let mse = s / a.len() as f64;
    20.0 * peak.log10() - 10.0 * mse.log10()
}

/// Bin `i` holds `lo + i w <= v < lo + (i + 1) w`; the last bin also takes `hi`.
pub fn histogram(v: &[f64], bins: usize, lo: f64, hi: f64) -> Vec<f64> {
    let w = (hi - lo) / bins as f64;
    (0..bins)
        .map(|i| {
            let (a, b) = (lo + i as f64 * w, lo + (i + 1) as f64 * w);
            v.iter()
                .filter(|&&x| x >= a && (x < b || (i == bins - 1 && x <= hi)))
                .count() as f64
        })
        .collect()
}

pub fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (sa, sb): (f64, f64) = (a.iter().sum(), b.iter().sum());
    let sab: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let saa: f64 = a.iter().map(|x| x * x).sum();
    let sbb: f64 = b.iter().map(|y| y * y).sum();
    (n * sab - sa * sb) / ((n * saa - sa * sa).sqrt() * (n * sbb - sb * sb).sqrt())
}

pub fn hist_cc(a: &[f64], b: &[f64], bins: usize, lo: f64, hi: f64) -> f64 {
    correlation(&histogram(a, bins, lo, hi), &histogram(b, bins, lo, hi))
}

pub fn dice(a: &[bool], b: &[bool]) -> f64 {
    let inter = a.iter().zip(b).filter(|(x, y)| **x && **y).count();
    let total = a.iter().filter(|x| **x).count() + b.iter().filter(|x| **x).count();
    if total == 0 {
        1.0
    } else {
        2.0 * inter as f64 / total as f64
    }
}

/// Exact two-sided Mann-Whitney p-value by enumerating every assignment of
/// the pooled observations to the first group (bitmask over the pool).
/// `U` counts pairs `a > b` plus half the ties.
pub fn mann_whitney_p(a: &[f64], b: &[f64]) -> (f64, f64) {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let n = pooled.len();
    let na = a.len();
    let u_of = |mask: u32| {
        let mut u = 0.0;
        for i in 0..n {
            if mask >> i & 1 == 0 {
                continue;
            }
            for j in 0..n {
                if mask >> j & 1 == 1 {
                    continue;
                }
                if pooled[i] > pooled[j] {
                    u += 1.0;
                } else if pooled[i] == pooled[j] {
                    u += 0.5;
                }
            }
        }
        u
    };
    let observed = u_of((1u32 << na) - 1);
    let mean = (na * (n - na)) as f64 / 2.0;
    let (mut hits, mut total) = (0u64, 0u64);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != na {
            continue;
        }
        total += 1;
        if (u_of(mask) - mean).abs() >= (observed - mean).abs() - 1e-9 {
            hits += 1;
        }
    }
    (observed, hits as f64 / total as f64)
}

/// Squared Fréchet distance of 2-D Gaussians from sample moments with the
/// closed form `tr sqrt(M) = sqrt(tr M + 2 sqrt(det M))`, `M = S_a S_b`.
pub fn frechet_2d(a: &[[f64; 2]], b: &[[f64; 2]]) -> f64 {
    let moments = |s: &[[f64; 2]]| {
        let n = s.len() as f64;
        let m = [s.iter().map(|v| v[0]).sum::<f64>() / n, s.iter().map(|v| v[1]).sum::<f64>() / n];
        let mut c = [[0.0; 2]; 2];
        for v in s {
            for i in 0..2 {
                for j in 0..2 {
                    c[i][j] += (v[i] - m[i]) * (v[j] - m[j]) / (n - 1.0);
                }
            }
        }
        (m, c)
    };
    let (ma, sa) = moments(a);
    let (mb, sb) = moments(b);
    let mut p = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            p[i][j] = sa[i][0] * sb[0][j] + sa[i][1] * sb[1][j];
        }
    }
    let tr = p[0][0] + p[1][1];
    let det = p[0][0] * p[1][1] - p[0][1] * p[1][0];
    let tr_sqrt = (tr + 2.0 * det.sqrt()).sqrt();
    let d2 = (ma[0] - mb[0]).powi(2) + (ma[1] - mb[1]).powi(2);
    d2 + sa[0][0] + sa[1][1] + sb[0][0] + sb[1][1] - 2.0 * tr_sqrt
}
