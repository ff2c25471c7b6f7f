use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Largest per-group size for which the exact null distribution is used.
pub const EXACT_MAX_N: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MannWhitney {
    /// U statistic of the first sample.
    pub u: f64,
    pub p_two_sided: f64,
    pub exact: bool,
}

/// Midranks (1-based) of the pooled values.
fn midranks(pooled: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..pooled.len()).collect();
    idx.sort_by(|&i, &j| pooled[i].total_cmp(&pooled[j]));
    let mut ranks = vec![0.0; pooled.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && pooled[idx[j + 1]] == pooled[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Counts of `U = u` for `u = 0..=na*nb` without ties:
/// `f(m, n, u) = f(m - 1, n, u - n) + f(m, n - 1, u)`.
fn u_distribution(na: usize, nb: usize) -> Vec<f64> {
    let top = na * nb;
    // table[m][n] is the distribution for sizes (m, n)
    let mut table = vec![vec![Vec::<f64>::new(); nb + 1]; na + 1];
    for m in 0..=na {
        for n in 0..=nb {
            let mut f = vec![0.0; m * n + 1];
            if m == 0 || n == 0 {
                f[0] = 1.0;
            } else {
                for (u, slot) in f.iter_mut().enumerate() {
                    let a = if u >= n { table[m - 1][n].get(u - n).copied().unwrap_or(0.0) } else { 0.0 };
                    let b = table[m][n - 1].get(u).copied().unwrap_or(0.0);
                    *slot = a + b;
                }
            }
            table[m][n] = f;
        }
    }
    let mut out = table[na][nb].clone();
    out.resize(top + 1, 0.0);
    out
}

fn combinations(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    let mut c: Vec<usize> = (0..k).collect();
    loop {
        f(&c);
        let mut i = k;
        while i > 0 && c[i - 1] == n - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return;
        }
        c[i - 1] += 1;
        for j in i..k {
            c[j] = c[j - 1] + 1;
        }
    }
}

/// Two-sided Mann-Whitney U test. Exact when both groups have at most
/// `EXACT_MAX_N` members (tied data enumerates every group assignment of the
/// midranks); otherwise the tie-corrected normal approximation with
/// continuity correction. The p-value is `P(|U - mean| >= |u - mean|)`.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<MannWhitney> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::domain("both samples must be non-empty"));
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(Error::domain("samples contain NaN"));
    }
    let (na, nb) = (a.len(), b.len());
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = midranks(&pooled);
    let ra: f64 = ranks[..na].iter().sum();
    let u = ra - (na * (na + 1)) as f64 / 2.0;
    let mean = (na * nb) as f64 / 2.0;
    let dev = (u - mean).abs();
    let tol = 1e-9;

    if na <= EXACT_MAX_N && nb <= EXACT_MAX_N {
        let tied = {
            let mut s = pooled.clone();
            s.sort_by(f64::total_cmp);
            s.windows(2).any(|w| w[0] == w[1])
        };
        let (hits, total) = if tied {
            let (mut hits, mut total) = (0u64, 0u64);
            let base = (na * (na + 1)) as f64 / 2.0;
            combinations(na + nb, na, |c| {
                let uu: f64 = c.iter().map(|&i| ranks[i]).sum::<f64>() - base;
                total += 1;
                if (uu - mean).abs() >= dev - tol {
                    hits += 1;
                }
            });
            (hits as f64, total as f64)
        } else {
            let f = u_distribution(na, nb);
            let hits = f.iter().enumerate().filter(|(k, _)| (*k as f64 - mean).abs() >= dev - tol).map(|(_, c)| c).sum();
            (hits, f.iter().sum())
        };
        return Ok(MannWhitney {
            u,
            p_two_sided: (hits / total).min(1.0),
            exact: true,
        });
    }

    let n = (na + nb) as f64;
    let mut sorted = pooled;
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let var = (na * nb) as f64 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    let p = if var <= 0.0 {
        1.0
    } else {
        let z = ((dev - 0.5).max(0.0)) / var.sqrt();
        let norm = Normal::new(0.0, 1.0).expect("standard normal");
        (2.0 * (1.0 - norm.cdf(z))).min(1.0)
    };
    Ok(MannWhitney {
        u,
        p_two_sided: p,
        exact: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separated_triples() {
        let r = mann_whitney_u(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
        assert_eq!(r.u, 0.0);
        assert!(r.exact);
        assert!((r.p_two_sided - 0.1).abs() < 1e-15);
        let s = mann_whitney_u(&[4.0, 5.0, 6.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(s.u, 9.0);
        assert_eq!(s.p_two_sided, r.p_two_sided);
    }

    #[test]
    fn identical_multisets() {
        let a: Vec<f64> = (0..12).map(|i| (i % 5) as f64).collect();
        let r = mann_whitney_u(&a, &a).unwrap();
        assert_eq!(r.u, 72.0);
        assert!(!r.exact);
        assert_eq!(r.p_two_sided, 1.0);
        let small = mann_whitney_u(&a[..6], &a[..6]).unwrap();
        assert_eq!(small.u, 18.0);
        assert_eq!(small.p_two_sided, 1.0);
    }

    #[test]
    fn distribution_counts() {
        let f = u_distribution(3, 3);
        assert_eq!(f, vec![1.0, 1.0, 2.0, 3.0, 3.0, 3.0, 3.0, 2.0, 1.0, 1.0]);
        assert_eq!(u_distribution(5, 5).iter().sum::<f64>(), 252.0);
    }

    #[test]
    fn normal_branch_matches_reference_value() {
        // no ties, n = 10 each, complete separation: z = (50 - 0.5) / sqrt(175)
        let a: Vec<f64> = (0..10).map(f64::from).collect();
        let b: Vec<f64> = (10..20).map(f64::from).collect();
        let r = mann_whitney_u(&a, &b).unwrap();
        let z = 49.5 / 175f64.sqrt();
        let want = 2.0 * (1.0 - Normal::new(0.0, 1.0).unwrap().cdf(z));
        assert!((r.p_two_sided - want).abs() < 1e-15);
    }

    #[test]
    fn rejects_empty() {
        assert!(mann_whitney_u(&[], &[1.0]).is_err());
        assert!(mann_whitney_u(&[f64::NAN], &[1.0]).is_err());
    }
}
