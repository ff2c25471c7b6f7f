use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volumes::Slice;

pub const FRECHET_RIDGE: f64 = 1e-6;

/// Maps a slice to a fixed-length feature vector.
pub trait FeatureExtractor: Send + Sync {
    fn dim(&self) -> usize;
    fn extract(&self, s: &Slice) -> Result<Vec<f64>>;
}

/// Block-averages a slice onto a `size x size` grid (area weighting).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DownsampledPixels {
    pub size: usize,
}

impl Default for DownsampledPixels {
    fn default() -> Self {
        DownsampledPixels { size: 4 }
    }
}

impl FeatureExtractor for DownsampledPixels {
    fn dim(&self) -> usize {
        self.size * self.size
    }

    fn extract(&self, s: &Slice) -> Result<Vec<f64>> {
        let n = self.size;
        if n == 0 || s.width() < n || s.height() < n {
            return Err(Error::shape(format!("cannot pool {}x{} onto {n}x{n}", s.width(), s.height())));
        }
        let mut sums = vec![0.0; n * n];
        let mut weights = vec![0.0; n * n];
        // each source pixel covers [x, x+1) and is split across the cells it overlaps
        let split = |p: usize, len: usize| -> Vec<(usize, f64)> {
            let (a, b) = (p as f64 * n as f64 / len as f64, (p + 1) as f64 * n as f64 / len as f64);
            let mut out = Vec::new();
            let mut c = a.floor() as usize;
            while (c as f64) < b && c < n {
                let lo = a.max(c as f64);
                let hi = b.min(c as f64 + 1.0);
                if hi > lo {
                    out.push((c, hi - lo));
                }
                c += 1;
            }
            out
        };
        let xs: Vec<_> = (0..s.width()).map(|x| split(x, s.width())).collect();
        for y in 0..s.height() {
            for &(cy, wy) in &split(y, s.height()) {
                for (x, parts) in xs.iter().enumerate() {
                    for &(cx, wx) in parts {
                        sums[cy * n + cx] += wx * wy * s.get(x, y);
                        weights[cy * n + cx] += wx * wy;
                    }
                }
            }
        }
        Ok(sums.iter().zip(&weights).map(|(s, w)| s / w).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrechetResult {
    /// Squared Fréchet distance between the fitted Gaussians.
    pub distance: f64,
    /// Whether `FRECHET_RIDGE * I` was added to both covariances.
    pub regularized: bool,
}

fn moments(x: &[Vec<f64>], d: usize) -> (DVector<f64>, DMatrix<f64>) {
    let n = x.len() as f64;
    let mut mu = DVector::zeros(d);
    for v in x {
        mu += DVector::from_column_slice(v);
    }
    mu /= n;
    let mut cov = DMatrix::zeros(d, d);
    for v in x {
        let c = DVector::from_column_slice(v) - &mu;
        cov += &c * c.transpose();
    }
    (mu, cov / (n - 1.0))
}

fn sym_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let e = SymmetricEigen::new(m.clone());
    let root = e.eigenvalues.map(|v| v.max(0.0).sqrt());
    &e.eigenvectors * DMatrix::from_diagonal(&root) * e.eigenvectors.transpose()
}

fn is_singular(m: &DMatrix<f64>) -> bool {
    let e = SymmetricEigen::new(m.clone()).eigenvalues;
    let top = e.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    let low = e.iter().fold(f64::INFINITY, |a, &v| a.min(v));
    low <= 1e-12 * top.max(1.0)
}

/// `|mu_a - mu_b|^2 + tr(S_a + S_b - 2 (S_a^1/2 S_b S_a^1/2)^1/2)` with
/// unbiased covariances; the trace term uses symmetric eigendecompositions.
pub fn frechet_gaussian(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<FrechetResult> {
    let d = a.first().map(Vec::len).unwrap_or(0);
    if d == 0 || a.iter().chain(b).any(|v| v.len() != d) {
        return Err(Error::shape("feature vectors must share a non-zero length"));
    }
    if a.len() <= d || b.len() <= d {
        return Err(Error::domain(format!(
            "need more samples than features ({d}), got {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.iter().chain(b).flatten().any(|v| !v.is_finite()) {
        return Err(Error::Validation("non-finite feature".into()));
    }
    let (mu_a, mut sa) = moments(a, d);
    let (mu_b, mut sb) = moments(b, d);
    let regularized = is_singular(&sa) || is_singular(&sb);
    if regularized {
        let ridge = DMatrix::identity(d, d) * FRECHET_RIDGE;
        sa += &ridge;
        sb += &ridge;
    }
    let ra = sym_sqrt(&sa);
    let mut m = &ra * &sb * &ra;
    m = (&m + m.transpose()) * 0.5;
    let tr_sqrt: f64 = SymmetricEigen::new(m).eigenvalues.iter().map(|v| v.max(0.0).sqrt()).sum();
    let diff = (&mu_a - &mu_b).norm_squared();
    let distance = (diff + sa.trace() + sb.trace() - 2.0 * tr_sqrt).max(0.0);
    Ok(FrechetResult { distance, regularized })
}

/// Extracts features from both sets and compares them.
pub fn frechet_from_slices<F: FeatureExtractor + ?Sized>(fx: &F, a: &[Slice], b: &[Slice]) -> Result<FrechetResult> {
    let fa = a.iter().map(|s| fx.extract(s)).collect::<Result<Vec<_>>>()?;
    let fb = b.iter().map(|s| fx.extract(s)).collect::<Result<Vec<_>>>()?;
    frechet_gaussian(&fa, &fb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn cloud(seed: u64, n: usize, shift: f64) -> Vec<Vec<f64>> {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let g = Normal::new(0.0, 1.0).unwrap();
        (0..n)
            .map(|_| {
                let (u, v): (f64, f64) = (g.sample(&mut r), g.sample(&mut r));
                vec![u + shift, 0.5 * u + v]
            })
            .collect()
    }

    #[test]
    fn identical_sets() {
        let a = cloud(1, 50, 0.0);
        let r = frechet_gaussian(&a, &a).unwrap();
        assert!(r.distance < 1e-8);
        assert!(!r.regularized);
    }

    #[test]
    fn symmetric() {
        let (a, b) = (cloud(1, 40, 0.0), cloud(2, 60, 0.7));
        let (x, y) = (frechet_gaussian(&a, &b).unwrap(), frechet_gaussian(&b, &a).unwrap());
        assert!((x.distance - y.distance).abs() < 1e-10);
    }

    #[test]
    fn preconditions() {
        let a = cloud(1, 2, 0.0);
        assert!(matches!(frechet_gaussian(&a, &a), Err(Error::Domain(_))));
        assert!(frechet_gaussian(&[vec![1.0], vec![2.0]], &vec![vec![1.0, 2.0]; 3]).is_err());
    }

    #[test]
    fn singular_is_regularized() {
        let a: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, 2.0 * i as f64]).collect();
        let r = frechet_gaussian(&a, &a).unwrap();
        assert!(r.regularized);
        // the ridge eigenvalue (1e-6) is square-rooted, so roundoff is amplified
        assert!(r.distance < 1e-6, "{}", r.distance);
    }

    #[test]
    fn pooled_features() {
        let s = Slice::from_fn(6, 6, |x, y| (x + 6 * y) as f64);
        let f = DownsampledPixels { size: 3 }.extract(&s).unwrap();
        assert_eq!(f.len(), 9);
        assert!((f[0] - (0.0 + 1.0 + 6.0 + 7.0) / 4.0).abs() < 1e-12);
        let g = DownsampledPixels { size: 4 }.extract(&Slice::filled(6, 5, 2.5)).unwrap();
        assert!(g.iter().all(|v| (v - 2.5).abs() < 1e-12));
    }
}
