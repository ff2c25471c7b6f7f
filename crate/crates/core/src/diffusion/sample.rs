use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::par::Exec;
use crate::volumes::{denormalize_value, normalize_value, ScalarVolume, Slice, Window};

use super::condition::make_condition_input;
use super::predictor::EpsilonPredictor;
use super::schedule::NoiseSchedule;
use super::train::gaussian_slice;

/// Ancestral sampling conditioned on `y`. `x_T` and every injected noise
/// slice come, in that order, from one ChaCha8 stream seeded with `seed`.
pub fn sample<P: EpsilonPredictor + ?Sized>(predictor: &P, y: &Slice, sched: &NoiseSchedule, seed: u64) -> Result<Slice> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x_t = gaussian_slice(&mut rng, y.width(), y.height());
    reverse_process(predictor, y, sched, x_t, Some(&mut rng))
}

/// Runs `t = T..1` from a given `x_T`:
/// `x_{t-1} = (x_t - beta_t / sqrt(1 - abar_t) * eps_hat) / sqrt(1 - beta_t) + sqrt(beta_t) z`
/// with `z = 0` at `t = 1` or when `rng` is `None`. The prior `y` is held fixed
/// and only the final output is clamped to `[-1, 1]`.
pub fn reverse_process<P: EpsilonPredictor + ?Sized>(
    predictor: &P,
    y: &Slice,
    sched: &NoiseSchedule,
    x_t: Slice,
    mut rng: Option<&mut ChaCha8Rng>,
) -> Result<Slice> {
    x_t.check_same_shape(y)?;
    if y.data().iter().any(|v| !(-1.0..=1.0).contains(v)) {
        return Err(Error::Validation("prior is not normalized to [-1, 1]".into()));
    }
    let mut x = x_t;
    for t in (1..=sched.timesteps()).rev() {
        let eps = predictor.predict(&make_condition_input(&x, y)?, t)?;
        eps.check_same_shape(&x)?;
        let beta = sched.beta(t);
        let k = beta / (1.0 - sched.alpha_bar(t)).sqrt();
        let inv = 1.0 / (1.0 - beta).sqrt();
        let mut next = x.zip_map(&eps, |xv, e| inv * (xv - k * e))?;
        if t > 1 {
            if let Some(r) = rng.as_deref_mut() {
                let z = gaussian_slice(r, x.width(), x.height());
                let sigma = beta.sqrt();
                next = next.zip_map(&z, |a, b| a + sigma * b)?;
            }
        }
        if !next.is_finite() {
            return Err(Error::Divergence { stage: "sample", index: t });
        }
        x = next;
    }
    Ok(x.map(|v| v.clamp(-1.0, 1.0)))
}

/// Independent samples, one per `(prior, seed)` pair, in input order.
pub fn sample_many<P: EpsilonPredictor + ?Sized>(
    predictor: &P,
    priors: &[Slice],
    sched: &NoiseSchedule,
    seeds: &[u64],
    exec: Exec,
) -> Result<Vec<Slice>> {
    if priors.len() != seeds.len() {
        return Err(Error::shape(format!("{} priors but {} seeds", priors.len(), seeds.len())));
    }
    let jobs: Vec<(&Slice, u64)> = priors.iter().zip(seeds.iter().copied()).collect();
    exec.map(&jobs, |(y, s)| sample(predictor, y, sched, *s)).into_iter().collect()
}

/// Samples every axial slice of `prior`, slice `z` with seed `seed + z`. The
/// prior is normalized with its modality window and the result mapped back
/// into that window under the prior's modality.
pub fn sample_volume<P: EpsilonPredictor + ?Sized>(
    predictor: &P,
    prior: &ScalarVolume,
    sched: &NoiseSchedule,
    seed: u64,
    exec: Exec,
) -> Result<ScalarVolume> {
    let w = Window::for_modality(prior.modality());
    let priors: Vec<Slice> = prior.slices().iter().map(|s| s.map(|v| normalize_value(v, w))).collect();
    let seeds: Vec<u64> = (0..priors.len() as u64).map(|z| seed.wrapping_add(z)).collect();
    let out: Vec<Slice> = sample_many(predictor, &priors, sched, &seeds, exec)?
        .iter()
        .map(|s| s.map(|v| denormalize_value(v, w)))
        .collect();
    ScalarVolume::from_slices(&out, prior.spacing(), prior.modality(), (w.lo as f32, w.hi as f32))
}
