use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::volumes::Slice;

use super::condition::make_condition_input;
use super::predictor::{simple_loss, Trainable};
use super::schedule::{forward_diffuse, NoiseSchedule};

#[derive(Debug, Clone)]
pub struct GradProbe {
    pub x0: Slice,
    pub y: Slice,
    pub t: usize,
    pub eps: Slice,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradcheckConfig {
    /// Number of parameters compared; all of them if the model has fewer.
    pub samples: usize,
    pub step: f64,
    pub seed: u64,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        GradcheckConfig {
            samples: 64,
            step: 1e-4,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradcheckReport {
    pub max_relative_error: f64,
    pub checked: usize,
}

/// Central differences `(L(p + h) - L(p - h)) / 2h` against the analytic
/// gradient on randomly chosen parameters. The relative error is
/// `|a - b| / max(|a|, |b|, 1e-8)`.
pub fn finite_difference_gradcheck<P: Trainable>(
    predictor: &mut P,
    probe: &GradProbe,
    sched: &NoiseSchedule,
    cfg: &GradcheckConfig,
) -> Result<GradcheckReport> {
    let n = predictor.params().len();
    if n == 0 {
        return Ok(GradcheckReport {
            max_relative_error: 0.0,
            checked: 0,
        });
    }
    let z = make_condition_input(&forward_diffuse(&probe.x0, probe.t, &probe.eps, sched)?, &probe.y)?;
    let (_, grad) = predictor.loss_and_grad(&z, probe.t, &probe.eps)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut idx = rand::seq::index::sample(&mut rng, n, cfg.samples.min(n)).into_vec();
    idx.sort_unstable();
    let mut worst = 0.0f64;
    for &i in &idx {
        let keep = predictor.params()[i];
        predictor.params_mut()[i] = keep + cfg.step;
        let lp = simple_loss(&*predictor, &probe.x0, &probe.y, probe.t, &probe.eps, sched)?;
        predictor.params_mut()[i] = keep - cfg.step;
        let lm = simple_loss(&*predictor, &probe.x0, &probe.y, probe.t, &probe.eps, sched)?;
        predictor.params_mut()[i] = keep;
        let fd = (lp - lm) / (2.0 * cfg.step);
        let err = (fd - grad[i]).abs() / fd.abs().max(grad[i].abs()).max(1e-8);
        worst = worst.max(err);
    }
    Ok(GradcheckReport {
        max_relative_error: worst,
        checked: idx.len(),
    })
}
