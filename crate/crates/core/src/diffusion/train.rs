use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::Exec;
use crate::volumes::{normalize_value, ScalarVolume, Slice, Window};

use super::condition::make_condition_input;
use super::predictor::Trainable;
use super::schedule::{forward_diffuse, NoiseSchedule};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Stops early once this many optimizer steps have run.
    pub max_steps: Option<usize>,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    /// Desk scale: batch 4, 2000 steps.
    fn default() -> Self {
        TrainConfig {
            epochs: 1000,
            max_steps: Some(2000),
            batch_size: 4,
            learning_rate: 1e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Full-scale constants: 300 epochs, batch 8, learning rate 2e-4.
    pub fn full_scale() -> Self {
        TrainConfig {
            epochs: 300,
            max_steps: None,
            batch_size: 8,
            learning_rate: 2e-4,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = self.batch_size >= 1
            && self.learning_rate >= 0.0
            && self.learning_rate.is_finite()
            && (0.0..1.0).contains(&self.adam_beta1)
            && (0.0..1.0).contains(&self.adam_beta2)
            && self.adam_eps > 0.0;
        if !ok {
            return Err(Error::Validation(format!("invalid training config {self:?}")));
        }
        Ok(())
    }
}

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    b1: f64,
    b2: f64,
    eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
}

impl Adam {
    pub fn new(n: usize, lr: f64, b1: f64, b2: f64, eps: f64) -> Self {
        Adam {
            lr,
            b1,
            b2,
            eps,
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.step = self.step.saturating_add(1);
        let c1 = 1.0 - self.b1.powi(self.step);
        let c2 = 1.0 - self.b2.powi(self.step);
        for i in 0..params.len() {
            self.m[i] = self.b1 * self.m[i] + (1.0 - self.b1) * grad[i];
            self.v[i] = self.b2 * self.v[i] + (1.0 - self.b2) * grad[i] * grad[i];
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] -= self.lr * mh / (vh.sqrt() + self.eps);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LossCurve {
    pub step_losses: Vec<f64>,
    /// Mean step loss per epoch; a trailing partial epoch is included.
    pub epoch_means: Vec<f64>,
}

impl LossCurve {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,mean_loss\n");
        for (i, v) in self.epoch_means.iter().enumerate() {
            s.push_str(&format!("{},{v:e}\n", i + 1));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub curve: LossCurve,
    pub steps: usize,
}

/// Standard normal draws in row-major order.
pub(crate) fn gaussian_slice(rng: &mut ChaCha8Rng, w: usize, h: usize) -> Slice {
    let data = (0..w * h).map(|_| StandardNormal.sample(rng)).collect();
    Slice::from_vec(w, h, data).expect("shape")
}

fn check_normalized(s: &Slice, what: &str) -> Result<()> {
    if s.data().iter().any(|v| !(-1.0..=1.0).contains(v)) {
        return Err(Error::Validation(format!("{what} is not normalized to [-1, 1]")));
    }
    Ok(())
}

/// Trains `predictor` in place on `(x0, y)` pairs.
///
/// Each epoch shuffles the dataset and walks it in batches. For every batch
/// member, in order, a timestep and a noise slice are drawn from one ChaCha8
/// stream; gradients are then computed (possibly in parallel) and summed in
/// batch order, so the result does not depend on `exec`.
pub fn train<P: Trainable>(
    predictor: &mut P,
    dataset: &[(Slice, Slice)],
    cfg: &TrainConfig,
    sched: &NoiseSchedule,
    exec: Exec,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let (first, _) = dataset.first().ok_or_else(|| Error::Validation("empty training set".into()))?;
    for (i, (x0, y)) in dataset.iter().enumerate() {
        if !x0.same_shape(first) || !y.same_shape(first) {
            return Err(Error::shape(format!("training pair {i} differs in shape")));
        }
        check_normalized(x0, "training image")?;
        check_normalized(y, "training prior")?;
    }
    let (w, h) = (first.width(), first.height());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = Adam::new(predictor.params().len(), cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
    let mut curve = LossCurve::default();
    let limit = cfg.max_steps.unwrap_or(usize::MAX);
    let mut step = 0;
    let mut order: Vec<usize> = (0..dataset.len()).collect();

    'epochs: for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch = Vec::new();
        for batch in order.chunks(cfg.batch_size) {
            if step >= limit {
                if !epoch.is_empty() {
                    curve.epoch_means.push(epoch.iter().sum::<f64>() / epoch.len() as f64);
                }
                break 'epochs;
            }
            let draws: Vec<(usize, usize, Slice)> = batch
                .iter()
                .map(|&i| {
                    let t = rng.random_range(1..=sched.timesteps());
                    (i, t, gaussian_slice(&mut rng, w, h))
                })
                .collect();
            let results = exec.map(&draws, |(i, t, eps)| {
                let (x0, y) = &dataset[*i];
                let z = make_condition_input(&forward_diffuse(x0, *t, eps, sched)?, y)?;
                predictor.loss_and_grad(&z, *t, eps)
            });
            let mut loss = 0.0;
            let mut grad = vec![0.0; predictor.params().len()];
            for r in results {
                let (l, g) = r?;
                loss += l;
                grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
            }
            let n = draws.len() as f64;
            loss /= n;
            grad.iter_mut().for_each(|g| *g /= n);
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Divergence { stage: "train", index: step });
            }
            adam.step(predictor.params_mut(), &grad);
            curve.step_losses.push(loss);
            epoch.push(loss);
            step += 1;
        }
        curve.epoch_means.push(epoch.iter().sum::<f64>() / epoch.len() as f64);
        if step >= limit {
            break;
        }
    }
    Ok(TrainOutcome { curve, steps: step })
}

/// `(x0, y)` training pairs from an image and its prior on the same grid,
/// both normalized with the prior's modality window.
pub fn volume_pairs(image: &ScalarVolume, prior: &ScalarVolume) -> Result<Vec<(Slice, Slice)>> {
    if image.dims() != prior.dims() {
        return Err(Error::Shape(format!(
            "image dims {:?} differ from prior dims {:?}",
            image.dims(),
            prior.dims()
        )));
    }
    let w = Window::for_modality(prior.modality());
    let n = |s: Slice| s.map(|v| normalize_value(v, w));
    Ok((0..prior.dims().nz).map(|z| (n(image.slice(z)), n(prior.slice(z)))).collect())
}
