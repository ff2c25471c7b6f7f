use crate::error::{Error, Result};
use crate::volumes::Slice;

use super::condition::{make_condition_input, ConditionStack, CHANNEL_PRIOR, CHANNEL_XT};
use super::schedule::{forward_diffuse, NoiseSchedule};

/// Noise estimator `eps_theta(z, t)`; `t` is 1-based.
pub trait EpsilonPredictor: Send + Sync {
    fn predict(&self, z: &ConditionStack, t: usize) -> Result<Slice>;
}

/// A predictor with a flat parameter vector and an analytic loss gradient.
pub trait Trainable: EpsilonPredictor {
    fn params(&self) -> &[f64];
    fn params_mut(&mut self) -> &mut [f64];
    /// Mean squared error against `eps` and its gradient w.r.t. `params()`.
    fn loss_and_grad(&self, z: &ConditionStack, t: usize, eps: &Slice) -> Result<(f64, Vec<f64>)>;
}

pub(crate) fn mse(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64
}

/// Gradient of `mse(pred, target)` w.r.t. `pred`.
pub(crate) fn mse_grad(pred: &[f64], target: &[f64]) -> Vec<f64> {
    let k = 2.0 / pred.len() as f64;
    pred.iter().zip(target).map(|(p, t)| k * (p - t)).collect()
}

pub fn simple_loss<P: EpsilonPredictor + ?Sized>(
    predictor: &P,
    x0: &Slice,
    y: &Slice,
    t: usize,
    eps: &Slice,
    sched: &NoiseSchedule,
) -> Result<f64> {
    let z = make_condition_input(&forward_diffuse(x0, t, eps, sched)?, y)?;
    let out = predictor.predict(&z, t)?;
    out.check_same_shape(eps)?;
    Ok(mse(out.data(), eps.data()))
}

/// Always predicts zero noise.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroPredictor;

impl EpsilonPredictor for ZeroPredictor {
    fn predict(&self, z: &ConditionStack, _t: usize) -> Result<Slice> {
        Ok(Slice::zeros(z.width(), z.height()))
    }
}

impl Trainable for ZeroPredictor {
    fn params(&self) -> &[f64] {
        &[]
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut []
    }

    fn loss_and_grad(&self, z: &ConditionStack, t: usize, eps: &Slice) -> Result<(f64, Vec<f64>)> {
        let out = self.predict(z, t)?;
        Ok((mse(out.data(), eps.data()), Vec::new()))
    }
}

/// `eps_hat = w0 * x_t + w1 * y + b`. Its loss is quadratic in the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearPredictor {
    params: [f64; 3],
}

impl LinearPredictor {
    pub fn new(w_xt: f64, w_prior: f64, bias: f64) -> Self {
        LinearPredictor {
            params: [w_xt, w_prior, bias],
        }
    }
}

impl EpsilonPredictor for LinearPredictor {
    fn predict(&self, z: &ConditionStack, _t: usize) -> Result<Slice> {
        let [a, b, c] = self.params;
        let (xt, y) = (z.channel(CHANNEL_XT), z.channel(CHANNEL_PRIOR));
        let data = xt.iter().zip(y).map(|(x, y)| a * x + b * y + c).collect();
        Slice::from_vec(z.width(), z.height(), data)
    }
}

impl Trainable for LinearPredictor {
    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn loss_and_grad(&self, z: &ConditionStack, t: usize, eps: &Slice) -> Result<(f64, Vec<f64>)> {
        let out = self.predict(z, t)?;
        out.check_same_shape(eps)?;
        let g = mse_grad(out.data(), eps.data());
        let (xt, y) = (z.channel(CHANNEL_XT), z.channel(CHANNEL_PRIOR));
        let mut grad = vec![0.0; 3];
        for i in 0..g.len() {
            grad[0] += g[i] * xt[i];
            grad[1] += g[i] * y[i];
            grad[2] += g[i];
        }
        Ok((mse(out.data(), eps.data()), grad))
    }
}

/// Exact noise estimate for a known clean image:
/// `eps_hat = (x_t - sqrt(abar_t) x0) / sqrt(1 - abar_t)`.
#[derive(Debug, Clone)]
pub struct AnalyticOracle {
    x0: Slice,
    sched: NoiseSchedule,
}

impl AnalyticOracle {
    pub fn new(x0: Slice, sched: NoiseSchedule) -> Self {
        AnalyticOracle { x0, sched }
    }
}

impl EpsilonPredictor for AnalyticOracle {
    fn predict(&self, z: &ConditionStack, t: usize) -> Result<Slice> {
        self.sched.check_t(t)?;
        let ab = self.sched.alpha_bar(t);
        if ab >= 1.0 {
            return Err(Error::domain("oracle undefined where alpha_bar = 1"));
        }
        let (a, s) = (ab.sqrt(), (1.0 - ab).sqrt());
        let xt = Slice::from_vec(z.width(), z.height(), z.channel(CHANNEL_XT).to_vec())?;
        xt.zip_map(&self.x0, |x, x0| (x - a * x0) / s)
    }
}
