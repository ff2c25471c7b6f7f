//! Desk-scale end-to-end run: procedural phantoms, CT priors, denoiser
//! training and conditioned sampling, scored by SSIM against the priors.

use serde::{Deserialize, Serialize};

use crate::anatomy::{generate_phantom, reference_scan, PhantomSpec};
use crate::diffusion::{sample_many, train, DeskConfig, DeskDenoiser, LossCurve, ScheduleSpec, TrainConfig};
use crate::error::{Error, Result};
use crate::metrics::ssim;
use crate::par::Exec;
use crate::physiosynth::{simulate_ct, TissueParameterTable};
use crate::volumes::{denormalize_value, normalize_value, Slice, Window};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Phantom seeds are `first_seed..first_seed + phantoms`.
    pub first_seed: u64,
    pub phantoms: usize,
    /// The last `held_out` phantoms are only used for sampling.
    pub held_out: usize,
    /// Gaussian texture noise of the reference scans, in HU.
    pub scan_noise_hu: f64,
    pub phantom: PhantomSpec,
    pub model: DeskConfig,
    pub init_seed: u64,
    pub schedule: ScheduleSpec,
    pub train: TrainConfig,
    pub sample_seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            first_seed: 1,
            phantoms: 16,
            held_out: 4,
            scan_noise_hu: 8.0,
            phantom: PhantomSpec::default(),
            model: DeskConfig::default(),
            init_seed: 7,
            schedule: ScheduleSpec::default(),
            train: TrainConfig::default(),
            sample_seed: 1000,
        }
    }
}

/// One `(x0, y)` pair per phantom, both normalized with the CT window:
/// `x0` is the reference scan and `y` the CT prior.
pub fn phantom_pairs(cfg: &ExperimentConfig, table: &TissueParameterTable) -> Result<Vec<(Slice, Slice)>> {
    let w = Window::CT;
    let mut out = Vec::with_capacity(cfg.phantoms);
    for k in 0..cfg.phantoms as u64 {
        let seed = cfg.first_seed + k;
        let (labels, _) = generate_phantom(seed, &cfg.phantom)?;
        let prior = simulate_ct(&labels, table)?;
        let scan = reference_scan(&labels, table, cfg.scan_noise_hu, seed)?;
        for z in 0..labels.dims().nz {
            let n = |s: Slice| s.map(|v| normalize_value(v, w));
            out.push((n(scan.slice(z)), n(prior.slice(z))));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub curve: LossCurve,
    pub steps: usize,
    /// SSIM in HU (dynamic range 2624) of each held-out sample against its prior.
    pub held_out_ssim: Vec<f64>,
    pub samples_hu: Vec<Slice>,
    pub priors_hu: Vec<Slice>,
    pub model: DeskDenoiser,
}

impl ExperimentOutcome {
    pub fn first_epoch_loss(&self) -> f64 {
        self.curve.epoch_means.first().copied().unwrap_or(f64::NAN)
    }

    pub fn last_epoch_loss(&self) -> f64 {
        self.curve.epoch_means.last().copied().unwrap_or(f64::NAN)
    }

    pub fn mean_ssim(&self) -> f64 {
        self.held_out_ssim.iter().sum::<f64>() / self.held_out_ssim.len() as f64
    }
}

pub fn run_experiment(cfg: &ExperimentConfig, exec: Exec) -> Result<ExperimentOutcome> {
    if cfg.held_out == 0 || cfg.held_out >= cfg.phantoms {
        return Err(Error::Validation(format!(
            "held_out must be in [1, {}), got {}",
            cfg.phantoms, cfg.held_out
        )));
    }
    let table = TissueParameterTable::default();
    let pairs = phantom_pairs(cfg, &table)?;
    let per = pairs.len() / cfg.phantoms;
    let split = (cfg.phantoms - cfg.held_out) * per;
    let (train_set, test_set) = pairs.split_at(split);
    let sched = cfg.schedule.build()?;
    let mut model = DeskDenoiser::new(cfg.model, cfg.init_seed)?;
    let trained = train(&mut model, train_set, &cfg.train, &sched, exec)?;

    let priors: Vec<Slice> = test_set.iter().map(|(_, y)| y.clone()).collect();
    let seeds: Vec<u64> = (0..priors.len() as u64).map(|i| cfg.sample_seed + i).collect();
    let samples = sample_many(&model, &priors, &sched, &seeds, exec)?;
    let w = Window::CT;
    let hu = |s: &Slice| s.map(|v| denormalize_value(v, w));
    let samples_hu: Vec<Slice> = samples.iter().map(hu).collect();
    let priors_hu: Vec<Slice> = priors.iter().map(hu).collect();
    let held_out_ssim = samples_hu
        .iter()
        .zip(&priors_hu)
        .map(|(s, p)| ssim(s, p, w.width()))
        .collect::<Result<Vec<f64>>>()?;
    Ok(ExperimentOutcome {
        curve: trained.curve,
        steps: trained.steps,
        held_out_ssim,
        samples_hu,
        priors_hu,
        model,
    })
}
