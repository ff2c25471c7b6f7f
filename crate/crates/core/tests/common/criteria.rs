//! Acceptance checks over the library. Each returns whether it passed and a
//! one-line detail with the measured figures.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use priorsynth::anatomy::{compose_anatomy, generate_phantom, CompositionRecipe, ConflictPolicy, PhantomSpec, RecipeEntry};
use priorsynth::diffusion::{
    finite_difference_gradcheck, forward_diffuse, reverse_process, AnalyticOracle, DeskConfig, DeskDenoiser,
    GradProbe, GradcheckConfig, NoiseSchedule,
};
use priorsynth::experiment::{run_experiment, ExperimentConfig};
use priorsynth::metrics::{dice, dice_per_class, frechet_gaussian, hist_cc, mae, mann_whitney_u, psnr, ssim};
use priorsynth::physiosynth::{gre_signal, space_signal, vibe_signal, SequenceKind, SequenceParams};
use priorsynth::{Exec, Slice};

use super::{brute, hp};

pub struct Check {
    pub pass: bool,
    pub detail: String,
}

impl Check {
    fn new(pass: bool, detail: String) -> Self {
        Check { pass, detail }
    }
}

fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / b.abs()
    }
}

fn gaussian_slice(rng: &mut ChaCha8Rng, w: usize, h: usize) -> Slice {
    let data = (0..w * h).map(|_| StandardNormal.sample(rng)).collect();
    Slice::from_vec(w, h, data).unwrap()
}

fn uniform_slice(rng: &mut ChaCha8Rng, w: usize, h: usize, lo: f64, hi: f64) -> Slice {
    let data = (0..w * h).map(|_| rng.random_range(lo..hi)).collect();
    Slice::from_vec(w, h, data).unwrap()
}

/// GRE, SPACE and VIBE signals against the fixed-point evaluator on 1000
/// random draws at 1e-12 relative error, plus GRE increasing in TR and
/// SPACE decreasing in TE on every draw; under 5 s.
pub fn signal_oracle() -> Check {
    let start = Instant::now();
    let pi = hp::pi();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5167);
    let mut worst: f64 = 0.0;
    let mut monotone_failures = 0;
    let kinds = [SequenceKind::VibeIn, SequenceKind::VibeOpp, SequenceKind::DixonVibeIn, SequenceKind::DixonVibeOpp];
    for i in 0..1000 {
        let t1 = rng.random_range(100.0..3000.0);
        let t2 = rng.random_range(10.0..500.0);
        let rho = rng.random_range(0.0..1.0);
        let ff = rng.random_range(0.0..1.0);
        let tr = rng.random_range(1.0..5000.0);
        let te = rng.random_range(0.0..300.0);
        let flip = rng.random_range(1.0..90.0);

        let g = gre_signal(t1, rho, tr, flip);
        worst = worst.max(rel_err(g, hp::gre(t1, rho, tr, flip, &pi)));
        let s = space_signal(t2, rho, te);
        worst = worst.max(rel_err(s, hp::space(t2, rho, te)));
        let kind = kinds[i % kinds.len()];
        let params = SequenceParams::new(kind, tr, te.min(tr), flip).unwrap();
        let v = vibe_signal(t1, rho, ff, &params).unwrap();
        worst = worst.max(rel_err(v, hp::vibe(t1, rho, ff, tr, flip, kind.is_opposed_phase(), &pi)));

        let tr2 = tr * rng.random_range(1.0..3.0);
        let te2 = te + rng.random_range(0.0..100.0);
        if gre_signal(t1, rho, tr2, flip) < g || space_signal(t2, rho, te2) > s {
            monotone_failures += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Check::new(
        worst <= 1e-12 && monotone_failures == 0 && secs < 5.0,
        format!("max rel err {worst:.2e}, monotonicity failures {monotone_failures}, {secs:.2}s"),
    )
}

/// Empirical mean and variance of `x_t` over 10000 draws at `t = 1, 250,
/// 500` against `sqrt(abar_t) x0` and `1 - abar_t`, within 4 standard errors.
pub fn forward_statistics() -> Check {
    let start = Instant::now();
    let (t_max, b0, b1) = (500usize, 1e-4, 0.02);
    let sched = NoiseSchedule::linear(t_max, b0, b1).unwrap();
    let mut abar = vec![1.0f64; t_max + 1];
    for t in 1..=t_max {
        let beta = b0 + (b1 - b0) * (t - 1) as f64 / (t_max - 1) as f64;
        abar[t] = abar[t - 1] * (1.0 - beta);
    }
    let n = 10_000usize;
    let x0_value = 0.6;
    let x0 = Slice::filled(100, 100, x0_value);
    let mut rng = ChaCha8Rng::seed_from_u64(0xF0);
    let mut worst_z: f64 = 0.0;
    for t in [1usize, 250, 500] {
        let eps = gaussian_slice(&mut rng, 100, 100);
        let xt = forward_diffuse(&x0, t, &eps, &sched).unwrap();
        let d = xt.data();
        let mean = d.iter().sum::<f64>() / n as f64;
        let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let (mu, sigma2) = (abar[t].sqrt() * x0_value, 1.0 - abar[t]);
        let z_mean = (mean - mu).abs() / (sigma2 / n as f64).sqrt();
        let z_var = (var - sigma2).abs() / (sigma2 * (2.0 / (n - 1) as f64).sqrt());
        worst_z = worst_z.max(z_mean).max(z_var);
    }
    let secs = start.elapsed().as_secs_f64();
    Check::new(worst_z <= 4.0 && secs < 30.0, format!("max |z| {worst_z:.2} over t=1,250,500, {secs:.2}s"))
}

/// Deterministic reverse process with the analytic noise oracle at T = 50
/// on 64 x 64 slices recovers `x0` to 1e-6.
pub fn oracle_reconstruction() -> Check {
    let start = Instant::now();
    let sched = NoiseSchedule::linear(50, 1e-4, 0.02).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0x0A);
    let mut worst: f64 = 0.0;
    for _ in 0..3 {
        let x0 = uniform_slice(&mut rng, 64, 64, -1.0, 1.0);
        let y = uniform_slice(&mut rng, 64, 64, -1.0, 1.0);
        let xt = gaussian_slice(&mut rng, 64, 64);
        let oracle = AnalyticOracle::new(x0.clone(), sched.clone());
        let out = reverse_process(&oracle, &y, &sched, xt, None).unwrap();
        let err = out.data().iter().zip(x0.data()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        worst = worst.max(err);
    }
    let secs = start.elapsed().as_secs_f64();
    Check::new(worst <= 1e-6 && secs < 10.0, format!("max abs err {worst:.2e}, {secs:.2}s"))
}

/// Desk denoiser gradients against central differences on 64 sampled
/// parameters, relative error below 1e-3.
pub fn desk_gradcheck() -> Check {
    let start = Instant::now();
    let sched = NoiseSchedule::linear(500, 1e-4, 0.02).unwrap();
    let mut model = DeskDenoiser::new(DeskConfig::default(), 11).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0x6C);
    let probe = GradProbe {
        x0: uniform_slice(&mut rng, 32, 32, -1.0, 1.0),
        y: uniform_slice(&mut rng, 32, 32, -1.0, 1.0),
        t: 137,
        eps: gaussian_slice(&mut rng, 32, 32),
    };
    let cfg = GradcheckConfig {
        samples: 64,
        step: 1e-5,
        seed: 3,
    };
    let r = finite_difference_gradcheck(&mut model, &probe, &sched, &cfg).unwrap();
    let secs = start.elapsed().as_secs_f64();
    Check::new(
        r.checked >= 32 && r.max_relative_error < 1e-3 && secs < 60.0,
        format!("{} params, max rel err {:.2e}, {secs:.2}s", r.checked, r.max_relative_error),
    )
}

/// The default desk-scale experiment: loss ratio below 0.5 and mean
/// held-out SSIM at least 0.60.
pub fn end_to_end() -> Check {
    let start = Instant::now();
    match run_experiment(&ExperimentConfig::default(), Exec::default()) {
        Ok(out) => {
            let (first, last) = (out.first_epoch_loss(), out.last_epoch_loss());
            let ratio = last / first;
            let ssim = out.mean_ssim();
            let secs = start.elapsed().as_secs_f64();
            Check::new(
                ratio < 0.5 && ssim >= 0.60,
                format!(
                    "{} steps, epoch loss {first:.4} -> {last:.4} (ratio {ratio:.3}), held-out SSIM {:?} mean {ssim:.3}, {secs:.0}s",
                    out.steps,
                    out.held_out_ssim.iter().map(|v| (v * 1000.0).round() / 1000.0).collect::<Vec<_>>()
                ),
            )
        }
        Err(e) => Check::new(false, format!("run failed: {e}")),
    }
}

/// SSIM, MAE, PSNR, HistCC and Dice against brute-force references on
/// 8 x 8 to 32 x 32 fixtures (1e-9); exact Mann-Whitney p against full
/// enumeration; Fréchet distance against the 2-D closed form (1e-8) and the
/// 1-D Gaussian limit within statistical tolerance.
pub fn metrics_oracles() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x3E);
    let mut worst: f64 = 0.0;
    let sizes = [(8, 8), (8, 13), (16, 16), (20, 11), (32, 32), (32, 24), (12, 32)];
    for &(w, h) in &sizes {
        for _ in 0..3 {
            let a = uniform_slice(&mut rng, w, h, 0.0, 255.0);
            let noise = uniform_slice(&mut rng, w, h, -40.0, 40.0);
            let b = a.zip_map(&noise, |x, n| (x + n).clamp(0.0, 255.0)).unwrap();
            let (da, db) = (a.data(), b.data());
            worst = worst.max((ssim(&a, &b, 255.0).unwrap() - brute::ssim(da, db, w, h, 255.0)).abs());
            worst = worst.max((mae(&a, &b).unwrap() - brute::mae(da, db)).abs());
            worst = worst.max((psnr(&a, &b, 255.0).unwrap() - brute::psnr(da, db, 255.0)).abs());
            worst = worst.max((hist_cc(&a, &b, 16, (0.0, 255.0)).unwrap() - brute::hist_cc(da, db, 16, 0.0, 255.0)).abs());
            let ma: Vec<bool> = da.iter().map(|v| *v > 128.0).collect();
            let mb: Vec<bool> = db.iter().map(|v| *v > 128.0).collect();
            worst = worst.max((dice(&ma, &mb).unwrap() - brute::dice(&ma, &mb)).abs());
            let la: Vec<u16> = da.iter().map(|v| (*v / 64.0) as u16).collect();
            let lb: Vec<u16> = db.iter().map(|v| (*v / 64.0) as u16).collect();
            for (c, d) in dice_per_class(&la, &lb, &[1, 2, 3]).unwrap() {
                let (xa, xb): (Vec<bool>, Vec<bool>) = la.iter().zip(&lb).map(|(p, q)| (*p == c, *q == c)).unzip();
                worst = worst.max((d - brute::dice(&xa, &xb)).abs());
            }
        }
    }

    let mut mw_worst: f64 = 0.0;
    let mut mw_cases = 0;
    for case in 0..40 {
        let na = rng.random_range(1..=8usize);
        let nb = rng.random_range(1..=8usize);
        // every other case draws from a small set to force ties
        let draw = |rng: &mut ChaCha8Rng| {
            if case % 2 == 0 {
                rng.random_range(0.0..1.0)
            } else {
                rng.random_range(0..4) as f64
            }
        };
        let a: Vec<f64> = (0..na).map(|_| draw(&mut rng)).collect();
        let b: Vec<f64> = (0..nb).map(|_| draw(&mut rng)).collect();
        let r = mann_whitney_u(&a, &b).unwrap();
        let (u, p) = brute::mann_whitney_p(&a, &b);
        mw_worst = mw_worst.max((r.u - u).abs()).max((r.p_two_sided - p).abs());
        if !r.exact {
            mw_worst = f64::INFINITY;
        }
        mw_cases += 1;
    }

    let mut fr_worst: f64 = 0.0;
    for _ in 0..10 {
        let n = rng.random_range(20..80usize);
        let mut cloud = |mx: f64, rot: f64, sx: f64, sy: f64| -> Vec<[f64; 2]> {
            (0..n)
                .map(|_| {
                    let (u, v): (f64, f64) = (StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng));
                    let (u, v) = (u * sx, v * sy);
                    [mx + u * rot.cos() - v * rot.sin(), u * rot.sin() + v * rot.cos()]
                })
                .collect()
        };
        let a = cloud(0.0, 0.3, 2.0, 0.5);
        let b = cloud(1.5, -0.7, 1.0, 1.2);
        let fa: Vec<Vec<f64>> = a.iter().map(|v| v.to_vec()).collect();
        let fb: Vec<Vec<f64>> = b.iter().map(|v| v.to_vec()).collect();
        let lib = frechet_gaussian(&fa, &fb).unwrap();
        let oracle = brute::frechet_2d(&a, &b);
        fr_worst = fr_worst.max((lib.distance - oracle).abs() / oracle.abs().max(1.0));
        if lib.regularized {
            fr_worst = f64::INFINITY;
        }
    }

    let n = 10_000;
    let (ma, sa, mb, sb) = (1.0, 2.0, -0.5, 1.5);
    let mut draw = |m: f64, s: f64| -> Vec<Vec<f64>> {
        (0..n).map(|_| { let e: f64 = StandardNormal.sample(&mut rng); vec![m + s * e] }).collect()
    };
    let (a1, b1) = (draw(ma, sa), draw(mb, sb));
    let d1 = frechet_gaussian(&a1, &b1).unwrap().distance;
    let expected = (ma - mb).powi(2) + (sa - sb).powi(2);
    let pooled = sa * sa + sb * sb;
    let sd = ((2.0 * (ma - mb)).powi(2) * pooled / n as f64 + (2.0 * (sa - sb)).powi(2) * pooled / (2.0 * n as f64)).sqrt();
    let z1 = (d1 - expected).abs() / sd;

    let secs = start.elapsed().as_secs_f64();
    Check::new(
        worst <= 1e-9 && mw_worst <= 1e-12 && fr_worst <= 1e-8 && z1 <= 4.0,
        format!(
            "pixel metrics max err {worst:.2e}; Mann-Whitney {mw_cases} cases max err {mw_worst:.2e}; \
             Fréchet 2-D max rel err {fr_worst:.2e}; 1-D d2 {d1:.4} vs {expected:.4} (|z| {z1:.2}); {secs:.2}s"
        ),
    )
}

/// 100 random three-subject recipes on 32 x 32 phantoms: every
/// non-background voxel carries exactly one source whose subject holds that
/// label there, voxel counts add up, and labels stay inside the contour.
pub fn composition_conservation() -> Check {
    let start = Instant::now();
    let spec = PhantomSpec::default().with_dims(32, 32, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(0xC0);
    let mut violations = 0usize;
    let mut voxels = 0usize;
    for r in 0..100u64 {
        let mut subjects = BTreeMap::new();
        let mut ids = Vec::new();
        for k in 0..3u64 {
            let (mut labels, _) = match generate_phantom(1000 + 3 * r + k, &spec) {
                Ok(v) => v,
                Err(e) => return Check::new(false, format!("phantom generation failed: {e}")),
            };
            let id = format!("s{r}-{k}");
            labels.set_subject_id(id.as_str());
            ids.push(id.clone());
            subjects.insert(id, labels);
        }
        let mut classes: Vec<u16> = subjects.values().flat_map(|v| v.classes()).filter(|&c| c > 1).collect();
        classes.sort_unstable();
        classes.dedup();
        let entries = classes
            .iter()
            .map(|&c| RecipeEntry {
                organ_class_id: c,
                source_subject_id: ids[rng.random_range(0..3)].clone(),
                priority: rng.random_bool(0.5).then(|| rng.random_range(0..5)),
            })
            .collect();
        let recipe = CompositionRecipe {
            entries,
            contour_source: ids[rng.random_range(0..3)].clone(),
            conflict_policy: if rng.random_bool(0.5) { ConflictPolicy::PriorityOrder } else { ConflictPolicy::FirstWins },
            output_subject_id: Some(format!("c{r}")),
        };
        let comp = match compose_anatomy(&subjects, &recipe) {
            Ok(c) => c,
            Err(e) => return Check::new(false, format!("recipe {r}: {e}")),
        };
        let body = subjects[&recipe.contour_source].data();
        let labels = comp.labels.data();
        let mut counted = 0usize;
        for v in 0..labels.len() {
            let (l, p) = (labels[v], comp.provenance[v]);
            if (l != 0) != (p != 0) || (l != 0 && body[v] == 0) {
                violations += 1;
                continue;
            }
            if l == 0 {
                continue;
            }
            counted += 1;
            let src = &comp.sources[p as usize - 1];
            let from_organ = subjects[src].data()[v] == l;
            let is_fill = src == &recipe.contour_source && l == priorsynth::physiosynth::classes::SOFT_TISSUE;
            if !(from_organ || is_fill) {
                violations += 1;
            }
        }
        if comp.counts_by_source().values().sum::<usize>() != counted {
            violations += 1;
        }
        voxels += counted;
    }
    let secs = start.elapsed().as_secs_f64();
    Check::new(
        violations == 0 && secs < 30.0,
        format!("100 recipes, {voxels} labelled voxels, {violations} violations, {secs:.2}s"),
    )
}
