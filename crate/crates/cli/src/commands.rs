use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use priorsynth::anatomy::{
    compose_anatomy, extract_body_contour, fuse_masks, generate_phantom, reference_scan, BodyContourMask,
    CompositionRecipe, PhantomSpec,
};
use priorsynth::diffusion::{
    sample_volume, train, volume_pairs, Checkpoint, DeskConfig, DeskDenoiser, Lineage, ScheduleSpec, TrainConfig,
};
use priorsynth::metrics::{dice_per_class, evaluate_pairs, DiceHeatmap, EvalConfig, MetricKind};
use priorsynth::physiosynth::{simulate_prior, SequenceKind, SequenceParams, SequencePresets, TissueParameterTable};
use priorsynth::volumes::{read_volume, write_label_volume, write_scalar_volume, Volume, Window};
use priorsynth::{Exec, LabelVolume, Slice};

use crate::args::*;
use crate::manifest::{manifest_path, Manifest, RunRecord};
use crate::render::parse_window;

/// Invalid flag combination or value; exits with status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Runs `cli`; `argv` (without the program name) goes into the manifest.
pub fn execute(cli: Cli, argv: &[String]) -> anyhow::Result<()> {
    let (name, out, record) = match cli.command {
        Command::Phantom(a) => ("phantom", a.common.out.clone(), phantom(&a)?),
        Command::Contour(a) => ("contour", a.common.out.clone(), contour(&a)?),
        Command::Fuse(a) => ("fuse", a.common.out.clone(), fuse(&a)?),
        Command::Compose(a) => ("compose", a.common.out.clone(), compose(&a)?),
        Command::Simulate(a) => ("simulate", a.common.out.clone(), simulate(&a)?),
        Command::Train(a) => ("train", a.common.out.clone(), train_cmd(&a)?),
        Command::Sample(a) => ("sample", a.common.out.clone(), sample_cmd(&a)?),
        Command::Eval(a) => ("eval", a.common.out.clone(), eval(&a)?),
        Command::Serve(a) => return serve(&a),
        Command::Replay(a) => return replay(&a.manifest),
    };
    Manifest::build(name, argv, &record)?.write(&manifest_path(&out))
}

/// Reads a JSON config, reporting the field path of schema violations.
pub fn load_json<T: DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de)
        .map_err(|e| anyhow::anyhow!("{}: invalid config at `{}`: {}", path.display(), e.path(), e.inner()))
}

fn load_or_default<T: DeserializeOwned + Default>(path: Option<&Path>) -> anyhow::Result<T> {
    path.map(load_json).transpose().map(Option::unwrap_or_default)
}

fn read_labels(path: &Path) -> anyhow::Result<LabelVolume> {
    read_volume(path)?.into_label().with_context(|| format!("{}", path.display()))
}

fn read_scalar(path: &Path) -> anyhow::Result<priorsynth::ScalarVolume> {
    read_volume(path)?.into_scalar().with_context(|| format!("{}", path.display()))
}

fn tissue_table(path: Option<&Path>) -> anyhow::Result<TissueParameterTable> {
    Ok(match path {
        Some(p) => TissueParameterTable::from_csv_path(p)?,
        None => TissueParameterTable::default(),
    })
}

fn base_record(c: &Common) -> RunRecord {
    RunRecord {
        config: c.config.clone(),
        ..RunRecord::default()
    }
    .output(&c.out)
}

fn with_optional_input(r: RunRecord, p: Option<&PathBuf>) -> RunRecord {
    match p {
        Some(p) => r.input(p),
        None => r,
    }
}

fn parse_dims(s: &str) -> anyhow::Result<[usize; 3]> {
    let parts: Vec<&str> = s.split(['x', 'X']).collect();
    if parts.len() != 3 {
        return Err(usage(format!("--dims must look like 64x64x1, got {s:?}")));
    }
    let mut d = [0usize; 3];
    for (slot, p) in d.iter_mut().zip(&parts) {
        *slot = p.trim().parse().map_err(|_| usage(format!("--dims component {p:?} is not an integer")))?;
    }
    Ok(d)
}

fn phantom(a: &PhantomArgs) -> anyhow::Result<RunRecord> {
    let c = &a.common;
    let mut spec: PhantomSpec = load_or_default(c.config.as_deref())?;
    if let Some(d) = &a.dims {
        let [nx, ny, nz] = parse_dims(d)?;
        spec = spec.with_dims(nx, ny, nz);
    }
    let seed = c.seed.unwrap_or(1);
    let (labels, _) = generate_phantom(seed, &spec)?;
    write_label_volume(&c.out, &labels)?;
    let mut rec = with_optional_input(base_record(c).seed("phantom", seed), a.tissues.as_ref());
    if let Some(scan_out) = &a.scan_out {
        let table = tissue_table(a.tissues.as_deref())?;
        write_scalar_volume(scan_out, &reference_scan(&labels, &table, a.noise_hu, seed)?)?;
        rec = rec.seed("scan_noise", seed).output(scan_out);
    }
    Ok(rec)
}

fn contour(a: &ContourArgs) -> anyhow::Result<RunRecord> {
    let img = read_scalar(&a.input)?;
    let mask = extract_body_contour(&img, a.threshold)?;
    write_label_volume(&a.common.out, &mask.to_label_volume(&a.subject_id)?)?;
    Ok(base_record(&a.common).input(&a.input))
}

fn fuse(a: &FuseArgs) -> anyhow::Result<RunRecord> {
    let organs = read_labels(&a.organs)?;
    let contour = BodyContourMask::from_labels(&read_labels(&a.contour)?);
    write_label_volume(&a.common.out, &fuse_masks(&organs, &contour)?)?;
    Ok(base_record(&a.common).input(&a.organs).input(&a.contour))
}

fn compose(a: &ComposeArgs) -> anyhow::Result<RunRecord> {
    let c = &a.common;
    let recipe_path = c.config.as_deref().ok_or_else(|| usage("compose needs the recipe as --config"))?;
    let recipe: CompositionRecipe = load_json(recipe_path)?;
    let mut subjects = BTreeMap::new();
    let mut rec = base_record(c);
    for s in &a.subjects {
        let (id, path) = s
            .split_once('=')
            .ok_or_else(|| usage(format!("--subject expects ID=PATH, got {s:?}")))?;
        subjects.insert(id.to_string(), read_labels(Path::new(path))?);
        rec = rec.input(path);
    }
    let comp = compose_anatomy(&subjects, &recipe)?;
    write_label_volume(&c.out, &comp.labels)?;
    if let Some(p) = &a.provenance_out {
        write_label_volume(p, &comp.provenance_volume()?)?;
        rec = rec.output(p);
    }
    Ok(rec)
}

/// Resolves the sequence from `--config`, `--preset` or `--kind`, then
/// applies the `--tr`/`--te`/`--flip` overrides.
pub fn resolve_sequence(
    config: Option<&Path>,
    preset: Option<&str>,
    kind: Option<&str>,
    overrides: (Option<f64>, Option<f64>, Option<f64>),
    presets: &SequencePresets,
) -> anyhow::Result<SequenceParams> {
    let mut p = match (config, preset, kind) {
        (Some(path), None, None) => load_json::<SequenceParams>(path)?,
        (None, Some(name), None) => presets.get(name)?,
        (None, None, Some(k)) => {
            let kind = SequenceKind::parse(k).ok_or_else(|| usage(format!("unknown sequence kind {k:?}")))?;
            presets
                .presets
                .values()
                .find(|p| p.kind == kind)
                .copied()
                .unwrap_or(SequenceParams {
                    kind,
                    tr_ms: 0.0,
                    te_ms: 0.0,
                    flip_deg: 0.0,
                })
        }
        (None, None, None) => return Err(usage("simulate needs one of --config, --preset or --kind")),
        _ => return Err(usage("--config, --preset and --kind are mutually exclusive")),
    };
    let (tr, te, flip) = overrides;
    p.tr_ms = tr.unwrap_or(p.tr_ms);
    p.te_ms = te.unwrap_or(p.te_ms);
    p.flip_deg = flip.unwrap_or(p.flip_deg);
    p.validate()?;
    Ok(p)
}

fn simulate(a: &SimulateArgs) -> anyhow::Result<RunRecord> {
    let presets = match &a.presets {
        Some(p) => SequencePresets::from_path(p)?,
        None => SequencePresets::default(),
    };
    let params = resolve_sequence(
        a.common.config.as_deref(),
        a.preset.as_deref(),
        a.kind.as_deref(),
        (a.tr, a.te, a.flip),
        &presets,
    )?;
    let table = tissue_table(a.tissues.as_deref())?;
    let labels = read_labels(&a.labels)?;
    write_scalar_volume(&a.common.out, &simulate_prior(&labels, &table, &params)?)?;
    let rec = base_record(&a.common).input(&a.labels);
    let rec = with_optional_input(rec, a.tissues.as_ref());
    Ok(with_optional_input(rec, a.presets.as_ref()))
}

/// Configuration of `train`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainRunConfig {
    pub model: DeskConfig,
    pub init_seed: u64,
    pub schedule: ScheduleSpec,
    pub train: TrainConfig,
}

impl Default for TrainRunConfig {
    fn default() -> Self {
        TrainRunConfig {
            model: DeskConfig::default(),
            init_seed: 7,
            schedule: ScheduleSpec::default(),
            train: TrainConfig::default(),
        }
    }
}

fn train_cmd(a: &TrainArgs) -> anyhow::Result<RunRecord> {
    let c = &a.common;
    let mut cfg: TrainRunConfig = load_or_default(c.config.as_deref())?;
    if let Some(s) = c.seed {
        cfg.train.seed = s;
    }
    if let Some(n) = a.steps {
        cfg.train.max_steps = Some(n);
    }
    let mut rec = base_record(c);
    let mut pairs: Vec<(Slice, Slice)> = Vec::new();
    for p in &a.pairs {
        let (img, prior) = p
            .split_once(':')
            .ok_or_else(|| usage(format!("--pair expects IMAGE:PRIOR, got {p:?}")))?;
        pairs.extend(volume_pairs(&read_scalar(Path::new(img))?, &read_scalar(Path::new(prior))?)?);
        rec = rec.input(img).input(prior);
    }
    let sched = cfg.schedule.build()?;
    let mut model = DeskDenoiser::new(cfg.model, cfg.init_seed)?;
    let outcome = train(&mut model, &pairs, &cfg.train, &sched, Exec::default())?;
    let ckpt = Checkpoint::from_model(
        &model,
        cfg.schedule,
        Lineage {
            init_seed: cfg.init_seed,
            train_seed: cfg.train.seed,
            steps: outcome.steps,
        },
    );
    ckpt.write(&c.out)?;
    if let Some(p) = &a.loss_out {
        std::fs::write(p, outcome.curve.to_csv()).with_context(|| format!("writing {}", p.display()))?;
        rec = rec.output(p);
    }
    Ok(rec.seed("init", cfg.init_seed).seed("train", cfg.train.seed))
}

fn sample_cmd(a: &SampleArgs) -> anyhow::Result<RunRecord> {
    let c = &a.common;
    let seed = c.seed.unwrap_or(0);
    let ckpt = Checkpoint::read(&a.checkpoint)?;
    let model = ckpt.model()?;
    let sched = ckpt.header.schedule.build()?;
    let prior = read_scalar(&a.prior)?;
    write_scalar_volume(&c.out, &sample_volume(&model, &prior, &sched, seed, Exec::default())?)?;
    Ok(base_record(c).input(&a.checkpoint).input(&a.prior).seed("sample", seed))
}

fn eval(a: &EvalArgs) -> anyhow::Result<RunRecord> {
    let c = &a.common;
    if a.preds.len() != a.refs.len() {
        return Err(usage(format!("{} --pred but {} --ref", a.preds.len(), a.refs.len())));
    }
    let mut rec = base_record(c);
    let mut preds = Vec::new();
    let mut refs = Vec::new();
    for (p, r) in a.preds.iter().zip(&a.refs) {
        preds.push(read_volume(p).with_context(|| format!("{}", p.display()))?);
        refs.push(read_volume(r).with_context(|| format!("{}", r.display()))?);
        rec = rec.input(p).input(r);
    }
    if refs.iter().all(|v| matches!(v, Volume::Label(_))) {
        eval_dice(a, &preds, &refs, rec)
    } else {
        eval_scalar(a, &preds, &refs, rec)
    }
}

fn eval_scalar(a: &EvalArgs, preds: &[Volume], refs: &[Volume], mut rec: RunRecord) -> anyhow::Result<RunRecord> {
    let c = &a.common;
    let mut cfg: EvalConfig = load_or_default(c.config.as_deref())?;
    let first = match &refs[0] {
        Volume::Scalar(s) => s,
        Volume::Label(_) => bail!("cannot mix label and scalar references"),
    };
    if let Some(w) = &a.window {
        let w = parse_window(w).map_err(|e| usage(format!("--window: {e}")))?;
        cfg.window = (w.lo, w.hi);
    } else if c.config.is_none() {
        let w = Window::for_modality(first.modality());
        cfg.window = (w.lo, w.hi);
    }
    if let Some(m) = &a.metrics {
        cfg.metrics = m
            .split(',')
            .map(|s| MetricKind::parse(s.trim()).ok_or_else(|| usage(format!("unknown metric {s:?}"))))
            .collect::<anyhow::Result<_>>()?;
    }
    let mut pairs = Vec::new();
    for (p, r) in preds.iter().zip(refs) {
        let (Volume::Scalar(p), Volume::Scalar(r)) = (p, r) else {
            bail!("scalar evaluation needs scalar predictions and references");
        };
        if p.dims() != r.dims() {
            bail!("prediction dims {:?} differ from reference dims {:?}", p.dims(), r.dims());
        }
        pairs.extend(p.slices().into_iter().zip(r.slices()));
    }
    let dataset = a.refs[0].file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let report = evaluate_pairs(&pairs, &cfg, &dataset, Exec::default())?;
    std::fs::write(&c.out, report.to_csv()).with_context(|| format!("writing {}", c.out.display()))?;
    if let Some(p) = &a.summary {
        std::fs::write(p, report.to_json() + "\n").with_context(|| format!("writing {}", p.display()))?;
        rec = rec.output(p);
    }
    Ok(rec)
}

fn eval_dice(a: &EvalArgs, preds: &[Volume], refs: &[Volume], mut rec: RunRecord) -> anyhow::Result<RunRecord> {
    let table = tissue_table(a.tissues.as_deref())?;
    let mut classes = std::collections::BTreeSet::new();
    let mut labels = Vec::new();
    for (p, r) in preds.iter().zip(refs) {
        let (Volume::Label(p), Volume::Label(r)) = (p, r) else {
            bail!("Dice evaluation needs label predictions and references");
        };
        classes.extend(r.classes().into_iter().filter(|&c| c != 0));
        labels.push((p, r));
    }
    let classes: Vec<u16> = classes.into_iter().collect();
    let mut columns = vec![Vec::new(); classes.len()];
    let mut patients = Vec::new();
    for (i, (p, r)) in labels.iter().enumerate() {
        let d = dice_per_class(p.data(), r.data(), &classes)?;
        for (row, c) in columns.iter_mut().zip(&classes) {
            row.push(d[c]);
        }
        let id = r.subject_id();
        patients.push(if id.is_empty() { format!("p{}", i + 1) } else { id.to_string() });
    }
    let organs = classes
        .iter()
        .map(|&c| table.get(c).map(|r| r.name.clone()).unwrap_or_else(|| format!("class_{c}")))
        .collect();
    let heat = DiceHeatmap::new(organs, patients, columns)?;
    std::fs::write(&a.common.out, heat.to_csv()).with_context(|| format!("writing {}", a.common.out.display()))?;
    if let Some(p) = &a.heatmap_png {
        std::fs::write(p, heat.to_png(a.cell)).with_context(|| format!("writing {}", p.display()))?;
        rec = rec.output(p);
    }
    Ok(with_optional_input(rec, a.tissues.as_ref()))
}

fn serve(a: &ServeArgs) -> anyhow::Result<()> {
    let rt = tokio::runtime::Runtime::new().context("starting the async runtime")?;
    rt.block_on(crate::service::serve(&a.data_dir, a.addr, a.workers))
}

/// Re-runs the command recorded in `path` from its working directory after
/// checking config and input digests, then verifies every output digest.
pub fn replay(path: &Path) -> anyhow::Result<()> {
    let path = std::fs::canonicalize(path).with_context(|| format!("resolving {}", path.display()))?;
    let m = Manifest::read(&path)?;
    std::env::set_current_dir(&m.cwd).with_context(|| format!("entering {}", m.cwd))?;
    for d in m.config.iter().chain(&m.inputs) {
        if !d.verify()? {
            bail!("input {} changed since the recorded run", d.path);
        }
    }
    let mut argv = vec!["priorsynth".to_string()];
    argv.extend(m.argv.iter().cloned());
    let cli = <Cli as clap::Parser>::try_parse_from(&argv).map_err(|e| usage(e.to_string()))?;
    if matches!(cli.command, Command::Serve(_) | Command::Replay(_)) {
        bail!("manifest records a {:?} run, which cannot be replayed", m.command);
    }
    execute(cli, &m.argv)?;
    let mut mismatched = Vec::new();
    for d in &m.outputs {
        let ok = d.verify()?;
        println!("{} {}", if ok { "ok      " } else { "MISMATCH" }, d.path);
        if !ok {
            mismatched.push(d.path.clone());
        }
    }
    if !mismatched.is_empty() {
        bail!("{} output(s) differ from the manifest: {}", mismatched.len(), mismatched.join(", "));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dims_parse() {
        assert_eq!(parse_dims("32x16x2").unwrap(), [32, 16, 2]);
        assert!(parse_dims("32x16").unwrap_err().downcast_ref::<UsageError>().is_some());
    }

    #[test]
    fn sequence_resolution() {
        let presets = SequencePresets::default();
        let p = resolve_sequence(None, None, Some("space"), (None, Some(60.0), None), &presets).unwrap();
        assert_eq!(p.kind, SequenceKind::SpaceT2);
        assert_eq!(p.te_ms, 60.0);
        assert_eq!(p.tr_ms, presets.get("space").unwrap().tr_ms);
        let g = resolve_sequence(None, Some("gre"), None, (None, None, None), &presets).unwrap();
        assert_eq!(g, presets.get("gre").unwrap());
        let e = resolve_sequence(None, None, None, (None, None, None), &presets).unwrap_err();
        assert!(e.downcast_ref::<UsageError>().is_some());
        let e = resolve_sequence(None, None, Some("t3"), (None, None, None), &presets).unwrap_err();
        assert!(e.downcast_ref::<UsageError>().is_some());
        assert!(resolve_sequence(None, None, Some("gre"), (Some(-1.0), None, None), &presets).is_err());
    }

    #[test]
    fn train_config_rejects_unknown_fields_with_path() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, r#"{"train": {"batch_size": 2, "lr": 1}}"#).unwrap();
        let e = load_json::<TrainRunConfig>(&p).unwrap_err().to_string();
        assert!(e.contains("train"), "{e}");
        std::fs::write(&p, r#"{"train": {"batch_size": 2}}"#).unwrap();
        let c: TrainRunConfig = load_json(&p).unwrap();
        assert_eq!(c.train.batch_size, 2);
        assert_eq!(c.init_seed, 7);
    }
}
