//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit status
//! when any criterion fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use common::criteria::{self, Check};
use priorsynth_cli::manifest::Manifest;

const CRITERIA: &[(&str, fn() -> Check)] = &[
    ("signal-equation oracle", criteria::signal_oracle),
    ("forward-process statistics", criteria::forward_statistics),
    ("oracle-denoiser reconstruction", criteria::oracle_reconstruction),
    ("desk denoiser gradient check", criteria::desk_gradcheck),
    ("desk-scale end-to-end", criteria::end_to_end),
    ("metrics oracle equivalence", criteria::metrics_oracles),
    ("composition conservation", criteria::composition_conservation),
    ("bit-exact manifest replay", manifest_replay),
];

fn main() -> ExitCode {
    let mut failed = 0;
    for (name, check) in CRITERIA {
        let c = check();
        println!("{} {name}: {}", if c.pass { "PASS" } else { "FAIL" }, c.detail);
        if !c.pass {
            failed += 1;
        }
    }
    println!("{} of {} criteria passed", CRITERIA.len() - failed, CRITERIA.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

const TRAIN_CONFIG: &str = r#"{
  "model": {"base_channels": 4, "levels": 2, "time_dim": 8},
  "init_seed": 3,
  "schedule": {"timesteps": 20, "beta_start": 0.0001, "beta_end": 0.02},
  "train": {"max_steps": 6, "batch_size": 2}
}
"#;

const RECIPE: &str = r#"{
  "entries": [
    {"organ_class_id": 6, "source_subject_id": "a"},
    {"organ_class_id": 7, "source_subject_id": "b", "priority": 1},
    {"organ_class_id": 8, "source_subject_id": "c", "priority": 0}
  ],
  "contour_source": "b",
  "output_subject_id": "abc"
}
"#;

/// Every pipeline stage run through the binary, then each run's outputs
/// deleted and regenerated from its manifest alone.
fn manifest_replay() -> Check {
    let start = Instant::now();
    match replay_all() {
        Ok((runs, files)) => Check {
            pass: true,
            detail: format!(
                "{runs} runs replayed, {files} output files byte-identical, {:.1}s",
                start.elapsed().as_secs_f64()
            ),
        },
        Err(detail) => Check { pass: false, detail },
    }
}

fn cli(dir: &Path, args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_priorsynth"))
        .current_dir(dir)
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr).trim()))
    }
}

fn replay_all() -> Result<(usize, usize), String> {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let d = tmp.path();
    std::fs::write(d.join("train.json"), TRAIN_CONFIG).map_err(|e| e.to_string())?;
    std::fs::write(d.join("recipe.json"), RECIPE).map_err(|e| e.to_string())?;
    let runs: &[&[&str]] = &[
        &["phantom", "--seed", "1", "--dims", "32x32x1", "--out", "a.svol", "--scan-out", "a_scan.svol"],
        &["phantom", "--seed", "2", "--dims", "32x32x1", "--out", "b.svol", "--scan-out", "b_scan.svol"],
        &["phantom", "--seed", "3", "--dims", "32x32x1", "--out", "c.svol"],
        &["contour", "--input", "a_scan.svol", "--out", "a_body.svol"],
        &["fuse", "--organs", "a.svol", "--contour", "a_body.svol", "--out", "a_fused.svol"],
        &["compose", "--config", "recipe.json", "--subject", "a=a.svol", "--subject", "b=b.svol", "--subject", "c=c.svol", "--out", "abc.svol", "--provenance-out", "abc_prov.svol"],
        &["simulate", "--labels", "a.svol", "--preset", "ct", "--out", "a_ct.svol"],
        &["simulate", "--labels", "b.svol", "--preset", "ct", "--out", "b_ct.svol"],
        &["simulate", "--labels", "abc.svol", "--kind", "space", "--te", "90", "--out", "abc_t2.svol"],
        &["train", "--config", "train.json", "--seed", "4", "--pair", "a_scan.svol:a_ct.svol", "--pair", "b_scan.svol:b_ct.svol", "--out", "desk.sgmc", "--loss-out", "loss.csv"],
        &["sample", "--checkpoint", "desk.sgmc", "--prior", "b_ct.svol", "--seed", "11", "--out", "b_sample.svol"],
        &["eval", "--pred", "b_sample.svol", "--ref", "b_ct.svol", "--out", "metrics.csv", "--summary", "metrics.json"],
        &["eval", "--pred", "a_fused.svol", "--ref", "a.svol", "--pred", "abc.svol", "--ref", "b.svol", "--out", "dice.csv", "--heatmap-png", "dice.png"],
    ];
    for args in runs {
        cli(d, args)?;
    }
    let mut files = 0;
    for args in runs {
        let out = args[args.iter().position(|a| *a == "--out").unwrap() + 1];
        let manifest_path = d.join(format!("{out}.manifest.json"));
        let m = Manifest::read(&manifest_path).map_err(|e| format!("{e:#}"))?;
        let mut original = BTreeMap::new();
        for o in &m.outputs {
            let p = d.join(&o.path);
            original.insert(o.path.clone(), std::fs::read(&p).map_err(|e| e.to_string())?);
            std::fs::remove_file(&p).map_err(|e| e.to_string())?;
        }
        let manifest_arg = manifest_path.to_string_lossy().into_owned();
        cli(Path::new("/"), &["replay", &manifest_arg])?;
        for (path, bytes) in original {
            if std::fs::read(d.join(&path)).map_err(|e| e.to_string())? != bytes {
                return Err(format!("{path} differs after replaying {}", m.command));
            }
            files += 1;
        }
    }
    Ok((runs.len(), files))
}
