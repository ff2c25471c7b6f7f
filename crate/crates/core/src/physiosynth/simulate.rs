use crate::error::{Error, Result};
use crate::par::Exec;
use crate::volumes::{LabelVolume, Modality, ScalarVolume};

use super::signal::{gre_signal, opposed_phase_factor, space_signal};
use super::{SequenceKind, SequenceParams, TissueParameterTable, TissueRow};

/// Declared range of CT priors; matches the table's HU bounds.
pub const CT_RANGE: (f32, f32) = (-1024.0, 3000.0);
pub const MR_DISPLAY_MAX: f64 = 255.0;

/// Raw (unscaled) MR signal of one tissue row, in `[0, rho]`.
pub fn row_signal(row: &TissueRow, table: &TissueParameterTable, params: &SequenceParams) -> f64 {
    match params.kind {
        SequenceKind::Ct => row.hu,
        SequenceKind::GreT1 => gre_signal(row.t1_ms, row.rho, params.tr_ms, params.flip_deg),
        SequenceKind::SpaceT2 => space_signal(row.t2_ms, row.rho, params.te_ms),
        kind => {
            let base = gre_signal(row.t1_ms, row.rho, params.tr_ms, params.flip_deg);
            if kind.is_opposed_phase() {
                let f = table
                    .opposed_phase_override(row.class_id)
                    .unwrap_or_else(|| opposed_phase_factor(row.fat_fraction));
                base * f
            } else {
                base
            }
        }
    }
}

/// Dense per-class value table; errors on the smallest class id missing from
/// `table`.
fn value_lut(labels: &LabelVolume, f: impl Fn(&TissueRow) -> f32, table: &TissueParameterTable) -> Result<Vec<f32>> {
    let present = labels.classes();
    let max = *present.last().unwrap_or(&0) as usize;
    let mut lut = vec![0f32; max + 1];
    for c in present {
        lut[c as usize] = f(table.lookup(c)?);
    }
    Ok(lut)
}

fn apply_lut(labels: &LabelVolume, lut: &[f32], exec: Exec) -> Vec<f32> {
    let mut out = vec![0f32; labels.data().len()];
    let n = labels.dims().slice_len();
    exec.for_each_chunk_mut(&mut out, n, |z, chunk| {
        for (o, &c) in chunk.iter_mut().zip(labels.slice_labels(z)) {
            *o = lut[c as usize];
        }
    });
    out
}

/// Voxelwise Hounsfield lookup; background is -1000 via the air row.
pub fn simulate_ct(labels: &LabelVolume, table: &TissueParameterTable) -> Result<ScalarVolume> {
    simulate_prior_with(labels, table, &SequenceParams::ct(), Exec::default())
}

pub fn simulate_prior(labels: &LabelVolume, table: &TissueParameterTable, params: &SequenceParams) -> Result<ScalarVolume> {
    simulate_prior_with(labels, table, params, Exec::default())
}

/// CT priors stay in HU. MR priors are divided by the largest signal any
/// table row reaches under `params` and scaled to `[0, 255]`.
pub fn simulate_prior_with(
    labels: &LabelVolume,
    table: &TissueParameterTable,
    params: &SequenceParams,
    exec: Exec,
) -> Result<ScalarVolume> {
    params.validate()?;
    if params.kind == SequenceKind::Ct {
        let lut = value_lut(labels, |r| r.hu as f32, table)?;
        let data = apply_lut(labels, &lut, exec);
        return ScalarVolume::new(labels.dims(), labels.spacing(), data, Modality::CtHu, CT_RANGE);
    }
    let max_signal = table.rows().map(|r| row_signal(r, table, params)).fold(0.0, f64::max);
    if !max_signal.is_finite() {
        return Err(Error::Validation("non-finite MR signal in table".into()));
    }
    let scale = if max_signal > 0.0 { MR_DISPLAY_MAX / max_signal } else { 0.0 };
    let lut = value_lut(
        labels,
        |r| ((row_signal(r, table, params) * scale) as f32).clamp(0.0, MR_DISPLAY_MAX as f32),
        table,
    )?;
    let data = apply_lut(labels, &lut, exec);
    ScalarVolume::new(labels.dims(), labels.spacing(), data, Modality::MrSignal, (0.0, MR_DISPLAY_MAX as f32))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physiosynth::classes;
    use crate::volumes::{Dims, Spacing};

    fn two_class() -> LabelVolume {
        let data = vec![0, 0, classes::LIVER, classes::LIVER, classes::SPLEEN, classes::SPLEEN, 0, classes::LIVER];
        LabelVolume::new(Dims::new(4, 2, 1), Spacing::isotropic(1.0), data, "fx").unwrap()
    }

    #[test]
    fn ct_lookup() {
        let t = TissueParameterTable::default();
        let air = LabelVolume::filled(Dims::new(3, 3, 2), Spacing::isotropic(1.0), 0, "a").unwrap();
        assert!(simulate_ct(&air, &t).unwrap().data().iter().all(|&v| v == -1000.0));
        let liver = LabelVolume::filled(Dims::new(3, 3, 1), Spacing::isotropic(1.0), classes::LIVER, "l").unwrap();
        assert!(simulate_ct(&liver, &t).unwrap().data().iter().all(|&v| v == 60.0));
        let v = simulate_ct(&two_class(), &t).unwrap();
        assert_eq!(v.data(), &[-1000.0, -1000.0, 60.0, 60.0, 45.0, 45.0, -1000.0, 60.0]);
    }

    #[test]
    fn unknown_class_names_id() {
        let t = TissueParameterTable::default();
        let v = LabelVolume::new(Dims::new(3, 1, 1), Spacing::isotropic(1.0), vec![1, 77, 99], "u").unwrap();
        match simulate_ct(&v, &t) {
            Err(Error::Lookup(m)) => assert!(m.contains("77")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn space_ratio_between_regions() {
        let rows = vec![
            TissueRow { class_id: 0, name: "air".into(), hu: -1000.0, t1_ms: 1000.0, t2_ms: 1.0, rho: 0.0, fat_fraction: 0.0 },
            TissueRow { class_id: 1, name: "a".into(), hu: 0.0, t1_ms: 1000.0, t2_ms: 100.0, rho: 1.0, fat_fraction: 0.0 },
            TissueRow { class_id: 2, name: "b".into(), hu: 0.0, t1_ms: 1000.0, t2_ms: 50.0, rho: 1.0, fat_fraction: 0.0 },
        ];
        let t = TissueParameterTable::from_rows("fx", rows).unwrap();
        let labels = LabelVolume::new(Dims::new(3, 1, 1), Spacing::isotropic(1.0), vec![1, 2, 0], "fx").unwrap();
        let p = SequenceParams::new(SequenceKind::SpaceT2, 1000.0, 80.0, 90.0).unwrap();
        let v = simulate_prior(&labels, &t, &p).unwrap();
        let ratio = v.data()[0] as f64 / v.data()[1] as f64;
        assert!((ratio - 0.8f64.exp()).abs() < 1e-6);
        assert_eq!(v.data()[0], 255.0);
        assert_eq!(v.data()[2], 0.0);
    }

    #[test]
    fn dispatch_and_background() {
        let t = TissueParameterTable::default();
        let l = two_class();
        assert_eq!(simulate_prior(&l, &t, &SequenceParams::ct()).unwrap(), simulate_ct(&l, &t).unwrap());
        for p in crate::physiosynth::SequencePresets::default().presets.values() {
            let v = simulate_prior(&l, &t, p).unwrap();
            let bg = if p.kind.is_mr() { 0.0 } else { -1000.0 };
            assert_eq!(v.data()[0], bg);
            assert!(v.data().iter().all(|&x| x >= bg));
        }
    }

    #[test]
    fn override_replaces_cancellation() {
        let t = TissueParameterTable::default().with_opposed_phase_override(classes::LIVER, 0.25).unwrap();
        let p = SequenceParams::new(SequenceKind::VibeOpp, 4.5, 1.15, 10.0).unwrap();
        let liver = t.lookup(classes::LIVER).unwrap();
        let expect = 0.25 * gre_signal(liver.t1_ms, liver.rho, 4.5, 10.0);
        assert_eq!(row_signal(liver, &t, &p), expect);
    }

    #[test]
    fn exec_policies_agree() {
        let t = TissueParameterTable::default();
        let l = two_class();
        let p = SequencePresets::default().get("gre").unwrap();
        let a = simulate_prior_with(&l, &t, &p, Exec::Sequential).unwrap();
        let b = simulate_prior_with(&l, &t, &p, Exec::Parallel).unwrap();
        assert_eq!(a, b);
    }

    use crate::physiosynth::SequencePresets;
}
