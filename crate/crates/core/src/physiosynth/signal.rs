//! Closed-form signal equations, evaluated per tissue row.

use crate::error::{Error, Result};

use super::{SequenceKind, SequenceParams};

/// Spoiled gradient echo steady state:
/// `S = rho * sin(a) * (1 - E1) / (1 - cos(a) * E1)` with `E1 = exp(-TR / T1)`.
pub fn gre_signal(t1_ms: f64, rho: f64, tr_ms: f64, flip_deg: f64) -> f64 {
    let a = flip_deg.to_radians();
    let x = tr_ms / t1_ms;
    // 1 - E1 without cancellation for short TR
    let one_minus_e1 = -(-x).exp_m1();
    let (sin_a, cos_a) = a.sin_cos();
    let half = 0.5 * a;
    // 1 - cos(a) * E1 = 2 sin^2(a/2) + cos(a) * (1 - E1)
    let denom = 2.0 * half.sin() * half.sin() + cos_a * one_minus_e1;
    debug_assert!(denom > 0.0);
    rho * sin_a * one_minus_e1 / denom
}

/// T2 decay at echo time `TE`: `S = rho * exp(-TE / T2)`.
pub fn space_signal(t2_ms: f64, rho: f64, te_ms: f64) -> f64 {
    rho * (-te_ms / t2_ms).exp()
}

/// Two-compartment fat/water cancellation magnitude `|W - F|` with `W + F = 1`.
pub fn opposed_phase_factor(fat_fraction: f64) -> f64 {
    (1.0 - 2.0 * fat_fraction).abs()
}

/// VIBE uses the GRE equation; opposed-phase kinds scale it by the
/// fat/water cancellation factor.
pub fn vibe_signal(t1_ms: f64, rho: f64, fat_fraction: f64, params: &SequenceParams) -> Result<f64> {
    if !params.kind.is_vibe() {
        return Err(Error::domain(format!("{:?} is not a VIBE sequence", params.kind)));
    }
    let base = gre_signal(t1_ms, rho, params.tr_ms, params.flip_deg);
    Ok(match params.kind {
        SequenceKind::VibeOpp | SequenceKind::DixonVibeOpp => base * opposed_phase_factor(fat_fraction),
        _ => base,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vibe(kind: SequenceKind) -> SequenceParams {
        SequenceParams::new(kind, 4.5, 2.3, 10.0).unwrap()
    }

    #[test]
    fn gre_limits() {
        // 90 degrees, TR >> T1 saturates to rho
        assert!((gre_signal(500.0, 0.7, 1e6, 90.0) - 0.7).abs() < 1e-12);
        assert_eq!(gre_signal(800.0, 0.0, 400.0, 30.0), 0.0);
        // at 90 degrees the equation reduces to rho * (1 - E1)
        let s = gre_signal(800.0, 0.9, 400.0, 90.0);
        assert!((s - 0.9 * (1.0 - (-0.5f64).exp())).abs() < 1e-12 * 0.9);
    }

    #[test]
    fn space_limits() {
        assert_eq!(space_signal(50.0, 0.8, 0.0), 0.8);
        assert!((space_signal(70.0, 1.0, 70.0) - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn vibe_phases() {
        let inp = vibe_signal(600.0, 0.8, 0.0, &vibe(SequenceKind::VibeIn)).unwrap();
        let opp = vibe_signal(600.0, 0.8, 0.0, &vibe(SequenceKind::VibeOpp)).unwrap();
        assert_eq!(inp, opp);
        assert_eq!(vibe_signal(600.0, 0.8, 0.5, &vibe(SequenceKind::DixonVibeOpp)).unwrap(), 0.0);
        let base = gre_signal(600.0, 0.8, 4.5, 10.0);
        let opp = vibe_signal(600.0, 0.8, 0.2, &vibe(SequenceKind::VibeOpp)).unwrap();
        assert!((opp - 0.6 * base).abs() <= 1e-15);
        let gre = SequenceParams::new(SequenceKind::GreT1, 25.0, 4.0, 30.0).unwrap();
        assert!(vibe_signal(600.0, 0.8, 0.2, &gre).is_err());
    }
}
