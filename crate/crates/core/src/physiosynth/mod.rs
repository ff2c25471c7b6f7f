//! Label volumes to modality-specific prior volumes: CT Hounsfield lookup and
//! closed-form MR signal equations driven by per-tissue T1, T2 and proton
//! density.

mod sequence;
mod signal;
mod simulate;
mod tissue;

pub use sequence::{SequenceKind, SequenceParams, SequencePresets};
pub use signal::{gre_signal, opposed_phase_factor, space_signal, vibe_signal};
pub use simulate::{row_signal, simulate_ct, simulate_prior, simulate_prior_with, CT_RANGE, MR_DISPLAY_MAX};
pub use tissue::{classes, TissueParameterTable, TissueRow, DEFAULT_TABLE_VERSION};
