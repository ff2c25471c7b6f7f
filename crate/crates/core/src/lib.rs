//! Anatomical label volumes to modality-specific physical priors, a
//! two-channel conditional denoising diffusion model trained on those priors,
//! multi-subject anatomy composition and an image-quality metric suite.
//!
//! Everything runs on small procedurally generated phantoms so the whole
//! pipeline fits on a laptop CPU.

pub mod anatomy;
pub mod diffusion;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod par;
pub mod physiosynth;
pub mod volumes;

pub use error::{Error, Result};
pub use par::Exec;
pub use volumes::{Dims, LabelVolume, Modality, ScalarVolume, Slice, Spacing};
