//! Two-channel conditional denoising diffusion: schedule, forward process,
//! noise predictors, training and ancestral sampling.

mod checkpoint;
mod condition;
mod desk;
mod embedding;
mod gradcheck;
mod predictor;
mod sample;
mod schedule;
mod train;

pub use checkpoint::{Checkpoint, CheckpointHeader, Lineage, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use condition::{make_condition_input, ConditionStack, CHANNEL_PRIOR, CHANNEL_XT};
pub use desk::{DeskConfig, DeskDenoiser, DESK_ARCH};
pub use embedding::TimeEmbedding;
pub use gradcheck::{finite_difference_gradcheck, GradProbe, GradcheckConfig, GradcheckReport};
pub use predictor::{simple_loss, AnalyticOracle, EpsilonPredictor, LinearPredictor, Trainable, ZeroPredictor};
pub use sample::{reverse_process, sample, sample_many, sample_volume};
pub use schedule::{
    forward_diffuse, NoiseSchedule, ScheduleSpec, DEFAULT_BETA_END, DEFAULT_BETA_START, DEFAULT_TIMESTEPS,
};
pub use train::{train, volume_pairs, Adam, LossCurve, TrainConfig, TrainOutcome};
