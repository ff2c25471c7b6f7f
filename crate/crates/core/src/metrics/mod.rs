//! Image and segmentation quality metrics plus the evaluation report.

mod dice;
mod frechet;
mod fsim;
mod mannwhitney;
mod pixel;
mod report;
mod ssim;

pub use dice::{dice, dice_per_class, DiceHeatmap};
pub use frechet::{frechet_from_slices, frechet_gaussian, DownsampledPixels, FeatureExtractor, FrechetResult, FRECHET_RIDGE};
pub use fsim::{fsim, fsim_in_range, gradient_magnitude, phase_congruency, FSIM_MIN_DIM};
pub use mannwhitney::{mann_whitney_u, MannWhitney, EXACT_MAX_N};
pub use pixel::{hist_cc, histogram, mae, pearson, psnr};
pub use report::{evaluate_pairs, format_value, EvalConfig, MetricEntry, MetricKind, MetricReport, MetricSummary};
pub use ssim::{gaussian_taps, ssim, ssim_window_size, SSIM_K1, SSIM_K2, SSIM_SIGMA, SSIM_WINDOW};
