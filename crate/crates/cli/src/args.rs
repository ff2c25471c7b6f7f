use std::net::SocketAddr;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "priorsynth", version, about = "Anatomy to prior simulation, conditional diffusion sampling and metrics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a procedural label phantom and optionally its reference scan.
    Phantom(PhantomArgs),
    /// Extract the body contour of a scalar scan as a 0/1 label volume.
    Contour(ContourArgs),
    /// Fuse organ labels with a body contour.
    Fuse(FuseArgs),
    /// Assemble a composite anatomy from several subjects (recipe via --config).
    Compose(ComposeArgs),
    /// Render a CT or MR prior from a label volume.
    Simulate(SimulateArgs),
    /// Train the desk denoiser on (image, prior) volume pairs.
    Train(TrainArgs),
    /// Sample an image conditioned on a prior with a trained checkpoint.
    Sample(SampleArgs),
    /// Score predictions against references (scalar metrics or Dice).
    Eval(EvalArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
    /// Re-execute a run from its manifest and verify the outputs.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Seed for every random draw of the command.
    #[arg(long)]
    pub seed: Option<u64>,
    /// JSON configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Primary output file; the manifest is written next to it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PhantomArgs {
    #[command(flatten)]
    pub common: Common,
    /// Grid size as NXxNYxNZ, overriding the configured dims.
    #[arg(long)]
    pub dims: Option<String>,
    /// Also write a noisy CT reference scan of the phantom.
    #[arg(long)]
    pub scan_out: Option<PathBuf>,
    /// Texture noise of the reference scan in HU.
    #[arg(long, default_value_t = 8.0)]
    pub noise_hu: f64,
    /// Tissue table CSV used for the reference scan.
    #[arg(long)]
    pub tissues: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ContourArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub input: PathBuf,
    /// Foreground threshold in the scan's units.
    #[arg(long, default_value_t = priorsynth::anatomy::DEFAULT_CT_THRESHOLD)]
    pub threshold: f64,
    #[arg(long, default_value = "contour")]
    pub subject_id: String,
}

#[derive(Debug, Args)]
pub struct FuseArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub organs: PathBuf,
    /// Label volume whose non-zero voxels form the body.
    #[arg(long)]
    pub contour: PathBuf,
}

#[derive(Debug, Args)]
pub struct ComposeArgs {
    #[command(flatten)]
    pub common: Common,
    /// Source subject as ID=PATH; repeat for every subject in the recipe.
    #[arg(long = "subject", value_name = "ID=PATH")]
    pub subjects: Vec<String>,
    /// Also write the per-voxel provenance as a label volume.
    #[arg(long)]
    pub provenance_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub labels: PathBuf,
    /// Named sequence preset.
    #[arg(long, conflicts_with = "kind")]
    pub preset: Option<String>,
    /// Sequence kind (ct, gre, space, vibe_in, vibe_opp, dixon_in, dixon_opp).
    #[arg(long)]
    pub kind: Option<String>,
    #[arg(long)]
    pub tr: Option<f64>,
    #[arg(long)]
    pub te: Option<f64>,
    #[arg(long)]
    pub flip: Option<f64>,
    /// Tissue table CSV.
    #[arg(long)]
    pub tissues: Option<PathBuf>,
    /// Sequence preset JSON.
    #[arg(long)]
    pub presets: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: Common,
    /// Training pair as IMAGE:PRIOR; repeat for more volumes.
    #[arg(long = "pair", value_name = "IMAGE:PRIOR", required = true)]
    pub pairs: Vec<String>,
    /// Override the configured optimizer step limit.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Write the per-epoch loss curve as CSV.
    #[arg(long)]
    pub loss_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub prior: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: Common,
    /// Prediction volume; repeat and pair with --ref in order.
    #[arg(long = "pred", required = true)]
    pub preds: Vec<PathBuf>,
    /// Reference volume.
    #[arg(long = "ref", required = true)]
    pub refs: Vec<PathBuf>,
    /// Evaluation window as LO,HI (default from the reference modality).
    #[arg(long, allow_hyphen_values = true)]
    pub window: Option<String>,
    /// Comma-separated metric list (ssim, psnr, mae, hist_cc, fsim).
    #[arg(long)]
    pub metrics: Option<String>,
    /// Write the aggregate report as JSON.
    #[arg(long)]
    pub summary: Option<PathBuf>,
    /// Dice mode: write the heatmap as PNG.
    #[arg(long)]
    pub heatmap_png: Option<PathBuf>,
    /// Dice mode: pixel size of one heatmap cell.
    #[arg(long, default_value_t = 16)]
    pub cell: usize,
    /// Tissue table CSV used for organ names in Dice mode.
    #[arg(long)]
    pub tissues: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Data root with subjects/, volumes/, checkpoints/ and jobs/.
    #[arg(long, env = "PRIORSYNTH_DATA")]
    pub data_dir: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: SocketAddr,
    /// Concurrent sampling jobs.
    #[arg(long, default_value_t = 2)]
    pub workers: usize,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// Manifest written by a previous run.
    pub manifest: PathBuf,
}
