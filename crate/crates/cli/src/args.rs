//! Command-line surface.
//!
//! `simulate` and `train` accept `--config <file>` pointing at a previous
//! run's manifest or config sidecar; explicitly passed flags override the
//! file, so any recorded run reproduces with one line.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use procest::nn::Activation;

#[derive(Parser)]
#[command(name = "procest", version, about = "Progress estimation for linear sequential processes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Generate a seeded synthetic dataset.
    Simulate(SimulateArgs),
    /// Fit the phase mixture and train the completeness regressor.
    Train(TrainArgs),
    /// Run the evaluation battery on a trained model.
    Eval(EvalArgs),
    /// Stream per-frame progress reports: trace lines in, reports out.
    Infer(InferArgs),
}

#[derive(Args)]
pub struct SimulateArgs {
    /// Output dataset directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Simulator config file (a manifest.json from a previous run).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of traces to generate [default: 60].
    #[arg(long)]
    pub cases: Option<usize>,
    /// [default: 6]
    #[arg(long)]
    pub phases: Option<usize>,
    /// [default: 16]
    #[arg(long)]
    pub features: Option<usize>,
    /// Frames per second [default: 1].
    #[arg(long)]
    pub frame_rate: Option<f64>,
    /// Per-phase mean durations in seconds, comma-separated.
    #[arg(long, value_delimiter = ',')]
    pub duration_means: Option<Vec<f64>>,
    /// Per-phase duration standard deviations, comma-separated
    /// [default: means / 6].
    #[arg(long, value_delimiter = ',')]
    pub duration_stds: Option<Vec<f64>>,
    /// Average distance between per-phase feature means [default: 2].
    #[arg(long)]
    pub separation: Option<f64>,
    /// [default: 0.5]
    #[arg(long)]
    pub noise_std: Option<f64>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum OutputActivation {
    Rtanh,
    Sigmoid,
}

impl From<OutputActivation> for Activation {
    fn from(value: OutputActivation) -> Self {
        match value {
            OutputActivation::Rtanh => Activation::Rtanh,
            OutputActivation::Sigmoid => Activation::Sigmoid,
        }
    }
}

impl From<Activation> for OutputActivation {
    fn from(value: Activation) -> Self {
        match value {
            Activation::Sigmoid => OutputActivation::Sigmoid,
            _ => OutputActivation::Rtanh,
        }
    }
}

#[derive(Args)]
pub struct TrainArgs {
    /// Dataset directory of .trace files.
    #[arg(long)]
    pub data: PathBuf,
    /// Model output path (JSON).
    #[arg(long)]
    pub out: PathBuf,
    /// Run config file (a <model>.config.json from a previous run).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Weight of the completeness regression loss [default: 0.6].
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Weight of the conditional phase loss [default: 0.4].
    #[arg(long)]
    pub beta: Option<f64>,
    /// Output neuron activation [default: rtanh].
    #[arg(long, value_enum)]
    pub activation: Option<OutputActivation>,
    /// [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Held-out fraction of whole cases [default: 0.2].
    #[arg(long)]
    pub test_fraction: Option<f64>,
    /// Split seed [default: --seed].
    #[arg(long)]
    pub split_seed: Option<u64>,
    /// [default: 250]
    #[arg(long)]
    pub max_epochs: Option<usize>,
    /// [default: 32]
    #[arg(long)]
    pub encoder_dim: Option<usize>,
    /// [default: 32]
    #[arg(long)]
    pub hidden: Option<usize>,
    /// [default: 32]
    #[arg(long)]
    pub fc1: Option<usize>,
    /// [default: 32]
    #[arg(long)]
    pub fc2: Option<usize>,
    /// [default: 2.5]
    #[arg(long)]
    pub smooth_sigma: Option<f64>,
    /// [default: 8]
    #[arg(long)]
    pub smooth_radius: Option<usize>,
    /// [default: 0.05]
    #[arg(long)]
    pub dropout: Option<f64>,
    /// [default: 0.001]
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// [default: 1e-8]
    #[arg(long)]
    pub decay: Option<f64>,
    /// Truncated-BPTT window in frames [default: whole trace].
    #[arg(long)]
    pub window: Option<usize>,
    /// [default: 2]
    #[arg(long)]
    pub curriculum_start: Option<usize>,
    /// [default: 0.05]
    #[arg(long)]
    pub curriculum_threshold: Option<f64>,
    /// [default: 3]
    #[arg(long)]
    pub patience: Option<usize>,
    /// [default: 1e-4]
    #[arg(long)]
    pub early_stop_delta: Option<f64>,
    /// Completeness threshold for detecting the boundary phases
    /// [default: 0.005].
    #[arg(long)]
    pub boundary_eps: Option<f64>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum SplitChoice {
    /// The held-out cases recorded in the model file.
    Recorded,
    /// The training cases recorded in the model file.
    Train,
    /// Every trace in the dataset directory.
    All,
}

#[derive(Args)]
pub struct EvalArgs {
    /// Trained model file.
    #[arg(long)]
    pub model: PathBuf,
    /// Dataset directory of .trace files.
    #[arg(long)]
    pub data: PathBuf,
    /// Report output path (JSON); a .txt table lands next to it.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = SplitChoice::Recorded)]
    pub split: SplitChoice,
    /// Replace the fitted mixture with equal weights and one shared
    /// standard deviation (interval decision regions).
    #[arg(long, default_value_t = false)]
    pub equalize_gmm: bool,
    /// Retrain over the alpha/beta grid {0,0.2,..,1} x {1-alpha} and
    /// report (MAE, accuracy, F1) per cell instead of a single report.
    #[arg(long, default_value_t = false)]
    pub sweep_alpha_beta: bool,
    /// Train rtanh and sigmoid output neurons from one initialization and
    /// report epochs-to-convergence and final MAE for each.
    #[arg(long, default_value_t = false)]
    pub compare_activations: bool,
}

#[derive(Args)]
pub struct InferArgs {
    /// Trained model file.
    #[arg(long)]
    pub model: PathBuf,
    /// Input begins with a trace header line: consume and validate it.
    #[arg(long, default_value_t = false)]
    pub header: bool,
    #[arg(long, default_value_t = false)]
    pub equalize_gmm: bool,
}
