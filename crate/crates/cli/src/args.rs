use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "debias", version, about = "Bias discovery and mitigation on Multi-Color MNIST")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a colored dataset cache from MNIST (or synthetic glyphs).
    Generate(GenerateArgs),
    /// Train one method and write a run directory.
    Train(TrainArgs),
    /// Evaluate saved checkpoints on a dataset's test split.
    Eval(EvalArgs),
    /// Draw metric columns of one or more metrics.csv files as an SVG chart.
    Plot(PlotArgs),
    /// Run an ablation grid over batch sizes or bias ratios.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    MultiColor,
    ColoredFg,
    ColoredBg,
}

#[derive(Debug, Clone, Args)]
pub struct SourceArgs {
    /// Directory holding the uncompressed MNIST IDX files.
    #[arg(long, env = "DEBIAS_DATA_DIR")]
    pub mnist_dir: Option<PathBuf>,
    /// Use procedurally drawn digit glyphs instead of MNIST.
    #[arg(long)]
    pub synthetic: bool,
}

#[derive(Debug, Clone, Args)]
pub struct DataShapeArgs {
    #[arg(long, value_enum, default_value = "multi-color")]
    pub variant: VariantArg,
    /// Bias-aligned fraction of the left (or only) attribute.
    #[arg(long, default_value_t = 0.99)]
    pub ratio_left: f64,
    /// Bias-aligned fraction of the right attribute (multi-color only).
    #[arg(long, default_value_t = 0.95)]
    pub ratio_right: f64,
    #[arg(long, default_value_t = 60_000)]
    pub train_count: usize,
    #[arg(long, default_value_t = 8_000)]
    pub test_count: usize,
    /// Std of the Gaussian color perturbation, in [0, 1] intensity units.
    #[arg(long, default_value_t = 0.02)]
    pub jitter_std: f64,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub shape: DataShapeArgs,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub source: SourceArgs,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// vanilla, focal, gce-biased, debian, debian-no-ua, debian-minmax or discover-only.
    #[arg(long)]
    pub method: Option<String>,
    /// Dataset directory written by `generate`.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// TOML file of training settings; flags given on the command line win.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Focal loss alpha.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Focal loss gamma.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// GCE exponent.
    #[arg(long)]
    pub q: Option<f64>,
    /// Evaluate every this many epochs.
    #[arg(long)]
    pub eval_every: Option<usize>,
    /// Save checkpoints every this many epochs (0: final only).
    #[arg(long)]
    pub checkpoint_every: Option<usize>,
    /// Trained classifier to analyze (discover-only).
    #[arg(long)]
    pub classifier_ckpt: Option<PathBuf>,
    /// Run name recorded in the manifest (default: output directory name).
    #[arg(long)]
    pub name: Option<String>,
    /// Run on the calling thread only.
    #[arg(long)]
    pub sequential: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Classifier checkpoint.
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Discoverer checkpoint, adds the discovery-accuracy fields.
    #[arg(long)]
    pub discoverer_ckpt: Option<PathBuf>,
    /// Evaluate even if the dataset differs from the one the run trained on.
    #[arg(long)]
    pub allow_mismatch: bool,
    /// JSON output file (default: next to the checkpoint).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// metrics.csv files.
    #[arg(required = true)]
    pub csv: Vec<PathBuf>,
    /// Columns to draw, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "disc_acc_left,disc_acc_right")]
    pub columns: Vec<String>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "metrics over training")]
    pub title: String,
    #[arg(long, default_value = "value")]
    pub y_label: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AxisArg {
    BatchSize,
    Ratio,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    pub axis: AxisArg,
    /// Methods to run, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "vanilla,debian")]
    pub methods: Vec<String>,
    /// Training seeds, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    pub seeds: Vec<u64>,
    #[command(flatten)]
    pub shape: DataShapeArgs,
    /// Dataset seed.
    #[arg(long, default_value_t = 1)]
    pub data_seed: u64,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    /// Batch size for the ratio axis.
    #[arg(long, default_value_t = 256)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 1)]
    pub eval_every: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub source: SourceArgs,
    /// Run points one after another on the calling thread.
    #[arg(long)]
    pub sequential: bool,
}
