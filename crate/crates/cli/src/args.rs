use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "retina", version, about = "Fundus image enhancement, CNN grading and evaluation")]
pub struct Cli {
    /// TOML file with `seed`, `[enhance]` and `[train]` tables; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Base directory for relative paths given on the command line.
    #[arg(long, global = true, env = "RETINA_DATA_ROOT")]
    pub data_root: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Enhance every image of a manifest (hybrid filter, CLAHE, optional resize).
    Preprocess(PreprocessArgs),
    /// Write a synthetic lesion-image dataset and its manifest.
    Synth(SynthArgs),
    /// Train a network on a manifest and write a checkpoint plus history.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a manifest.
    Eval(EvalArgs),
    /// Compare analytic and finite-difference gradients on random small networks.
    Gradcheck(GradcheckArgs),
    /// Render a comparison report from metrics files or the bundled published table.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Arch {
    /// Thirteen convolutions, FC(4096), FC(classes).
    Table3,
    /// Five 32-filter conv blocks, FC(classes).
    Compact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SamplingArg {
    Uniform,
    Informative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LossArg {
    #[value(alias = "eq5")]
    BinarySum,
    Categorical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ChannelArg {
    PerChannel,
    Luminance,
}

#[derive(Debug, Clone, Default, Args)]
pub struct EnhanceFlags {
    /// Start from the small-image preset (luminance, 4x4 tiles, no median) before other flags.
    #[arg(long)]
    pub desk: bool,
    /// CLAHE clip fraction, 0.002 to 0.005.
    #[arg(long)]
    pub clip_fraction: Option<f64>,
    /// CLAHE tiles as ROWSxCOLS (or a single number for a square grid).
    #[arg(long, value_parser = parse_grid)]
    pub tile_grid: Option<(usize, usize)>,
    #[arg(long)]
    pub median_window: Option<usize>,
    #[arg(long)]
    pub gaussian_sigma: Option<f64>,
    #[arg(long, value_enum)]
    pub channel_mode: Option<ChannelArg>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct TrainFlags {
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long, value_enum)]
    pub sampling: Option<SamplingArg>,
    #[arg(long, value_enum)]
    pub loss: Option<LossArg>,
    /// Interleave classes within each epoch.
    #[arg(long)]
    pub balanced_batches: bool,
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Resize enhanced images to SIZE×SIZE.
    #[arg(long)]
    pub size: Option<usize>,
    #[command(flatten)]
    pub enhance: EnhanceFlags,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub per_class: usize,
    #[arg(long, default_value_t = 64)]
    pub size: usize,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output directory for the checkpoint, history and split manifests.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum)]
    pub arch: Option<Arch>,
    #[arg(long)]
    pub classes: Option<usize>,
    /// Hold out this fraction of every class (written to test.csv).
    #[arg(long)]
    pub split: Option<f64>,
    /// Resize inputs to SIZE×SIZE; defaults to the first image's height.
    #[arg(long)]
    pub size: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub train: TrainFlags,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    /// Metrics JSON destination.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Model name recorded in the metrics file.
    #[arg(long, default_value = "EDLM")]
    pub name: String,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 100)]
    pub networks: usize,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Metrics files written by `eval`; the last one is the reference model.
    pub metrics: Vec<PathBuf>,
    /// Use the bundled published per-class table instead of metrics files.
    #[arg(long, conflicts_with = "metrics")]
    pub published: bool,
    /// Also write the report as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_grid(s: &str) -> Result<(usize, usize), String> {
    let parse = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("bad tile count {v:?}: {e}"));
    match s.split_once(['x', 'X', ',']) {
        Some((r, c)) => Ok((parse(r)?, parse(c)?)),
        None => parse(s).map(|n| (n, n)),
    }
}
