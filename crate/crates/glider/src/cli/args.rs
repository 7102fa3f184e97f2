use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "glider", version, about = "Detect, aggregate and encode feature interactions of black-box models")]
pub struct Cli {
    /// Worker threads (default: logical cores). Never affects results.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Rerun from a config: any output JSON with an embedded "config", or the config itself.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum Command {
    /// Explain one instance: detect the interactions the model uses around it.
    Explain(ExplainArgs),
    /// Count interactions detected over a batch of instances.
    Global(GlobalArgs),
    /// Append truncated cross features for detected interactions.
    Cross(CrossArgs),
    /// Synthetic-function detection benchmark.
    Bench(BenchArgs),
    /// Serve a builtin model over the adapter protocol on stdin/stdout.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ModelArgs {
    /// Adapter command line, run with `sh -c`.
    #[arg(long, required_unless_present = "builtin", conflicts_with = "builtin")]
    pub model: Option<String>,
    /// In-process model: F1, F2, F3, F4 or additive.
    #[arg(long)]
    pub builtin: Option<String>,
    /// Working directory for the adapter process.
    #[arg(long)]
    pub model_cwd: Option<PathBuf>,
    /// Seconds to wait for the adapter handshake.
    #[arg(long, default_value_t = 30)]
    pub handshake_timeout: u64,
    /// Rows per adapter request.
    #[arg(long, default_value_t = 1000)]
    pub query_batch: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorArg {
    Nid,
    Gradnid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeArg {
    Binary,
    Continuous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    None,
    /// Kernel-weight samples by cosine distance to the all-ones mask.
    Lime,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct DetectArgs {
    /// Detector (default: gradnid for single pairwise runs, nid otherwise).
    #[arg(long, value_enum)]
    pub detector: Option<DetectorArg>,
    /// Interaction order for gradnid (2 or 3).
    #[arg(long, default_value_t = 2)]
    pub order: usize,
    #[arg(long, value_enum, default_value_t = ModeArg::Binary)]
    pub mode: ModeArg,
    /// Standard deviation of continuous perturbations.
    #[arg(long, default_value_t = 0.6)]
    pub sigma: f64,
    /// Clip continuous perturbations to `LO,HI` for every field.
    #[arg(long, value_parser = parse_bounds, allow_hyphen_values = true)]
    pub bounds: Option<(f64, f64)>,
    /// Training perturbations; validation and test get a tenth each.
    #[arg(long, default_value_t = 5000)]
    pub n_perturb: usize,
    #[arg(long, value_enum, default_value_t = Weighting::None)]
    pub weighting: Weighting,
    #[arg(long, default_value_t = glider_core::perturb::DEFAULT_KERNEL_WIDTH)]
    pub kernel_width: f64,
    /// Reference CSV whose column means are the dense off states.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// Fixed off value for every dense field (instead of reference means).
    #[arg(long, allow_hyphen_values = true)]
    pub off_value: Option<f64>,
    /// Surrogate hidden widths, e.g. `256,128,64`.
    #[arg(long, value_parser = parse_widths)]
    pub hidden: Option<Widths>,
    #[arg(long)]
    pub max_epochs: Option<usize>,
    /// Relative validation improvement needed to add an interaction.
    #[arg(long, default_value_t = glider_core::detect::DEFAULT_REL_TOL)]
    pub rel_tol: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ExplainArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// Instance JSON: an array of values or {"id":…, "values":[…]}.
    #[arg(long)]
    pub instance: PathBuf,
    /// Schema JSON (default: all-dense fields x1..xp).
    #[arg(long)]
    pub schema: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub detect: DetectArgs,
    /// Result JSON path (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the perturbation dataset as `<prefix>.csv` + `<prefix>.manifest.json`.
    #[arg(long)]
    pub save_dataset: Option<PathBuf>,
    /// Also write the trained surrogate as JSON.
    #[arg(long)]
    pub save_net: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PruneArg {
    Subsets,
    Supersets,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct GlobalArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub schema: PathBuf,
    /// Instances explained: the first N data rows.
    #[arg(long, default_value_t = 1000)]
    pub batch: usize,
    /// Keep K interactions after subset pruning.
    #[arg(short = 'K', long = "k")]
    pub k: Option<usize>,
    #[arg(long, value_enum, default_value_t = PruneArg::Subsets)]
    pub prune: PruneArg,
    #[command(flatten)]
    #[serde(flatten)]
    pub detect: DetectArgs,
    /// Writes summary.json, report.txt and rank.csv here.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct CrossArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub schema: PathBuf,
    /// Global summary JSON, or a JSON array of field-name lists.
    #[arg(long)]
    pub interactions: PathBuf,
    /// Use only the first K interactions.
    #[arg(short = 'K', long = "k")]
    pub k: Option<usize>,
    /// Keep combinations seen more than T times.
    #[arg(short = 'T', long = "threshold", default_value_t = glider_core::crossing::DEFAULT_THRESHOLD)]
    pub threshold: u64,
    #[arg(long, default_value_t = glider_core::crossing::DEFAULT_MAX_BINS)]
    pub max_bins: usize,
    /// Rows used to build buckets and vocabularies (default: all).
    #[arg(long)]
    pub build_rows: Option<usize>,
    /// Writes augmented.csv, crosses.json and cardinality.json here.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct BenchArgs {
    /// F1, F2, F3 or F4.
    #[arg(long)]
    pub function: String,
    #[arg(long, value_enum, default_value_t = DetectorArg::Nid)]
    pub detector: DetectorArg,
    #[arg(long, default_value_t = 2)]
    pub order: usize,
    #[arg(long, default_value_t = 10)]
    pub trials: usize,
    #[arg(long, default_value_t = 20)]
    pub instances: usize,
    #[arg(long, default_value_t = 0.6)]
    pub sigma: f64,
    #[arg(long, default_value_t = 5000)]
    pub n_perturb: usize,
    /// Surrogate hidden widths (default: the detector's standard net).
    #[arg(long, value_parser = parse_widths)]
    pub hidden: Option<Widths>,
    /// Training samples per black box.
    #[arg(long, default_value_t = 10_000)]
    pub blackbox_samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Writes report.json, grid.csv and summary.txt here.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ServeArgs {
    /// F1, F2, F3, F4 or additive.
    #[arg(long)]
    pub builtin: String,
}

fn parse_bounds(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(',').ok_or("expected LO,HI")?;
    let lo: f64 = lo.trim().parse().map_err(|e| format!("{e}"))?;
    let hi: f64 = hi.trim().parse().map_err(|e| format!("{e}"))?;
    if lo < hi {
        Ok((lo, hi))
    } else {
        Err("LO must be below HI".into())
    }
}

/// Comma-separated hidden layer widths.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Widths(pub Vec<usize>);

fn parse_widths(s: &str) -> Result<Widths, String> {
    let w: Vec<usize> = s.split(',').map(|p| p.trim().parse::<usize>().map_err(|e| format!("{e}"))).collect::<Result<_, _>>()?;
    if w.is_empty() || w.contains(&0) {
        return Err("widths must be positive".into());
    }
    Ok(Widths(w))
}
