use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "subaudit",
    version,
    about = "Audit regression models for race and sex subgroup bias"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the performance audit, the feature audit, or both.
    Audit {
        #[command(subcommand)]
        arm: AuditArm,
    },
    /// Generate a synthetic cohort with features.
    Synth(SynthArgs),
    /// Measure test rejection rates on null synthetic cohorts.
    Calibrate(CalibrateArgs),
    /// Redraw tables and figures from a saved report.json.
    Plot(PlotArgs),
}

#[derive(Debug, Subcommand)]
pub enum AuditArm {
    /// Absolute-error comparison across the six subgroups.
    Perf(AuditArgs),
    /// PCA feature-space inspection.
    Features(AuditArgs),
    /// Both arms.
    All(AuditArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CenteringArg {
    Mean,
    Median,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BasisArg {
    Groups,
    Omnibus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FeatureFormat {
    Csv,
    Bin,
}

/// Every audit option. Unset options fall back to the --config file, then
/// to the listed default.
#[derive(Debug, Args)]
pub struct AuditArgs {
    /// Cohort CSV with columns id,age,predicted_age,sex,race.
    #[arg(long)]
    pub cohort: PathBuf,
    /// Feature matrix (CSV, or binary with an ids sidecar). Required by the feature arm.
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Row ids for a binary feature matrix [default: the features path plus ".ids"].
    #[arg(long)]
    pub feature_ids: Option<PathBuf>,
    /// JSON file with audit options; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "audit-out")]
    pub out: PathBuf,
    /// Root seed for every random draw [default: random, printed and recorded].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Significance level [default: 0.05].
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Subjects per subgroup in the balanced pass [default: smallest subgroup].
    #[arg(long)]
    pub sample_size: Option<usize>,
    /// Balanced draws for the MAE summary [default: 10].
    #[arg(long)]
    pub repeats: Option<usize>,
    /// PCA modes to inspect [default: 4].
    #[arg(long)]
    pub modes: Option<usize>,
    /// Levene centring [default: median].
    #[arg(long, value_enum)]
    pub levene_centering: Option<CenteringArg>,
    /// Rank basis of the post-hoc tests [default: groups].
    #[arg(long, value_enum)]
    pub conover_basis: Option<BasisArg>,
    /// Adjust each post-hoc family with Benjamini-Yekutieli [default: off].
    #[arg(long)]
    pub posthoc_adjust: bool,
    /// KDE bandwidth: scott, silverman, or a positive number [default: scott].
    #[arg(long)]
    pub bandwidth: Option<String>,
    /// Points on each density grid [default: 128].
    #[arg(long)]
    pub kde_grid_points: Option<usize>,
    /// Equal-width age brackets for density plots [default: 5].
    #[arg(long)]
    pub viz_brackets: Option<usize>,
    /// Explicit plot bracket edges, comma separated [default: none].
    #[arg(long, value_delimiter = ',')]
    pub viz_edges: Option<Vec<f64>>,
    /// Edges of the two test age brackets [default: 40,60,90].
    #[arg(long, value_delimiter = ',')]
    pub test_edges: Option<Vec<f64>>,
    /// Subjects per subgroup in the equal-size feature sample [default: smallest subgroup with features].
    #[arg(long)]
    pub feature_sample_size: Option<usize>,
    /// Skip the full-cohort performance pass [default: run].
    #[arg(long)]
    pub no_full: bool,
    /// Skip the balanced performance pass [default: run].
    #[arg(long)]
    pub no_balanced: bool,
    /// Skip the equal-size feature sample [default: run].
    #[arg(long)]
    pub no_feature_balanced: bool,
    /// Skip density curves [default: run].
    #[arg(long)]
    pub no_kde: bool,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Cohort spec JSON [default: built-in demographics].
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Seed; overrides the spec's [default: spec seed, 0 without a spec].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Same count for all six subgroups and no excluded subjects [default: off].
    #[arg(long)]
    pub uniform: Option<usize>,
    /// Feature dimension; overrides the spec [default: 64].
    #[arg(long)]
    pub dim: Option<usize>,
    /// Feature file format.
    #[arg(long, value_enum, default_value = "csv")]
    pub feature_format: FeatureFormat,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// JSON file with calibration options; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Null cohorts to simulate, at least 100 [default: 1000].
    #[arg(long)]
    pub trials: Option<usize>,
    /// Subjects per subgroup [default: 126].
    #[arg(long)]
    pub group_size: Option<usize>,
    /// Significance level [default: 0.05].
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Root seed [default: random, printed and recorded].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Levene centring [default: median].
    #[arg(long, value_enum)]
    pub levene_centering: Option<CenteringArg>,
    /// PCA modes [default: 4].
    #[arg(long)]
    pub modes: Option<usize>,
    /// Feature dimension [default: 16].
    #[arg(long)]
    pub feature_dim: Option<usize>,
    /// SD of prediction errors [default: 4].
    #[arg(long)]
    pub error_sd: Option<f64>,
    /// Coverage of the binomial intervals [default: 0.99].
    #[arg(long)]
    pub confidence: Option<f64>,
    /// Directory for calibration.json and calibration.csv [default: none].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// A report.json written by `audit`.
    #[arg(long)]
    pub report: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}
