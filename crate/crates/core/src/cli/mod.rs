//! The `lesionfuse` command line.
//!
//! Every command writes into its `--out` directory, including a
//! `manifest.json` with arguments, seeds, input digests and version.
//! Failures print one line, `error[<class>]: <message>`, and exit with the
//! class's code.

mod commands;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::Error;
use crate::fusion::ConfirmationRule;
use crate::metrics::{DistanceUnit, Metric};
use crate::simclf::NoisePreset;
use crate::stats::{Alternative, ZeroMethod};
use crate::volume::{Connectivity, Label, Orientation};

pub const SEED_ENV: &str = "LESIONFUSE_SEED";

#[derive(Debug, Parser)]
#[command(name = "lesionfuse", version, about = "Ternary lesion consensus, ensemble fusion and evaluation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Ternary ground truth from binary rater masks and their consensus.
    Consensus(ConsensusArgs),
    /// Fuse six directional classifier outputs.
    Fuse(FuseArgs),
    /// Score a prediction against a ground truth.
    Eval(EvalArgs),
    /// All-vs-all rater comparison, each rater in turn as ground truth.
    Compare(CompareArgs),
    /// Wilcoxon signed-rank test between two report CSVs.
    Wilcoxon(WilcoxonArgs),
    /// Per-centre train/validation/test splits.
    Split(SplitArgs),
    /// Rotation, scaling and noise augmentation of 2D slices.
    Augment(AugmentArgs),
    /// Synthetic phantom plus six simulated classifier outputs.
    Simulate(SimulateArgs),
    /// Bayesian search for segmentation thresholds minimising 1 - IoU.
    Optimize(OptimizeArgs),
    /// Plot-ready tables: rater summaries, per-lesion scores, rater matrix.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct OutArg {
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SeedArg {
    /// Random seed; a generated seed is recorded in the manifest if absent.
    #[arg(long, env = SEED_ENV)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ConsensusArgs {
    /// Binary rater masks (nonzero = lesion).
    #[arg(long = "rater", visible_alias = "raters", required = true, num_args = 1..)]
    pub raters: Vec<PathBuf>,
    /// Binary consensus mask.
    #[arg(long)]
    pub consensus: PathBuf,
    /// Raters needed to mark a non-consensus voxel Uncertainty.
    #[arg(long, default_value_t = crate::consensus::DEFAULT_THRESHOLD)]
    pub threshold: usize,
    #[arg(long, default_value = "subject")]
    pub subject: String,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Args)]
pub struct FuseArgs {
    /// Directory holding `<orientation>_<in|out>.lvol` for all six classifiers.
    #[arg(long)]
    pub bundle: Option<PathBuf>,
    #[arg(long)]
    pub axial_in: Option<PathBuf>,
    #[arg(long)]
    pub axial_out: Option<PathBuf>,
    #[arg(long)]
    pub coronal_in: Option<PathBuf>,
    #[arg(long)]
    pub coronal_out: Option<PathBuf>,
    #[arg(long)]
    pub sagittal_in: Option<PathBuf>,
    #[arg(long)]
    pub sagittal_out: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    pub min_votes: usize,
    #[arg(long, default_value_t = ConfirmationRule::Ordered)]
    pub rule: ConfirmationRule,
    #[arg(long)]
    pub allow_double_downgrade: bool,
    /// Orientation whose two classifiers form the union.
    #[arg(long, default_value_t = Orientation::Axial)]
    pub preferred: Orientation,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Args)]
pub struct MetricOpts {
    #[arg(long, default_value = "mm")]
    pub units: DistanceUnit,
    /// Slice orientation for Image Dice and BF.
    #[arg(long, default_value_t = Orientation::Axial)]
    pub orientation: Orientation,
    /// 6, 18 or 26.
    #[arg(long, default_value = "26")]
    pub connectivity: Connectivity,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, requires = "gt", conflicts_with = "pairs")]
    pub pred: Option<PathBuf>,
    #[arg(long, requires = "pred")]
    pub gt: Option<PathBuf>,
    /// CSV with header `subject,pred,gt`, one subject per row.
    #[arg(long)]
    pub pairs: Option<PathBuf>,
    #[arg(long, default_value = "subject")]
    pub subject: String,
    /// Classes to evaluate; repeat for several.
    #[arg(long = "class", default_value = "lesion")]
    pub classes: Vec<Label>,
    #[command(flatten)]
    pub metric: MetricOpts,
    /// Also write per-lesion scores.
    #[arg(long)]
    pub per_lesion: bool,
    /// Dilation margin of the per-lesion window, in voxels.
    #[arg(long, default_value_t = 2)]
    pub margin: usize,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// `NAME=PATH`; at least two.
    #[arg(long = "rater", required = true, num_args = 1..)]
    pub raters: Vec<String>,
    #[arg(long = "class", default_value = "lesion")]
    pub class: Label,
    /// Comma-separated metric names; all twenty by default.
    #[arg(long, value_delimiter = ',')]
    pub metrics: Vec<Metric>,
    #[command(flatten)]
    pub metric: MetricOpts,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Args)]
pub struct WilcoxonArgs {
    /// Report CSV of the first rater.
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
    #[arg(long, default_value = "a")]
    pub label_a: String,
    #[arg(long, default_value = "b")]
    pub label_b: String,
    #[arg(long, default_value_t = crate::stats::wilcoxon::DEFAULT_ALPHA)]
    pub alpha: f64,
    #[arg(long, default_value = "two-sided")]
    pub alternative: Alternative,
    #[arg(long, default_value = "wilcox")]
    pub zero_method: ZeroMethod,
    /// Pair per-subject values of this metric instead of per-metric means.
    #[arg(long)]
    pub per_subject: Option<Metric>,
    /// Units of the distances in both CSVs.
    #[arg(long, default_value = "mm")]
    pub units: DistanceUnit,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    /// CSV with header `subject_id,centre`.
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value_t = 3)]
    pub train: usize,
    #[arg(long, default_value_t = 1)]
    pub validation: usize,
    #[arg(long, default_value_t = 1)]
    pub test: usize,
    /// Write every fold instead of one seeded split.
    #[arg(long)]
    pub enumerate: bool,
    #[command(flatten)]
    pub seed: SeedArg,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    /// Directory of `NAME.lvol` intensity volumes, each with `NAME.labels.lvol`.
    #[arg(long)]
    pub input: PathBuf,
    /// Slicing orientation.
    #[arg(long, default_value_t = Orientation::Axial)]
    pub orientation: Orientation,
    #[command(flatten)]
    pub seed: SeedArg,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [32, 32, 16])]
    pub dims: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = [1.0, 1.0, 1.0])]
    pub spacing: Vec<f64>,
    #[arg(long, default_value_t = 4)]
    pub lesions: usize,
    #[arg(long, default_value_t = 1.5)]
    pub radius_min: f64,
    #[arg(long, default_value_t = 3.5)]
    pub radius_max: f64,
    /// Uncertainty shell thickness in voxels.
    #[arg(long, default_value_t = 1)]
    pub shell: usize,
    #[arg(long, default_value = "low")]
    pub noise_preset: NoisePreset,
    #[command(flatten)]
    pub seed: SeedArg,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    /// Intensity volume.
    #[arg(long)]
    pub volume: PathBuf,
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long = "class", default_value = "lesion")]
    pub class: Label,
    #[arg(long, default_value_t = 30)]
    pub budget: usize,
    #[arg(long, default_value_t = 5)]
    pub n_initial: usize,
    /// Threshold grid resolution.
    #[arg(long, default_value_t = 0.01)]
    pub resolution: f64,
    #[command(flatten)]
    pub seed: SeedArg,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// `NAME=REPORT.csv`: mean and std per metric for each rater.
    #[arg(long = "summary")]
    pub summaries: Vec<String>,
    /// Per-lesion table from `--pred` and `--gt`, sorted by lesion volume.
    #[arg(long, requires_all = ["pred", "gt"])]
    pub per_lesion: bool,
    #[arg(long)]
    pub pred: Option<PathBuf>,
    #[arg(long)]
    pub gt: Option<PathBuf>,
    /// `NAME=VOLUME`: all-vs-all matrix over these raters.
    #[arg(long = "matrix")]
    pub matrix: Vec<String>,
    #[arg(long = "class", default_value = "lesion")]
    pub class: Label,
    #[arg(long, default_value_t = 2)]
    pub margin: usize,
    /// Units of the distances in the summary CSVs, and of the output.
    #[command(flatten)]
    pub metric: MetricOpts,
    #[command(flatten)]
    pub out: OutArg,
}

/// Error classes and their exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Io,
    Format,
    Geometry,
    Invalid,
}

impl ErrorClass {
    pub fn code(self) -> i32 {
        match self {
            ErrorClass::Usage => 2,
            ErrorClass::Io => 3,
            ErrorClass::Format => 4,
            ErrorClass::Geometry => 5,
            ErrorClass::Invalid => 6,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ErrorClass::Usage => "usage",
            ErrorClass::Io => "io",
            ErrorClass::Format => "format",
            ErrorClass::Geometry => "geometry",
            ErrorClass::Invalid => "invalid",
        }
    }

    pub fn of(e: &Error) -> ErrorClass {
        match e {
            Error::Io { .. } => ErrorClass::Io,
            Error::GeometryMismatch(_)
            | Error::SliceCount { .. }
            | Error::SliceShape { .. }
            | Error::EmptyStack => ErrorClass::Geometry,
            Error::InvalidArgument(_) => ErrorClass::Invalid,
            Error::InvalidDims(_)
            | Error::InvalidSpacing(_)
            | Error::DataLength { .. }
            | Error::NonFinite { .. }
            | Error::InvalidLabel { .. }
            | Error::NotBinary { .. }
            | Error::BadMagic
            | Error::Truncated { .. }
            | Error::UnsupportedDataType(_)
            | Error::Csv(_)
            | Error::Json(_) => ErrorClass::Format,
        }
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return 0;
            }
            let msg = e.kind().to_string();
            let detail = e
                .to_string()
                .lines()
                .next()
                .unwrap_or("")
                .trim_start_matches("error: ")
                .to_string();
            eprintln!(
                "error[{}]: {}",
                ErrorClass::Usage.name(),
                one_line(if detail.is_empty() { &msg } else { &detail })
            );
            return ErrorClass::Usage.code();
        }
    };
    let recorded: Vec<String> = args
        .iter()
        .skip(1)
        .map(|a| a.to_string_lossy().into_owned())
        .collect();
    match commands::dispatch(cli.command, &recorded) {
        Ok(dir) => {
            println!("{}", dir.display());
            0
        }
        Err(e) => {
            let class = ErrorClass::of(&e);
            eprintln!("error[{}]: {}", class.name(), one_line(&e.to_string()));
            class.code()
        }
    }
}
