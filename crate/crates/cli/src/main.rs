mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Exit status for input errors: unreadable, missing or malformed files and
/// invalid arguments.
const EXIT_INPUT: u8 = 2;
/// Exit status for inputs that are valid on their own but disagree with each
/// other, e.g. a camera without a feature map.
const EXIT_CONSISTENCY: u8 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "featlift",
    version,
    about = "Uplift 2D feature maps onto Gaussian splatting scenes and query them"
)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Assign a feature to every Gaussian from multi-view feature maps.
    Uplift(UpliftArgs),
    /// Render colors or features from one camera.
    Render(RenderArgs),
    /// Score a text-embedding query against rendered features.
    Query(QueryArgs),
    /// Compare predicted masks against ground truth.
    Eval(EvalArgs),
    /// Measure how far the closed-form aggregation is from the exact solve.
    OracleCompare(OracleArgs),
    /// Write a synthetic scene, cameras and feature maps.
    Synth(SynthArgs),
    /// Copy selected Gaussians, transformed, into another scene.
    Edit(EditArgs),
    /// Time uplifting and rendering over a grid of sizes.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum LevelArg {
    Whole,
    Part,
    Subpart,
    All,
}

#[derive(Args, Debug)]
pub struct UpliftArgs {
    /// Geometry checkpoint (PLY).
    #[arg(long)]
    pub scene: PathBuf,
    /// Camera file (JSON).
    #[arg(long)]
    pub cameras: PathBuf,
    /// Directory of `<view_id>.fmap`, or `<view_id>_<level>.fmap` with --level.
    #[arg(long)]
    pub features: PathBuf,
    /// Feature level to uplift; each level is written to `<out>_<level>.ply`.
    #[arg(long, value_enum)]
    pub level: Option<LevelArg>,
    /// Center samples with a blending weight below this are dropped.
    #[arg(long, default_value_t = 1e-4)]
    pub occlusion_threshold: f64,
    /// Average center samples with unit weights.
    #[arg(long)]
    pub no_weighting: bool,
    /// Keep Gaussians that received no samples (with zero features).
    #[arg(long)]
    pub no_filter: bool,
    /// Accumulate views sequentially in input order.
    #[arg(long)]
    pub deterministic: bool,
    /// Uplift method: weighted, unweighted or exact-ml.
    #[arg(long, default_value = "weighted")]
    pub method: String,
    /// Output PLY.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum RenderMode {
    Color,
    Features,
}

#[derive(Args, Debug)]
pub struct RenderArgs {
    #[arg(long)]
    pub scene: PathBuf,
    #[arg(long)]
    pub cameras: PathBuf,
    /// Camera id or zero-based index (default: first camera).
    #[arg(long)]
    pub view: Option<String>,
    #[arg(long, value_enum, default_value = "color")]
    pub mode: RenderMode,
    /// `.png`, or `.fmap` for raw features.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct QueryArgs {
    /// Rendered feature map, one per level.
    #[arg(long = "feature-map")]
    pub feature_maps: Vec<PathBuf>,
    /// Semantic scene, one per level; rendered from --view of --cameras.
    #[arg(long = "scene")]
    pub scenes: Vec<PathBuf>,
    #[arg(long)]
    pub cameras: Option<PathBuf>,
    #[arg(long)]
    pub view: Option<String>,
    /// JSON array holding the query embedding.
    #[arg(long)]
    pub embedding: PathBuf,
    /// JSON file with one canonical embedding or an array of them.
    #[arg(long)]
    pub canonical: Vec<PathBuf>,
    /// `fixed[:t]` (default t = 0.5) or `dynamic[:stability]` (default 0.4).
    #[arg(long, default_value = "fixed:0.5")]
    pub protocol: String,
    #[arg(long)]
    pub out_mask: Option<PathBuf>,
    #[arg(long)]
    pub out_relevancy: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Directory of predicted `<query>.png` masks.
    #[arg(long)]
    pub pred_masks: PathBuf,
    /// Directory of ground-truth `<query>.png` masks.
    #[arg(long)]
    pub gt_masks: PathBuf,
    /// CSV with columns scene,query,level,threshold,x,y from query runs.
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    /// Scene name for rows without a predictions entry.
    #[arg(long, default_value = "")]
    pub scene: String,
    /// Output CSV (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct OracleArgs {
    /// Synthetic scene description (JSON).
    #[arg(long)]
    pub spec: PathBuf,
    /// Standard deviation of the feature noise.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    /// Ignore blending weights below this in the closed forms.
    #[arg(long, default_value_t = 0.0)]
    pub min_weight: f64,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// JSON description; flags below override its fields.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub layout: Option<String>,
    #[arg(long)]
    pub n_gaussians: Option<usize>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub views: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub height: Option<usize>,
    #[arg(long)]
    pub overlap: Option<f64>,
    #[arg(long)]
    pub hidden_fraction: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    /// Write whole/part/subpart maps instead of a single level.
    #[arg(long)]
    pub levels: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct EditArgs {
    /// Scene to copy from.
    #[arg(long)]
    pub src: PathBuf,
    /// Scene to insert into (default: an empty scene, i.e. extraction).
    #[arg(long)]
    pub dst: Option<PathBuf>,
    /// `xmin,ymin,zmin,xmax,ymax,zmax`
    #[arg(long, allow_hyphen_values = true)]
    pub select_aabb: Option<String>,
    /// JSON array query embedding; selects Gaussians above --threshold.
    #[arg(long)]
    pub select_query: Option<PathBuf>,
    #[arg(long, default_value_t = 0.9)]
    pub threshold: f64,
    /// `ax,ay,az,degrees`
    #[arg(long, allow_hyphen_values = true)]
    pub rotate: Option<String>,
    /// `x,y,z`
    #[arg(long, allow_hyphen_values = true)]
    pub translate: Option<String>,
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    /// Zero-fill features when only one scene has them.
    #[arg(long)]
    pub zero_fill: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_value = "1000")]
    pub n_gaussians: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "8")]
    pub n_views: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "16")]
    pub dims: Vec<usize>,
    #[arg(long, default_value_t = 512)]
    pub width: usize,
    #[arg(long, default_value_t = 512)]
    pub height: usize,
    #[arg(long, default_value_t = 3)]
    pub repeats: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub deterministic: bool,
    /// Output CSV (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<commands::ConsistencyError>().is_some() {
            return EXIT_CONSISTENCY;
        }
        if let Some(e) = cause.downcast_ref::<featlift::Error>() {
            if e.is_consistency() {
                return EXIT_CONSISTENCY;
            }
        }
    }
    EXIT_INPUT
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::from(EXIT_INPUT);
        }
    }
    let result = match cli.command {
        Command::Uplift(a) => commands::uplift(a),
        Command::Render(a) => commands::render(a),
        Command::Query(a) => commands::query(a),
        Command::Eval(a) => commands::eval(a),
        Command::OracleCompare(a) => commands::oracle_compare(a),
        Command::Synth(a) => commands::synth(a),
        Command::Edit(a) => commands::edit(a),
        Command::Bench(a) => commands::bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
