use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "quicci", version, about = "QUICCI descriptors, Hamming tree indexing and experiments")]
#[command(args_override_self = true)]
pub struct Cli {
    /// Master seed; a random one is chosen and printed when omitted.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads. Falls back to QUICCI_THREADS, then all cores.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// key=value file whose keys mirror the long flags. Flags win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute one descriptor per unique vertex of each mesh into a .qdf file.
    #[command(args_override_self = true)]
    Generate(GenerateArgs),
    /// Build, query and inspect a Hamming tree.
    #[command(subcommand)]
    Index(IndexCommand),
    /// Run one of the experiments.
    #[command(subcommand)]
    Experiment(ExperimentCommand),
    /// Write a directory of random toy meshes.
    #[command(args_override_self = true)]
    SynthCorpus(SynthCorpusArgs),
}

#[derive(Debug, Args)]
pub struct DescriptorArgs {
    #[arg(long, default_value_t = 64)]
    pub width: usize,
    #[arg(long, default_value_t = 64)]
    pub height: usize,
    #[arg(long, default_value_t = 0.3)]
    pub support_radius: f64,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Mesh files (.obj or .ply). Object ids follow argument order.
    #[arg(required = true)]
    pub meshes: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub descriptor: DescriptorArgs,
    /// Scale and centre each mesh into the unit sphere first.
    #[arg(long)]
    pub fit_unit_sphere: bool,
}

#[derive(Debug, Subcommand)]
pub enum IndexCommand {
    #[command(args_override_self = true)]
    Build(IndexBuildArgs),
    #[command(args_override_self = true)]
    Query(IndexQueryArgs),
    #[command(args_override_self = true)]
    Stats(IndexStatsArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum LayoutArg {
    Row,
    Column,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum CodecArg {
    None,
    Deflate,
}

#[derive(Debug, Args)]
pub struct IndexBuildArgs {
    /// Descriptor files to index; all must share one image size.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 128)]
    pub chunk_bits: usize,
    #[arg(long, default_value_t = 256)]
    pub leaf_threshold: usize,
    #[arg(long, value_enum, default_value_t = LayoutArg::Row)]
    pub layout: LayoutArg,
    #[arg(long, value_enum, default_value_t = CodecArg::Deflate)]
    pub codec: CodecArg,
}

#[derive(Debug, Args)]
pub struct IndexQueryArgs {
    #[arg(long)]
    pub index: PathBuf,
    /// Descriptor file holding the needles.
    #[arg(long)]
    pub needles: PathBuf,
    /// Record of the needle file to query.
    #[arg(long, default_value_t = 0)]
    pub needle: usize,
    /// Query every needle and prefix each row with its record number.
    #[arg(long)]
    pub all: bool,
    #[arg(long, default_value_t = 32)]
    pub k: usize,
    #[arg(long)]
    pub max_distance: Option<u32>,
    /// CSV destination; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct IndexStatsArgs {
    #[arg(long)]
    pub index: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum ExperimentCommand {
    #[command(args_override_self = true)]
    Clutterbox(ClutterboxArgs),
    #[command(args_override_self = true)]
    DistanceStudy(DistanceStudyArgs),
    #[command(args_override_self = true)]
    BenchCompare(BenchCompareArgs),
    #[command(args_override_self = true)]
    BenchGenerate(BenchGenerateArgs),
    #[command(args_override_self = true)]
    RunindexStudy(RunindexStudyArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DistanceArg {
    Hamming,
    ClutterResistant,
    WeightedHamming,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TieBreakArg {
    Favourable,
    InsertionOrder,
}

#[derive(Debug, Args)]
pub struct ClutterboxArgs {
    /// Directory of .obj/.ply meshes.
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub runs: usize,
    /// Comma-separated, strictly ascending.
    #[arg(long, default_value = "1,5,10")]
    pub object_counts: String,
    #[arg(long, default_value_t = 3.0)]
    pub cube_edge: f64,
    #[arg(long, default_value_t = 63)]
    pub width: usize,
    #[arg(long, default_value_t = 64)]
    pub height: usize,
    #[arg(long, default_value_t = 0.3)]
    pub support_radius: f64,
    #[arg(long, value_enum, default_value_t = DistanceArg::ClutterResistant)]
    pub distance: DistanceArg,
    #[arg(long, value_enum, default_value_t = TieBreakArg::Favourable)]
    pub tie_break: TieBreakArg,
    #[arg(long, default_value_t = 4096)]
    pub rank_cap: usize,
    #[arg(long)]
    pub identity_placement: bool,
    /// Samples per clutter estimate; 0 skips the heatmap.
    #[arg(long, default_value_t = 10_000)]
    pub clutter_samples: usize,
    #[arg(long, default_value_t = 20)]
    pub fraction_bins: usize,
}

#[derive(Debug, Args)]
pub struct DistanceStudyArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Use only the first N meshes of the dataset.
    #[arg(long)]
    pub objects: Option<usize>,
    #[command(flatten)]
    pub descriptor: DescriptorArgs,
    #[arg(long, default_value_t = 0.05)]
    pub sphere_radius: f64,
    #[arg(long, default_value_t = 2)]
    pub sphere_subdivisions: u32,
    #[arg(long, default_value_t = 10)]
    pub spheres_per_step: usize,
    #[arg(long, default_value_t = 500)]
    pub max_spheres: usize,
    #[arg(long, default_value_t = 100)]
    pub nominal_pairs: usize,
}

#[derive(Debug, Args)]
pub struct BenchCompareArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// Descriptor file to compare; random images when omitted.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, default_value_t = 1024)]
    pub images: usize,
    #[arg(long, default_value_t = 64)]
    pub width: usize,
    #[arg(long, default_value_t = 64)]
    pub height: usize,
    #[arg(long, default_value_t = 2.0)]
    pub seconds: f64,
}

#[derive(Debug, Args)]
pub struct BenchGenerateArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Comma-separated scene sizes in triangles.
    #[arg(long, default_value = "1000,10000,100000,1000000")]
    pub triangles: String,
    #[arg(long, default_value_t = 1000)]
    pub descriptors: usize,
    #[command(flatten)]
    pub descriptor: DescriptorArgs,
}

#[derive(Debug, Args)]
pub struct RunindexStudyArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// Descriptor file to index; a random corpus when omitted.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, default_value_t = 10_000)]
    pub corpus_size: usize,
    #[arg(long, default_value_t = 64)]
    pub width: usize,
    #[arg(long, default_value_t = 64)]
    pub height: usize,
    /// Comma-separated needle set-bit counts.
    #[arg(long, default_value = "4,8,16,32,128,512,1024,2048")]
    pub needle_bits: String,
    #[arg(long, default_value_t = 20)]
    pub needles: usize,
    #[arg(long, default_value_t = 32)]
    pub k: usize,
}

#[derive(Debug, Args)]
pub struct SynthCorpusArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 50)]
    pub count: usize,
}
