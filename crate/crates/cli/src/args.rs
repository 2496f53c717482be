use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "mos",
    version,
    about = "Boundary-accurate segmentation evaluation and refinement tools"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score a directory of predictions against ground truths.
    Eval(EvalArgs),
    /// Boundary complexity of every mask in a directory.
    Complexity(ComplexityArgs),
    /// Write a seeded perturbation of a ground-truth mask.
    Perturb(PerturbArgs),
    /// One point-wise refinement step on a coarse score map.
    HierprRefine(HierprArgs),
    /// Check a decoder schedule (the built-in one by default).
    ScheduleValidate(ScheduleArgs),
    /// Coarse-then-patch inference on one image.
    PipelineRun(PipelineArgs),
    /// Paint the background of an image green.
    Composite(CompositeArgs),
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, value_name = "DIR")]
    pub pred: PathBuf,
    #[arg(long, value_name = "DIR")]
    pub gt: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub csv: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub json: PathBuf,
    /// Number of boundary bands.
    #[arg(long, default_value_t = 5)]
    pub bands: usize,
}

#[derive(Debug, Args)]
pub struct ComplexityArgs {
    #[arg(long, value_name = "DIR")]
    pub gt: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub json: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    Erode,
    Dilate,
    ChunkRemoval,
    IouTarget,
}

#[derive(Debug, Args)]
pub struct PerturbArgs {
    #[arg(long, value_name = "PATH")]
    pub gt: PathBuf,
    /// Output PNG; a JSON sidecar is written next to it.
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    #[arg(long, value_enum)]
    pub kind: Kind,
    #[arg(long, default_value_t = 2)]
    pub radius: u32,
    #[arg(long, default_value_t = 32)]
    pub chunk_diameter: u32,
    #[arg(long, default_value_t = 1)]
    pub chunk_count: usize,
    #[arg(long, default_value_t = 0.8)]
    pub iou_min: f64,
    #[arg(long, default_value_t = 1.0)]
    pub iou_max: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct HierprArgs {
    /// Coarse score map (8-bit gray).
    #[arg(long, value_name = "PATH")]
    pub coarse: PathBuf,
    /// Feature tensor text file.
    #[arg(long, value_name = "PATH")]
    pub features: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub weights: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    pub fraction: f64,
    /// Refine in place instead of doubling the resolution.
    #[arg(long)]
    pub same_resolution: bool,
    /// Also write the uncertainty map, scaled so 0.5 is white.
    #[arg(long, value_name = "PATH")]
    pub uncertainty_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScheduleArgs {
    #[arg(long, value_name = "PATH")]
    pub schedule: Option<PathBuf>,
    /// Write the schedule that was checked as JSON.
    #[arg(long, value_name = "PATH")]
    pub emit: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum RefinerKind {
    Identity,
    Hierpr,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    #[arg(long, value_name = "PATH")]
    pub image: PathBuf,
    /// Coarse score map of any size; it is resampled to the low-res square.
    #[arg(long, value_name = "PATH")]
    pub coarse: PathBuf,
    #[arg(long, value_enum, default_value_t = RefinerKind::Identity)]
    pub refiner: RefinerKind,
    /// Weight file for the hierpr refiner (3 feature channels).
    #[arg(long, value_name = "PATH")]
    pub weights: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub out_mask: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub out_composite: Option<PathBuf>,
    #[arg(long, default_value_t = 336)]
    pub low_res: usize,
    #[arg(long, default_value_t = 224)]
    pub patch: usize,
    #[arg(long, default_value_t = 112)]
    pub stride: usize,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
}

#[derive(Debug, Args)]
pub struct CompositeArgs {
    #[arg(long, value_name = "PATH")]
    pub image: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub mask: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
}
