mod args;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::anyhow;
use clap::Parser;
use serde_json::json;

use mos_core::hierpr::{hierpr_step, FeatureMap, MlpWeights, StepMode, UncertaintyMap};
use mos_core::mask::{load_image, load_mask, load_scoremap, save_image, save_mask, save_scoremap, ScoreMap};
use mos_core::metrics::{iou, MeticulosityParams};
use mos_core::perturb::{PerturbKind, PerturbSpec};
use mos_core::pipeline::{composite_green, run_pipeline, HierprRefiner, IdentityRefiner, PipelineConfig};
use mos_core::report::{evaluate_batch, pair_dataset, write_report, BatchReport};
use mos_core::resample::resize_score;
use mos_core::schedule::DecoderSchedule;
use mos_core::{dataset_complexity, BoxError, DatasetComplexity};

use args::{Cli, Command, Kind, RefinerKind};

/// Failure with its exit status.
enum Failure {
    Usage(anyhow::Error),
    Data(anyhow::Error),
    Internal(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
            Failure::Internal(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(e) | Failure::Data(e) | Failure::Internal(e) => write!(f, "{e:#}"),
        }
    }
}

impl From<mos_core::Error> for Failure {
    fn from(e: mos_core::Error) -> Self {
        if e.is_data_error() {
            Failure::Data(e.into())
        } else {
            Failure::Internal(e.into())
        }
    }
}

type Outcome<T = ()> = Result<T, Failure>;

trait Classify<T> {
    /// Reading an input failed: bad data.
    fn input(self) -> Outcome<T>;
    /// Writing an output failed: environment problem.
    fn output(self) -> Outcome<T>;
}

impl<T> Classify<T> for mos_core::Result<T> {
    fn input(self) -> Outcome<T> {
        self.map_err(|e| Failure::Data(e.into()))
    }

    fn output(self) -> Outcome<T> {
        self.map_err(|e| Failure::Internal(e.into()))
    }
}

fn usage(msg: impl fmt::Display) -> Failure {
    Failure::Usage(anyhow!("{msg}"))
}

fn write_text(path: &Path, text: &str) -> Outcome {
    std::fs::write(path, text).map_err(|e| Failure::Internal(anyhow!("{}: {e}", path.display())))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("mos: error: {f}");
            ExitCode::from(f.code())
        }
    }
}

fn run(cmd: Command) -> Outcome {
    match cmd {
        Command::Eval(a) => eval(a),
        Command::Complexity(a) => complexity(a),
        Command::Perturb(a) => perturb(a),
        Command::HierprRefine(a) => hierpr_refine(a),
        Command::ScheduleValidate(a) => schedule_validate(a),
        Command::PipelineRun(a) => pipeline_run(a),
        Command::Composite(a) => composite(a),
    }
}

fn eval(a: args::EvalArgs) -> Outcome {
    let params = MeticulosityParams::new(a.bands).map_err(usage)?;
    let pairing = pair_dataset(&a.pred, &a.gt).input()?;
    for w in &pairing.warnings {
        eprintln!("mos: warning: {w}");
    }
    let report: BatchReport = evaluate_batch(&pairing, params);
    for s in &report.skipped {
        eprintln!("mos: skipped {}: {}", s.stem, s.reason);
    }
    write_report(&report, &a.csv, &a.json).output()?;
    match report.aggregate {
        Some(m) => {
            println!(
                "evaluated {} of {} pairs: mae {:.6} sm {:.6} iou {:.6} mba {:.6} mq {:.6}",
                report.images.len(),
                pairing.pairs.len(),
                m.mae,
                m.sm,
                m.iou,
                m.mba,
                m.mq
            );
            Ok(())
        }
        None => Err(Failure::Data(anyhow!("no pair could be evaluated"))),
    }
}

fn list_files(dir: &Path) -> Outcome<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Failure::Data(anyhow!("{}: {e}", dir.display())))?;
    let mut files = Vec::new();
    for e in entries {
        let p = e.map_err(|e| Failure::Data(anyhow!("{}: {e}", dir.display())))?.path();
        let hidden = p
            .file_name()
            .and_then(|n| n.to_str())
            .is_none_or(|n| n.starts_with('.'));
        if p.is_file() && !hidden {
            files.push(p);
        }
    }
    files.sort();
    Ok(files)
}

fn complexity(a: args::ComplexityArgs) -> Outcome {
    let files = list_files(&a.gt)?;
    let result: DatasetComplexity = dataset_complexity(&files);
    for s in &result.skipped {
        eprintln!("mos: skipped {}: {}", s.path.display(), s.reason);
    }
    let text = serde_json::to_string_pretty(&result).map_err(|e| Failure::Internal(e.into()))?;
    write_text(&a.json, &(text + "\n"))?;
    match result.mean_c_ipq {
        Some(m) => {
            println!("mean c_ipq {m:.6} over {} masks", result.count);
            Ok(())
        }
        None => Err(Failure::Data(anyhow!("no usable mask in {}", a.gt.display()))),
    }
}

fn sidecar_path(out: &Path) -> PathBuf {
    out.with_extension("json")
}

fn perturb(a: args::PerturbArgs) -> Outcome {
    let spec = PerturbSpec {
        kind: match a.kind {
            Kind::Erode => PerturbKind::Erode,
            Kind::Dilate => PerturbKind::Dilate,
            Kind::ChunkRemoval => PerturbKind::ChunkRemoval,
            Kind::IouTarget => PerturbKind::IouTarget,
        },
        radius: a.radius,
        chunk_diameter: a.chunk_diameter,
        chunk_count: a.chunk_count,
        iou_range: (a.iou_min, a.iou_max),
        seed: a.seed,
    };
    spec.validate().map_err(usage)?;
    let gt = load_mask(&a.gt).input()?;
    let out = spec.apply(&gt)?;
    let achieved: f64 = iou(&out, &gt)?;
    save_mask(&out, &a.out).output()?;
    let side = json!({
        "source": a.gt,
        "spec": spec,
        "achieved_iou": achieved,
    });
    write_text(&sidecar_path(&a.out), &(side.to_string() + "\n"))?;
    println!("achieved iou {achieved:.6}");
    Ok(())
}

fn uncertainty_image(u: &UncertaintyMap) -> mos_core::Result<ScoreMap> {
    ScoreMap::new(u.width(), u.height(), u.values().iter().map(|v| v * 2.0).collect())
}

fn hierpr_refine(a: args::HierprArgs) -> Outcome {
    if !(a.fraction > 0.0 && a.fraction <= 1.0) {
        return Err(usage(format!("--fraction {} must lie in (0, 1]", a.fraction)));
    }
    let coarse: ScoreMap = load_scoremap(&a.coarse).input()?;
    let features = FeatureMap::load(&a.features).input()?;
    let weights = MlpWeights::load(&a.weights).input()?;
    let mode = if a.same_resolution {
        StepMode::SameResolution
    } else {
        StepMode::Upsample
    };
    let step = hierpr_step(&coarse, &features, &weights, a.fraction, mode)?;
    save_scoremap(&step.prediction, &a.out).output()?;
    if let Some(p) = &a.uncertainty_out {
        save_scoremap(&uncertainty_image(&step.uncertainty)?, p).output()?;
    }
    let (w, h) = step.prediction.dims();
    println!("refined {} of {} pixels at {w}x{h}", step.points.len(), w * h);
    Ok(())
}

fn schedule_validate(a: args::ScheduleArgs) -> Outcome {
    let schedule = match &a.schedule {
        Some(p) => DecoderSchedule::load(p).input()?,
        None => DecoderSchedule::canonical(),
    };
    if let Some(p) = &a.emit {
        write_text(p, &(schedule.to_json().output()? + "\n"))?;
    }
    let violations = schedule.validate();
    if violations.is_empty() {
        println!("schedule valid: {} blocks", schedule.blocks.len());
        return Ok(());
    }
    for v in &violations {
        println!("{v}");
    }
    Err(Failure::Data(anyhow!("{} violation(s)", violations.len())))
}

fn pipeline_run(a: args::PipelineArgs) -> Outcome {
    let cfg = PipelineConfig {
        low_res_side: a.low_res,
        patch_side: a.patch,
        patch_stride: a.stride,
        threshold: a.threshold,
    };
    cfg.validate().map_err(usage)?;
    let image = load_image(&a.image).input()?;
    let coarse: ScoreMap = load_scoremap(&a.coarse).input()?;
    let source = |small: &mos_core::RgbImage| -> Result<ScoreMap, BoxError> {
        Ok(resize_score(&coarse, small.width() as usize, small.height() as usize)?)
    };
    let mask = match a.refiner {
        RefinerKind::Identity => {
            if a.weights.is_some() {
                eprintln!("mos: warning: --weights ignored by the identity refiner");
            }
            run_pipeline(&image, source, &IdentityRefiner, &cfg)?
        }
        RefinerKind::Hierpr => {
            let path = a
                .weights
                .as_ref()
                .ok_or_else(|| usage("--refiner hierpr requires --weights"))?;
            let refiner = HierprRefiner::new(MlpWeights::load(path).input()?)?;
            run_pipeline(&image, source, &refiner, &cfg)?
        }
    };
    save_mask(&mask, &a.out_mask).output()?;
    if let Some(p) = &a.out_composite {
        save_image(&composite_green(&image, &mask)?, p).output()?;
    }
    println!("foreground {} of {} pixels", mask.count_ones(), mask.len());
    Ok(())
}

fn composite(a: args::CompositeArgs) -> Outcome {
    let image = load_image(&a.image).input()?;
    let mask = load_mask(&a.mask).input()?;
    save_image(&composite_green(&image, &mask)?, &a.out).output()
}
