//! Boundary-accurate segmentation toolkit: mask metrics with
//! distance-transform morphology, shape complexity, seeded mask
//! perturbations, point-wise refinement, a recursive decoder schedule and a
//! two-stage patch pipeline.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the precision.

pub mod complexity;
pub mod error;
pub mod hierpr;
pub mod mask;
pub mod metrics;
pub mod morphology;
pub mod perturb;
pub mod pipeline;
pub mod report;
pub mod resample;
pub mod scalar;
pub mod schedule;
pub mod shapes;

pub use complexity::{c_ipq, dataset_complexity, ComplexityResult, DatasetComplexity};
pub use error::{BoxError, Error, Result};
pub use hierpr::{hierpr_step, select_points, uncertainty, FeatureMap, MlpWeights, PointSet, StepMode, UncertaintyMap};
pub use mask::{binarize, load_image, load_mask, load_scoremap, BinaryMask, RgbImage, ScoreMap};
pub use metrics::{evaluate, iou, mae, mba, mq, s_measure, MeticulosityParams, MetricReport};
pub use morphology::{band_radii, dilate, edt, erode, BandSet, DistanceField};
pub use perturb::{PerturbKind, PerturbSpec};
pub use pipeline::{composite_green, plan_patches, run_pipeline, PipelineConfig, Refiner};
pub use report::{evaluate_batch, pair_dataset, write_report, BatchReport, DatasetPairing};
pub use resample::{resize_mask, resize_score};
pub use scalar::Scalar;
pub use schedule::{run_forward, total_loss, BlockExecutor, DecoderSchedule, LossWeights, Violation};

pub type ScoreMapF32 = ScoreMap<f32>;
pub type ScoreMapF64 = ScoreMap<f64>;
pub type MetricReportF32 = MetricReport<f32>;
pub type MetricReportF64 = MetricReport<f64>;
pub type FeatureMapF32 = FeatureMap<f32>;
pub type FeatureMapF64 = FeatureMap<f64>;
pub type MlpWeightsF32 = MlpWeights<f32>;
pub type MlpWeightsF64 = MlpWeights<f64>;
