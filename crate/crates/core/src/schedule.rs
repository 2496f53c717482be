//! Recursive decoder topology, its validator, the multi-term training loss
//! and a forward pass over pluggable block implementations.
//!
//! Blocks are named `S{n}_{i}` for input stride `n` and cycle `i`. The
//! initial block `S8_0` turns the stride-8 prediction into a stride-4 one;
//! three cycles then recover strides 4, 2 and 1.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{check_dims, BoxError, Error, Result};
use crate::hierpr::{average, hierpr_step, uncertainty, FeatureMap, MlpWeights, StepMode, UncertaintyMap};
use crate::mask::{BinaryMask, ScoreMap};
use crate::resample::{resize_mask, resize_score};
use crate::scalar::Scalar;

pub const BLOCK_COUNT: usize = 7;
pub const DEFAULT_GRADIENT_WEIGHT: f64 = 5.0;
pub const BCE_EPSILON: f64 = 1e-7;
pub const MASK_ENCODER_GROUP: &str = "mask-encoder";

const CYCLE_END_STRIDES: [u32; 3] = [4, 2, 1];

/// Share group for HierPR blocks of a given input stride.
pub fn hierpr_group(input_stride: u32) -> String {
    format!("hierpr-s{input_stride}")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockSpec {
    pub name: String,
    pub input_stride: u32,
    pub output_stride: u32,
    pub cycle: u32,
    pub share_group: String,
}

impl BlockSpec {
    pub fn new(input_stride: u32, cycle: u32) -> Self {
        Self {
            name: format!("S{input_stride}_{cycle}"),
            input_stride,
            output_stride: input_stride / 2,
            cycle,
            share_group: hierpr_group(input_stride),
        }
    }
}

/// Weights of the BCE, L1 and L2 terms for one block.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossTriple {
    pub bce: f64,
    pub l1: f64,
    pub l2: f64,
}

impl LossTriple {
    pub const fn new(bce: f64, l1: f64, l2: f64) -> Self {
        Self { bce, l1, l2 }
    }

    fn is_valid(&self) -> bool {
        [self.bce, self.l1, self.l2].iter().all(|w| w.is_finite() && *w >= 0.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub blocks: BTreeMap<String, LossTriple>,
    pub gradient_weight: f64,
}

impl LossWeights {
    pub fn reference() -> Self {
        let table = [
            ("S8_0", LossTriple::new(1.0, 1.0, 1.0)),
            ("S8_1", LossTriple::new(1.0, 1.0, 1.0)),
            ("S8_2", LossTriple::new(1.0, 1.0, 1.0)),
            ("S8_3", LossTriple::new(1.0, 1.0, 1.0)),
            ("S4_2", LossTriple::new(0.5, 0.25, 0.25)),
            ("S4_3", LossTriple::new(0.5, 0.25, 0.25)),
            ("S2_3", LossTriple::new(0.0, 1.0, 1.0)),
        ];
        Self {
            blocks: table.iter().map(|(n, t)| (n.to_string(), *t)).collect(),
            gradient_weight: DEFAULT_GRADIENT_WEIGHT,
        }
    }

    pub fn get(&self, block: &str) -> Option<LossTriple> {
        self.blocks.get(block).copied()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaskEncoder {
    pub share_group: String,
    /// Initial prediction followed by each cycle's final block.
    pub inputs: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecoderSchedule {
    /// Execution order: the initial block, then each cycle in turn.
    pub blocks: Vec<BlockSpec>,
    pub init_block: String,
    pub cycles: Vec<Vec<String>>,
    pub mask_encoder: MaskEncoder,
    pub loss: LossWeights,
}

impl Default for DecoderSchedule {
    fn default() -> Self {
        Self::canonical()
    }
}

impl DecoderSchedule {
    pub fn canonical() -> Self {
        let init = BlockSpec::new(8, 0);
        let cycles: Vec<Vec<BlockSpec>> = (1..=3u32)
            .map(|c| (0..c).map(|k| BlockSpec::new(8 >> k, c)).collect())
            .collect();
        let mut blocks = vec![init.clone()];
        blocks.extend(cycles.iter().flatten().cloned());
        let mut inputs = vec![init.name.clone()];
        inputs.extend(cycles.iter().map(|c| c.last().expect("non-empty cycle").name.clone()));
        Self {
            init_block: init.name,
            cycles: cycles
                .iter()
                .map(|c| c.iter().map(|b| b.name.clone()).collect())
                .collect(),
            blocks,
            mask_encoder: MaskEncoder {
                share_group: MASK_ENCODER_GROUP.to_string(),
                inputs,
            },
            loss: LossWeights::reference(),
        }
    }

    pub fn block(&self, name: &str) -> Option<&BlockSpec> {
        self.blocks.iter().find(|b| b.name == name)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_json(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    /// Every broken invariant, in a stable order. Empty means valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut v = Vec::new();
        let reference = Self::canonical();

        if self.blocks.len() != BLOCK_COUNT {
            v.push(Violation::BlockCount(self.blocks.len()));
        }
        let mut seen = HashSet::new();
        for b in &self.blocks {
            if !seen.insert(b.name.as_str()) {
                v.push(Violation::DuplicateBlock(b.name.clone()));
            }
            if b.name != format!("S{}_{}", b.input_stride, b.cycle) {
                v.push(Violation::NameMismatch {
                    block: b.name.clone(),
                    input_stride: b.input_stride,
                    cycle: b.cycle,
                });
            }
            if ![8, 4, 2].contains(&b.input_stride) {
                v.push(Violation::IllegalStride {
                    block: b.name.clone(),
                    stride: b.input_stride,
                });
            }
            if b.output_stride * 2 != b.input_stride {
                v.push(Violation::StrideNotHalved {
                    block: b.name.clone(),
                    input: b.input_stride,
                    output: b.output_stride,
                });
            }
            if b.share_group != hierpr_group(b.input_stride) {
                v.push(Violation::ShareGroup {
                    block: b.name.clone(),
                    expected: hierpr_group(b.input_stride),
                    found: b.share_group.clone(),
                });
            }
        }

        let known = |name: &str, v: &mut Vec<Violation>, place: &str| {
            if self.block(name).is_none() {
                v.push(Violation::UnknownBlock {
                    block: name.to_string(),
                    place: place.to_string(),
                });
            }
        };

        known(&self.init_block, &mut v, "init_block");
        if let Some(b) = self.block(&self.init_block) {
            if (b.input_stride, b.output_stride, b.cycle) != (8, 4, 0) {
                v.push(Violation::InitBlock(b.name.clone()));
            }
        }

        if self.cycles.len() != CYCLE_END_STRIDES.len() {
            v.push(Violation::CycleCount(self.cycles.len()));
        }
        for (i, cycle) in self.cycles.iter().enumerate() {
            let c = i as u32 + 1;
            if cycle.len() != c as usize {
                v.push(Violation::CycleLength {
                    cycle: c,
                    expected: c as usize,
                    found: cycle.len(),
                });
            }
            let specs: Vec<&BlockSpec> = cycle
                .iter()
                .filter_map(|n| {
                    known(n, &mut v, &format!("cycle {c}"));
                    self.block(n)
                })
                .collect();
            for b in &specs {
                if b.cycle != c {
                    v.push(Violation::CycleAssignment {
                        block: b.name.clone(),
                        listed: c,
                        declared: b.cycle,
                    });
                }
            }
            if let Some(first) = specs.first() {
                if first.input_stride != 8 {
                    v.push(Violation::CycleStart {
                        cycle: c,
                        stride: first.input_stride,
                    });
                }
            }
            if specs.windows(2).any(|w| w[1].input_stride != w[0].output_stride) {
                v.push(Violation::ResolutionOrder(c));
            }
            if let (Some(last), Some(expected)) = (specs.last(), CYCLE_END_STRIDES.get(i)) {
                if last.output_stride != *expected {
                    v.push(Violation::CycleEnd {
                        cycle: c,
                        expected: *expected,
                        found: last.output_stride,
                    });
                }
            }
        }

        let mut order = vec![self.init_block.clone()];
        order.extend(self.cycles.iter().flatten().cloned());
        let actual: Vec<String> = self.blocks.iter().map(|b| b.name.clone()).collect();
        if actual != order {
            v.push(Violation::BlockOrder);
        }
        let mut listed = HashSet::new();
        for n in &order {
            if !listed.insert(n.as_str()) {
                v.push(Violation::DuplicateBlock(n.clone()));
            }
        }
        for b in &self.blocks {
            if !listed.contains(b.name.as_str()) {
                v.push(Violation::Unscheduled(b.name.clone()));
            }
        }

        if self.mask_encoder.share_group != MASK_ENCODER_GROUP {
            v.push(Violation::MaskEncoderGroup(self.mask_encoder.share_group.clone()));
        }
        let mut expected_inputs = vec![self.init_block.clone()];
        expected_inputs.extend(self.cycles.iter().filter_map(|c| c.last().cloned()));
        if self.mask_encoder.inputs != expected_inputs {
            v.push(Violation::MaskEncoderInputs {
                expected: expected_inputs,
                found: self.mask_encoder.inputs.clone(),
            });
        }

        for b in &self.blocks {
            match self.loss.get(&b.name) {
                None => v.push(Violation::MissingLoss(b.name.clone())),
                Some(t) if !t.is_valid() => v.push(Violation::InvalidLoss(b.name.clone())),
                Some(t) => {
                    if let Some(r) = reference.loss.get(&b.name) {
                        if t != r {
                            v.push(Violation::LossTable {
                                block: b.name.clone(),
                                expected: r,
                                found: t,
                            });
                        }
                    }
                }
            }
        }
        for name in self.loss.blocks.keys() {
            if self.block(name).is_none() {
                v.push(Violation::UnknownBlock {
                    block: name.clone(),
                    place: "loss table".into(),
                });
            }
        }
        let g = self.loss.gradient_weight;
        if g != reference.loss.gradient_weight {
            v.push(Violation::GradientWeight(g));
        }
        v
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    BlockCount(usize),
    DuplicateBlock(String),
    NameMismatch {
        block: String,
        input_stride: u32,
        cycle: u32,
    },
    IllegalStride {
        block: String,
        stride: u32,
    },
    StrideNotHalved {
        block: String,
        input: u32,
        output: u32,
    },
    ShareGroup {
        block: String,
        expected: String,
        found: String,
    },
    UnknownBlock {
        block: String,
        place: String,
    },
    InitBlock(String),
    CycleCount(usize),
    CycleLength {
        cycle: u32,
        expected: usize,
        found: usize,
    },
    CycleAssignment {
        block: String,
        listed: u32,
        declared: u32,
    },
    CycleStart {
        cycle: u32,
        stride: u32,
    },
    ResolutionOrder(u32),
    CycleEnd {
        cycle: u32,
        expected: u32,
        found: u32,
    },
    BlockOrder,
    Unscheduled(String),
    MaskEncoderGroup(String),
    MaskEncoderInputs {
        expected: Vec<String>,
        found: Vec<String>,
    },
    MissingLoss(String),
    InvalidLoss(String),
    LossTable {
        block: String,
        expected: LossTriple,
        found: LossTriple,
    },
    GradientWeight(f64),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Violation::*;
        match self {
            BlockCount(n) => write!(f, "block count ≠ {BLOCK_COUNT} (found {n})"),
            DuplicateBlock(b) => write!(f, "block {b} appears more than once"),
            NameMismatch {
                block,
                input_stride,
                cycle,
            } => {
                write!(
                    f,
                    "block {block} does not match input stride {input_stride} and cycle {cycle}"
                )
            }
            IllegalStride { block, stride } => write!(f, "block {block} has illegal input stride {stride}"),
            StrideNotHalved { block, input, output } => {
                write!(
                    f,
                    "block {block} maps stride {input} to {output}; refining blocks halve the stride"
                )
            }
            ShareGroup { block, expected, found } => {
                write!(f, "block {block} is in share group {found:?}, expected {expected:?}")
            }
            UnknownBlock { block, place } => write!(f, "{place} references unknown block {block}"),
            InitBlock(b) => write!(f, "initial block {b} must map stride 8 to 4 in cycle 0"),
            CycleCount(n) => write!(f, "expected 3 cycles, found {n}"),
            CycleLength { cycle, expected, found } => {
                write!(f, "cycle {cycle} has {found} blocks, expected {expected}")
            }
            CycleAssignment {
                block,
                listed,
                declared,
            } => {
                write!(
                    f,
                    "block {block} is listed in cycle {listed} but declares cycle {declared}"
                )
            }
            CycleStart { cycle, stride } => write!(f, "cycle {cycle} starts at stride {stride}, expected 8"),
            ResolutionOrder(c) => write!(f, "non-decreasing resolution within cycle {c}"),
            CycleEnd { cycle, expected, found } => {
                write!(f, "cycle {cycle} ends at stride {found}, expected {expected}")
            }
            BlockOrder => write!(f, "block list is not in execution order"),
            Unscheduled(b) => write!(f, "block {b} is not scheduled in any cycle"),
            MaskEncoderGroup(g) => write!(f, "mask encoder share group {g:?}, expected {MASK_ENCODER_GROUP:?}"),
            MaskEncoderInputs { expected, found } => {
                write!(f, "mask encoder inputs {found:?}, expected {expected:?}")
            }
            MissingLoss(b) => write!(f, "no loss weights for block {b}"),
            InvalidLoss(b) => write!(f, "loss weights for block {b} must be finite and non-negative"),
            LossTable { block, expected, found } => write!(
                f,
                "loss weights for {block} are ({}, {}, {}), expected ({}, {}, {})",
                found.bce, found.l1, found.l2, expected.bce, expected.l1, expected.l2
            ),
            GradientWeight(g) => write!(f, "gradient weight {g}, expected {DEFAULT_GRADIENT_WEIGHT}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BlockLoss {
    pub block: String,
    pub bce: f64,
    pub l1: f64,
    pub l2: f64,
    /// `w_b·bce + w_1·l1 + w_2·l2`.
    pub weighted: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LossBreakdown {
    pub blocks: Vec<BlockLoss>,
    pub gradient: f64,
    pub weighted_gradient: f64,
    pub total: f64,
}

/// Mean binary cross entropy, L1 and L2 between a prediction and a mask.
pub fn pixel_losses<T: Scalar>(pred: &ScoreMap<T>, gt: &BinaryMask) -> Result<(f64, f64, f64)> {
    check_dims(gt.dims(), pred.dims())?;
    let (mut bce, mut l1, mut l2) = (0.0, 0.0, 0.0);
    for (p, g) in pred.values().iter().zip(gt.values()) {
        let p = p.to_f64_lossy();
        let g = if *g { 1.0 } else { 0.0 };
        let pc = p.clamp(BCE_EPSILON, 1.0 - BCE_EPSILON);
        bce -= g * pc.ln() + (1.0 - g) * (1.0 - pc).ln();
        let d = (p - g).abs();
        l1 += d;
        l2 += d * d;
    }
    let n = pred.len() as f64;
    Ok((bce / n, l1 / n, l2 / n))
}

/// Mean absolute difference between forward-difference gradients, pooled
/// over both axes. Zero when the map is a single pixel.
pub fn gradient_loss<T: Scalar>(pred: &ScoreMap<T>, gt: &BinaryMask) -> Result<f64> {
    check_dims(gt.dims(), pred.dims())?;
    let (w, h) = pred.dims();
    let p = |x, y| pred.get(x, y).to_f64_lossy();
    let g = |x, y| if gt.get(x, y) { 1.0 } else { 0.0 };
    let (mut sum, mut count) = (0.0, 0usize);
    for y in 0..h {
        for x in 0..w {
            if x + 1 < w {
                sum += ((p(x + 1, y) - p(x, y)) - (g(x + 1, y) - g(x, y))).abs();
                count += 1;
            }
            if y + 1 < h {
                sum += ((p(x, y + 1) - p(x, y)) - (g(x, y + 1) - g(x, y))).abs();
                count += 1;
            }
        }
    }
    Ok(if count == 0 { 0.0 } else { sum / count as f64 })
}

/// Ground truths at the given resolutions by nearest-neighbour resampling.
pub fn gt_pyramid(gt: &BinaryMask, dims: &[(usize, usize)]) -> Result<Vec<BinaryMask>> {
    let mut out: Vec<BinaryMask> = Vec::new();
    for &(w, h) in dims {
        if !out.iter().any(|m| m.dims() == (w, h)) {
            out.push(resize_mask(gt, w, h)?);
        }
    }
    Ok(out)
}

/// Weighted loss over named block predictions. Each prediction is paired
/// with the ground truth of the same size; the last prediction also carries
/// the gradient term.
pub fn total_loss<T: Scalar>(
    preds: &[(&str, &ScoreMap<T>)],
    gts: &[BinaryMask],
    weights: &LossWeights,
) -> Result<LossBreakdown> {
    let find_gt = |p: &ScoreMap<T>| {
        gts.iter()
            .find(|g| g.dims() == p.dims())
            .ok_or(Error::DimensionMismatch {
                expected: gts.first().map_or((0, 0), |g| g.dims()),
                found: p.dims(),
            })
    };
    let mut blocks = Vec::with_capacity(preds.len());
    for (name, pred) in preds {
        let t = weights
            .get(name)
            .ok_or_else(|| Error::InvalidParameter(format!("no loss weights for block {name}")))?;
        let (bce, l1, l2) = pixel_losses(pred, find_gt(pred)?)?;
        blocks.push(BlockLoss {
            block: name.to_string(),
            bce,
            l1,
            l2,
            weighted: t.bce * bce + t.l1 * l1 + t.l2 * l2,
        });
    }
    let gradient = match preds.last() {
        Some((_, p)) => gradient_loss(p, find_gt(p)?)?,
        None => 0.0,
    };
    let weighted_gradient = weights.gradient_weight * gradient;
    let total = blocks.iter().map(|b| b.weighted).sum::<f64>() + weighted_gradient;
    Ok(LossBreakdown {
        blocks,
        gradient,
        weighted_gradient,
        total,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlockOutput<T = f64> {
    pub prediction: ScoreMap<T>,
    pub uncertainty: UncertaintyMap<T>,
}

/// Implementation of the decoder blocks and the mask encoder.
pub trait BlockExecutor<T: Scalar> {
    /// Refines `coarse` by one block. `guidance` is the mask-encoder output
    /// of the previous cycle and is only given to a cycle's first block.
    fn refine(
        &self,
        block: &BlockSpec,
        coarse: &ScoreMap<T>,
        guidance: Option<&ScoreMap<T>>,
    ) -> std::result::Result<BlockOutput<T>, BoxError>;

    /// Encodes the concatenated predictions to a `width × height` map.
    fn encode_masks(
        &self,
        inputs: &[&ScoreMap<T>],
        width: usize,
        height: usize,
    ) -> std::result::Result<ScoreMap<T>, BoxError>;

    /// Optional second-branch prediction at the resolution of `previous`,
    /// averaged with it before the next block in the same cycle.
    fn deconv_prediction(&self, _block: &BlockSpec, _previous: &ScoreMap<T>) -> Option<ScoreMap<T>> {
        None
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ForwardOutput<T = f64> {
    /// One entry per block in execution order.
    pub blocks: Vec<(String, BlockOutput<T>)>,
    /// Channel count fed to the mask encoder after each cycle.
    pub encoder_channels: Vec<usize>,
}

impl<T: Scalar> ForwardOutput<T> {
    pub fn get(&self, name: &str) -> Option<&BlockOutput<T>> {
        self.blocks.iter().find(|(n, _)| n == name).map(|(_, o)| o)
    }

    pub fn final_prediction(&self) -> &ScoreMap<T> {
        &self.blocks.last().expect("forward pass ran").1.prediction
    }
}

/// Runs every block of a valid schedule on the stride-8 prediction `init`.
pub fn run_forward<T: Scalar, E: BlockExecutor<T> + ?Sized>(
    schedule: &DecoderSchedule,
    executor: &E,
    init: &ScoreMap<T>,
) -> Result<ForwardOutput<T>> {
    let violations = schedule.validate();
    if !violations.is_empty() {
        let list: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
        return Err(Error::InvalidParameter(format!(
            "invalid schedule: {}",
            list.join("; ")
        )));
    }
    let spec = |n: &str| schedule.block(n).expect("validated");
    let run = |b: &BlockSpec, coarse: &ScoreMap<T>, guidance: Option<&ScoreMap<T>>| {
        executor.refine(b, coarse, guidance).map_err(|source| Error::Executor {
            block: b.name.clone(),
            source,
        })
    };

    let mut out = ForwardOutput {
        blocks: Vec::with_capacity(BLOCK_COUNT),
        encoder_channels: Vec::with_capacity(schedule.cycles.len()),
    };
    let first = spec(&schedule.init_block);
    out.blocks.push((first.name.clone(), run(first, init, None)?));

    let mut guidance: Option<ScoreMap<T>> = None;
    for cycle in &schedule.cycles {
        let mut previous: Option<ScoreMap<T>> = None;
        for name in cycle {
            let b = spec(name);
            let result = match previous.take() {
                None => run(b, init, guidance.as_ref())?,
                Some(prev) => {
                    let coarse = match executor.deconv_prediction(b, &prev) {
                        Some(d) => average(&prev, &d)?,
                        None => prev,
                    };
                    run(b, &coarse, None)?
                }
            };
            previous = Some(result.prediction.clone());
            out.blocks.push((b.name.clone(), result));
        }
        let inputs: Vec<&ScoreMap<T>> = schedule
            .mask_encoder
            .inputs
            .iter()
            .filter_map(|n| out.get(n).map(|o| &o.prediction))
            .collect();
        let channels = inputs.len();
        let encoded = executor
            .encode_masks(&inputs, init.width(), init.height())
            .map_err(|source| Error::Executor {
                block: schedule.mask_encoder.share_group.clone(),
                source,
            })?;
        out.encoder_channels.push(channels);
        guidance = Some(encoded);
    }
    Ok(out)
}

/// Mean of the inputs after bilinear resizing to `width × height`.
pub fn mean_encoding<T: Scalar>(inputs: &[&ScoreMap<T>], width: usize, height: usize) -> Result<ScoreMap<T>> {
    if inputs.is_empty() {
        return Err(Error::InvalidParameter("mask encoder given no inputs".into()));
    }
    let mut acc = vec![0.0f64; width * height];
    for m in inputs {
        for (a, v) in acc.iter_mut().zip(resize_score(m, width, height)?.values()) {
            *a += v.to_f64_lossy();
        }
    }
    let n = inputs.len() as f64;
    Ok(ScoreMap::from_raw(
        width,
        height,
        acc.into_iter().map(|a| T::of(a / n)).collect(),
    ))
}

/// Blocks that only upsample 2× and ignore guidance.
#[derive(Clone, Copy, Debug, Default)]
pub struct IdentityExecutor;

impl<T: Scalar> BlockExecutor<T> for IdentityExecutor {
    fn refine(
        &self,
        _block: &BlockSpec,
        coarse: &ScoreMap<T>,
        _guidance: Option<&ScoreMap<T>>,
    ) -> std::result::Result<BlockOutput<T>, BoxError> {
        let prediction = resize_score(coarse, coarse.width() * 2, coarse.height() * 2)?;
        Ok(BlockOutput {
            uncertainty: uncertainty(&prediction),
            prediction,
        })
    }

    fn encode_masks(
        &self,
        inputs: &[&ScoreMap<T>],
        width: usize,
        height: usize,
    ) -> std::result::Result<ScoreMap<T>, BoxError> {
        Ok(mean_encoding(inputs, width, height)?)
    }
}

/// Blocks backed by [`hierpr_step`], one weight set per share group.
///
/// A cycle's first block refines the mean of its coarse input and the
/// encoder guidance.
#[derive(Clone, Debug)]
pub struct HierprExecutor<T: Scalar = f64> {
    pub features: FeatureMap<T>,
    pub weights: HashMap<String, MlpWeights<T>>,
    pub fraction: f64,
}

impl<T: Scalar> HierprExecutor<T> {
    /// Seeded random weights for every HierPR group of `schedule`.
    pub fn seeded(
        schedule: &DecoderSchedule,
        features: FeatureMap<T>,
        hidden: usize,
        fraction: f64,
        seed: u64,
    ) -> Self {
        let mut groups: Vec<&str> = schedule.blocks.iter().map(|b| b.share_group.as_str()).collect();
        groups.sort_unstable();
        groups.dedup();
        let weights = groups
            .into_iter()
            .enumerate()
            .map(|(i, g)| {
                let w = MlpWeights::random(features.channels(), hidden, hidden, 1.0, seed.wrapping_add(i as u64));
                (g.to_string(), w)
            })
            .collect();
        Self {
            features,
            weights,
            fraction,
        }
    }
}

impl<T: Scalar> BlockExecutor<T> for HierprExecutor<T> {
    fn refine(
        &self,
        block: &BlockSpec,
        coarse: &ScoreMap<T>,
        guidance: Option<&ScoreMap<T>>,
    ) -> std::result::Result<BlockOutput<T>, BoxError> {
        let w = self
            .weights
            .get(&block.share_group)
            .ok_or_else(|| format!("no weights for share group {}", block.share_group))?;
        let input = match guidance {
            Some(g) => average(coarse, &resize_score(g, coarse.width(), coarse.height())?)?,
            None => coarse.clone(),
        };
        let step = hierpr_step(&input, &self.features, w, self.fraction, StepMode::Upsample)?;
        Ok(BlockOutput {
            uncertainty: uncertainty(&step.prediction),
            prediction: step.prediction,
        })
    }

    fn encode_masks(
        &self,
        inputs: &[&ScoreMap<T>],
        width: usize,
        height: usize,
    ) -> std::result::Result<ScoreMap<T>, BoxError> {
        Ok(mean_encoding(inputs, width, height)?)
    }
}
