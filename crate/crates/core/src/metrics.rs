//! Per-image segmentation metrics: IoU, MAE, region accuracy, boundary
//! accuracy (mBA), meticulosity quality (MQ) and the structure measure.
//!
//! Accuracy metrics take binary predictions; MAE and the structure measure
//! take raw scores. [`evaluate`] bundles all five columns.

use serde::{Deserialize, Serialize};

use crate::error::{check_dims, Error, Result};
use crate::mask::{BinaryMask, ScoreMap};
use crate::morphology::{band_radii, CrossDistance, DEFAULT_BANDS};
use crate::scalar::Scalar;

/// Weight of the object term in the structure measure.
pub const S_MEASURE_ALPHA: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeticulosityParams {
    pub n_bands: usize,
}

impl Default for MeticulosityParams {
    fn default() -> Self {
        Self { n_bands: DEFAULT_BANDS }
    }
}

impl MeticulosityParams {
    pub fn new(n_bands: usize) -> Result<Self> {
        if n_bands < 2 {
            return Err(Error::InvalidParameter(format!(
                "band count {n_bands} must be at least 2"
            )));
        }
        Ok(Self { n_bands })
    }
}

/// One row of a results table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport<T = f64> {
    pub mae: T,
    pub sm: T,
    pub iou: T,
    pub mba: T,
    pub mq: T,
}

impl<T: Scalar> MetricReport<T> {
    /// Unweighted mean of several reports; `None` when empty.
    pub fn mean<'a>(reports: impl IntoIterator<Item = &'a Self>) -> Option<Self> {
        let mut n = 0usize;
        let mut acc = [0.0f64; 5];
        for r in reports {
            n += 1;
            for (a, v) in acc.iter_mut().zip(r.as_array()) {
                *a += v.to_f64_lossy();
            }
        }
        (n > 0).then(|| {
            let m = |i: usize| T::of(acc[i] / n as f64);
            Self {
                mae: m(0),
                sm: m(1),
                iou: m(2),
                mba: m(3),
                mq: m(4),
            }
        })
    }

    /// Columns in the order `mae, sm, iou, mba, mq`.
    pub fn as_array(&self) -> [T; 5] {
        [self.mae, self.sm, self.iou, self.mba, self.mq]
    }
}

fn ratio<T: Scalar>(num: usize, den: usize) -> T {
    T::of_usize(num) / T::of_usize(den)
}

/// `|pred ∧ gt| / |pred ∨ gt|`, 1 when both masks are empty.
pub fn iou<T: Scalar>(pred: &BinaryMask, gt: &BinaryMask) -> Result<T> {
    check_dims(gt.dims(), pred.dims())?;
    let (mut inter, mut union) = (0usize, 0usize);
    for (p, g) in pred.values().iter().zip(gt.values()) {
        inter += (*p && *g) as usize;
        union += (*p || *g) as usize;
    }
    Ok(if union == 0 { T::one() } else { ratio(inter, union) })
}

/// Mean absolute difference between scores and the binary ground truth.
pub fn mae<T: Scalar>(pred: &ScoreMap<T>, gt: &BinaryMask) -> Result<T> {
    check_dims(gt.dims(), pred.dims())?;
    let sum: f64 = pred
        .values()
        .iter()
        .zip(gt.values())
        .map(|(p, g)| {
            let p = p.to_f64_lossy();
            if *g {
                1.0 - p
            } else {
                p
            }
        })
        .sum();
    Ok(T::of(sum / pred.len() as f64))
}

/// Fraction of `region` pixels where `pred` agrees with `gt`.
pub fn region_accuracy<T: Scalar>(pred: &BinaryMask, gt: &BinaryMask, region: &BinaryMask) -> Result<T> {
    check_dims(gt.dims(), pred.dims())?;
    check_dims(gt.dims(), region.dims())?;
    let (mut correct, mut total) = (0usize, 0usize);
    for ((p, g), r) in pred.values().iter().zip(gt.values()).zip(region.values()) {
        if *r {
            total += 1;
            correct += (p == g) as usize;
        }
    }
    if total == 0 {
        return Err(Error::EmptyRegion);
    }
    Ok(ratio(correct, total))
}

/// Per-band pixel counts for one prediction against one ground truth.
///
/// Computed in a single pass over the cross-class distance field; band `i`
/// holds pixels whose squared distance to the opposite class is `<= r_i²`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BandTally {
    pub radii: Vec<u32>,
    /// `(correct, total)` inside each band.
    pub inside: Vec<(usize, usize)>,
    /// `(correct, total)` outside the widest band.
    pub outside: (usize, usize),
}

impl BandTally {
    pub fn new(pred: &BinaryMask, gt: &BinaryMask, params: MeticulosityParams) -> Result<Self> {
        check_dims(gt.dims(), pred.dims())?;
        let cross = CrossDistance::new(gt)?;
        Self::from_cross(pred, gt, &cross, params)
    }

    pub fn from_cross(
        pred: &BinaryMask,
        gt: &BinaryMask,
        cross: &CrossDistance,
        params: MeticulosityParams,
    ) -> Result<Self> {
        check_dims(gt.dims(), pred.dims())?;
        check_dims(gt.dims(), cross.dims())?;
        let radii = band_radii(gt.width(), gt.height(), params.n_bands)?;
        let limits: Vec<u64> = radii.iter().map(|r| *r as u64 * *r as u64).collect();
        let n = limits.len();
        // Pixels are bucketed by the first (narrowest) band containing them;
        // bucket n is "outside every band".
        let mut correct = vec![0usize; n + 1];
        let mut total = vec![0usize; n + 1];
        for ((p, g), d) in pred.values().iter().zip(gt.values()).zip(cross.squared()) {
            let d = *d as u64;
            let bucket = limits.iter().position(|l| d <= *l).unwrap_or(n);
            total[bucket] += 1;
            correct[bucket] += (p == g) as usize;
        }
        let mut inside = Vec::with_capacity(n);
        let (mut c, mut t) = (0, 0);
        for i in 0..n {
            c += correct[i];
            t += total[i];
            inside.push((c, t));
        }
        Ok(Self {
            radii,
            inside,
            outside: (correct[n], total[n]),
        })
    }

    pub fn mba<T: Scalar>(&self) -> Result<T> {
        let mut sum = T::zero();
        for (c, t) in &self.inside {
            if *t == 0 {
                return Err(Error::EmptyRegion);
            }
            sum = sum + ratio::<T>(*c, *t);
        }
        Ok(sum / T::of_usize(self.inside.len()))
    }

    pub fn mq<T: Scalar>(&self) -> Result<T> {
        let (c, t) = self.outside;
        if t == 0 {
            return Err(Error::BandCoversFrame);
        }
        Ok(T::half() * ratio::<T>(c, t) + T::half() * self.mba::<T>()?)
    }
}

/// Mean accuracy over the nested boundary bands of `gt`.
pub fn mba<T: Scalar>(pred: &BinaryMask, gt: &BinaryMask) -> Result<T> {
    mba_with(pred, gt, MeticulosityParams::default())
}

pub fn mba_with<T: Scalar>(pred: &BinaryMask, gt: &BinaryMask, params: MeticulosityParams) -> Result<T> {
    BandTally::new(pred, gt, params)?.mba()
}

/// Half the accuracy outside the widest band plus half the mean band accuracy.
pub fn mq<T: Scalar>(pred: &BinaryMask, gt: &BinaryMask) -> Result<T> {
    mq_with(pred, gt, MeticulosityParams::default())
}

pub fn mq_with<T: Scalar>(pred: &BinaryMask, gt: &BinaryMask, params: MeticulosityParams) -> Result<T> {
    BandTally::new(pred, gt, params)?.mq()
}

/// Structure measure `α·S_object + (1 − α)·S_region` with `α = 0.5`.
///
/// Single-class ground truths use `1 − mean(pred)` (all background) and
/// `mean(pred)` (all foreground).
pub fn s_measure<T: Scalar>(pred: &ScoreMap<T>, gt: &BinaryMask) -> Result<T> {
    check_dims(gt.dims(), pred.dims())?;
    let p: Vec<f64> = pred.values().iter().map(|v| v.to_f64_lossy()).collect();
    let fg = gt.count_ones();
    let q = if fg == 0 {
        1.0 - mean(&p)
    } else if fg == gt.len() {
        mean(&p)
    } else {
        let object = object_similarity(&p, gt);
        let region = region_similarity(&p, gt);
        (S_MEASURE_ALPHA * object + (1.0 - S_MEASURE_ALPHA) * region).max(0.0)
    };
    Ok(T::of(q))
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn object_score(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let m = values.iter().sum::<f64>() / n;
    let sigma = if values.len() > 1 {
        (values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    2.0 * m / (m * m + 1.0 + sigma + f64::EPSILON)
}

fn object_similarity(p: &[f64], gt: &BinaryMask) -> f64 {
    let mut fg = Vec::new();
    let mut bg = Vec::new();
    for (v, g) in p.iter().zip(gt.values()) {
        if *g {
            fg.push(*v);
        } else {
            bg.push(1.0 - v);
        }
    }
    let u = fg.len() as f64 / p.len() as f64;
    u * object_score(&fg) + (1.0 - u) * object_score(&bg)
}

fn region_similarity(p: &[f64], gt: &BinaryMask) -> f64 {
    let (w, h) = gt.dims();
    let (cx, cy) = centroid(gt);
    let area = (w * h) as f64;
    let w1 = (cx * cy) as f64 / area;
    let w2 = ((w - cx) * cy) as f64 / area;
    let w3 = (cx * (h - cy)) as f64 / area;
    let w4 = 1.0 - w1 - w2 - w3;
    let q = |x0: usize, x1: usize, y0: usize, y1: usize| quadrant_ssim(p, gt, x0, x1, y0, y1);
    w1 * q(0, cx, 0, cy) + w2 * q(cx, w, 0, cy) + w3 * q(0, cx, cy, h) + w4 * q(cx, w, cy, h)
}

/// Rounded 1-based foreground centroid; also the column/row split point.
fn centroid(gt: &BinaryMask) -> (usize, usize) {
    let (w, h) = gt.dims();
    let (mut sx, mut sy, mut n) = (0.0f64, 0.0f64, 0usize);
    for y in 0..h {
        for x in 0..w {
            if gt.get(x, y) {
                sx += (x + 1) as f64;
                sy += (y + 1) as f64;
                n += 1;
            }
        }
    }
    if n == 0 {
        return (((w as f64) / 2.0).round() as usize, ((h as f64) / 2.0).round() as usize);
    }
    ((sx / n as f64).round() as usize, (sy / n as f64).round() as usize)
}

fn quadrant_ssim(p: &[f64], gt: &BinaryMask, x0: usize, x1: usize, y0: usize, y1: usize) -> f64 {
    let w = gt.width();
    let n = (x1 - x0) * (y1 - y0);
    if n == 0 {
        return 0.0;
    }
    let pix = || (y0..y1).flat_map(move |y| (x0..x1).map(move |x| y * w + x));
    let g = |i: usize| if gt.values()[i] { 1.0 } else { 0.0 };
    let nf = n as f64;
    let mx = pix().map(|i| p[i]).sum::<f64>() / nf;
    let my = pix().map(g).sum::<f64>() / nf;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for i in pix() {
        let dx = p[i] - mx;
        let dy = g(i) - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    let denom = nf - 1.0 + f64::EPSILON;
    let (sxx, syy, sxy) = (sxx / denom, syy / denom, sxy / denom);
    let alpha = 4.0 * mx * my * sxy;
    let beta = (mx * mx + my * my) * (sxx + syy);
    if alpha != 0.0 {
        alpha / (beta + f64::EPSILON)
    } else if beta == 0.0 {
        1.0
    } else {
        0.0
    }
}

/// All five metric columns for one image.
///
/// IoU, mBA and MQ use the scores binarized at 0.5.
pub fn evaluate<T: Scalar>(
    pred_scores: &ScoreMap<T>,
    gt: &BinaryMask,
    params: MeticulosityParams,
) -> Result<MetricReport<T>> {
    check_dims(gt.dims(), pred_scores.dims())?;
    if !gt.is_non_degenerate() {
        return Err(Error::DegenerateMask);
    }
    let pred = pred_scores.binarize_unchecked(T::half());
    let tally = BandTally::new(&pred, gt, params)?;
    Ok(MetricReport {
        mae: mae(pred_scores, gt)?,
        sm: s_measure(pred_scores, gt)?,
        iou: iou(&pred, gt)?,
        mba: tally.mba()?,
        mq: tally.mq()?,
    })
}
