//! Two-stage high-resolution inference: a coarse pass on a square
//! low-resolution copy, then patch-wise refinement at full resolution.

use rayon::prelude::*;

use crate::error::{check_dims, BoxError, Error, Result};
use crate::hierpr::{hierpr_step, FeatureMap, MlpWeights, StepMode, DEFAULT_FRACTION};
use crate::mask::{BinaryMask, RgbImage, ScoreMap};
use crate::resample::{resize_rgb, resize_score};
use crate::scalar::Scalar;

pub const GREEN: [u8; 3] = [0, 255, 0];

// Patches refined concurrently before being folded into the output.
const PATCH_BATCH: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PipelineConfig {
    pub low_res_side: usize,
    pub patch_side: usize,
    pub patch_stride: usize,
    pub threshold: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            low_res_side: 336,
            patch_side: 224,
            patch_stride: 112,
            threshold: 0.5,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.low_res_side == 0 || self.patch_side == 0 || self.patch_stride == 0 {
            return bad("pipeline sizes must be positive".into());
        }
        if self.patch_stride > self.patch_side {
            return bad(format!(
                "patch stride {} exceeds patch side {}",
                self.patch_stride, self.patch_side
            ));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::InvalidThreshold(self.threshold));
        }
        Ok(())
    }
}

/// Crop window `(x, y, w, h)`.
pub type Window = (usize, usize, usize, usize);

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PatchGrid {
    pub width: usize,
    pub height: usize,
    pub windows: Vec<Window>,
}

impl PatchGrid {
    /// Number of windows covering each pixel, row-major.
    pub fn coverage(&self) -> Vec<u32> {
        // Windows form a product grid, so coverage factors per axis.
        let mut cx = vec![0u32; self.width];
        let mut cy = vec![0u32; self.height];
        let mut xs: Vec<Window> = self.windows.clone();
        xs.sort_unstable_by_key(|w| (w.0, w.2));
        xs.dedup_by_key(|w| (w.0, w.2));
        for &(x, _, w, _) in &xs {
            cx[x..x + w].iter_mut().for_each(|c| *c += 1);
        }
        let mut ys: Vec<Window> = self.windows.clone();
        ys.sort_unstable_by_key(|w| (w.1, w.3));
        ys.dedup_by_key(|w| (w.1, w.3));
        for &(_, y, _, h) in &ys {
            cy[y..y + h].iter_mut().for_each(|c| *c += 1);
        }
        cy.iter().flat_map(|a| cx.iter().map(move |b| a * b)).collect()
    }
}

fn axis_starts(len: usize, side: usize, stride: usize) -> Vec<usize> {
    if len <= side {
        return vec![0];
    }
    let mut starts: Vec<usize> = (0..).map(|k| k * stride).take_while(|s| s + side < len).collect();
    starts.push(len - side);
    starts.dedup();
    starts
}

/// Stride-spaced windows with the last row and column moved inward to end
/// at the frame edge. Frames smaller than a patch get one clipped window.
pub fn plan_patches(width: usize, height: usize, cfg: &PipelineConfig) -> PatchGrid {
    let xs = axis_starts(width, cfg.patch_side, cfg.patch_stride);
    let ys = axis_starts(height, cfg.patch_side, cfg.patch_stride);
    let (pw, ph) = (cfg.patch_side.min(width), cfg.patch_side.min(height));
    let windows = ys
        .iter()
        .flat_map(|y| xs.iter().map(move |x| (*x, *y, pw, ph)))
        .collect();
    PatchGrid { width, height, windows }
}

/// Maps an image patch and its coarse scores to refined scores of the same size.
pub trait Refiner<T: Scalar>: Sync {
    fn refine(&self, image: &RgbImage, coarse: &ScoreMap<T>) -> std::result::Result<ScoreMap<T>, BoxError>;
}

impl<T: Scalar, F> Refiner<T> for F
where
    F: Fn(&RgbImage, &ScoreMap<T>) -> std::result::Result<ScoreMap<T>, BoxError> + Sync,
{
    fn refine(&self, image: &RgbImage, coarse: &ScoreMap<T>) -> std::result::Result<ScoreMap<T>, BoxError> {
        self(image, coarse)
    }
}

/// Returns the coarse patch unchanged.
#[derive(Clone, Copy, Debug, Default)]
pub struct IdentityRefiner;

impl<T: Scalar> Refiner<T> for IdentityRefiner {
    fn refine(&self, _image: &RgbImage, coarse: &ScoreMap<T>) -> std::result::Result<ScoreMap<T>, BoxError> {
        Ok(coarse.clone())
    }
}

/// One same-resolution HierPR step using the patch's RGB channels, scaled
/// to [0, 1], as features.
#[derive(Clone, Debug)]
pub struct HierprRefiner<T: Scalar = f64> {
    pub weights: MlpWeights<T>,
    pub fraction: f64,
}

impl<T: Scalar> HierprRefiner<T> {
    pub fn new(weights: MlpWeights<T>) -> Result<Self> {
        if weights.feature_channels() != 3 {
            return Err(Error::ChannelMismatch {
                expected: 3,
                found: weights.feature_channels(),
            });
        }
        Ok(Self {
            weights,
            fraction: DEFAULT_FRACTION,
        })
    }
}

/// RGB image as a 3-channel feature map in [0, 1].
pub fn rgb_features<T: Scalar>(img: &RgbImage) -> Result<FeatureMap<T>> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let mut values = Vec::with_capacity(3 * w * h);
    for c in 0..3 {
        values.extend(img.pixels().map(|p| T::of(p.0[c] as f64 / 255.0)));
    }
    FeatureMap::new(3, w, h, values)
}

impl<T: Scalar> Refiner<T> for HierprRefiner<T> {
    fn refine(&self, image: &RgbImage, coarse: &ScoreMap<T>) -> std::result::Result<ScoreMap<T>, BoxError> {
        let f = rgb_features(image)?;
        Ok(hierpr_step(coarse, &f, &self.weights, self.fraction, StepMode::SameResolution)?.prediction)
    }
}

fn crop_rgb(img: &RgbImage, (x, y, w, h): Window) -> RgbImage {
    image::imageops::crop_imm(img, x as u32, y as u32, w as u32, h as u32).to_image()
}

/// Runs both stages and binarizes the stitched scores.
///
/// Overlapping patches are combined by a running mean in window order, so
/// identical overlapping values are reproduced exactly.
pub fn run_pipeline<T, C, R>(
    image: &RgbImage,
    coarse_source: C,
    refiner: &R,
    cfg: &PipelineConfig,
) -> Result<BinaryMask>
where
    T: Scalar,
    C: FnOnce(&RgbImage) -> std::result::Result<ScoreMap<T>, BoxError>,
    R: Refiner<T> + ?Sized,
{
    run_pipeline_scores(image, coarse_source, refiner, cfg)?.binarize(T::of(cfg.threshold))
}

/// [`run_pipeline`] before binarization.
pub fn run_pipeline_scores<T, C, R>(
    image: &RgbImage,
    coarse_source: C,
    refiner: &R,
    cfg: &PipelineConfig,
) -> Result<ScoreMap<T>>
where
    T: Scalar,
    C: FnOnce(&RgbImage) -> std::result::Result<ScoreMap<T>, BoxError>,
    R: Refiner<T> + ?Sized,
{
    cfg.validate()?;
    let (w, h) = (image.width() as usize, image.height() as usize);
    if w == 0 || h == 0 {
        return Err(Error::InvalidDimensions { width: w, height: h });
    }
    let small = resize_rgb(image, cfg.low_res_side, cfg.low_res_side)?;
    let coarse_low = coarse_source(&small).map_err(|source| Error::Executor {
        block: "coarse source".into(),
        source,
    })?;
    let coarse = resize_score(&coarse_low, w, h)?;
    let grid = plan_patches(w, h, cfg);

    let mut mean = vec![T::zero(); w * h];
    let mut seen = vec![0u32; w * h];
    for batch in grid.windows.chunks(PATCH_BATCH) {
        let refined: Vec<ScoreMap<T>> = batch
            .par_iter()
            .map(|&win| {
                let (x, y, pw, ph) = win;
                let contract = |detail: String| Error::Refiner {
                    x,
                    y,
                    w: pw,
                    h: ph,
                    detail,
                };
                let out = refiner
                    .refine(&crop_rgb(image, win), &coarse.crop(x, y, pw, ph))
                    .map_err(|e| contract(e.to_string()))?;
                if out.dims() != (pw, ph) {
                    return Err(contract(format!("returned {}x{}", out.width(), out.height())));
                }
                if let Some(v) = out.values().iter().find(|v| !(**v >= T::zero() && **v <= T::one())) {
                    return Err(contract(format!("value {v} outside [0, 1]")));
                }
                Ok(out)
            })
            .collect::<Result<_>>()?;
        for (&(x, y, pw, _), patch) in batch.iter().zip(&refined) {
            for (r, row) in patch.values().chunks(pw).enumerate() {
                let base = (y + r) * w + x;
                for (i, v) in row.iter().enumerate() {
                    let k = base + i;
                    seen[k] += 1;
                    mean[k] = mean[k] + (*v - mean[k]) / T::of(seen[k] as f64);
                }
            }
        }
    }
    ScoreMap::new(w, h, mean)
}

/// Foreground pixels kept, background painted green.
pub fn composite_green(image: &RgbImage, mask: &BinaryMask) -> Result<RgbImage> {
    check_dims(mask.dims(), (image.width() as usize, image.height() as usize))?;
    let mut out = image.clone();
    for (p, keep) in out.pixels_mut().zip(mask.values()) {
        if !keep {
            p.0 = GREEN;
        }
    }
    Ok(out)
}
