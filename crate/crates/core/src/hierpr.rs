//! Forward-only hierarchical point-wise refinement.
//!
//! One step upsamples a coarse score map, ranks pixels by uncertainty
//! `|p − 0.5|`, and re-predicts the `k` most uncertain pixels with a small
//! three-layer perceptron fed by bilinearly sampled features and the coarse
//! score. Every other pixel keeps its upsampled value bit for bit.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{check_dims, Error, Result};
use crate::mask::ScoreMap;
use crate::resample::{lerp, resize_score, taps};
use crate::scalar::Scalar;

/// Default fraction of pixels refined per step.
pub const DEFAULT_FRACTION: f64 = 0.1;

const WEIGHTS_MAGIC: &str = "HIERPR-MLP v1";
const TENSOR_MAGIC: &str = "TENSOR v1";

/// `C × H × W` feature tensor, channel-major.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap<T = f64> {
    channels: usize,
    width: usize,
    height: usize,
    values: Vec<T>,
}

impl<T: Scalar> FeatureMap<T> {
    pub fn new(channels: usize, width: usize, height: usize, values: Vec<T>) -> Result<Self> {
        if channels == 0 || width == 0 || height == 0 || channels * width * height != values.len() {
            return Err(Error::InvalidDimensions { width, height });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "non-finite feature value at index {index}"
            )));
        }
        Ok(Self {
            channels,
            width,
            height,
            values,
        })
    }

    /// Stacks score maps (all the same size) as channels.
    pub fn from_channels(maps: &[&ScoreMap<T>]) -> Result<Self> {
        let first = maps.first().ok_or(Error::InvalidParameter("no channels".into()))?;
        let mut values = Vec::with_capacity(maps.len() * first.len());
        for m in maps {
            check_dims(first.dims(), m.dims())?;
            values.extend_from_slice(m.values());
        }
        Self::new(maps.len(), first.width(), first.height(), values)
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    #[inline]
    pub fn get(&self, c: usize, x: usize, y: usize) -> T {
        self.values[(c * self.height + y) * self.width + x]
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{TENSOR_MAGIC}\n{} {} {}\n", self.channels, self.height, self.width);
        for row in self.values.chunks(self.width) {
            push_row(&mut s, row);
        }
        s
    }

    /// Parses `TENSOR v1`, a `C H W` line, then `C·H·W` whitespace-separated values.
    pub fn parse_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        expect_magic(&mut lines, TENSOR_MAGIC)?;
        let (line, dims) = next_line(&mut lines, "dimensions")?;
        let dims = parse_usizes(line, dims, 3)?;
        let values = parse_reals(lines)?;
        let (c, h, w) = (dims[0], dims[1], dims[2]);
        if values.len() != c * h * w {
            return Err(Error::Parse {
                line: line + 1,
                detail: format!("expected {} values, found {}", c * h * w, values.len()),
            });
        }
        Self::new(c, w, h, values)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::parse_text(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

/// `|p − 0.5|` per pixel: 0 is maximally uncertain, 0.5 fully certain.
#[derive(Clone, Debug, PartialEq)]
pub struct UncertaintyMap<T = f64> {
    width: usize,
    height: usize,
    values: Vec<T>,
}

impl<T: Scalar> UncertaintyMap<T> {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize) -> T {
        self.values[y * self.width + x]
    }
}

pub fn uncertainty<T: Scalar>(p: &ScoreMap<T>) -> UncertaintyMap<T> {
    UncertaintyMap {
        width: p.width(),
        height: p.height(),
        values: p.values().iter().map(|v| (*v - T::half()).abs()).collect(),
    }
}

/// Selected pixel coordinates as `(row, col)`, most uncertain first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PointSet {
    pub points: Vec<(usize, usize)>,
}

impl PointSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// `ceil(fraction · n)`, at least 1 and at most `n`. A relative slack of
/// 1e-9 absorbs representation error such as `0.07 · 100 = 7.000000000000001`.
pub fn point_count(n: usize, fraction: f64) -> usize {
    let raw = fraction * n as f64;
    ((raw - raw.abs() * 1e-9).ceil() as usize).clamp(1, n)
}

/// The `k = ceil(fraction · H · W)` pixels with the smallest uncertainty,
/// ties broken in row-major order.
pub fn select_points<T: Scalar>(u: &UncertaintyMap<T>, fraction: f64) -> Result<PointSet> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidParameter(format!("fraction {fraction} outside (0, 1]")));
    }
    let n = u.values.len();
    let k = point_count(n, fraction);
    let key = |i: &usize, j: &usize| {
        u.values[*i]
            .partial_cmp(&u.values[*j])
            .expect("finite uncertainty")
            .then(i.cmp(j))
    };
    let mut idx: Vec<usize> = (0..n).collect();
    if k < n {
        idx.select_nth_unstable_by(k - 1, key);
        idx.truncate(k);
    }
    idx.sort_unstable_by(key);
    Ok(PointSet {
        points: idx.into_iter().map(|i| (i / u.width, i % u.width)).collect(),
    })
}

/// Bilinear sample of every channel at normalized `(x, y) ∈ [0, 1]²`.
///
/// Align-corners: 0 is the first pixel center and 1 the last.
pub fn sample_bilinear<T: Scalar>(f: &FeatureMap<T>, x: T, y: T) -> Result<Vec<T>> {
    let unit = |v: T| v >= T::zero() && v <= T::one();
    if !(unit(x) && unit(y)) {
        return Err(Error::InvalidParameter(format!(
            "sample point ({x}, {y}) outside the unit square"
        )));
    }
    let px = x.to_f64_lossy() * (f.width - 1) as f64;
    let py = y.to_f64_lossy() * (f.height - 1) as f64;
    let (x0, x1, tx) = taps(px, f.width);
    let (y0, y1, ty) = taps(py, f.height);
    let (tx, ty) = (T::of(tx), T::of(ty));
    Ok((0..f.channels)
        .map(|c| {
            let top = lerp(f.get(c, x0, y0), f.get(c, x1, y0), tx);
            let bottom = lerp(f.get(c, x0, y1), f.get(c, x1, y1), tx);
            lerp(top, bottom, ty)
        })
        .collect())
}

/// One affine layer: `out × inputs` row-major matrix plus bias.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer<T = f64> {
    pub outputs: usize,
    pub inputs: usize,
    pub matrix: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> Layer<T> {
    pub fn new(outputs: usize, inputs: usize, matrix: Vec<T>, bias: Vec<T>) -> Result<Self> {
        if matrix.len() != outputs * inputs || bias.len() != outputs {
            return Err(Error::InvalidParameter(format!(
                "layer {outputs}x{inputs} given {} weights and {} biases",
                matrix.len(),
                bias.len()
            )));
        }
        Ok(Self {
            outputs,
            inputs,
            matrix,
            bias,
        })
    }

    fn apply(&self, input: &[T], out: &mut Vec<T>) {
        out.clear();
        for (row, b) in self.matrix.chunks(self.inputs).zip(&self.bias) {
            out.push(row.iter().zip(input).fold(*b, |acc, (w, x)| acc + *w * *x));
        }
    }
}

/// Three-layer perceptron weights.
///
/// Layer 1 takes `[features ‖ coarse]` (`C + 1` inputs); layers 2 and 3 take
/// the previous activations with the coarse score appended again. Layer 3 has
/// one output.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpWeights<T = f64> {
    pub layers: [Layer<T>; 3],
}

impl<T: Scalar> MlpWeights<T> {
    pub fn new(layers: [Layer<T>; 3]) -> Result<Self> {
        let w = Self { layers };
        let [l1, l2, l3] = &w.layers;
        if l1.inputs < 2 || l2.inputs != l1.outputs + 1 || l3.inputs != l2.outputs + 1 || l3.outputs != 1 {
            return Err(Error::InvalidParameter(format!(
                "layer shapes {}x{}, {}x{}, {}x{} do not chain",
                l1.outputs, l1.inputs, l2.outputs, l2.inputs, l3.outputs, l3.inputs
            )));
        }
        Ok(w)
    }

    pub fn feature_channels(&self) -> usize {
        self.layers[0].inputs - 1
    }

    pub fn hidden(&self) -> (usize, usize) {
        (self.layers[0].outputs, self.layers[1].outputs)
    }

    pub fn zeros(channels: usize, h1: usize, h2: usize) -> Self {
        Self::from_fn(channels, h1, h2, || T::zero())
    }

    /// Weights and biases uniform in `[-scale, scale]`, seeded.
    pub fn random(channels: usize, h1: usize, h2: usize, scale: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::from_fn(channels, h1, h2, || T::of(scale * (2.0 * rng.gen::<f64>() - 1.0)))
    }

    fn from_fn(channels: usize, h1: usize, h2: usize, mut f: impl FnMut() -> T) -> Self {
        let mut layer = |o: usize, i: usize| Layer {
            outputs: o,
            inputs: i,
            matrix: (0..o * i).map(|_| f()).collect(),
            bias: (0..o).map(|_| f()).collect(),
        };
        let layers = [layer(h1, channels + 1), layer(h2, h1 + 1), layer(1, h2 + 1)];
        Self { layers }
    }

    pub fn to_text(&self) -> String {
        let (h1, h2) = self.hidden();
        let mut s = format!("{WEIGHTS_MAGIC}\n{} {h1} {h2}\n", self.feature_channels());
        for l in &self.layers {
            let all: Vec<T> = l.matrix.iter().chain(&l.bias).copied().collect();
            push_row(&mut s, &all);
        }
        s
    }

    /// Parses `HIERPR-MLP v1`, a `C h1 h2` line, then one line per layer
    /// holding the row-major matrix followed by the bias.
    pub fn parse_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        expect_magic(&mut lines, WEIGHTS_MAGIC)?;
        let (line, dims) = next_line(&mut lines, "dimensions")?;
        let dims = parse_usizes(line, dims, 3)?;
        let (c, h1, h2) = (dims[0], dims[1], dims[2]);
        if c == 0 || h1 == 0 || h2 == 0 {
            return Err(Error::Parse {
                line: line + 1,
                detail: "dimensions must be positive".into(),
            });
        }
        let mut layers = Vec::with_capacity(3);
        for (o, i) in [(h1, c + 1), (h2, h1 + 1), (1, h2 + 1)] {
            let (line, text) = next_line(&mut lines, "layer")?;
            let values: Vec<T> = parse_reals(std::iter::once((line, text)))?;
            if values.len() != o * i + o {
                return Err(Error::Parse {
                    line: line + 1,
                    detail: format!("expected {} values, found {}", o * i + o, values.len()),
                });
            }
            let (m, b) = values.split_at(o * i);
            layers.push(Layer::new(o, i, m.to_vec(), b.to_vec())?);
        }
        let layers: [Layer<T>; 3] = layers.try_into().expect("three layers");
        Self::new(layers)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::parse_text(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

fn relu<T: Scalar>(v: T) -> T {
    v.max(T::zero())
}

fn logistic<T: Scalar>(v: T) -> T {
    T::one() / (T::one() + (-v).exp())
}

/// Refined score for one point.
pub fn mlp_forward<T: Scalar>(w: &MlpWeights<T>, feature: &[T], coarse: T) -> Result<T> {
    if feature.len() != w.feature_channels() {
        return Err(Error::ChannelMismatch {
            expected: w.feature_channels(),
            found: feature.len(),
        });
    }
    let [l1, l2, l3] = &w.layers;
    let mut input: Vec<T> = Vec::with_capacity(feature.len().max(l1.outputs).max(l2.outputs) + 1);
    let mut out = Vec::with_capacity(input.capacity());
    input.extend_from_slice(feature);
    input.push(coarse);
    for layer in [l1, l2] {
        layer.apply(&input, &mut out);
        input.clear();
        input.extend(out.iter().map(|v| relu(*v)));
        input.push(coarse);
    }
    l3.apply(&input, &mut out);
    Ok(logistic(out[0]))
}

/// Whether a step doubles resolution or refines in place.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepMode {
    Upsample,
    SameResolution,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutput<T = f64> {
    /// The coarse map after resizing, before refinement.
    pub upsampled: ScoreMap<T>,
    pub uncertainty: UncertaintyMap<T>,
    pub points: PointSet,
    pub prediction: ScoreMap<T>,
}

/// One refinement step: resize, rank, select, re-predict.
pub fn hierpr_step<T: Scalar>(
    coarse: &ScoreMap<T>,
    features: &FeatureMap<T>,
    weights: &MlpWeights<T>,
    fraction: f64,
    mode: StepMode,
) -> Result<StepOutput<T>> {
    if features.channels() != weights.feature_channels() {
        return Err(Error::ChannelMismatch {
            expected: weights.feature_channels(),
            found: features.channels(),
        });
    }
    let upsampled = match mode {
        StepMode::Upsample => resize_score(coarse, 2 * coarse.width(), 2 * coarse.height())?,
        StepMode::SameResolution => coarse.clone(),
    };
    let unc = uncertainty(&upsampled);
    let points = select_points(&unc, fraction)?;
    let (w, h) = upsampled.dims();
    let norm = |i: usize, len: usize| {
        if len <= 1 {
            T::zero()
        } else {
            T::of_usize(i) / T::of_usize(len - 1)
        }
    };
    let refined: Vec<T> = points
        .points
        .par_iter()
        .map(|(row, col)| {
            let feat = sample_bilinear(features, norm(*col, w), norm(*row, h))?;
            mlp_forward(weights, &feat, upsampled.get(*col, *row))
        })
        .collect::<Result<_>>()?;
    let mut values = upsampled.values().to_vec();
    for ((row, col), v) in points.points.iter().zip(refined) {
        values[row * w + col] = v.max(T::zero()).min(T::one());
    }
    Ok(StepOutput {
        prediction: ScoreMap::from_raw(w, h, values),
        uncertainty: unc,
        points,
        upsampled,
    })
}

/// Element-wise mean of two equally sized maps.
pub fn average<T: Scalar>(a: &ScoreMap<T>, b: &ScoreMap<T>) -> Result<ScoreMap<T>> {
    check_dims(a.dims(), b.dims())?;
    let values = a
        .values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| lerp(*x, *y, T::half()))
        .collect();
    Ok(ScoreMap::from_raw(a.width(), a.height(), values))
}

fn push_row<T: Scalar>(s: &mut String, row: &[T]) {
    for (i, v) in row.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        write!(s, "{v}").expect("write to string");
    }
    s.push('\n');
}

fn expect_magic<'a>(lines: &mut impl Iterator<Item = (usize, &'a str)>, magic: &str) -> Result<()> {
    let (line, text) = next_line(lines, "header")?;
    if text.trim() != magic {
        return Err(Error::Parse {
            line: line + 1,
            detail: format!("expected header {magic:?}"),
        });
    }
    Ok(())
}

fn next_line<'a>(lines: &mut impl Iterator<Item = (usize, &'a str)>, what: &str) -> Result<(usize, &'a str)> {
    lines.find(|(_, l)| !l.trim().is_empty()).ok_or_else(|| Error::Parse {
        line: 0,
        detail: format!("missing {what} line"),
    })
}

fn parse_usizes(line: usize, text: &str, n: usize) -> Result<Vec<usize>> {
    let v: Vec<usize> = text
        .split_whitespace()
        .map(|t| t.parse())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Parse {
            line: line + 1,
            detail: format!("{e}"),
        })?;
    if v.len() != n {
        return Err(Error::Parse {
            line: line + 1,
            detail: format!("expected {n} integers"),
        });
    }
    Ok(v)
}

fn parse_reals<'a, T: Scalar>(lines: impl Iterator<Item = (usize, &'a str)>) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (line, text) in lines {
        for tok in text.split_whitespace() {
            out.push(tok.parse::<T>().map_err(|_| Error::Parse {
                line: line + 1,
                detail: format!("bad number {tok:?}"),
            })?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn uncertainty_examples() {
        let u = uncertainty(&ScoreMap::constant(3, 2, 0.5).unwrap());
        assert!(u.values().iter().all(|v| *v == 0.0));
        let b = uncertainty(&ScoreMap::new(2, 1, vec![0.0, 1.0]).unwrap());
        assert_eq!(b.values(), &[0.5, 0.5]);
        let p = uncertainty(&ScoreMap::new(1, 1, vec![0.7f64]).unwrap());
        assert!((p.values()[0] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn select_two_most_uncertain() {
        let p = ScoreMap::new(2, 2, vec![0.5, 0.9, 0.1, 0.4]).unwrap();
        let pts = select_points(&uncertainty(&p), 0.5).unwrap();
        assert_eq!(pts.points, vec![(0, 0), (1, 1)]);
    }

    #[test]
    fn select_ties_row_major() {
        let p = ScoreMap::constant(2, 2, 0.5).unwrap();
        let pts = select_points(&uncertainty(&p), 0.5).unwrap();
        assert_eq!(pts.points, vec![(0, 0), (0, 1)]);
    }

    #[test]
    fn point_count_rounding() {
        assert_eq!(point_count(100, 0.07), 7);
        assert_eq!(point_count(100, 0.1), 10);
        assert_eq!(point_count(10, 0.01), 1);
        assert_eq!(point_count(10, 0.15), 2);
        assert_eq!(point_count(10, 1.0), 10);
        assert_eq!(point_count(64 * 64, 0.1), 410);
    }

    #[test]
    fn select_rejects_bad_fraction() {
        let u = uncertainty(&ScoreMap::constant(2, 2, 0.5).unwrap());
        assert!(select_points(&u, 0.0).is_err());
        assert!(select_points(&u, 1.5).is_err());
    }

    #[test]
    fn sample_at_centers_and_midpoints() {
        let f = FeatureMap::new(
            2,
            3,
            2,
            vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 10.0, 11.0, 12.0, 13.0, 14.0, 15.0],
        )
        .unwrap();
        assert_eq!(sample_bilinear(&f, 0.5, 1.0).unwrap(), vec![4.0, 14.0]);
        assert_eq!(sample_bilinear(&f, 0.25, 0.0).unwrap(), vec![0.5, 10.5]);
        assert!(sample_bilinear(&f, 1.01, 0.0).is_err());
        assert!(sample_bilinear(&f, 0.0, -0.1).is_err());
    }

    #[test]
    fn zero_weights_give_half() {
        let w = MlpWeights::<f64>::zeros(4, 3, 2);
        assert_eq!(mlp_forward(&w, &[1.0, -2.0, 3.0, 0.5], 0.8).unwrap(), 0.5);
        assert!(matches!(
            mlp_forward(&w, &[1.0], 0.8),
            Err(Error::ChannelMismatch { .. })
        ));
    }

    #[test]
    fn hand_built_identity_of_coarse_logit() {
        // Passes the coarse score through two rectifiers unchanged, then maps
        // it to logistic(4·p − 2).
        let l1 = Layer::new(1, 2, vec![0.0, 1.0], vec![0.0]).unwrap();
        let l2 = Layer::new(1, 2, vec![1.0, 0.0], vec![0.0]).unwrap();
        let l3 = Layer::new(1, 2, vec![4.0, 0.0], vec![-2.0]).unwrap();
        let w = MlpWeights::new([l1, l2, l3]).unwrap();
        for p in [0.0, 0.25, 0.5, 0.9] {
            let expect = 1.0 / (1.0 + (-(4.0 * p - 2.0f64)).exp());
            assert_eq!(mlp_forward(&w, &[7.0], p).unwrap(), expect);
        }
    }

    #[test]
    fn weights_must_chain() {
        let l1 = Layer::new(2, 3, vec![0.0; 6], vec![0.0; 2]).unwrap();
        let l2 = Layer::new(2, 2, vec![0.0; 4], vec![0.0; 2]).unwrap();
        let l3 = Layer::new(1, 3, vec![0.0; 3], vec![0.0]).unwrap();
        assert!(MlpWeights::new([l1, l2, l3]).is_err());
    }

    #[test]
    fn weight_text_round_trip_is_exact() {
        let w = MlpWeights::<f64>::random(5, 7, 4, 1.3, 17);
        let text = w.to_text();
        assert!(text.starts_with("HIERPR-MLP v1\n5 7 4\n"));
        assert_eq!(text.lines().count(), 5);
        assert_eq!(MlpWeights::<f64>::parse_text(&text).unwrap(), w);
        let w32 = MlpWeights::<f32>::random(2, 3, 3, 0.7, 1);
        assert_eq!(MlpWeights::<f32>::parse_text(&w32.to_text()).unwrap(), w32);
    }

    #[test]
    fn weight_text_errors() {
        assert!(matches!(
            MlpWeights::<f64>::parse_text("nope\n1 1 1\n"),
            Err(Error::Parse { line: 1, .. })
        ));
        let short = "HIERPR-MLP v1\n1 1 1\n0 0 0\n0 0\n";
        assert!(matches!(MlpWeights::<f64>::parse_text(short), Err(Error::Parse { .. })));
        let bad = "HIERPR-MLP v1\n1 1 1\n0 x 0\n0 0 0\n0 0 0\n";
        assert!(matches!(
            MlpWeights::<f64>::parse_text(bad),
            Err(Error::Parse { line: 3, .. })
        ));
    }

    #[test]
    fn tensor_text_round_trip() {
        let f = FeatureMap::new(2, 3, 2, (0..12).map(|i| i as f64 * 0.1 - 0.4).collect()).unwrap();
        let text = f.to_text();
        assert!(text.starts_with("TENSOR v1\n2 2 3\n"));
        assert_eq!(FeatureMap::<f64>::parse_text(&text).unwrap(), f);
        assert!(FeatureMap::<f64>::parse_text("TENSOR v1\n1 2 2\n1 2 3\n").is_err());
    }

    #[test]
    fn identity_refiner_reproduces_upsample() {
        let l1 = Layer::new(1, 2, vec![0.0, 1.0], vec![0.0]).unwrap();
        let l2 = Layer::new(1, 2, vec![1.0, 0.0], vec![0.0]).unwrap();
        // logistic(logit(p)) ≈ p is not exact; use a same-resolution map of
        // exact halves so the refined value 0.5 equals the input.
        let l3 = Layer::new(1, 2, vec![0.0, 0.0], vec![0.0]).unwrap();
        let w = MlpWeights::new([l1, l2, l3]).unwrap();
        let coarse = ScoreMap::constant(4, 4, 0.5).unwrap();
        let f = FeatureMap::new(1, 2, 2, vec![0.0; 4]).unwrap();
        let out = hierpr_step(&coarse, &f, &w, 1e-9, StepMode::Upsample).unwrap();
        assert_eq!(out.points.len(), 1);
        assert_eq!(out.prediction, resize_score(&coarse, 8, 8).unwrap());
    }

    #[test]
    fn binary_coarse_changes_only_row_major_prefix() {
        let coarse = ScoreMap::from_fn(6, 5, |x, y| if (x + y) % 2 == 0 { 1.0 } else { 0.0 }).unwrap();
        let f = FeatureMap::new(3, 4, 4, (0..48).map(|i| (i as f64).sin()).collect()).unwrap();
        let w = MlpWeights::random(3, 8, 8, 1.0, 5);
        let out = hierpr_step(&coarse, &f, &w, 0.1, StepMode::SameResolution).unwrap();
        let k = point_count(30, 0.1);
        assert_eq!(out.points.points, (0..k).map(|i| (i / 6, i % 6)).collect::<Vec<_>>());
        for (i, (a, b)) in out.prediction.values().iter().zip(coarse.values()).enumerate() {
            if i >= k {
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn step_rejects_channel_mismatch() {
        let coarse = ScoreMap::constant(2, 2, 0.3).unwrap();
        let f = FeatureMap::new(2, 2, 2, vec![0.0; 8]).unwrap();
        let w = MlpWeights::<f64>::zeros(3, 2, 2);
        assert!(matches!(
            hierpr_step(&coarse, &f, &w, 0.5, StepMode::Upsample),
            Err(Error::ChannelMismatch { expected: 3, found: 2 })
        ));
    }

    #[test]
    fn average_is_mean() {
        let a = ScoreMap::new(2, 1, vec![0.0, 1.0]).unwrap();
        let b = ScoreMap::new(2, 1, vec![0.5, 1.0]).unwrap();
        assert_eq!(average(&a, &b).unwrap().values(), &[0.25, 1.0]);
    }

    proptest! {
        #[test]
        fn uncertainty_in_range(values in proptest::collection::vec(0.0f64..=1.0, 1..100)) {
            let u = uncertainty(&ScoreMap::new(values.len(), 1, values).unwrap());
            prop_assert!(u.values().iter().all(|v| (0.0..=0.5).contains(v)));
        }

        #[test]
        fn step_changes_at_most_k(seed in any::<u64>(), fraction in 0.01f64..1.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let coarse = ScoreMap::from_fn(7, 5, |_, _| rand::Rng::gen::<f64>(&mut rng)).unwrap();
            let f = FeatureMap::new(2, 3, 3, (0..18).map(|_| rand::Rng::gen::<f64>(&mut rng) - 0.5).collect()).unwrap();
            let w = MlpWeights::random(2, 4, 4, 1.0, seed);
            let out = hierpr_step(&coarse, &f, &w, fraction, StepMode::Upsample).unwrap();
            prop_assert_eq!(out.prediction.dims(), (14, 10));
            let changed = out.prediction.values().iter().zip(out.upsampled.values()).filter(|(a, b)| a != b).count();
            prop_assert!(changed <= out.points.len());
            prop_assert_eq!(out.points.len(), point_count(140, fraction));
        }
    }
}
