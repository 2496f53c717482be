//! Grid types shared by every module, plus 8-bit image I/O and binarization.
//!
//! All grids are row-major with the origin at the top-left pixel; `x` is the
//! column and `y` the row.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use image::{DynamicImage, GrayImage, ImageFormat};

use crate::error::{check_dims, Error, Result};
use crate::scalar::Scalar;

pub use image::RgbImage;

/// Default binarization threshold for score maps.
pub const DEFAULT_THRESHOLD: f64 = 0.5;

fn check_size(width: usize, height: usize, len: usize) -> Result<()> {
    if width == 0 || height == 0 || width.checked_mul(height) != Some(len) {
        return Err(Error::InvalidDimensions { width, height });
    }
    Ok(())
}

/// Soft foreground prediction with every value in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreMap<T = f64> {
    width: usize,
    height: usize,
    values: Vec<T>,
}

impl<T: Scalar> ScoreMap<T> {
    pub fn new(width: usize, height: usize, values: Vec<T>) -> Result<Self> {
        check_size(width, height, values.len())?;
        if let Some((index, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v >= T::zero() && **v <= T::one()))
        {
            return Err(Error::ValueOutOfRange {
                index,
                value: v.to_f64_lossy(),
            });
        }
        Ok(Self { width, height, values })
    }

    /// Builds a map from `f(x, y)`; values are validated.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Result<Self> {
        let mut values = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                values.push(f(x, y));
            }
        }
        Self::new(width, height, values)
    }

    pub fn constant(width: usize, height: usize, value: T) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    /// Caller guarantees the values are in range and the length matches.
    pub(crate) fn from_raw(width: usize, height: usize, values: Vec<T>) -> Self {
        debug_assert_eq!(width * height, values.len());
        debug_assert!(values.iter().all(|v| *v >= T::zero() && *v <= T::one()));
        Self { width, height, values }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.values[y * self.width + x]
    }

    pub fn mean(&self) -> T {
        self.values.iter().copied().sum::<T>() / T::of_usize(self.len())
    }

    /// Converts between scalar precisions.
    pub fn cast<U: Scalar>(&self) -> ScoreMap<U> {
        let values = self
            .values
            .iter()
            .map(|v| U::of(v.to_f64_lossy()).max(U::zero()).min(U::one()))
            .collect();
        ScoreMap::from_raw(self.width, self.height, values)
    }

    /// Crops the window `(x, y, w, h)`; the window must lie inside the frame.
    pub fn crop(&self, x: usize, y: usize, w: usize, h: usize) -> Self {
        assert!(x + w <= self.width && y + h <= self.height && w > 0 && h > 0);
        let mut values = Vec::with_capacity(w * h);
        for row in y..y + h {
            let start = row * self.width + x;
            values.extend_from_slice(&self.values[start..start + w]);
        }
        Self::from_raw(w, h, values)
    }

    /// Thresholds the map with `threshold` in `(0, 1)`; ties go to foreground.
    pub fn binarize(&self, threshold: T) -> Result<BinaryMask> {
        if !(threshold > T::zero() && threshold < T::one()) {
            return Err(Error::InvalidThreshold(threshold.to_f64_lossy()));
        }
        Ok(self.binarize_unchecked(threshold))
    }

    pub(crate) fn binarize_unchecked(&self, threshold: T) -> BinaryMask {
        BinaryMask {
            width: self.width,
            height: self.height,
            values: self.values.iter().map(|v| *v >= threshold).collect(),
        }
    }

    /// Quantizes to 8-bit gray with `round(v * 255)`.
    pub fn to_gray(&self) -> GrayImage {
        let bytes = self
            .values
            .iter()
            .map(|v| (v.to_f64_lossy() * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect();
        GrayImage::from_raw(self.width as u32, self.height as u32, bytes).expect("sized buffer")
    }
}

/// Binary mask; `true` is foreground.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    values: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, values: Vec<bool>) -> Result<Self> {
        check_size(width, height, values.len())?;
        Ok(Self { width, height, values })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Result<Self> {
        let mut values = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                values.push(f(x, y));
            }
        }
        Self::new(width, height, values)
    }

    pub fn filled(width: usize, height: usize, value: bool) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub(crate) fn from_raw(width: usize, height: usize, values: Vec<bool>) -> Self {
        debug_assert_eq!(width * height, values.len());
        Self { width, height, values }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[bool] {
        &self.values
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.values[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.values[y * self.width + x] = v;
    }

    pub fn count_ones(&self) -> usize {
        self.values.iter().filter(|v| **v).count()
    }

    pub fn count_zeros(&self) -> usize {
        self.len() - self.count_ones()
    }

    /// Both classes are present.
    pub fn is_non_degenerate(&self) -> bool {
        let ones = self.count_ones();
        ones > 0 && ones < self.len()
    }

    pub fn not(&self) -> Self {
        Self::from_raw(self.width, self.height, self.values.iter().map(|v| !v).collect())
    }

    pub fn and(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a && b)
    }

    pub fn or(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a || b)
    }

    pub fn and_not(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a && !b)
    }

    /// `self ⊆ other`.
    pub fn is_subset_of(&self, other: &Self) -> bool {
        self.dims() == other.dims() && self.values.iter().zip(&other.values).all(|(a, b)| !a || *b)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(bool, bool) -> bool) -> Result<Self> {
        check_dims(self.dims(), other.dims())?;
        Ok(Self::from_raw(
            self.width,
            self.height,
            self.values.iter().zip(&other.values).map(|(a, b)| f(*a, *b)).collect(),
        ))
    }

    /// Scores of exactly 0 and 1.
    pub fn to_scores<T: Scalar>(&self) -> ScoreMap<T> {
        ScoreMap::from_raw(
            self.width,
            self.height,
            self.values
                .iter()
                .map(|v| if *v { T::one() } else { T::zero() })
                .collect(),
        )
    }

    /// Tight bounding box `(x, y, w, h)` of the foreground, if any.
    pub fn bounding_box(&self) -> Option<(usize, usize, usize, usize)> {
        let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
        for y in 0..self.height {
            let row = &self.values[y * self.width..(y + 1) * self.width];
            if let Some(first) = row.iter().position(|v| *v) {
                let last = row.iter().rposition(|v| *v).unwrap();
                x0 = x0.min(first);
                x1 = x1.max(last);
                y0 = y0.min(y);
                y1 = y;
            }
        }
        (x0 != usize::MAX).then(|| (x0, y0, x1 - x0 + 1, y1 - y0 + 1))
    }

    pub fn crop(&self, x: usize, y: usize, w: usize, h: usize) -> Self {
        assert!(x + w <= self.width && y + h <= self.height && w > 0 && h > 0);
        let mut values = Vec::with_capacity(w * h);
        for row in y..y + h {
            let start = row * self.width + x;
            values.extend_from_slice(&self.values[start..start + w]);
        }
        Self::from_raw(w, h, values)
    }

    /// 0 for background, 255 for foreground.
    pub fn to_gray(&self) -> GrayImage {
        let bytes = self.values.iter().map(|v| if *v { 255 } else { 0 }).collect();
        GrayImage::from_raw(self.width as u32, self.height as u32, bytes).expect("sized buffer")
    }
}

/// Free-function form of [`ScoreMap::binarize`].
pub fn binarize<T: Scalar>(scores: &ScoreMap<T>, threshold: T) -> Result<BinaryMask> {
    scores.binarize(threshold)
}

fn load_gray(path: &Path) -> Result<GrayImage> {
    let img = image::open(path).map_err(|source| match source {
        image::ImageError::IoError(e) => Error::io(path, e),
        source => Error::Image {
            path: path.to_path_buf(),
            source,
        },
    })?;
    match img {
        DynamicImage::ImageLuma8(gray) => Ok(gray),
        other => Err(Error::UnsupportedFormat {
            path: path.to_path_buf(),
            detail: format!("{:?}", other.color()),
        }),
    }
}

/// Reads an 8-bit single-channel PNG or binary PGM; values `>= 128` are foreground.
pub fn load_mask(path: impl AsRef<Path>) -> Result<BinaryMask> {
    let gray = load_gray(path.as_ref())?;
    let (w, h) = (gray.width() as usize, gray.height() as usize);
    BinaryMask::new(w, h, gray.into_raw().into_iter().map(|v| v >= 128).collect())
}

/// Reads an 8-bit single-channel image as scores `v / 255`.
pub fn load_scoremap<T: Scalar>(path: impl AsRef<Path>) -> Result<ScoreMap<T>> {
    let gray = load_gray(path.as_ref())?;
    let (w, h) = (gray.width() as usize, gray.height() as usize);
    let scale = T::of(255.0);
    let values = gray.into_raw().into_iter().map(|v| T::of(v as f64) / scale).collect();
    ScoreMap::new(w, h, values)
}

pub fn load_image(path: impl AsRef<Path>) -> Result<RgbImage> {
    let path = path.as_ref();
    image::open(path)
        .map(|img| img.to_rgb8())
        .map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })
}

fn is_pgm(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| e.eq_ignore_ascii_case("pgm"))
        .unwrap_or(false)
}

/// Writes a gray image as binary PGM (`.pgm` extension) or PNG (anything else).
pub fn save_gray(img: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if is_pgm(path) {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        write!(out, "P5\n{} {}\n255\n", img.width(), img.height())
            .and_then(|_| out.write_all(img.as_raw()))
            .and_then(|_| out.flush())
            .map_err(|e| Error::io(path, e))
    } else {
        img.save_with_format(path, ImageFormat::Png)
            .map_err(|source| match source {
                image::ImageError::IoError(e) => Error::io(path, e),
                source => Error::Image {
                    path: path.to_path_buf(),
                    source,
                },
            })
    }
}

pub fn save_mask(mask: &BinaryMask, path: impl AsRef<Path>) -> Result<()> {
    save_gray(&mask.to_gray(), path)
}

pub fn save_scoremap<T: Scalar>(scores: &ScoreMap<T>, path: impl AsRef<Path>) -> Result<()> {
    save_gray(&scores.to_gray(), path)
}

pub fn save_image(img: &RgbImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    img.save_with_format(path, ImageFormat::Png)
        .map_err(|source| match source {
            image::ImageError::IoError(e) => Error::io(path, e),
            source => Error::Image {
                path: path.to_path_buf(),
                source,
            },
        })
}
