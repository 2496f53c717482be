//! Exact Euclidean distance transform and disk morphology.
//!
//! Distances are computed as exact integer squared distances with a two-pass
//! separable lower-envelope transform, so thresholding the field at `r²`
//! reproduces a `dx² + dy² <= r²` disk sweep bit for bit. Pixels outside the
//! frame never act as seeds.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mask::BinaryMask;

/// Number of boundary bands used by mBA and MQ.
pub const DEFAULT_BANDS: usize = 5;

/// Divisor applied to `w + h` to obtain the widest band radius.
pub const RADIUS_DIVISOR: f64 = 300.0;

/// Largest side for which squared distances fit in `u32`.
const MAX_SIDE: usize = 46_000;

/// Exact distance to the nearest seed pixel, stored squared.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceField {
    width: usize,
    height: usize,
    squared: Vec<u32>,
}

impl DistanceField {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn squared(&self) -> &[u32] {
        &self.squared
    }

    pub fn squared_at(&self, x: usize, y: usize) -> u32 {
        self.squared[y * self.width + x]
    }

    pub fn distance_at(&self, x: usize, y: usize) -> f64 {
        (self.squared_at(x, y) as f64).sqrt()
    }

    pub fn distances(&self) -> Vec<f64> {
        self.squared.iter().map(|d| (*d as f64).sqrt()).collect()
    }
}

/// Digital disk `{ (dx, dy) : dx² + dy² <= r² }`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DiskKernel {
    radius: u32,
    offsets: Vec<(i64, i64)>,
}

impl DiskKernel {
    pub fn new(radius: u32) -> Self {
        let r = radius as i64;
        let offsets = (-r..=r)
            .flat_map(|dy| (-r..=r).map(move |dx| (dx, dy)))
            .filter(|(dx, dy)| dx * dx + dy * dy <= r * r)
            .collect();
        Self { radius, offsets }
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    pub fn offsets(&self) -> &[(i64, i64)] {
        &self.offsets
    }

    pub fn contains(&self, dx: i64, dy: i64) -> bool {
        let r = self.radius as i64;
        dx * dx + dy * dy <= r * r
    }
}

/// Squared EDT to the set pixels of `seeds` (`want == true`) or to the unset
/// pixels (`want == false`). Returns `None` when there is no such pixel.
fn squared_edt(mask: &BinaryMask, want: bool) -> Option<Vec<u32>> {
    let (w, h) = mask.dims();
    assert!(w <= MAX_SIDE && h <= MAX_SIDE, "mask too large for exact u32 distances");
    let values = mask.values();
    if !values.contains(&want) {
        return None;
    }
    let inf = (w + h) as u32;

    // Vertical pass: distance to the nearest seed in the same column.
    let mut g = vec![inf; w * h];
    for x in 0..w {
        if values[x] == want {
            g[x] = 0;
        }
    }
    for y in 1..h {
        let (prev, cur) = g.split_at_mut(y * w);
        let prev = &prev[(y - 1) * w..];
        let row = &values[y * w..(y + 1) * w];
        for x in 0..w {
            cur[x] = if row[x] == want { 0 } else { (prev[x] + 1).min(inf) };
        }
    }
    for y in (0..h.saturating_sub(1)).rev() {
        let (cur, next) = g.split_at_mut((y + 1) * w);
        let cur = &mut cur[y * w..];
        for x in 0..w {
            let below = next[x] + 1;
            if below < cur[x] {
                cur[x] = below;
            }
        }
    }

    // Horizontal pass: lower envelope of parabolas per row.
    let mut out = vec![0u32; w * h];
    out.par_chunks_mut(w).zip(g.par_chunks(w)).for_each_init(
        || (vec![0usize; w], vec![0i64; w]),
        |(s, t), (out_row, g_row)| envelope_row(g_row, out_row, s, t),
    );
    Some(out)
}

fn envelope_row(g: &[u32], out: &mut [u32], s: &mut [usize], t: &mut [i64]) {
    let w = g.len();
    let gsq = |i: usize| (g[i] as i64) * (g[i] as i64);
    let f = |x: i64, i: usize| (x - i as i64) * (x - i as i64) + gsq(i);
    let sep = |i: usize, u: usize| {
        let (ii, uu) = (i as i64, u as i64);
        (uu * uu - ii * ii + gsq(u) - gsq(i)).div_euclid(2 * (uu - ii))
    };

    let mut q: isize = 0;
    s[0] = 0;
    t[0] = 0;
    for u in 1..w {
        while q >= 0 && f(t[q as usize], s[q as usize]) > f(t[q as usize], u) {
            q -= 1;
        }
        if q < 0 {
            q = 0;
            s[0] = u;
        } else {
            let next = 1 + sep(s[q as usize], u);
            if next < w as i64 {
                q += 1;
                s[q as usize] = u;
                t[q as usize] = next;
            }
        }
    }
    for u in (0..w).rev() {
        out[u] = f(u as i64, s[q as usize]) as u32;
        if u as i64 == t[q as usize] {
            q -= 1;
        }
    }
}

/// Exact Euclidean distance from every pixel to the nearest set pixel of `seeds`.
pub fn edt(seeds: &BinaryMask) -> Result<DistanceField> {
    let squared = squared_edt(seeds, true).ok_or(Error::EmptySeeds)?;
    Ok(DistanceField {
        width: seeds.width(),
        height: seeds.height(),
        squared,
    })
}

/// Pixels within distance `radius` of the foreground.
pub fn dilate(mask: &BinaryMask, radius: u32) -> BinaryMask {
    if radius == 0 {
        return mask.clone();
    }
    let (w, h) = mask.dims();
    match squared_edt(mask, true) {
        None => mask.clone(),
        Some(d) => {
            let r2 = radius as u64 * radius as u64;
            BinaryMask::from_raw(w, h, d.into_iter().map(|v| v as u64 <= r2).collect())
        }
    }
}

/// Pixels farther than `radius` from every in-frame background pixel.
pub fn erode(mask: &BinaryMask, radius: u32) -> BinaryMask {
    if radius == 0 {
        return mask.clone();
    }
    let (w, h) = mask.dims();
    match squared_edt(mask, false) {
        None => mask.clone(),
        Some(d) => {
            let r2 = radius as u64 * radius as u64;
            BinaryMask::from_raw(w, h, d.into_iter().map(|v| v as u64 > r2).collect())
        }
    }
}

/// Band radii for an image of `width × height`: `n` uniform samples of
/// `[1, max(1, (w + h) / 300)]`, rounded half-up. Duplicates are kept.
pub fn band_radii(width: usize, height: usize, n: usize) -> Result<Vec<u32>> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("band count {n} must be at least 2")));
    }
    let upper = ((width + height) as f64 / RADIUS_DIVISOR).max(1.0);
    Ok((0..n)
        .map(|i| {
            let rho = 1.0 + i as f64 * (upper - 1.0) / (n - 1) as f64;
            (rho + 0.5).floor() as u32
        })
        .collect())
}

/// Squared distance from each pixel to the nearest pixel of the opposite class.
///
/// A pixel lies in the band of radius `r` exactly when this value is `<= r²`,
/// which is `dilate(gt, r) AND NOT erode(gt, r)`.
#[derive(Clone, Debug)]
pub struct CrossDistance {
    width: usize,
    height: usize,
    squared: Vec<u32>,
}

impl CrossDistance {
    pub fn new(gt: &BinaryMask) -> Result<Self> {
        if !gt.is_non_degenerate() {
            return Err(Error::DegenerateMask);
        }
        let to_fg = squared_edt(gt, true).expect("non-degenerate");
        let to_bg = squared_edt(gt, false).expect("non-degenerate");
        // One of the two is zero at every pixel.
        let squared = to_fg.into_iter().zip(to_bg).map(|(a, b)| a.max(b)).collect();
        Ok(Self {
            width: gt.width(),
            height: gt.height(),
            squared,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn squared(&self) -> &[u32] {
        &self.squared
    }

    pub fn band(&self, radius: u32) -> BinaryMask {
        let r2 = radius as u64 * radius as u64;
        BinaryMask::from_raw(
            self.width,
            self.height,
            self.squared.iter().map(|d| *d as u64 <= r2).collect(),
        )
    }
}

/// The nested boundary bands `b_1 ⊆ … ⊆ b_N` of a ground-truth mask.
#[derive(Clone, Debug, PartialEq)]
pub struct BandSet {
    pub radii: Vec<u32>,
    pub bands: Vec<BinaryMask>,
}

impl BandSet {
    pub fn len(&self) -> usize {
        self.bands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bands.is_empty()
    }

    pub fn widest(&self) -> &BinaryMask {
        self.bands.last().expect("band set is never empty")
    }
}

/// The default five bands.
pub fn bands(gt: &BinaryMask) -> Result<BandSet> {
    bands_with(gt, DEFAULT_BANDS)
}

pub fn bands_with(gt: &BinaryMask, n: usize) -> Result<BandSet> {
    let radii = band_radii(gt.width(), gt.height(), n)?;
    let cross = CrossDistance::new(gt)?;
    let bands = radii.iter().map(|r| cross.band(*r)).collect();
    Ok(BandSet { radii, bands })
}
