//! Seeded, deterministic mask perturbations.
//!
//! Randomness comes from ChaCha8 seeded with the caller's 64-bit seed; each
//! perturbation kind draws from its own stream so adding a kind never shifts
//! the output of another.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::BinaryMask;
use crate::metrics::iou;
use crate::morphology::{dilate, erode};

const CHUNK_STREAM: u64 = 1;
const IOU_TARGET_STREAM: u64 = 2;

/// Step budget for [`iou_target_perturb`].
pub const MAX_TARGET_STEPS: usize = 4000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PerturbKind {
    Erode,
    Dilate,
    ChunkRemoval,
    IouTarget,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbSpec {
    pub kind: PerturbKind,
    pub radius: u32,
    pub chunk_diameter: u32,
    pub chunk_count: usize,
    pub iou_range: (f64, f64),
    pub seed: u64,
}

impl Default for PerturbSpec {
    fn default() -> Self {
        Self {
            kind: PerturbKind::IouTarget,
            radius: 2,
            chunk_diameter: 32,
            chunk_count: 1,
            iou_range: (0.8, 1.0),
            seed: 0,
        }
    }
}

impl PerturbSpec {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.iou_range;
        if !(lo > 0.0 && lo <= hi && hi <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "IoU range [{lo}, {hi}] must satisfy 0 < lo <= hi <= 1"
            )));
        }
        Ok(())
    }

    pub fn apply(&self, gt: &BinaryMask) -> Result<BinaryMask> {
        self.validate()?;
        match self.kind {
            PerturbKind::Erode => erode_perturb(gt, self.radius),
            PerturbKind::Dilate => dilate_perturb(gt, self.radius),
            PerturbKind::ChunkRemoval => chunk_removal(gt, self.chunk_diameter, self.chunk_count, self.seed),
            PerturbKind::IouTarget => iou_target_perturb(gt, self.iou_range, self.seed),
        }
    }
}

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn pick(rng: &mut ChaCha8Rng, n: usize) -> usize {
    rng.gen_range(0..n as u64) as usize
}

fn check_result(m: BinaryMask) -> Result<BinaryMask> {
    if m.is_non_degenerate() {
        Ok(m)
    } else {
        Err(Error::DegenerateResult)
    }
}

pub fn erode_perturb(gt: &BinaryMask, radius: u32) -> Result<BinaryMask> {
    check_result(erode(gt, radius))
}

pub fn dilate_perturb(gt: &BinaryMask, radius: u32) -> Result<BinaryMask> {
    check_result(dilate(gt, radius))
}

/// Foreground pixels with at least one in-frame 4-neighbour in the background,
/// in row-major order.
pub fn boundary_pixels(mask: &BinaryMask) -> Vec<(usize, usize)> {
    let (w, h) = mask.dims();
    let mut out = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if !mask.get(x, y) {
                continue;
            }
            let edge = (x > 0 && !mask.get(x - 1, y))
                || (x + 1 < w && !mask.get(x + 1, y))
                || (y > 0 && !mask.get(x, y - 1))
                || (y + 1 < h && !mask.get(x, y + 1));
            if edge {
                out.push((x, y));
            }
        }
    }
    out
}

/// Visits every in-frame pixel of the disk of `diameter` centered on `(cx, cy)`;
/// membership is `(2dx)² + (2dy)² <= diameter²`.
fn for_disk(w: usize, h: usize, cx: usize, cy: usize, diameter: u32, mut f: impl FnMut(usize, usize)) {
    let d = diameter as i64;
    let reach = d / 2;
    for dy in -reach..=reach {
        for dx in -reach..=reach {
            if 4 * (dx * dx + dy * dy) > d * d {
                continue;
            }
            let (x, y) = (cx as i64 + dx, cy as i64 + dy);
            if x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h {
                f(x as usize, y as usize);
            }
        }
    }
}

/// Chunk centers drawn (with replacement) from the ground-truth boundary.
pub fn chunk_centers(gt: &BinaryMask, count: usize, seed: u64) -> Result<Vec<(usize, usize)>> {
    if !gt.is_non_degenerate() {
        return Err(Error::DegenerateMask);
    }
    let boundary = boundary_pixels(gt);
    if boundary.is_empty() {
        return Err(Error::NoBoundary);
    }
    let mut rng = rng(seed, CHUNK_STREAM);
    Ok((0..count).map(|_| boundary[pick(&mut rng, boundary.len())]).collect())
}

/// Removes `count` disks of `diameter` pixels centered on seeded-random
/// boundary pixels of `gt`.
pub fn chunk_removal(gt: &BinaryMask, diameter: u32, count: usize, seed: u64) -> Result<BinaryMask> {
    let centers = chunk_centers(gt, count, seed)?;
    check_result(remove_disks(gt, &centers, diameter))
}

fn remove_disks(gt: &BinaryMask, centers: &[(usize, usize)], diameter: u32) -> BinaryMask {
    let (w, h) = gt.dims();
    let mut out = gt.clone();
    for (cx, cy) in centers {
        for_disk(w, h, *cx, *cy, diameter, |x, y| out.set(x, y, false));
    }
    out
}

/// Chunk diameter whose removal brings IoU closest to `target_iou`, found by
/// bisection (IoU is non-increasing in the diameter for fixed centers).
#[derive(Clone, Debug, PartialEq)]
pub struct MatchedChunk {
    pub diameter: u32,
    pub centers: Vec<(usize, usize)>,
    pub mask: BinaryMask,
    pub iou: f64,
}

pub fn chunk_removal_matching_iou(gt: &BinaryMask, target_iou: f64, count: usize, seed: u64) -> Result<MatchedChunk> {
    if !(target_iou > 0.0 && target_iou <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "target IoU {target_iou} outside (0, 1]"
        )));
    }
    let centers = chunk_centers(gt, count, seed)?;
    let eval = |d: u32| -> Result<(BinaryMask, f64)> {
        let m = remove_disks(gt, &centers, d);
        let v = iou::<f64>(&m, gt)?;
        Ok((m, v))
    };
    // Smallest diameter with IoU <= target.
    let (mut lo, mut hi) = (0u32, 2 * (gt.width().max(gt.height()) as u32) + 2);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if eval(mid)?.1 <= target_iou {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let (m_hi, v_hi) = eval(hi)?;
    let (m_lo, v_lo) = eval(lo)?;
    let (diameter, mask, v) = if (v_lo - target_iou).abs() < (v_hi - target_iou).abs() {
        (lo, m_lo, v_lo)
    } else {
        (hi, m_hi, v_hi)
    };
    Ok(MatchedChunk {
        diameter,
        centers,
        mask: check_result(mask)?,
        iou: v,
    })
}

/// Random local disk dilations and erosions at boundary pixels until the IoU
/// against `gt` falls inside `range`.
///
/// A target is drawn uniformly from `range`; stamps are sized from the
/// remaining IoU gap and shrink whenever a stamp would overshoot below the
/// lower bound (such stamps are undone).
pub fn iou_target_perturb(gt: &BinaryMask, range: (f64, f64), seed: u64) -> Result<BinaryMask> {
    let (lo, hi) = range;
    if !(lo > 0.0 && lo <= hi && hi <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "IoU range [{lo}, {hi}] must satisfy 0 < lo <= hi <= 1"
        )));
    }
    if !gt.is_non_degenerate() {
        return Err(Error::DegenerateMask);
    }
    let mut rng = rng(seed, IOU_TARGET_STREAM);
    let target = if lo == hi {
        lo
    } else {
        lo + rng.gen::<f64>() * (hi - lo)
    };
    if target >= 1.0 {
        return Ok(gt.clone());
    }

    let (w, h) = gt.dims();
    let mut result = gt.clone();
    let mut inter = gt.count_ones() as i64;
    let mut union = inter;
    let max_radius = (w.max(h) / 4).max(1) as f64;
    let mut shrink = 1.0f64;
    let mut flipped: Vec<(usize, usize)> = Vec::new();

    for _ in 0..MAX_TARGET_STEPS {
        let current = inter as f64 / union as f64;
        if current <= target && current >= lo {
            return Ok(result);
        }
        let boundary = boundary_pixels(&result);
        if boundary.is_empty() {
            break;
        }
        // A boundary-centered stamp flips roughly half its area.
        let wanted = (current - target) * union as f64;
        let radius = ((2.0 * wanted / std::f64::consts::PI).sqrt() * shrink).clamp(1.0, max_radius);
        let diameter = (2.0 * radius).round().max(1.0) as u32;
        let add = rng.gen::<bool>();
        let (cx, cy) = boundary[pick(&mut rng, boundary.len())];

        flipped.clear();
        for_disk(w, h, cx, cy, diameter, |x, y| {
            if result.get(x, y) != add {
                result.set(x, y, add);
                flipped.push((x, y));
                let delta = if add { 1 } else { -1 };
                if gt.get(x, y) {
                    inter += delta;
                } else {
                    union += delta;
                }
            }
        });

        if (inter as f64 / union as f64) < lo || inter == 0 {
            for (x, y) in &flipped {
                result.set(*x, *y, !add);
                let delta = if add { -1 } else { 1 };
                if gt.get(*x, *y) {
                    inter += delta;
                } else {
                    union += delta;
                }
            }
            shrink *= 0.5;
        }
    }
    Err(Error::BudgetExhausted {
        iterations: MAX_TARGET_STEPS,
        achieved_iou: inter as f64 / union as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::mba;
    use crate::shapes::centered_disk;

    #[test]
    fn radius_zero_is_identity() {
        let gt = centered_disk(64, 20.0).unwrap();
        assert_eq!(erode_perturb(&gt, 0).unwrap(), gt);
        assert_eq!(dilate_perturb(&gt, 0).unwrap(), gt);
    }

    #[test]
    fn erode_of_large_disk_keeps_iou_but_hurts_boundary() {
        let gt = centered_disk(640, 300.0).unwrap();
        let e = erode_perturb(&gt, 2).unwrap();
        assert!(iou::<f64>(&e, &gt).unwrap() >= 0.97);
        assert!(mba::<f64>(&e, &gt).unwrap() < 1.0);
    }

    #[test]
    fn opening_is_near_identity_on_disk() {
        let gt = centered_disk(300, 120.0).unwrap();
        for r in 1..4 {
            let opened = dilate(&erode_perturb(&gt, r).unwrap(), r);
            assert!(iou::<f64>(&opened, &gt).unwrap() >= 0.99);
        }
    }

    #[test]
    fn erosion_to_nothing_is_error() {
        let gt = centered_disk(32, 3.0).unwrap();
        assert!(matches!(erode_perturb(&gt, 5), Err(Error::DegenerateResult)));
        assert!(matches!(dilate_perturb(&gt, 60), Err(Error::DegenerateResult)));
    }

    #[test]
    fn chunk_removal_identity_and_determinism() {
        let gt = centered_disk(128, 40.0).unwrap();
        assert_eq!(chunk_removal(&gt, 10, 0, 7).unwrap(), gt);
        let a = chunk_removal(&gt, 12, 3, 99).unwrap();
        let b = chunk_removal(&gt, 12, 3, 99).unwrap();
        assert_eq!(a, b);
        assert!(a.count_ones() < gt.count_ones());
        let c = chunk_removal(&gt, 12, 3, 100).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn chunk_removal_needs_boundary() {
        let full = BinaryMask::filled(16, 16, true).unwrap();
        assert!(matches!(chunk_removal(&full, 4, 1, 0), Err(Error::DegenerateMask)));
    }

    #[test]
    fn chunk_centers_lie_on_boundary() {
        let gt = centered_disk(100, 30.0).unwrap();
        let boundary = boundary_pixels(&gt);
        for c in chunk_centers(&gt, 20, 5).unwrap() {
            assert!(boundary.contains(&c));
        }
    }

    #[test]
    fn matched_chunk_dissociates_from_erosion() {
        let gt = centered_disk(512, 200.0).unwrap();
        let eroded = erode_perturb(&gt, 2).unwrap();
        let target = iou::<f64>(&eroded, &gt).unwrap();
        let chunk = chunk_removal_matching_iou(&gt, target, 1, 3).unwrap();
        assert!((chunk.iou - target).abs() <= 0.01);
        let gap = mba::<f64>(&chunk.mask, &gt).unwrap() - mba::<f64>(&eroded, &gt).unwrap();
        assert!(gap >= 0.05, "{gap}");
    }

    #[test]
    fn iou_target_identity_for_unit_range() {
        let gt = centered_disk(64, 20.0).unwrap();
        assert_eq!(iou_target_perturb(&gt, (1.0, 1.0), 4).unwrap(), gt);
    }

    #[test]
    fn iou_target_hits_range_for_many_seeds() {
        let gt = centered_disk(512, 180.0).unwrap();
        for seed in 0..20 {
            let out = iou_target_perturb(&gt, (0.8, 1.0), seed).unwrap();
            let v = iou::<f64>(&out, &gt).unwrap();
            assert!((0.8..=1.0).contains(&v), "seed {seed}: {v}");
        }
    }

    #[test]
    fn iou_target_is_deterministic() {
        let gt = centered_disk(200, 70.0).unwrap();
        let a = iou_target_perturb(&gt, (0.85, 0.9), 11).unwrap();
        let b = iou_target_perturb(&gt, (0.85, 0.9), 11).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn iou_target_rejects_bad_range() {
        let gt = centered_disk(64, 20.0).unwrap();
        for r in [(0.0, 0.5), (0.9, 0.8), (0.5, 1.1)] {
            assert!(matches!(iou_target_perturb(&gt, r, 0), Err(Error::InvalidParameter(_))));
        }
    }

    #[test]
    fn spec_dispatch() {
        let gt = centered_disk(100, 30.0).unwrap();
        let spec = PerturbSpec {
            kind: PerturbKind::Erode,
            radius: 3,
            ..Default::default()
        };
        assert_eq!(spec.apply(&gt).unwrap(), erode(&gt, 3));
        let bad = PerturbSpec {
            iou_range: (0.9, 0.1),
            ..Default::default()
        };
        assert!(bad.apply(&gt).is_err());
    }
}
