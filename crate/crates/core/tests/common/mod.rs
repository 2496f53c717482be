//! Literal-definition oracles shared by the integration tests. Everything
//! here is deliberately naive: kernel sweeps, direct counting, full sorts.

#![allow(dead_code)]

use mos_core::hierpr::{FeatureMap, MlpWeights, UncertaintyMap};
use mos_core::mask::{BinaryMask, ScoreMap};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Union of a few random disks and rectangles; never single-class.
pub fn random_blob(rng: &mut ChaCha8Rng, w: usize, h: usize) -> BinaryMask {
    loop {
        let mut m = BinaryMask::filled(w, h, false).unwrap();
        for _ in 0..rng.gen_range(1..=4) {
            let cx = rng.gen_range(0.0..w as f64);
            let cy = rng.gen_range(0.0..h as f64);
            let s = w.min(h) as f64;
            if rng.gen_bool(0.6) {
                let r = rng.gen_range(0.05 * s..0.35 * s);
                for y in 0..h {
                    for x in 0..w {
                        let (dx, dy) = (x as f64 + 0.5 - cx, y as f64 + 0.5 - cy);
                        if dx * dx + dy * dy <= r * r {
                            m.set(x, y, true);
                        }
                    }
                }
            } else {
                let (rw, rh) = (rng.gen_range(0.1 * s..0.5 * s), rng.gen_range(0.1 * s..0.5 * s));
                for y in 0..h {
                    for x in 0..w {
                        if (x as f64 - cx).abs() <= rw / 2.0 && (y as f64 - cy).abs() <= rh / 2.0 {
                            m.set(x, y, true);
                        }
                    }
                }
            }
        }
        if m.is_non_degenerate() {
            return m;
        }
    }
}

/// Independent noise with density `p`.
pub fn random_noise(rng: &mut ChaCha8Rng, w: usize, h: usize, p: f64) -> BinaryMask {
    BinaryMask::from_fn(w, h, |_, _| rng.gen_bool(p)).unwrap()
}

/// Scores that agree with `gt` most of the time, with some confident errors.
pub fn noisy_scores(rng: &mut ChaCha8Rng, gt: &BinaryMask) -> ScoreMap<f64> {
    let (w, h) = gt.dims();
    let flip = rng.gen_range(0.0..0.3);
    ScoreMap::from_fn(w, h, |x, y| {
        let truth = gt.get(x, y);
        let agree = !rng.gen_bool(flip);
        let v: f64 = rng.gen_range(0.0..=0.5);
        if truth == agree {
            (0.5 + v).min(1.0)
        } else {
            0.5 - v.max(1e-3)
        }
    })
    .unwrap()
}

fn in_kernel(dx: i64, dy: i64, r: u32) -> bool {
    dx * dx + dy * dy <= (r as i64) * (r as i64)
}

/// Pixel set when any foreground pixel lies within the closed disk.
pub fn dilate_sweep(m: &BinaryMask, r: u32) -> BinaryMask {
    let (w, h) = m.dims();
    let ri = r as i64;
    BinaryMask::from_fn(w, h, |x, y| {
        for dy in -ri..=ri {
            for dx in -ri..=ri {
                let (sx, sy) = (x as i64 + dx, y as i64 + dy);
                if in_kernel(dx, dy, r)
                    && sx >= 0
                    && sy >= 0
                    && (sx as usize) < w
                    && (sy as usize) < h
                    && m.get(sx as usize, sy as usize)
                {
                    return true;
                }
            }
        }
        false
    })
    .unwrap()
}

/// Pixel kept when every in-frame pixel of the closed disk is foreground.
pub fn erode_sweep(m: &BinaryMask, r: u32) -> BinaryMask {
    let (w, h) = m.dims();
    let ri = r as i64;
    BinaryMask::from_fn(w, h, |x, y| {
        for dy in -ri..=ri {
            for dx in -ri..=ri {
                let (sx, sy) = (x as i64 + dx, y as i64 + dy);
                if in_kernel(dx, dy, r)
                    && sx >= 0
                    && sy >= 0
                    && (sx as usize) < w
                    && (sy as usize) < h
                    && !m.get(sx as usize, sy as usize)
                {
                    return false;
                }
            }
        }
        true
    })
    .unwrap()
}

pub fn radii(w: usize, h: usize, n: usize) -> Vec<u32> {
    let ub = ((w + h) as f64 / 300.0).max(1.0);
    (0..n)
        .map(|i| (1.0 + i as f64 * (ub - 1.0) / (n - 1) as f64 + 0.5).floor() as u32)
        .collect()
}

pub fn bands_sweep(gt: &BinaryMask, n: usize) -> Vec<BinaryMask> {
    let (w, h) = gt.dims();
    radii(w, h, n)
        .into_iter()
        .map(|r| dilate_sweep(gt, r).and_not(&erode_sweep(gt, r)).unwrap())
        .collect()
}

pub fn accuracy_in(pred: &BinaryMask, gt: &BinaryMask, region: &BinaryMask) -> f64 {
    let (mut hit, mut total) = (0usize, 0usize);
    for i in 0..gt.len() {
        if region.values()[i] {
            total += 1;
            if pred.values()[i] == gt.values()[i] {
                hit += 1;
            }
        }
    }
    hit as f64 / total as f64
}

pub fn iou(pred: &BinaryMask, gt: &BinaryMask) -> f64 {
    let inter = pred
        .values()
        .iter()
        .zip(gt.values())
        .filter(|(a, b)| **a && **b)
        .count();
    let union = pred
        .values()
        .iter()
        .zip(gt.values())
        .filter(|(a, b)| **a || **b)
        .count();
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

pub fn mae(s: &ScoreMap<f64>, gt: &BinaryMask) -> f64 {
    let sum: f64 = s
        .values()
        .iter()
        .zip(gt.values())
        .map(|(v, g)| (v - if *g { 1.0 } else { 0.0 }).abs())
        .sum();
    sum / s.len() as f64
}

pub fn mba(pred: &BinaryMask, gt: &BinaryMask, n: usize) -> f64 {
    let bands = bands_sweep(gt, n);
    bands.iter().map(|b| accuracy_in(pred, gt, b)).sum::<f64>() / n as f64
}

pub fn mq(pred: &BinaryMask, gt: &BinaryMask, n: usize) -> f64 {
    let bands = bands_sweep(gt, n);
    let outside = bands.last().unwrap().not();
    let inside = bands.iter().map(|b| accuracy_in(pred, gt, b)).sum::<f64>() / n as f64;
    0.5 * accuracy_in(pred, gt, &outside) + 0.5 * inside
}

pub fn binarize(s: &ScoreMap<f64>) -> BinaryMask {
    BinaryMask::from_fn(s.width(), s.height(), |x, y| s.get(x, y) >= 0.5).unwrap()
}

/// Full sort by (uncertainty, row-major index), then the first `k`.
pub fn top_k_sort(u: &UncertaintyMap<f64>, k: usize) -> Vec<(usize, usize)> {
    let w = u.width();
    let mut idx: Vec<usize> = (0..u.values().len()).collect();
    idx.sort_by(|a, b| u.values()[*a].partial_cmp(&u.values()[*b]).unwrap().then(a.cmp(b)));
    idx.truncate(k);
    idx.into_iter().map(|i| (i / w, i % w)).collect()
}

pub fn bilinear_formula(f: &FeatureMap<f64>, x: f64, y: f64) -> Vec<f64> {
    let px = x * (f.width() - 1) as f64;
    let py = y * (f.height() - 1) as f64;
    let (x0, y0) = (px.floor() as usize, py.floor() as usize);
    let (x1, y1) = ((x0 + 1).min(f.width() - 1), (y0 + 1).min(f.height() - 1));
    let (ax, ay) = (px - x0 as f64, py - y0 as f64);
    (0..f.channels())
        .map(|c| {
            (1.0 - ax) * (1.0 - ay) * f.get(c, x0, y0)
                + ax * (1.0 - ay) * f.get(c, x1, y0)
                + (1.0 - ax) * ay * f.get(c, x0, y1)
                + ax * ay * f.get(c, x1, y1)
        })
        .collect()
}

/// Dense matrix evaluation of the three-layer perceptron.
pub fn mlp_matrix(w: &MlpWeights<f64>, feature: &[f64], coarse: f64) -> f64 {
    let layer = |i: usize| {
        let l = &w.layers[i];
        (
            DMatrix::from_row_slice(l.outputs, l.inputs, &l.matrix),
            DVector::from_column_slice(&l.bias),
        )
    };
    let with_coarse = |v: &DVector<f64>| {
        let mut out = v.clone().resize_vertically(v.len() + 1, 0.0);
        out[v.len()] = coarse;
        out
    };
    let x = with_coarse(&DVector::from_column_slice(feature));
    let (m1, b1) = layer(0);
    let h1 = (m1 * x + b1).map(|v| v.max(0.0));
    let (m2, b2) = layer(1);
    let h2 = (m2 * with_coarse(&h1) + b2).map(|v| v.max(0.0));
    let (m3, b3) = layer(2);
    let z = (m3 * with_coarse(&h2) + b3)[0];
    1.0 / (1.0 + (-z).exp())
}
