//! Rasterized synthetic shapes used as fixtures by the CLI and tests.
//!
//! A pixel `(x, y)` is sampled at its center `(x + 0.5, y + 0.5)`.

use std::f64::consts::PI;

use crate::error::Result;
use crate::mask::BinaryMask;

/// Disk of radius `r` centered at `(cx, cy)` in continuous coordinates.
pub fn disk(width: usize, height: usize, cx: f64, cy: f64, r: f64) -> Result<BinaryMask> {
    BinaryMask::from_fn(width, height, |x, y| {
        let (dx, dy) = (x as f64 + 0.5 - cx, y as f64 + 0.5 - cy);
        dx * dx + dy * dy <= r * r
    })
}

/// Disk of radius `r` centered in a `size × size` frame.
pub fn centered_disk(size: usize, r: f64) -> Result<BinaryMask> {
    let c = size as f64 / 2.0;
    disk(size, size, c, c, r)
}

/// Star with polar boundary `r(θ) = base · (1 + amplitude · cos(lobes · θ))`,
/// centered in a `size × size` frame.
pub fn star(size: usize, base: f64, amplitude: f64, lobes: u32) -> Result<BinaryMask> {
    let c = size as f64 / 2.0;
    BinaryMask::from_fn(size, size, |x, y| {
        let (dx, dy) = (x as f64 + 0.5 - c, y as f64 + 0.5 - c);
        let theta = dy.atan2(dx);
        let r = base * (1.0 + amplitude * (lobes as f64 * theta).cos());
        dx * dx + dy * dy <= r * r
    })
}

/// Base radius giving a star the same continuous area as a disk of radius `r`.
pub fn star_base_for_area_of_disk(r: f64, amplitude: f64) -> f64 {
    r / (1.0 + amplitude * amplitude / 2.0).sqrt()
}

/// Axis-aligned rectangle `[x, x + w) × [y, y + h)`.
pub fn rectangle(width: usize, height: usize, x: usize, y: usize, w: usize, h: usize) -> Result<BinaryMask> {
    BinaryMask::from_fn(width, height, |px, py| px >= x && px < x + w && py >= y && py < y + h)
}

/// Continuous area of the star outline.
pub fn star_area(base: f64, amplitude: f64) -> f64 {
    PI * base * base * (1.0 + amplitude * amplitude / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disk_area_close_to_continuous() {
        let m = centered_disk(256, 100.0).unwrap();
        let area = m.count_ones() as f64;
        assert!((area / (PI * 100.0 * 100.0) - 1.0).abs() < 0.01);
    }

    #[test]
    fn star_matches_disk_area() {
        let base = star_base_for_area_of_disk(100.0, 0.3);
        assert!((star_area(base, 0.3) - PI * 1e4).abs() < 1e-6);
        let s = star(256, base, 0.3, 12).unwrap().count_ones() as f64;
        let d = centered_disk(256, 100.0).unwrap().count_ones() as f64;
        assert!((s / d - 1.0).abs() < 0.01);
    }

    #[test]
    fn rectangle_count() {
        assert_eq!(rectangle(10, 10, 2, 3, 4, 5).unwrap().count_ones(), 20);
    }
}
