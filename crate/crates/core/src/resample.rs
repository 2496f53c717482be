//! Resizing of score maps (bilinear, align-corners), masks (nearest
//! neighbour) and RGB images.

use crate::error::{Error, Result};
use crate::mask::{BinaryMask, RgbImage, ScoreMap};
use crate::scalar::Scalar;

/// Source coordinate of target index `i` under align-corners sampling.
#[inline]
pub(crate) fn align_corners(i: usize, src_len: usize, dst_len: usize) -> f64 {
    if dst_len <= 1 || src_len <= 1 {
        0.0
    } else {
        (i * (src_len - 1)) as f64 / (dst_len - 1) as f64
    }
}

/// Lower tap, upper tap and blend weight for a source coordinate.
#[inline]
pub(crate) fn taps(pos: f64, len: usize) -> (usize, usize, f64) {
    let lo = (pos.floor() as usize).min(len - 1);
    let hi = (lo + 1).min(len - 1);
    (lo, hi, pos - lo as f64)
}

#[inline]
pub(crate) fn lerp<T: Scalar>(a: T, b: T, t: T) -> T {
    // Exact when a == b.
    a + t * (b - a)
}

fn check_target(w: usize, h: usize) -> Result<()> {
    if w == 0 || h == 0 {
        Err(Error::InvalidDimensions { width: w, height: h })
    } else {
        Ok(())
    }
}

/// Bilinear resize with align-corners sampling: target pixel centers 0 and
/// `w − 1` map onto source centers 0 and `W − 1`.
pub fn resize_score<T: Scalar>(s: &ScoreMap<T>, width: usize, height: usize) -> Result<ScoreMap<T>> {
    check_target(width, height)?;
    if s.dims() == (width, height) {
        return Ok(s.clone());
    }
    let (sw, sh) = s.dims();
    let cols: Vec<(usize, usize, T)> = (0..width)
        .map(|x| {
            let (a, b, t) = taps(align_corners(x, sw, width), sw);
            (a, b, T::of(t))
        })
        .collect();
    let mut values = Vec::with_capacity(width * height);
    for y in 0..height {
        let (r0, r1, ty) = taps(align_corners(y, sh, height), sh);
        let ty = T::of(ty);
        for (c0, c1, tx) in &cols {
            let top = lerp(s.get(*c0, r0), s.get(*c1, r0), *tx);
            let bottom = lerp(s.get(*c0, r1), s.get(*c1, r1), *tx);
            values.push(lerp(top, bottom, ty).max(T::zero()).min(T::one()));
        }
    }
    Ok(ScoreMap::from_raw(width, height, values))
}

/// Nearest-neighbour resize sampling source pixel `floor((i + 0.5) · W / w)`.
pub fn resize_mask(m: &BinaryMask, width: usize, height: usize) -> Result<BinaryMask> {
    check_target(width, height)?;
    let (sw, sh) = m.dims();
    let src = |i: usize, s: usize, d: usize| ((2 * i + 1) * s) / (2 * d);
    BinaryMask::from_fn(width, height, |x, y| m.get(src(x, sw, width), src(y, sh, height)))
}

/// Bilinear (align-corners) RGB resize, rounded to 8 bits.
pub fn resize_rgb(img: &RgbImage, width: usize, height: usize) -> Result<RgbImage> {
    check_target(width, height)?;
    let (sw, sh) = (img.width() as usize, img.height() as usize);
    if (sw, sh) == (width, height) {
        return Ok(img.clone());
    }
    let mut out = RgbImage::new(width as u32, height as u32);
    for y in 0..height {
        let (r0, r1, ty) = taps(align_corners(y, sh, height), sh);
        for x in 0..width {
            let (c0, c1, tx) = taps(align_corners(x, sw, width), sw);
            let px = |cx: usize, cy: usize| img.get_pixel(cx as u32, cy as u32).0;
            let (a, b, c, d) = (px(c0, r0), px(c1, r0), px(c0, r1), px(c1, r1));
            let mut rgb = [0u8; 3];
            for ch in 0..3 {
                let top = lerp(a[ch] as f64, b[ch] as f64, tx);
                let bottom = lerp(c[ch] as f64, d[ch] as f64, tx);
                rgb[ch] = lerp(top, bottom, ty).round().clamp(0.0, 255.0) as u8;
            }
            out.put_pixel(x as u32, y as u32, image::Rgb(rgb));
        }
    }
    Ok(out)
}
