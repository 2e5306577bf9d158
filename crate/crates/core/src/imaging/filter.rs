use crate::error::{Error, Result};
use crate::mask::BinaryMask;

use super::buffer::{ImageBuffer, CHANNELS};
use super::kernel::Kernel;

#[inline]
fn clamp_index(i: isize, len: usize) -> usize {
    i.clamp(0, len as isize - 1) as usize
}

/// Per-channel 2-D correlation with clamp-to-edge padding.
pub fn convolve2d(img: &ImageBuffer, kernel: &Kernel) -> ImageBuffer {
    let (w, h) = (img.width(), img.height());
    let mut out = ImageBuffer::new(w, h);
    if w == 0 || h == 0 {
        return out;
    }
    let src = img.data();
    let dst = out.data_mut();
    let taps = kernel.taps();
    let mut columns = vec![0usize; w];
    for &(dy, dx, weight) in &taps {
        for (x, col) in columns.iter_mut().enumerate() {
            *col = clamp_index(x as isize + dx, w) * CHANNELS;
        }
        for y in 0..h {
            let src_row = &src[clamp_index(y as isize + dy, h) * w * CHANNELS..][..w * CHANNELS];
            let dst_row = &mut dst[y * w * CHANNELS..][..w * CHANNELS];
            for (px, &sx) in dst_row.chunks_exact_mut(CHANNELS).zip(&columns) {
                px[0] += weight * src_row[sx];
                px[1] += weight * src_row[sx + 1];
                px[2] += weight * src_row[sx + 2];
            }
        }
    }
    out
}

/// Box-blurred mask: the fraction of set pixels in the `(2r+1)^2` window
/// around each pixel, with clamp-to-edge padding. Exactly 0 where the window
/// holds no set pixel and exactly 1 where it is fully set.
pub fn feather_alpha(mask: &BinaryMask, radius: usize) -> Vec<f64> {
    let (w, h) = (mask.width(), mask.height());
    if radius == 0 {
        return mask.bits().iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    }
    let r = radius as isize;
    // Horizontal then vertical integer window sums.
    let mut horizontal = vec![0u32; w * h];
    for y in 0..h {
        for x in 0..w {
            horizontal[y * w + x] = (-r..=r)
                .filter(|&d| mask.get(y, clamp_index(x as isize + d, w)))
                .count() as u32;
        }
    }
    let area = ((2 * radius + 1) * (2 * radius + 1)) as f64;
    let mut alpha = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let total: u32 = (-r..=r)
                .map(|d| horizontal[clamp_index(y as isize + d, h) * w + x])
                .sum();
            alpha[y * w + x] = total as f64 / area;
        }
    }
    alpha
}

/// `alpha * modified + (1 - alpha) * base` with alpha the feathered mask.
/// Pixels with alpha 0 or 1 copy the corresponding input exactly.
pub fn blend_masked(
    base: &ImageBuffer,
    modified: &ImageBuffer,
    mask: &BinaryMask,
    feather: usize,
) -> Result<ImageBuffer> {
    if !base.same_shape(modified) || mask.width() != base.width() || mask.height() != base.height()
    {
        return Err(Error::Shape(format!(
            "blend of {}x{} base, {}x{} modified, {}x{} mask",
            base.width(),
            base.height(),
            modified.width(),
            modified.height(),
            mask.width(),
            mask.height()
        )));
    }
    let alpha = feather_alpha(mask, feather);
    let mut out = base.clone();
    let pixels = out
        .data_mut()
        .chunks_exact_mut(CHANNELS)
        .zip(modified.data().chunks_exact(CHANNELS));
    for ((px, m), &a) in pixels.zip(&alpha) {
        if a == 0.0 {
            continue;
        }
        for (b, &m) in px.iter_mut().zip(m) {
            *b = if a == 1.0 {
                m
            } else {
                (a * m + (1.0 - a) * *b).clamp(b.min(m), b.max(m))
            };
        }
    }
    Ok(out)
}

/// Dilation by a `(2r+1) x (2r+1)` square.
pub fn dilate(mask: &BinaryMask, radius: usize) -> BinaryMask {
    let (w, h) = (mask.width(), mask.height());
    if radius == 0 || w == 0 || h == 0 {
        return mask.clone();
    }
    let mut horizontal = BinaryMask::new(w, h);
    for y in 0..h {
        for x in 0..w {
            let lo = x.saturating_sub(radius);
            let hi = (x + radius).min(w - 1);
            if (lo..=hi).any(|c| mask.get(y, c)) {
                horizontal.set(y, x, true);
            }
        }
    }
    let mut out = BinaryMask::new(w, h);
    for y in 0..h {
        let lo = y.saturating_sub(radius);
        let hi = (y + radius).min(h - 1);
        for x in 0..w {
            if (lo..=hi).any(|r| horizontal.get(r, x)) {
                out.set(y, x, true);
            }
        }
    }
    out
}

/// The band added by dilation: `dilate(mask, r)` minus `mask`.
pub fn ring(mask: &BinaryMask, radius: usize) -> BinaryMask {
    dilate(mask, radius)
        .difference(mask)
        .expect("dilation preserves shape")
}
