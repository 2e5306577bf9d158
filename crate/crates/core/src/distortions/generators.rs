use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::Result;
use crate::imaging::{
    blend_masked, convolve2d, disk_kernel, jpeg_roundtrip, motion_kernel, ring, ImageBuffer,
    Kernel, CHANNELS,
};
use crate::mask::BinaryMask;

use super::ramps;

pub(super) fn gaussian_noise(img: &ImageBuffer, level: u8, rng: &mut ChaCha8Rng) -> ImageBuffer {
    let normal = Normal::new(0.0, ramps::noise_sigma(level)).expect("finite sigma");
    let mut out = img.clone();
    for v in out.data_mut() {
        *v = (*v + normal.sample(rng)).clamp(0.0, 1.0);
    }
    out
}

/// Rec.601 luma averaged over the image.
fn mean_luma(img: &ImageBuffer) -> f64 {
    let n = img.width() * img.height();
    if n == 0 {
        return 0.0;
    }
    let sum: f64 = img
        .data()
        .chunks_exact(CHANNELS)
        .map(|p| 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2])
        .sum();
    sum / n as f64
}

pub(super) fn contrast_change(img: &ImageBuffer, level: u8) -> ImageBuffer {
    let mean = mean_luma(img);
    let c = ramps::contrast_factor(level);
    img.map(|v| (mean + c * (v - mean)).clamp(0.0, 1.0))
}

pub(super) fn compression(img: &ImageBuffer, level: u8) -> Result<ImageBuffer> {
    jpeg_roundtrip(img, ramps::jpeg_quality(level))
}

pub(super) fn haze(img: &ImageBuffer, level: u8) -> ImageBuffer {
    let t = ramps::haze_transmission(level);
    img.map(|v| (v * t + ramps::AIRLIGHT * (1.0 - t)).clamp(0.0, 1.0))
}

/// Draws straight 1-px streaks sharing one tilt, softens them with a 3x3 box
/// and adds the layer to every channel.
pub(super) fn rain(img: &ImageBuffer, level: u8, rng: &mut ChaCha8Rng) -> ImageBuffer {
    let (w, h) = (img.width(), img.height());
    if w == 0 || h == 0 {
        return img.clone();
    }
    let max_tilt = ramps::STREAK_MAX_TILT_DEG.to_radians();
    let tilt = rng.gen_range(-max_tilt..=max_tilt);
    let (dx, dy) = (tilt.sin(), tilt.cos());
    let (min_len, max_len) = ramps::streak_length(level);

    // The streak layer lives in the red channel of a scratch buffer so it can
    // go through the ordinary convolution path.
    let mut layer = ImageBuffer::new(w, h);
    for _ in 0..ramps::streak_count(level, w, h) {
        let x0 = rng.gen_range(0.0..w as f64);
        let y0 = rng.gen_range(0.0..h as f64);
        let length = rng.gen_range(min_len..=max_len);
        let steps = length.ceil() as usize;
        for s in 0..=steps {
            let t = length * s as f64 / steps as f64;
            let (x, y) = ((x0 + t * dx).floor(), (y0 + t * dy).floor());
            if x >= 0.0 && y >= 0.0 && (x as usize) < w && (y as usize) < h {
                layer.set(x as usize, y as usize, 0, ramps::STREAK_INTENSITY);
            }
        }
    }
    let soft = convolve2d(&layer, &Kernel::box_filter(1));
    let mut out = img.clone();
    for (px, s) in out
        .data_mut()
        .chunks_exact_mut(CHANNELS)
        .zip(soft.data().chunks_exact(CHANNELS))
    {
        for v in px {
            *v = (*v + s[0]).clamp(0.0, 1.0);
        }
    }
    out
}

pub(super) fn blur_angle(rng: &mut ChaCha8Rng) -> f64 {
    rng.gen_range(0.0..PI)
}

pub(super) fn motion_blur(img: &ImageBuffer, level: u8, angle: f64) -> ImageBuffer {
    let kernel = motion_kernel(ramps::motion_length(level), angle).expect("odd length");
    convolve2d(img, &kernel)
}

pub(super) fn defocus_blur(img: &ImageBuffer, level: u8) -> ImageBuffer {
    convolve2d(img, &disk_kernel(ramps::defocus_radius(level)))
}

/// Darkens the object and adds a glowing halo around its contour.
pub(super) fn backlight(img: &ImageBuffer, level: u8, target: &BinaryMask) -> Result<ImageBuffer> {
    let scale = ramps::backlight_scale(level);
    let darkened = img.map(|v| v * scale);
    let step = blend_masked(img, &darkened, target, ramps::FEATHER)?;
    let glow = ramps::backlight_glow(level);
    let lit = step.map(|v| (v + glow).clamp(0.0, 1.0));
    let halo = ring(target, ramps::halo_radius(level));
    let mut out = blend_masked(&step, &lit, &halo, ramps::FEATHER)?;
    out.clip();
    Ok(out)
}
