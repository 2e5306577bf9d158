//! Severity ramps: the controlling parameter of each generator as an affine
//! function of the level (1..=10).

/// Airlight used by the haze model.
pub const AIRLIGHT: f64 = 0.9;

/// Feather radius for every mask-guided blend.
pub const FEATHER: usize = 2;

/// Additive intensity of a single rain streak before softening.
pub const STREAK_INTENSITY: f64 = 0.25;

/// Maximum streak tilt from vertical, in degrees.
pub const STREAK_MAX_TILT_DEG: f64 = 30.0;

pub fn noise_sigma(level: u8) -> f64 {
    0.04 * level as f64
}

pub fn contrast_factor(level: u8) -> f64 {
    1.0 - 0.09 * level as f64
}

pub fn jpeg_quality(level: u8) -> u8 {
    (100 - 10 * level as i32).max(2) as u8
}

pub fn haze_transmission(level: u8) -> f64 {
    1.0 - 0.085 * level as f64
}

/// Number of streaks on a `width x height` image.
pub fn streak_count(level: u8, width: usize, height: usize) -> usize {
    (level as f64 * (width * height) as f64 / 1e4).round() as usize
}

/// Inclusive streak length range in pixels.
pub fn streak_length(level: u8) -> (f64, f64) {
    let l = level as f64;
    (10.0 + l, 20.0 + 2.0 * l)
}

/// Motion kernel length (odd).
pub fn motion_length(level: u8) -> usize {
    2 * level as usize + 1
}

pub fn defocus_radius(level: u8) -> usize {
    level as usize
}

/// Brightness scale applied inside the object for backlight.
pub fn backlight_scale(level: u8) -> f64 {
    1.0 - 0.09 * level as f64
}

/// Additive glow on the halo ring around the object.
pub fn backlight_glow(level: u8) -> f64 {
    0.05 * level as f64
}

/// Width of the halo ring around the object.
pub fn halo_radius(level: u8) -> usize {
    2 + level as usize / 2
}
