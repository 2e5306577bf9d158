use crate::error::{Error, Result};

use super::buffer::ImageBuffer;

/// Peak signal-to-noise ratio in dB over all float RGB samples (peak 1.0).
/// Identical images give `f64::INFINITY`.
pub fn psnr(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64> {
    if !a.same_shape(b) {
        return Err(Error::Shape(format!(
            "psnr of {}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    let n = a.data().len();
    if n == 0 {
        return Ok(f64::INFINITY);
    }
    let sse: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    if sse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (n as f64 / sse).log10())
}

/// Encodes through baseline JPEG at `quality` (1..=100) and decodes back.
pub fn jpeg_roundtrip(img: &ImageBuffer, quality: u8) -> Result<ImageBuffer> {
    if !(1..=100).contains(&quality) {
        return Err(Error::Parameter(format!(
            "jpeg quality must be in 1..=100, got {quality}"
        )));
    }
    let bytes = img.encode_jpeg(quality)?;
    ImageBuffer::decode(&bytes)
}
