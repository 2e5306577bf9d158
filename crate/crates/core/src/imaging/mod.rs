//! Raster buffers and the filters the distortion generators are built from.

mod buffer;
mod filter;
mod kernel;
mod quality;

pub use buffer::{ImageBuffer, CHANNELS};
pub use filter::{blend_masked, convolve2d, dilate, feather_alpha, ring};
pub use kernel::{disk_kernel, motion_kernel, Kernel};
pub use quality::{jpeg_roundtrip, psnr};
