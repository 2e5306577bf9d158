//! Severity-graded image distortions over COCO-format datasets, dataset
//! builders for augmentation and evaluation grids, and COCO-style detection
//! scoring with robustness-rate statistics.

pub mod coco;
pub mod dataset;
pub mod distortions;
pub mod error;
pub mod eval;
pub mod imaging;
pub mod mask;
pub mod report;
pub mod stats;

pub use error::{Error, Result};
