//! Shared test helpers: a brute-force COCO evaluator and synthetic fixtures.
#![allow(dead_code)]

pub mod fixtures;
pub mod oracle;
