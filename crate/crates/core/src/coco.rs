//! COCO instances annotations and detection results.
//!
//! Fields outside the ones modelled here are accepted and dropped on read.
//! Compressed RLE strings are expanded on read; writes always emit plain
//! integer run lists.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::{self, BinaryMask};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageInfo {
    pub id: i64,
    pub file_name: String,
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Category {
    pub id: i64,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub supercategory: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Segmentation {
    /// Flat `x0, y0, x1, y1, ...` vertex lists.
    Polygons(Vec<Vec<f64>>),
    /// Column-major runs over a `height x width` canvas.
    Rle {
        height: usize,
        width: usize,
        counts: Vec<u32>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub id: i64,
    pub image_id: i64,
    pub category_id: i64,
    /// `[x, y, w, h]` in pixels, unclamped.
    pub bbox: [f64; 4],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segmentation: Option<Segmentation>,
    #[serde(default)]
    pub area: f64,
    #[serde(default)]
    pub iscrowd: u8,
}

impl Annotation {
    pub fn is_crowd(&self) -> bool {
        self.iscrowd != 0
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CocoDataset {
    pub images: Vec<ImageInfo>,
    pub annotations: Vec<Annotation>,
    pub categories: Vec<Category>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub image_id: i64,
    pub category_id: i64,
    pub bbox: [f64; 4],
    pub score: f64,
}

// Wire forms for the segmentation field.

#[derive(Deserialize)]
#[serde(untagged)]
enum RawCounts {
    Runs(Vec<u32>),
    Compressed(String),
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawSegmentation {
    Polygons(Vec<Vec<f64>>),
    Rle { size: [usize; 2], counts: RawCounts },
}

#[derive(Serialize)]
struct RleOut<'a> {
    size: [usize; 2],
    counts: &'a [u32],
}

impl<'de> Deserialize<'de> for Segmentation {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        Ok(match RawSegmentation::deserialize(d)? {
            RawSegmentation::Polygons(p) => Segmentation::Polygons(p),
            RawSegmentation::Rle { size, counts } => {
                let counts = match counts {
                    RawCounts::Runs(runs) => runs,
                    RawCounts::Compressed(s) => {
                        mask::decompress_counts(&s).map_err(D::Error::custom)?
                    }
                };
                Segmentation::Rle {
                    height: size[0],
                    width: size[1],
                    counts,
                }
            }
        })
    }
}

impl Serialize for Segmentation {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Segmentation::Polygons(p) => p.serialize(s),
            Segmentation::Rle {
                height,
                width,
                counts,
            } => RleOut {
                size: [*height, *width],
                counts,
            }
            .serialize(s),
        }
    }
}

impl CocoDataset {
    /// Checks id uniqueness, reference integrity and per-annotation invariants.
    pub fn validate(&self) -> Result<()> {
        let mut image_ids = HashSet::new();
        for img in &self.images {
            if !image_ids.insert(img.id) {
                return Err(Error::Integrity(format!("duplicate image id {}", img.id)));
            }
        }
        let category_ids: HashSet<i64> = self.categories.iter().map(|c| c.id).collect();
        if category_ids.len() != self.categories.len() {
            return Err(Error::Integrity("duplicate category id".into()));
        }
        let mut ann_ids = HashSet::new();
        for ann in &self.annotations {
            if !ann_ids.insert(ann.id) {
                return Err(Error::Integrity(format!("duplicate annotation id {}", ann.id)));
            }
            if !image_ids.contains(&ann.image_id) {
                return Err(Error::Integrity(format!(
                    "annotation {} references missing image id {}",
                    ann.id, ann.image_id
                )));
            }
            if !category_ids.contains(&ann.category_id) {
                return Err(Error::Integrity(format!(
                    "annotation {} references missing category id {}",
                    ann.id, ann.category_id
                )));
            }
            let [_, _, w, h] = ann.bbox;
            if !(w >= 0.0 && h >= 0.0) {
                return Err(Error::Range(format!(
                    "annotation {} has negative bbox extent",
                    ann.id
                )));
            }
            if ann.is_crowd() && !matches!(ann.segmentation, Some(Segmentation::Rle { .. })) {
                return Err(Error::Integrity(format!(
                    "crowd annotation {} must carry an RLE segmentation",
                    ann.id
                )));
            }
        }
        Ok(())
    }

    pub fn image(&self, id: i64) -> Option<&ImageInfo> {
        self.images.iter().find(|i| i.id == id)
    }

    /// Annotations grouped by image id. Every image appears, possibly with an
    /// empty list.
    pub fn annotations_by_image(&self) -> BTreeMap<i64, Vec<&Annotation>> {
        let mut map: BTreeMap<i64, Vec<&Annotation>> =
            self.images.iter().map(|i| (i.id, Vec::new())).collect();
        for ann in &self.annotations {
            map.entry(ann.image_id).or_default().push(ann);
        }
        map
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("dataset serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        parse_dataset(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }
}

pub fn parse_dataset(json_text: &str) -> Result<CocoDataset> {
    let dataset: CocoDataset =
        serde_json::from_str(json_text).map_err(|e| Error::json(json_text, &e))?;
    dataset.validate()?;
    Ok(dataset)
}

pub fn parse_detections(json_text: &str) -> Result<Vec<Detection>> {
    let dets: Vec<Detection> =
        serde_json::from_str(json_text).map_err(|e| Error::json(json_text, &e))?;
    for (i, d) in dets.iter().enumerate() {
        if !(0.0..=1.0).contains(&d.score) {
            return Err(Error::Range(format!(
                "detection {i} has score {} outside [0, 1]",
                d.score
            )));
        }
        if !(d.bbox[2] >= 0.0 && d.bbox[3] >= 0.0) {
            return Err(Error::Range(format!("detection {i} has negative bbox extent")));
        }
    }
    Ok(dets)
}

pub fn detections_to_json(dets: &[Detection]) -> String {
    serde_json::to_string_pretty(dets).expect("detections serialize")
}

pub fn load_detections(path: &Path) -> Result<Vec<Detection>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_detections(&text)
}

/// Rasterizes an annotation's object region on a `width x height` canvas:
/// polygons or RLE when present, otherwise the filled bbox.
pub fn annotation_mask(ann: &Annotation, width: usize, height: usize) -> Result<BinaryMask> {
    match &ann.segmentation {
        Some(Segmentation::Polygons(polys)) if !polys.is_empty() => {
            mask::rasterize_polygons(polys, width, height)
        }
        Some(Segmentation::Rle {
            height: h,
            width: w,
            counts,
        }) => {
            if *h != height || *w != width {
                return Err(Error::Shape(format!(
                    "annotation {} RLE is {w}x{h}, image is {width}x{height}",
                    ann.id
                )));
            }
            mask::decode_rle(height, width, counts)
        }
        _ => Ok(mask::rasterize_bbox(ann.bbox, width, height)),
    }
}
