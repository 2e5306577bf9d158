//! COCO-style box detection scoring.
//!
//! Matching, accumulation and 101-point interpolation follow the
//! `pycocotools` conventions: detections are ranked by score per
//! (image, category) and capped at [`MAX_DETECTIONS`]; each one greedily takes
//! the best still-unmatched ground truth at or above the IoU threshold,
//! preferring regular objects over crowd regions; detections landing on a
//! crowd region are ignored rather than counted as false positives. Area-range
//! breakdowns are not computed.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::coco::{Annotation, CocoDataset, Detection};
use crate::error::{Error, Result};

pub const MAX_DETECTIONS: usize = 100;

/// Number of points in the recall grid `0.00, 0.01, ..., 1.00`.
pub const RECALL_POINTS: usize = 101;

/// IoU thresholds `0.50, 0.55, ..., 0.95`.
pub fn iou_thresholds() -> [f64; 10] {
    std::array::from_fn(|i| (50 + 5 * i) as f64 / 100.0)
}

fn area(b: &[f64; 4]) -> f64 {
    b[2] * b[3]
}

fn intersection(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    let w = (a[0] + a[2]).min(b[0] + b[2]) - a[0].max(b[0]);
    let h = (a[1] + a[3]).min(b[1] + b[3]) - a[1].max(b[1]);
    if w <= 0.0 || h <= 0.0 {
        0.0
    } else {
        w * h
    }
}

/// Intersection over union of two `[x, y, w, h]` boxes; 0 when the union is empty.
pub fn iou_bbox(a: [f64; 4], b: [f64; 4]) -> f64 {
    let inter = intersection(&a, &b);
    let union = area(&a) + area(&b) - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// Overlap used against crowd regions: intersection over the detection's area.
fn crowd_overlap(det: &[f64; 4], crowd: &[f64; 4]) -> f64 {
    let a = area(det);
    if a <= 0.0 {
        0.0
    } else {
        intersection(det, crowd) / a
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum Outcome {
    TruePositive { gt_id: i64, iou: f64 },
    FalsePositive,
    /// Matched only a crowd region.
    Ignored,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchedDetection {
    pub score: f64,
    #[serde(flatten)]
    pub outcome: Outcome,
}

/// Matching of one (image, category) pair at one IoU threshold.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MatchResult {
    /// Ranked by descending score, at most [`MAX_DETECTIONS`].
    pub detections: Vec<MatchedDetection>,
    /// Non-crowd ground truths.
    pub gt_count: usize,
    pub unmatched_gt: usize,
}

impl MatchResult {
    pub fn true_positives(&self) -> usize {
        self.detections
            .iter()
            .filter(|d| matches!(d.outcome, Outcome::TruePositive { .. }))
            .count()
    }
}

/// Greedy matching of detections against the ground truths of one image and
/// category.
pub fn match_detections(dets: &[&Detection], gts: &[&Annotation], iou_threshold: f64) -> MatchResult {
    let mut ranked: Vec<&Detection> = dets.to_vec();
    // Stable: equal scores keep their input order.
    ranked.sort_by(|a, b| b.score.total_cmp(&a.score));
    ranked.truncate(MAX_DETECTIONS);

    let mut order: Vec<&Annotation> = gts.to_vec();
    order.sort_by_key(|g| g.is_crowd());
    let gt_count = order.iter().filter(|g| !g.is_crowd()).count();

    let threshold = iou_threshold.min(1.0 - 1e-10);
    let mut taken = vec![false; order.len()];
    let mut detections = Vec::with_capacity(ranked.len());
    for det in ranked {
        let mut best = threshold;
        let mut chosen: Option<(usize, f64)> = None;
        for (g, gt) in order.iter().enumerate() {
            if taken[g] && !gt.is_crowd() {
                continue;
            }
            // A regular match has been found; crowd regions come last and
            // cannot displace it.
            if let Some((m, _)) = chosen {
                if !order[m].is_crowd() && gt.is_crowd() {
                    break;
                }
            }
            let overlap = if gt.is_crowd() {
                crowd_overlap(&det.bbox, &gt.bbox)
            } else {
                iou_bbox(det.bbox, gt.bbox)
            };
            if overlap < best {
                continue;
            }
            best = overlap;
            chosen = Some((g, overlap));
        }
        let outcome = match chosen {
            None => Outcome::FalsePositive,
            Some((g, _)) if order[g].is_crowd() => Outcome::Ignored,
            Some((g, iou)) => {
                taken[g] = true;
                Outcome::TruePositive {
                    gt_id: order[g].id,
                    iou,
                }
            }
        };
        detections.push(MatchedDetection {
            score: det.score,
            outcome,
        });
    }
    let matched = taken
        .iter()
        .zip(&order)
        .filter(|(&t, g)| t && !g.is_crowd())
        .count();
    MatchResult {
        detections,
        gt_count,
        unmatched_gt: gt_count - matched,
    }
}

/// 101-point interpolated AP over the matches of one category, accumulated
/// across images (pass them in image order; ties in score keep that order).
///
/// Returns `None` when there is nothing to score (no ground truth and no
/// counted detection) and `Some(0.0)` for detections without ground truth.
pub fn average_precision(matches: &[MatchResult]) -> Option<f64> {
    let gt_total: usize = matches.iter().map(|m| m.gt_count).sum();
    let mut ranked: Vec<&MatchedDetection> = matches
        .iter()
        .flat_map(|m| &m.detections)
        .filter(|d| d.outcome != Outcome::Ignored)
        .collect();
    if gt_total == 0 {
        return if ranked.is_empty() { None } else { Some(0.0) };
    }
    ranked.sort_by(|a, b| b.score.total_cmp(&a.score));

    let mut recall = Vec::with_capacity(ranked.len());
    let mut precision = Vec::with_capacity(ranked.len());
    let (mut tp, mut fp) = (0usize, 0usize);
    for d in &ranked {
        match d.outcome {
            Outcome::TruePositive { .. } => tp += 1,
            _ => fp += 1,
        }
        recall.push(tp as f64 / gt_total as f64);
        precision.push(tp as f64 / (tp + fp) as f64);
    }
    // Precision envelope: best precision at this rank or any deeper one.
    for i in (1..precision.len()).rev() {
        if precision[i] > precision[i - 1] {
            precision[i - 1] = precision[i];
        }
    }
    let sum: f64 = (0..RECALL_POINTS)
        .map(|k| {
            let r = k as f64 / (RECALL_POINTS - 1) as f64;
            let idx = recall.partition_point(|&x| x < r);
            precision.get(idx).copied().unwrap_or(0.0)
        })
        .sum();
    Some(sum / RECALL_POINTS as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryAp {
    pub category_id: i64,
    /// One entry per IoU threshold; `None` where the category has nothing to score.
    pub ap: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub iou_thresholds: Vec<f64>,
    pub per_category: Vec<CategoryAp>,
    /// Mean over categories with ground truth, then over thresholds.
    pub map: f64,
    /// Mean AP at IoU 0.50 over categories with ground truth.
    pub ap50: f64,
    /// Mean IoU of true positives at the mIoU threshold; 0 without any.
    pub miou: f64,
    pub miou_threshold: f64,
    pub true_positives: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalParams {
    pub miou_threshold: f64,
}

impl Default for EvalParams {
    fn default() -> Self {
        Self { miou_threshold: 0.5 }
    }
}

/// Scores `dets` against every image and category of `dataset`.
pub fn coco_map(dets: &[Detection], dataset: &CocoDataset) -> Result<EvalResult> {
    coco_map_with(dets, dataset, &EvalParams::default())
}

pub fn coco_map_with(dets: &[Detection], dataset: &CocoDataset, params: &EvalParams) -> Result<EvalResult> {
    let image_ids: HashSet<i64> = dataset.images.iter().map(|i| i.id).collect();
    let category_ids: HashSet<i64> = dataset.categories.iter().map(|c| c.id).collect();
    let mut dets_by_key: HashMap<(i64, i64), Vec<&Detection>> = HashMap::new();
    for d in dets {
        if !category_ids.contains(&d.category_id) {
            return Err(Error::Integrity(format!(
                "detection references unknown category id {}",
                d.category_id
            )));
        }
        if !image_ids.contains(&d.image_id) {
            return Err(Error::Integrity(format!(
                "detection references unknown image id {}",
                d.image_id
            )));
        }
        dets_by_key.entry((d.image_id, d.category_id)).or_default().push(d);
    }
    let mut gts_by_key: HashMap<(i64, i64), Vec<&Annotation>> = HashMap::new();
    for a in &dataset.annotations {
        gts_by_key.entry((a.image_id, a.category_id)).or_default().push(a);
    }

    let mut images: Vec<i64> = image_ids.into_iter().collect();
    images.sort_unstable();
    let mut categories: Vec<i64> = category_ids.into_iter().collect();
    categories.sort_unstable();
    let thresholds = iou_thresholds();

    let mut per_category = Vec::with_capacity(categories.len());
    let mut miou_sum = 0.0;
    let mut miou_count = 0usize;
    for &cat in &categories {
        let mut ap = Vec::with_capacity(thresholds.len());
        let mut miou_matches = Vec::new();
        for &t in &thresholds {
            let matches: Vec<MatchResult> = images
                .iter()
                .filter_map(|&img| {
                    let d = dets_by_key.get(&(img, cat));
                    let g = gts_by_key.get(&(img, cat));
                    if d.is_none() && g.is_none() {
                        return None;
                    }
                    Some(match_detections(
                        d.map_or(&[][..], Vec::as_slice),
                        g.map_or(&[][..], Vec::as_slice),
                        t,
                    ))
                })
                .collect();
            ap.push(average_precision(&matches));
            if (t - params.miou_threshold).abs() < 1e-12 {
                miou_matches = matches;
            }
        }
        if !thresholds.iter().any(|t| (t - params.miou_threshold).abs() < 1e-12) {
            miou_matches = images
                .iter()
                .map(|&img| {
                    match_detections(
                        dets_by_key.get(&(img, cat)).map_or(&[][..], Vec::as_slice),
                        gts_by_key.get(&(img, cat)).map_or(&[][..], Vec::as_slice),
                        params.miou_threshold,
                    )
                })
                .collect();
        }
        for d in miou_matches.iter().flat_map(|m| &m.detections) {
            if let Outcome::TruePositive { iou, .. } = d.outcome {
                miou_sum += iou;
                miou_count += 1;
            }
        }
        per_category.push(CategoryAp { category_id: cat, ap });
    }

    let gt_per_category: BTreeMap<i64, usize> = dataset
        .annotations
        .iter()
        .filter(|a| !a.is_crowd())
        .fold(BTreeMap::new(), |mut m, a| {
            *m.entry(a.category_id).or_default() += 1;
            m
        });
    let scored: Vec<&CategoryAp> = per_category
        .iter()
        .filter(|c| gt_per_category.get(&c.category_id).copied().unwrap_or(0) > 0)
        .collect();
    let mean_at = |t: usize| -> f64 {
        if scored.is_empty() {
            return 0.0;
        }
        scored.iter().map(|c| c.ap[t].unwrap_or(0.0)).sum::<f64>() / scored.len() as f64
    };
    let map = (0..thresholds.len()).map(mean_at).sum::<f64>() / thresholds.len() as f64;

    Ok(EvalResult {
        iou_thresholds: thresholds.to_vec(),
        map,
        ap50: mean_at(0),
        miou: if miou_count == 0 {
            0.0
        } else {
            miou_sum / miou_count as f64
        },
        miou_threshold: params.miou_threshold,
        true_positives: miou_count,
        per_category,
    })
}
