//! Straightforward COCO bbox evaluator used as a reference. It recomputes
//! everything from the raw inputs with plain loops: its own overlap maths,
//! its own greedy matching, and interpolated precision taken as the maximum
//! over every deeper rank (quadratic, no envelope pass, no binary search).

use distort_bench::coco::{Annotation, CocoDataset, Detection};

pub const THRESHOLDS: [f64; 10] = [0.50, 0.55, 0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90, 0.95];

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub map: f64,
    pub ap50: f64,
    pub miou: f64,
}

fn overlap_area(a: [f64; 4], b: [f64; 4]) -> f64 {
    let x0 = a[0].max(b[0]);
    let y0 = a[1].max(b[1]);
    let x1 = (a[0] + a[2]).min(b[0] + b[2]);
    let y1 = (a[1] + a[3]).min(b[1] + b[3]);
    if x1 > x0 && y1 > y0 {
        (x1 - x0) * (y1 - y0)
    } else {
        0.0
    }
}

/// IoU for regular objects; intersection over detection area for crowds.
fn overlap(det: [f64; 4], gt: &Annotation) -> f64 {
    let inter = overlap_area(det, gt.bbox);
    let denom = if gt.iscrowd != 0 {
        det[2] * det[3]
    } else {
        det[2] * det[3] + gt.bbox[2] * gt.bbox[3] - inter
    };
    if denom > 0.0 {
        inter / denom
    } else {
        0.0
    }
}

/// Per detection of one image and category, in rank order:
/// `Some((is_tp, iou))` or `None` when it only matched a crowd region.
fn match_image(dets: &[&Detection], gts: &[&Annotation], t: f64) -> Vec<(f64, Option<(bool, f64)>)> {
    let mut dets: Vec<&Detection> = dets.to_vec();
    // Insertion sort by descending score keeps ties in input order.
    for i in 1..dets.len() {
        let mut j = i;
        while j > 0 && dets[j - 1].score < dets[j].score {
            dets.swap(j - 1, j);
            j -= 1;
        }
    }
    dets.truncate(100);
    let mut gts_sorted: Vec<&Annotation> = gts.iter().filter(|g| g.iscrowd == 0).copied().collect();
    gts_sorted.extend(gts.iter().filter(|g| g.iscrowd != 0).copied());
    let mut used = vec![false; gts_sorted.len()];
    let limit = if t < 1.0 - 1e-10 { t } else { 1.0 - 1e-10 };

    let mut out = Vec::new();
    for d in dets {
        let mut best_iou = limit;
        let mut best: Option<usize> = None;
        for (g, gt) in gts_sorted.iter().enumerate() {
            let crowd = gt.iscrowd != 0;
            if used[g] && !crowd {
                continue;
            }
            if crowd {
                if let Some(b) = best {
                    if gts_sorted[b].iscrowd == 0 {
                        break;
                    }
                }
            }
            let o = overlap(d.bbox, gt);
            if o >= best_iou {
                best_iou = o;
                best = Some(g);
            }
        }
        let outcome = match best {
            None => Some((false, 0.0)),
            Some(g) if gts_sorted[g].iscrowd != 0 => None,
            Some(g) => {
                used[g] = true;
                Some((true, best_iou))
            }
        };
        out.push((d.score, outcome));
    }
    out
}

/// `None` when the category has no regular ground truth.
fn category_ap(dataset: &CocoDataset, dets: &[Detection], cat: i64, t: f64) -> (Option<f64>, Vec<f64>) {
    let mut image_ids: Vec<i64> = dataset.images.iter().map(|i| i.id).collect();
    image_ids.sort();
    let n_gt = dataset
        .annotations
        .iter()
        .filter(|a| a.category_id == cat && a.iscrowd == 0)
        .count();
    let mut scored: Vec<(f64, bool)> = Vec::new();
    let mut tp_ious = Vec::new();
    for &img in &image_ids {
        let d: Vec<&Detection> = dets
            .iter()
            .filter(|d| d.image_id == img && d.category_id == cat)
            .collect();
        let g: Vec<&Annotation> = dataset
            .annotations
            .iter()
            .filter(|a| a.image_id == img && a.category_id == cat)
            .collect();
        for (score, outcome) in match_image(&d, &g, t) {
            if let Some((tp, iou)) = outcome {
                scored.push((score, tp));
                if tp {
                    tp_ious.push(iou);
                }
            }
        }
    }
    if n_gt == 0 {
        return (None, tp_ious);
    }
    // Stable descending sort across images.
    for i in 1..scored.len() {
        let mut j = i;
        while j > 0 && scored[j - 1].0 < scored[j].0 {
            scored.swap(j - 1, j);
            j -= 1;
        }
    }
    let mut points = Vec::new();
    let mut tp = 0;
    for (k, &(_, is_tp)) in scored.iter().enumerate() {
        if is_tp {
            tp += 1;
        }
        points.push((tp as f64 / n_gt as f64, tp as f64 / (k + 1) as f64));
    }
    let mut total = 0.0;
    for r in 0..=100 {
        let level = r as f64 / 100.0;
        let mut best = 0.0f64;
        for &(recall, precision) in &points {
            if recall >= level && precision > best {
                best = precision;
            }
        }
        total += best;
    }
    (Some(total / 101.0), tp_ious)
}

pub fn evaluate(dets: &[Detection], dataset: &CocoDataset) -> OracleResult {
    let mut cats: Vec<i64> = dataset.categories.iter().map(|c| c.id).collect();
    cats.sort();
    let mut per_threshold_means = Vec::new();
    let mut ious = Vec::new();
    for (ti, &t) in THRESHOLDS.iter().enumerate() {
        let mut aps = Vec::new();
        for &c in &cats {
            let (ap, tp_ious) = category_ap(dataset, dets, c, t);
            if let Some(ap) = ap {
                aps.push(ap);
            }
            if ti == 0 {
                ious.extend(tp_ious);
            }
        }
        let mean = if aps.is_empty() {
            0.0
        } else {
            aps.iter().sum::<f64>() / aps.len() as f64
        };
        per_threshold_means.push(mean);
    }
    OracleResult {
        map: per_threshold_means.iter().sum::<f64>() / THRESHOLDS.len() as f64,
        ap50: per_threshold_means[0],
        miou: if ious.is_empty() {
            0.0
        } else {
            ious.iter().sum::<f64>() / ious.len() as f64
        },
    }
}
