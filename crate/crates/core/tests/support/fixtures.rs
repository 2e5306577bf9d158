//! Deterministic synthetic images, mini-COCO datasets and random evaluation
//! instances.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use distort_bench::coco::{Annotation, Category, CocoDataset, Detection, ImageInfo, Segmentation};
use distort_bench::imaging::ImageBuffer;
use distort_bench::mask::rasterize_polygons;

/// Smooth gradient plus a spread of small oriented sinusoids plus fine grain,
/// so the spectrum is broad like a natural image's. Quantized to 8 bits so a
/// PNG round trip is exact.
pub fn textured_image(width: usize, height: usize, seed: u64) -> ImageBuffer {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base: [f64; 3] = std::array::from_fn(|_| rng.gen_range(0.3..0.6));
    // (fx, fy, phase, amplitude) per component.
    let waves: Vec<(f64, f64, f64, f64)> = (0..8)
        .map(|_| {
            let freq = rng.gen_range(0.05..0.9);
            let theta = rng.gen_range(0.0..std::f64::consts::PI);
            (
                freq * theta.cos(),
                freq * theta.sin(),
                rng.gen_range(0.0..std::f64::consts::TAU),
                rng.gen_range(0.01..0.04),
            )
        })
        .collect();
    let mut img = ImageBuffer::new(width, height);
    for y in 0..height {
        for x in 0..width {
            let (xf, yf) = (x as f64, y as f64);
            let wave: f64 = waves
                .iter()
                .map(|&(fx, fy, p, a)| a * (fx * xf + fy * yf + p).sin())
                .sum();
            for (c, &b) in base.iter().enumerate() {
                let v = b + 0.15 * (xf / width as f64 - 0.5) + wave + rng.gen_range(-0.05..0.05);
                img.set(x, y, c, v.clamp(0.0, 1.0));
            }
        }
    }
    img.quantized()
}

fn random_polygon(rng: &mut ChaCha8Rng, width: usize, height: usize) -> Vec<f64> {
    let (w, h) = (width as f64, height as f64);
    let bw = rng.gen_range(0.2..0.4) * w;
    let bh = rng.gen_range(0.2..0.4) * h;
    let x0 = rng.gen_range(0.0..w - bw);
    let y0 = rng.gen_range(0.0..h - bh);
    let round = |v: f64| (v * 2.0).round() / 2.0;
    if rng.gen_bool(0.5) {
        vec![
            round(x0), round(y0),
            round(x0 + bw), round(y0),
            round(x0 + bw), round(y0 + bh),
            round(x0), round(y0 + bh),
        ]
    } else {
        vec![
            round(x0 + bw / 2.0), round(y0),
            round(x0 + bw), round(y0 + bh),
            round(x0), round(y0 + bh),
        ]
    }
}

fn polygon_bbox(poly: &[f64]) -> [f64; 4] {
    let xs = poly.iter().step_by(2);
    let ys = poly.iter().skip(1).step_by(2);
    let (x0, x1) = xs.fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
    let (y0, y1) = ys.fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
    [x0, y0, x1 - x0, y1 - y0]
}

/// Image with 1..=3 painted polygon objects (or none when `objects` is 0)
/// and their annotations; annotation ids start at `first_ann_id`.
pub fn annotated_image(
    image_id: i64,
    width: usize,
    height: usize,
    objects: usize,
    first_ann_id: i64,
    seed: u64,
) -> (ImageBuffer, Vec<Annotation>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut img = textured_image(width, height, seed);
    let mut anns = Vec::new();
    for k in 0..objects {
        let poly = random_polygon(&mut rng, width, height);
        let mask = rasterize_polygons(std::slice::from_ref(&poly), width, height).unwrap();
        let tint: [f64; 3] = std::array::from_fn(|_| rng.gen_range(0.1..0.9));
        for y in 0..height {
            for x in 0..width {
                if mask.get(y, x) {
                    for (c, &t) in tint.iter().enumerate() {
                        let v = 0.6 * t + 0.4 * img.get(x, y, c);
                        img.set(x, y, c, v);
                    }
                }
            }
        }
        anns.push(Annotation {
            id: first_ann_id + k as i64,
            image_id,
            category_id: 1 + (k as i64 % 2),
            bbox: polygon_bbox(&poly),
            segmentation: Some(Segmentation::Polygons(vec![poly])),
            area: mask.count() as f64,
            iscrowd: 0,
        });
    }
    (img.quantized(), anns)
}

pub fn categories() -> Vec<Category> {
    vec![
        Category { id: 1, name: "block".into(), supercategory: None },
        Category { id: 2, name: "wedge".into(), supercategory: None },
    ]
}

/// Writes `n` annotated PNGs to `dir/images/` and `dir/annotations.json`.
/// Every `empty_every`-th image (if non-zero) has no objects.
pub fn write_mini_coco(dir: &Path, n: usize, width: usize, height: usize, seed: u64, empty_every: usize) -> CocoDataset {
    let image_dir = dir.join("images");
    fs::create_dir_all(&image_dir).unwrap();
    let mut dataset = CocoDataset {
        images: Vec::new(),
        annotations: Vec::new(),
        categories: categories(),
    };
    let mut next_ann = 1;
    for i in 0..n {
        let id = i as i64 + 1;
        let objects = if empty_every > 0 && (i + 1) % empty_every == 0 {
            0
        } else {
            1 + i % 3
        };
        let (img, anns) = annotated_image(id, width, height, objects, next_ann, seed.wrapping_add(id as u64));
        next_ann += anns.len() as i64;
        let file_name = format!("img_{id:04}.png");
        img.save_png(&image_dir.join(&file_name)).unwrap();
        dataset.images.push(ImageInfo {
            id,
            file_name,
            width: width as u32,
            height: height as u32,
        });
        dataset.annotations.extend(anns);
    }
    dataset.save(&dir.join("annotations.json")).unwrap();
    dataset
}

/// Detections equal to the ground truth (score 1), crowds excluded.
pub fn perfect_detections(dataset: &CocoDataset) -> Vec<Detection> {
    dataset
        .annotations
        .iter()
        .filter(|a| !a.is_crowd())
        .map(|a| Detection {
            image_id: a.image_id,
            category_id: a.category_id,
            bbox: a.bbox,
            score: 1.0,
        })
        .collect()
}

/// Small random evaluation problem: up to 5 images, 3 categories and 10
/// detections, with crowd regions, tied scores and near-miss boxes.
pub fn random_instance(rng: &mut ChaCha8Rng) -> (CocoDataset, Vec<Detection>) {
    let n_images = rng.gen_range(1..=5);
    let n_cats = rng.gen_range(1..=3);
    let grid_box = |rng: &mut ChaCha8Rng| -> [f64; 4] {
        [
            rng.gen_range(0..8) as f64 * 4.0,
            rng.gen_range(0..8) as f64 * 4.0,
            rng.gen_range(1..6) as f64 * 4.0,
            rng.gen_range(1..6) as f64 * 4.0,
        ]
    };
    let images: Vec<ImageInfo> = (1..=n_images)
        .map(|id| ImageInfo { id, file_name: format!("{id}.png"), width: 64, height: 64 })
        .collect();
    let categories: Vec<Category> = (1..=n_cats)
        .map(|id| Category { id, name: format!("c{id}"), supercategory: None })
        .collect();
    let mut annotations = Vec::new();
    for _ in 0..rng.gen_range(0..=8) {
        let crowd = rng.gen_bool(0.15);
        let bbox = grid_box(rng);
        annotations.push(Annotation {
            id: annotations.len() as i64 + 1,
            image_id: rng.gen_range(1..=n_images),
            category_id: rng.gen_range(1..=n_cats),
            bbox,
            segmentation: None,
            area: bbox[2] * bbox[3],
            iscrowd: crowd as u8,
        });
    }
    let mut dets = Vec::new();
    for _ in 0..rng.gen_range(0..=10) {
        let (image_id, category_id, bbox) = if !annotations.is_empty() && rng.gen_bool(0.6) {
            let a = &annotations[rng.gen_range(0..annotations.len())];
            let jitter = |rng: &mut ChaCha8Rng| rng.gen_range(-3..=3) as f64;
            let b = [
                a.bbox[0] + jitter(rng),
                a.bbox[1] + jitter(rng),
                (a.bbox[2] + jitter(rng)).max(1.0),
                (a.bbox[3] + jitter(rng)).max(1.0),
            ];
            let cat = if rng.gen_bool(0.9) { a.category_id } else { rng.gen_range(1..=n_cats) };
            (a.image_id, cat, b)
        } else {
            (rng.gen_range(1..=n_images), rng.gen_range(1..=n_cats), grid_box(rng))
        };
        dets.push(Detection {
            image_id,
            category_id,
            bbox,
            score: rng.gen_range(1..=10) as f64 / 10.0,
        });
    }
    (CocoDataset { images, annotations, categories }, dets)
}
