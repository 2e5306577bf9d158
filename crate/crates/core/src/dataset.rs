//! Deterministic dataset materialization: augmentation mixing plans, the
//! full (kind, level) evaluation grid, and curated natural-distortion
//! subsets.
//!
//! Output images are PNG except for the compression kind, which is stored as
//! JPEG at the level's quality so the codec artifacts are the stored bytes.
//! Work is spread over the ambient rayon pool; manifests are always ordered
//! by image id.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use log::warn;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coco::{Annotation, CocoDataset, ImageInfo};
use crate::distortions::{
    apply, derive_seed, ramps, DistortionKind, DistortionSpec, SeverityLevel, TargetPolicy,
};
use crate::error::{Error, Result};
use crate::imaging::ImageBuffer;

/// Share of the training set given to each kind.
pub const DEFAULT_FRACTION: f64 = 0.05;

pub type Fractions = BTreeMap<DistortionKind, f64>;

/// Every kind at [`DEFAULT_FRACTION`].
pub fn default_fractions() -> Fractions {
    DistortionKind::ALL
        .into_iter()
        .map(|k| (k, DEFAULT_FRACTION))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Assignment {
    Clean,
    Distort {
        kind: DistortionKind,
        level: SeverityLevel,
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingPlan {
    pub global_seed: u64,
    pub fractions: Fractions,
    pub assignment: BTreeMap<i64, Assignment>,
}

impl MixingPlan {
    pub fn count(&self, kind: DistortionKind) -> usize {
        self.assignment
            .values()
            .filter(|a| matches!(a, Assignment::Distort { kind: k, .. } if *k == kind))
            .count()
    }

    pub fn clean_count(&self) -> usize {
        self.assignment
            .values()
            .filter(|a| matches!(a, Assignment::Clean))
            .count()
    }
}

/// Assigns `round(fraction * N)` images to each kind.
///
/// The sorted ids are shuffled by a ChaCha8 permutation keyed by `seed`, then
/// sliced per kind in [`DistortionKind::ALL`] order; each assigned image gets
/// a level drawn uniformly from 1..=10 with its own derived seed. Everything
/// left over stays clean.
pub fn build_plan(image_ids: &[i64], fractions: &Fractions, seed: u64) -> Result<MixingPlan> {
    if let Some((k, f)) = fractions.iter().find(|(_, &f)| !(0.0..=1.0).contains(&f)) {
        return Err(Error::Plan(format!("fraction {f} for {k} outside [0, 1]")));
    }
    let total: f64 = fractions.values().sum();
    if total > 1.0 + 1e-9 {
        return Err(Error::Plan(format!("fractions sum to {total}, above 1")));
    }
    let mut ids: Vec<i64> = image_ids.to_vec();
    ids.sort_unstable();
    ids.dedup();
    if ids.len() != image_ids.len() {
        return Err(Error::Integrity("duplicate image ids in plan input".into()));
    }
    let n = ids.len();
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let zero = SeverityLevel::new(0).expect("level 0");
    let mut assignment: BTreeMap<i64, Assignment> = BTreeMap::new();
    let mut cursor = 0usize;
    for (&kind, &fraction) in fractions {
        let count = (fraction * n as f64).round() as usize;
        if cursor + count > n {
            return Err(Error::Plan(format!(
                "rounded counts exceed the {n} available images"
            )));
        }
        for &id in &ids[cursor..cursor + count] {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, id, kind, zero));
            let level = SeverityLevel::new(rng.gen_range(1..=SeverityLevel::MAX)).expect("in range");
            assignment.insert(
                id,
                Assignment::Distort {
                    kind,
                    level,
                    seed: derive_seed(seed, id, kind, level),
                },
            );
        }
        cursor += count;
    }
    for &id in &ids[cursor..] {
        assignment.insert(id, Assignment::Clean);
    }
    Ok(MixingPlan {
        global_seed: seed,
        fractions: fractions.clone(),
        assignment,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub image_id: i64,
    /// `None` for images left clean by the plan.
    pub kind: Option<DistortionKind>,
    pub level: u8,
    pub seed: u64,
    /// Written file, relative to the manifest's directory.
    pub path: Option<String>,
    /// Local kind with no eligible object; the image is emitted clean.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub skipped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub global_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<DistortionKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<u8>,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn distorted(&self) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(|e| e.kind.is_some())
    }

    pub fn skipped(&self) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(|e| e.skipped)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(&text, &e))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }
}

pub const MANIFEST_FILE: &str = "manifest.json";

fn output_name(info: &ImageInfo, kind: DistortionKind, level: SeverityLevel) -> String {
    let stem = Path::new(&info.file_name)
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| info.id.to_string());
    let ext = if kind == DistortionKind::Compression && level.get() > 0 {
        "jpg"
    } else {
        "png"
    };
    format!("{stem}.{ext}")
}

fn load_source(src_dir: &Path, info: &ImageInfo) -> Result<ImageBuffer> {
    let path = src_dir.join(&info.file_name);
    let img = ImageBuffer::load(&path)?;
    if img.width() != info.width as usize || img.height() != info.height as usize {
        return Err(Error::Integrity(format!(
            "{}: image is {}x{}, annotations say {}x{}",
            path.display(),
            img.width(),
            img.height(),
            info.width,
            info.height
        )));
    }
    Ok(img)
}

enum Rendered {
    Distorted(ImageBuffer),
    NoTarget,
}

struct Job<'a> {
    info: &'a ImageInfo,
    anns: &'a [&'a Annotation],
    spec: DistortionSpec,
}

impl Job<'_> {
    fn run(&self, src_dir: &Path) -> Result<(ImageBuffer, Rendered)> {
        let img = load_source(src_dir, self.info)?;
        match apply(&img, &self.spec, self.anns) {
            Ok(out) => Ok((img, Rendered::Distorted(out))),
            Err(Error::NoTarget) => {
                warn!(
                    "image {} ({}): no eligible target for {}",
                    self.info.id, self.info.file_name, self.spec.kind
                );
                Ok((img, Rendered::NoTarget))
            }
            Err(e) => Err(e),
        }
    }

    /// Writes the distorted image. The compression kind stores the encoder's
    /// own bytes for the source, which decode to exactly the distorted pixels.
    fn write(&self, source: &ImageBuffer, distorted: &ImageBuffer, path: &Path) -> Result<()> {
        if self.spec.kind == DistortionKind::Compression && self.spec.level.get() > 0 {
            let bytes = source.encode_jpeg(ramps::jpeg_quality(self.spec.level.get()))?;
            fs::write(path, bytes).map_err(|e| Error::io(path, e))
        } else {
            distorted.save_png(path)
        }
    }
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn image_index(dataset: &CocoDataset) -> HashMap<i64, &ImageInfo> {
    dataset.images.iter().map(|i| (i.id, i)).collect()
}

/// Writes the plan's distorted images under `dst_dir/images/`, a copy of the
/// annotations, and `dst_dir/manifest.json`. Clean images are not copied.
pub fn materialize(
    plan: &MixingPlan,
    dataset: &CocoDataset,
    src_dir: &Path,
    dst_dir: &Path,
    policy: &TargetPolicy,
) -> Result<Manifest> {
    let images = image_index(dataset);
    let by_image = dataset.annotations_by_image();
    let image_dir = dst_dir.join("images");
    create_dir(dst_dir)?;
    if plan.assignment.values().any(|a| matches!(a, Assignment::Distort { .. })) {
        create_dir(&image_dir)?;
    }

    let jobs: Vec<(&i64, &Assignment)> = plan.assignment.iter().collect();
    let entries = jobs
        .par_iter()
        .map(|&(&id, assignment)| -> Result<ManifestEntry> {
            let Assignment::Distort { kind, level, seed } = *assignment else {
                return Ok(ManifestEntry {
                    image_id: id,
                    kind: None,
                    level: 0,
                    seed: 0,
                    path: None,
                    skipped: false,
                });
            };
            let info = images
                .get(&id)
                .ok_or_else(|| Error::Integrity(format!("plan references missing image id {id}")))?;
            let job = Job {
                info,
                anns: by_image.get(&id).map_or(&[][..], Vec::as_slice),
                spec: DistortionSpec {
                    kind,
                    level,
                    seed,
                    policy: *policy,
                },
            };
            let (path, skipped) = match job.run(src_dir)? {
                (source, Rendered::Distorted(out)) => {
                    let name = output_name(info, kind, level);
                    job.write(&source, &out, &image_dir.join(&name))?;
                    (Some(format!("images/{name}")), false)
                }
                (_, Rendered::NoTarget) => (None, true),
            };
            Ok(ManifestEntry {
                image_id: id,
                kind: Some(kind),
                level: level.get(),
                seed,
                path,
                skipped,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let manifest = Manifest {
        global_seed: plan.global_seed,
        kind: None,
        level: None,
        entries,
    };
    dataset.save(&dst_dir.join("annotations.json"))?;
    manifest.save(&dst_dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}

/// Applies one (kind, level) to every image of `dataset`, writing
/// `dst_dir/images/<name>` and `dst_dir/manifest.json`. Images with no
/// eligible target for a local kind are logged and left out.
pub fn distort_set(
    dataset: &CocoDataset,
    kind: DistortionKind,
    level: SeverityLevel,
    seed: u64,
    src_dir: &Path,
    dst_dir: &Path,
    policy: &TargetPolicy,
) -> Result<Manifest> {
    let by_image = dataset.annotations_by_image();
    let image_dir = dst_dir.join("images");
    create_dir(&image_dir)?;
    let mut images: Vec<&ImageInfo> = dataset.images.iter().collect();
    images.sort_by_key(|i| i.id);
    let entries = images
        .par_iter()
        .map(|&info| -> Result<ManifestEntry> {
            let image_seed = derive_seed(seed, info.id, kind, level);
            let job = Job {
                info,
                anns: by_image.get(&info.id).map_or(&[][..], Vec::as_slice),
                spec: DistortionSpec {
                    kind,
                    level,
                    seed: image_seed,
                    policy: *policy,
                },
            };
            let (path, skipped) = match job.run(src_dir)? {
                (source, Rendered::Distorted(out)) => {
                    let name = output_name(info, kind, level);
                    job.write(&source, &out, &image_dir.join(&name))?;
                    (Some(format!("images/{name}")), false)
                }
                (_, Rendered::NoTarget) => (None, true),
            };
            Ok(ManifestEntry {
                image_id: info.id,
                kind: Some(kind),
                level: level.get(),
                seed: image_seed,
                path,
                skipped,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = Manifest {
        global_seed: seed,
        kind: Some(kind),
        level: Some(level.get()),
        entries,
    };
    manifest.save(&dst_dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub kinds: Vec<DistortionKind>,
    pub levels: Vec<SeverityLevel>,
    pub seed: u64,
}

impl GridSpec {
    /// All ten kinds at levels 1..=10.
    pub fn full(seed: u64) -> Self {
        Self {
            kinds: DistortionKind::ALL.to_vec(),
            levels: SeverityLevel::distorting().collect(),
            seed,
        }
    }

    /// Cells in kind-then-level order; level 0 is dropped since the clean set
    /// is the original.
    pub fn cells(&self) -> Vec<(DistortionKind, SeverityLevel)> {
        let kinds: BTreeSet<DistortionKind> = self.kinds.iter().copied().collect();
        let levels: BTreeSet<SeverityLevel> =
            self.levels.iter().copied().filter(|l| l.get() > 0).collect();
        kinds
            .iter()
            .flat_map(|&k| levels.iter().map(move |&l| (k, l)))
            .collect()
    }
}

/// Relative directory of a grid cell.
pub fn cell_dir(kind: DistortionKind, level: SeverityLevel) -> PathBuf {
    PathBuf::from(kind.slug()).join(level.get().to_string())
}

/// Writes one complete distorted copy of the dataset per (kind, level) cell
/// under `dst_root/<kind>/<level>/`, each with its own manifest. Images with
/// no eligible target for a local kind are written clean (lossless) and
/// flagged as skipped.
pub fn build_eval_grid(
    dataset: &CocoDataset,
    grid: &GridSpec,
    src_dir: &Path,
    dst_root: &Path,
    policy: &TargetPolicy,
) -> Result<Vec<Manifest>> {
    let by_image = dataset.annotations_by_image();
    let mut images: Vec<&ImageInfo> = dataset.images.iter().collect();
    images.sort_by_key(|i| i.id);
    let mut manifests = Vec::new();
    for (kind, level) in grid.cells() {
        let dir = dst_root.join(cell_dir(kind, level));
        create_dir(&dir)?;
        let entries = images
            .par_iter()
            .map(|&info| -> Result<ManifestEntry> {
                let seed = derive_seed(grid.seed, info.id, kind, level);
                let job = Job {
                    info,
                    anns: by_image.get(&info.id).map_or(&[][..], Vec::as_slice),
                    spec: DistortionSpec {
                        kind,
                        level,
                        seed,
                        policy: *policy,
                    },
                };
                let name = output_name(info, kind, level);
                let path = dir.join(&name);
                let skipped = match job.run(src_dir)? {
                    (source, Rendered::Distorted(out)) => {
                        job.write(&source, &out, &path)?;
                        false
                    }
                    (source, Rendered::NoTarget) => {
                        source.save_png(&path)?;
                        true
                    }
                };
                Ok(ManifestEntry {
                    image_id: info.id,
                    kind: Some(kind),
                    level: level.get(),
                    seed,
                    path: Some(name),
                    skipped,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let manifest = Manifest {
            global_seed: grid.seed,
            kind: Some(kind),
            level: Some(level.get()),
            entries,
        };
        manifest.save(&dir.join(MANIFEST_FILE))?;
        manifests.push(manifest);
    }
    Ok(manifests)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetEntry {
    pub image_id: i64,
    pub kind: DistortionKind,
    pub retained_annotation_ids: Vec<i64>,
}

/// A curator's selection of naturally distorted images and, per image, the
/// objects the distortion actually affects.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SubsetManifest {
    pub entries: Vec<SubsetEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<String>,
}

impl SubsetManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(&text, &e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KindRatio {
    pub kind: DistortionKind,
    pub images: usize,
    pub retained: usize,
    pub total: usize,
    pub ratio: f64,
}

/// Filters `dataset` to the manifest's images, keeping only the retained
/// annotations (for global kinds too: curators drop objects the distortion
/// leaves unaffected, e.g. sharp foreground under rain). The ratio per kind is
/// retained over annotated objects across that kind's images (kinds whose
/// images carry no annotations get no ratio).
pub fn subset_from_manifest(
    dataset: &CocoDataset,
    manifest: &SubsetManifest,
) -> Result<(CocoDataset, Vec<KindRatio>)> {
    let by_image = dataset.annotations_by_image();
    let mut seen = HashSet::new();
    let mut keep_ids: HashSet<i64> = HashSet::new();
    let mut tallies: BTreeMap<DistortionKind, (usize, usize, usize)> = BTreeMap::new();
    for entry in &manifest.entries {
        let anns = by_image.get(&entry.image_id).ok_or_else(|| {
            Error::Integrity(format!("subset references missing image id {}", entry.image_id))
        })?;
        if !seen.insert((entry.image_id, entry.kind)) {
            return Err(Error::Integrity(format!(
                "image {} listed twice for {}",
                entry.image_id, entry.kind
            )));
        }
        let own: HashSet<i64> = anns.iter().map(|a| a.id).collect();
        let retained: BTreeSet<i64> = entry.retained_annotation_ids.iter().copied().collect();
        if let Some(bad) = retained.iter().find(|id| !own.contains(id)) {
            return Err(Error::Integrity(format!(
                "annotation {bad} is not on image {}",
                entry.image_id
            )));
        }
        keep_ids.extend(&retained);
        let t = tallies.entry(entry.kind).or_default();
        t.0 += 1;
        t.1 += retained.len();
        t.2 += own.len();
    }
    let listed: HashSet<i64> = manifest.entries.iter().map(|e| e.image_id).collect();
    let images = dataset
        .images
        .iter()
        .filter(|i| listed.contains(&i.id))
        .cloned()
        .collect();
    let annotations = dataset
        .annotations
        .iter()
        .filter(|a| keep_ids.contains(&a.id))
        .cloned()
        .collect();
    let ratios = tallies
        .into_iter()
        .filter(|(_, (_, _, total))| *total > 0)
        .map(|(kind, (images, retained, total))| KindRatio {
            kind,
            images,
            retained,
            total,
            ratio: retained as f64 / total as f64,
        })
        .collect();
    let subset = CocoDataset {
        images,
        annotations,
        categories: dataset.categories.clone(),
    };
    Ok((subset, ratios))
}

/// CSV ratio table: `kind,retained,total,ratio`, ratio to two decimals.
pub fn ratio_table_csv(ratios: &[KindRatio]) -> String {
    let mut out = String::from("kind,retained,total,ratio\n");
    for r in ratios {
        let rounded = (r.ratio * 100.0).round() / 100.0;
        out.push_str(&format!(
            "{},{},{},{:?}\n",
            r.kind.name(),
            r.retained,
            r.total,
            rounded
        ));
    }
    out
}
