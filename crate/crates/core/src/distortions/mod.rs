//! The ten severity-graded distortion generators.
//!
//! Seven kinds act on the whole frame; three act only on selected objects,
//! using their segmentation masks. Every generator is a pure function of the
//! input pixels, the [`DistortionSpec`] and the image's annotations: random
//! draws come from a ChaCha8 stream keyed by the spec's seed, which callers
//! derive per image with [`derive_seed`].

mod generators;
pub mod ramps;

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::coco::{annotation_mask, Annotation};
use crate::error::{Error, Result};
use crate::imaging::{blend_masked, ImageBuffer};
use crate::mask::BinaryMask;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum DistortionKind {
    Noise,
    Contrast,
    Compression,
    Rain,
    Haze,
    MotionBlur,
    DefocusBlur,
    LocMotionBlur,
    LocDefocus,
    BackLight,
}

impl DistortionKind {
    pub const ALL: [DistortionKind; 10] = [
        DistortionKind::Noise,
        DistortionKind::Contrast,
        DistortionKind::Compression,
        DistortionKind::Rain,
        DistortionKind::Haze,
        DistortionKind::MotionBlur,
        DistortionKind::DefocusBlur,
        DistortionKind::LocMotionBlur,
        DistortionKind::LocDefocus,
        DistortionKind::BackLight,
    ];

    /// Position in [`DistortionKind::ALL`]; part of the seed derivation.
    pub fn index(self) -> u64 {
        self as u64
    }

    pub fn is_local(self) -> bool {
        matches!(
            self,
            DistortionKind::LocMotionBlur | DistortionKind::LocDefocus | DistortionKind::BackLight
        )
    }

    /// Command-line and directory name.
    pub fn slug(self) -> &'static str {
        match self {
            DistortionKind::Noise => "noise",
            DistortionKind::Contrast => "contrast",
            DistortionKind::Compression => "compression",
            DistortionKind::Rain => "rain",
            DistortionKind::Haze => "haze",
            DistortionKind::MotionBlur => "mblur",
            DistortionKind::DefocusBlur => "defocus",
            DistortionKind::LocMotionBlur => "loc-mblur",
            DistortionKind::LocDefocus => "loc-defocus",
            DistortionKind::BackLight => "backlight",
        }
    }

    /// Display name used in tables.
    pub fn name(self) -> &'static str {
        match self {
            DistortionKind::Noise => "Noise",
            DistortionKind::Contrast => "Contrast",
            DistortionKind::Compression => "Compression",
            DistortionKind::Rain => "Rain",
            DistortionKind::Haze => "Haze",
            DistortionKind::MotionBlur => "MotionBlur",
            DistortionKind::DefocusBlur => "DefocusBlur",
            DistortionKind::LocMotionBlur => "LocMotionBlur",
            DistortionKind::LocDefocus => "LocDefocus",
            DistortionKind::BackLight => "BackLight",
        }
    }
}

impl fmt::Display for DistortionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

impl FromStr for DistortionKind {
    type Err = Error;

    /// Accepts the slug or the display name, case-insensitively.
    fn from_str(s: &str) -> Result<Self> {
        DistortionKind::ALL
            .into_iter()
            .find(|k| k.slug().eq_ignore_ascii_case(s) || k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Parameter(format!("unknown distortion kind `{s}`")))
    }
}

impl From<DistortionKind> for String {
    fn from(k: DistortionKind) -> String {
        k.slug().to_string()
    }
}

impl TryFrom<String> for DistortionKind {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// Severity in `0..=10`; level 0 is the identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct SeverityLevel(u8);

impl SeverityLevel {
    pub const MAX: u8 = 10;

    pub fn new(level: u8) -> Result<Self> {
        if level > Self::MAX {
            return Err(Error::Parameter(format!(
                "severity level must be in 0..={}, got {level}",
                Self::MAX
            )));
        }
        Ok(Self(level))
    }

    pub fn get(self) -> u8 {
        self.0
    }

    /// Levels 1 through 10.
    pub fn distorting() -> impl Iterator<Item = SeverityLevel> {
        (1..=Self::MAX).map(SeverityLevel)
    }
}

impl TryFrom<u8> for SeverityLevel {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        Self::new(v)
    }
}

impl From<SeverityLevel> for u8 {
    fn from(l: SeverityLevel) -> u8 {
        l.0
    }
}

impl fmt::Display for SeverityLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Which objects local distortions act on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetPolicy {
    /// Minimum annotation area as a fraction of the image area.
    pub min_area_fraction: f64,
    /// At most this many objects, largest first.
    pub max_targets: usize,
    pub include_crowd: bool,
}

impl Default for TargetPolicy {
    fn default() -> Self {
        Self {
            min_area_fraction: 0.01,
            max_targets: 5,
            include_crowd: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistortionSpec {
    pub kind: DistortionKind,
    pub level: SeverityLevel,
    pub seed: u64,
    #[serde(default)]
    pub policy: TargetPolicy,
}

impl DistortionSpec {
    pub fn new(kind: DistortionKind, level: SeverityLevel, seed: u64) -> Self {
        Self {
            kind,
            level,
            seed,
            policy: TargetPolicy::default(),
        }
    }

    /// Chebyshev distance from the target mask beyond which a local kind
    /// leaves pixels untouched: feather plus kernel radius plus halo width.
    /// `None` for global kinds.
    pub fn influence_radius(&self) -> Option<usize> {
        let l = self.level.get();
        let reach = match self.kind {
            DistortionKind::LocMotionBlur => ramps::motion_length(l) / 2,
            DistortionKind::LocDefocus => ramps::defocus_radius(l),
            DistortionKind::BackLight => ramps::halo_radius(l),
            _ => return None,
        };
        Some(ramps::FEATHER + reach)
    }
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-image seed: one SplitMix64 step over
/// `global ^ image_id ^ (kind << 32) ^ (level << 40)`.
pub fn derive_seed(
    global_seed: u64,
    image_id: i64,
    kind: DistortionKind,
    level: SeverityLevel,
) -> u64 {
    splitmix64(global_seed ^ image_id as u64 ^ (kind.index() << 32) ^ ((level.get() as u64) << 40))
}

/// Picks the objects a local distortion acts on: non-crowd (unless the policy
/// allows crowds), area at least `min_area_fraction` of the image, the
/// `max_targets` largest with ties going to the lower id. When nothing clears
/// the area bar the single largest eligible object is used.
pub fn select_targets<'a>(
    anns: &[&'a Annotation],
    width: usize,
    height: usize,
    policy: &TargetPolicy,
) -> Vec<&'a Annotation> {
    let mut eligible: Vec<&Annotation> = anns
        .iter()
        .copied()
        .filter(|a| policy.include_crowd || !a.is_crowd())
        .collect();
    eligible.sort_by(|a, b| b.area.total_cmp(&a.area).then(a.id.cmp(&b.id)));
    let min_area = policy.min_area_fraction * (width * height) as f64;
    let large: Vec<&Annotation> = eligible
        .iter()
        .copied()
        .filter(|a| a.area >= min_area)
        .take(policy.max_targets)
        .collect();
    if large.is_empty() {
        eligible.into_iter().take(1).collect()
    } else {
        large
    }
}

/// Union of the selected objects' masks, or `NoTarget`.
pub fn target_mask(
    anns: &[&Annotation],
    width: usize,
    height: usize,
    policy: &TargetPolicy,
) -> Result<BinaryMask> {
    let targets = select_targets(anns, width, height, policy);
    if targets.is_empty() {
        return Err(Error::NoTarget);
    }
    let mut mask = BinaryMask::new(width, height);
    for ann in targets {
        mask.union_with(&annotation_mask(ann, width, height)?)?;
    }
    Ok(mask)
}

/// Applies one distortion. Level 0 returns the input unchanged for every
/// kind. Local kinds fail with [`Error::NoTarget`] when no annotation is
/// eligible.
pub fn apply(img: &ImageBuffer, spec: &DistortionSpec, anns: &[&Annotation]) -> Result<ImageBuffer> {
    let level = spec.level.get();
    if level == 0 {
        return Ok(img.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (w, h) = (img.width(), img.height());
    Ok(match spec.kind {
        DistortionKind::Noise => generators::gaussian_noise(img, level, &mut rng),
        DistortionKind::Contrast => generators::contrast_change(img, level),
        DistortionKind::Compression => generators::compression(img, level)?,
        DistortionKind::Rain => generators::rain(img, level, &mut rng),
        DistortionKind::Haze => generators::haze(img, level),
        DistortionKind::MotionBlur => {
            let angle = generators::blur_angle(&mut rng);
            generators::motion_blur(img, level, angle)
        }
        DistortionKind::DefocusBlur => generators::defocus_blur(img, level),
        DistortionKind::LocMotionBlur => {
            let mask = target_mask(anns, w, h, &spec.policy)?;
            let angle = generators::blur_angle(&mut rng);
            let blurred = generators::motion_blur(img, level, angle);
            blend_masked(img, &blurred, &mask, ramps::FEATHER)?
        }
        DistortionKind::LocDefocus => {
            let mask = target_mask(anns, w, h, &spec.policy)?;
            let blurred = generators::defocus_blur(img, level);
            blend_masked(img, &blurred, &mask, ramps::FEATHER)?
        }
        DistortionKind::BackLight => {
            let mask = target_mask(anns, w, h, &spec.policy)?;
            generators::backlight(img, level, &mask)?
        }
    })
}
