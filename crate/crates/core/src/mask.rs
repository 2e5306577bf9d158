//! Binary object masks and the COCO mask encodings.
//!
//! Masks are stored row-major in memory. Run-length encodings follow the COCO
//! convention: runs walk the pixels in column-major order (pixel index `p` is
//! row `p % h`, column `p / h`), alternating background/foreground and always
//! starting with a (possibly empty) background run.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn full(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![true; width * height],
        }
    }

    /// Builds a mask from row-major bits.
    pub fn from_bits(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::Shape(format!(
                "{} bits for a {width}x{height} mask",
                bits.len()
            )));
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.bits[row * self.width + col] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn union_with(&mut self, other: &BinaryMask) -> Result<()> {
        self.check_same_shape(other)?;
        for (a, &b) in self.bits.iter_mut().zip(&other.bits) {
            *a |= b;
        }
        Ok(())
    }

    /// Pixels set in `self` but not in `other`.
    pub fn difference(&self, other: &BinaryMask) -> Result<BinaryMask> {
        self.check_same_shape(other)?;
        let bits = self
            .bits
            .iter()
            .zip(&other.bits)
            .map(|(&a, &b)| a && !b)
            .collect();
        Ok(BinaryMask {
            width: self.width,
            height: self.height,
            bits,
        })
    }

    /// True when every set pixel of `self` is also set in `other`.
    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.width == other.width
            && self.height == other.height
            && self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }

    fn check_same_shape(&self, other: &BinaryMask) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::Shape(format!(
                "mask {}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )));
        }
        Ok(())
    }
}

/// Decodes column-major runs into a mask of `height` rows and `width` columns.
pub fn decode_rle(height: usize, width: usize, counts: &[u32]) -> Result<BinaryMask> {
    let expected = (height * width) as u64;
    let actual: u64 = counts.iter().map(|&c| c as u64).sum();
    if actual != expected {
        return Err(Error::Length { expected, actual });
    }
    let mut mask = BinaryMask::new(width, height);
    let mut p = 0usize;
    let mut value = false;
    for &run in counts {
        if value {
            for q in p..p + run as usize {
                mask.set(q % height, q / height, true);
            }
        }
        p += run as usize;
        value = !value;
    }
    Ok(mask)
}

/// Encodes a mask as canonical column-major runs: a leading background run
/// (zero only when the first pixel is set) and no other empty runs.
pub fn encode_rle(mask: &BinaryMask) -> Vec<u32> {
    let (h, w) = (mask.height, mask.width);
    let mut counts = Vec::new();
    let mut current = false;
    let mut run = 0u32;
    for col in 0..w {
        for row in 0..h {
            let v = mask.get(row, col);
            if v != current {
                counts.push(run);
                run = 0;
                current = v;
            }
            run += 1;
        }
    }
    if run > 0 || counts.is_empty() {
        counts.push(run);
    }
    counts
}

/// Serializes runs into COCO's compressed `counts` string (5-bit groups with a
/// continuation flag, offset by ASCII 48; runs past the second are stored as a
/// delta against the run two positions earlier).
pub fn compress_counts(counts: &[u32]) -> String {
    let mut out = String::new();
    for (i, &c) in counts.iter().enumerate() {
        let mut x = c as i64;
        if i > 2 {
            x -= counts[i - 2] as i64;
        }
        loop {
            let mut group = x & 0x1f;
            x >>= 5;
            let more = if group & 0x10 != 0 { x != -1 } else { x != 0 };
            if more {
                group |= 0x20;
            }
            out.push((group as u8 + 48) as char);
            if !more {
                break;
            }
        }
    }
    out
}

/// Inverse of [`compress_counts`].
pub fn decompress_counts(text: &str) -> Result<Vec<u32>> {
    let bytes = text.as_bytes();
    let mut counts: Vec<u32> = Vec::new();
    let mut p = 0;
    while p < bytes.len() {
        let mut x: i64 = 0;
        let mut k = 0;
        loop {
            let Some(&b) = bytes.get(p) else {
                return Err(Error::Range(format!(
                    "truncated compressed RLE at byte {p}"
                )));
            };
            if !(48..48 + 64).contains(&b) || k > 12 {
                return Err(Error::Range(format!(
                    "invalid compressed RLE byte {b:#x} at {p}"
                )));
            }
            let c = (b - 48) as i64;
            x |= (c & 0x1f) << (5 * k);
            p += 1;
            k += 1;
            if c & 0x20 == 0 {
                if c & 0x10 != 0 {
                    x |= -1i64 << (5 * k);
                }
                break;
            }
        }
        let m = counts.len();
        if m > 2 {
            x += counts[m - 2] as i64;
        }
        let run = u32::try_from(x)
            .map_err(|_| Error::Range(format!("run length {x} out of range")))?;
        counts.push(run);
    }
    Ok(counts)
}

/// Fills the union of polygons given as flat `x0, y0, x1, y1, ...` lists.
///
/// Pixel `(r, c)` is set iff its center `(c + 0.5, r + 0.5)` lies inside at
/// least one polygon under the even-odd rule. Centers exactly on a left edge
/// count as inside, on a right edge as outside.
pub fn rasterize_polygons(polygons: &[Vec<f64>], width: usize, height: usize) -> Result<BinaryMask> {
    let mut mask = BinaryMask::new(width, height);
    let mut crossings = Vec::new();
    for poly in polygons {
        if poly.len() % 2 != 0 {
            return Err(Error::Geometry(format!(
                "polygon has odd coordinate count {}",
                poly.len()
            )));
        }
        let n = poly.len() / 2;
        if n < 3 {
            return Err(Error::Geometry(format!("polygon has {n} vertices, need 3")));
        }
        for row in 0..height {
            let y = row as f64 + 0.5;
            crossings.clear();
            for i in 0..n {
                let j = (i + 1) % n;
                let (x0, y0) = (poly[2 * i], poly[2 * i + 1]);
                let (x1, y1) = (poly[2 * j], poly[2 * j + 1]);
                if (y0 <= y && y < y1) || (y1 <= y && y < y0) {
                    // Evaluate from the lower endpoint so the result does not
                    // depend on edge direction.
                    let (xa, ya, xb, yb) = if y0 < y1 {
                        (x0, y0, x1, y1)
                    } else {
                        (x1, y1, x0, y0)
                    };
                    crossings.push(xa + (y - ya) * (xb - xa) / (yb - ya));
                }
            }
            crossings.sort_by(f64::total_cmp);
            for span in crossings.chunks_exact(2) {
                let (left, right) = (span[0], span[1]);
                // Columns whose centers satisfy left <= c + 0.5 < right.
                let first = (left - 0.5).ceil().max(0.0);
                let last = (right - 0.5).ceil().min(width as f64);
                let mut col = first as usize;
                while (col as f64) < last {
                    mask.set(row, col, true);
                    col += 1;
                }
            }
        }
    }
    Ok(mask)
}

/// Fills the box `(x, y, w, h)` by the same pixel-center rule, clamped to the canvas.
pub fn rasterize_bbox(bbox: [f64; 4], width: usize, height: usize) -> BinaryMask {
    let [x, y, w, h] = bbox;
    let span = |lo: f64, len: f64, limit: usize| {
        let first = (lo - 0.5).ceil().clamp(0.0, limit as f64) as usize;
        let last = (lo + len - 0.5).ceil().clamp(0.0, limit as f64) as usize;
        first..last.max(first)
    };
    let mut mask = BinaryMask::new(width, height);
    for row in span(y, h, height) {
        for col in span(x, w, width) {
            mask.set(row, col, true);
        }
    }
    mask
}
