use crate::error::{Error, Result};

/// Convolution weights with odd side lengths, non-negative and summing to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    width: usize,
    height: usize,
    weights: Vec<f64>,
}

impl Kernel {
    /// Normalizes `weights` (row-major) so they sum to one.
    pub fn normalized(width: usize, height: usize, weights: Vec<f64>) -> Result<Self> {
        if width.is_multiple_of(2) || height.is_multiple_of(2) {
            return Err(Error::Shape(format!(
                "kernel sides must be odd, got {width}x{height}"
            )));
        }
        if weights.len() != width * height {
            return Err(Error::Shape(format!(
                "{} weights for a {width}x{height} kernel",
                weights.len()
            )));
        }
        if weights.iter().any(|&w| !(w >= 0.0 && w.is_finite())) {
            return Err(Error::Parameter("kernel weights must be finite and non-negative".into()));
        }
        let sum: f64 = weights.iter().sum();
        if sum <= 0.0 {
            return Err(Error::Parameter("kernel weights sum to zero".into()));
        }
        Ok(Self {
            width,
            height,
            weights: weights.into_iter().map(|w| w / sum).collect(),
        })
    }

    pub fn identity() -> Self {
        Self {
            width: 1,
            height: 1,
            weights: vec![1.0],
        }
    }

    /// Uniform `(2r+1) x (2r+1)` box.
    pub fn box_filter(radius: usize) -> Self {
        let side = 2 * radius + 1;
        Self::normalized(side, side, vec![1.0; side * side]).expect("odd positive box")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, row: usize, col: usize) -> f64 {
        self.weights[row * self.width + col]
    }

    /// Half-extent of the larger side: the furthest a tap reaches from the center.
    pub fn radius(&self) -> usize {
        self.width.max(self.height) / 2
    }

    /// Non-zero taps as `(dy, dx, weight)` offsets from the center.
    pub(crate) fn taps(&self) -> Vec<(isize, isize, f64)> {
        let (cy, cx) = ((self.height / 2) as isize, (self.width / 2) as isize);
        self.weights
            .iter()
            .enumerate()
            .filter(|(_, &w)| w != 0.0)
            .map(|(i, &w)| {
                let (r, c) = ((i / self.width) as isize, (i % self.width) as isize);
                (r - cy, c - cx, w)
            })
            .collect()
    }
}

/// Uniform line kernel of `length` pixels at `angle` radians (0 is horizontal,
/// positive angles rotate counter-clockwise in image space).
///
/// The line is rasterized with Bresenham's algorithm outward from the center
/// of a `length x length` grid in both directions, with endpoints on the grid
/// border, so every angle yields exactly `length` taps and the kernel is
/// point-symmetric about its center.
pub fn motion_kernel(length: usize, angle: f64) -> Result<Kernel> {
    if length == 0 || length.is_multiple_of(2) {
        return Err(Error::Parameter(format!(
            "motion kernel length must be odd and positive, got {length}"
        )));
    }
    let radius = (length / 2) as f64;
    let (sin, cos) = angle.sin_cos();
    let scale = radius / sin.abs().max(cos.abs());
    let dx = (scale * cos).round() as isize;
    // Image rows grow downward.
    let dy = -(scale * sin).round() as isize;
    let mut weights = vec![0.0; length * length];
    let c = (length / 2) as isize;
    for end in [(dx, dy), (-dx, -dy)] {
        for (x, y) in bresenham((0, 0), end) {
            weights[((c + y) * length as isize + (c + x)) as usize] = 1.0;
        }
    }
    Kernel::normalized(length, length, weights)
}

fn bresenham(from: (isize, isize), to: (isize, isize)) -> Vec<(isize, isize)> {
    let (mut x, mut y) = from;
    let dx = (to.0 - x).abs();
    let dy = -(to.1 - y).abs();
    let sx = if x < to.0 { 1 } else { -1 };
    let sy = if y < to.1 { 1 } else { -1 };
    let mut err = dx + dy;
    let mut points = Vec::new();
    loop {
        points.push((x, y));
        if (x, y) == to {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
    points
}

/// Uniform disk of side `2r+1`: taps whose center lies within `r + 0.5` of
/// the kernel center.
pub fn disk_kernel(radius: usize) -> Kernel {
    let side = 2 * radius + 1;
    let limit = (radius as f64 + 0.5).powi(2);
    let r = radius as f64;
    let weights = (0..side * side)
        .map(|i| {
            let dy = (i / side) as f64 - r;
            let dx = (i % side) as f64 - r;
            if dx * dx + dy * dy <= limit {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    Kernel::normalized(side, side, weights).expect("disk always has its center tap")
}
