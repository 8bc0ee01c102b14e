//! 31-channel Felzenszwalb HOG and the cosine taper applied before filtering.

use std::f64::consts::PI;

use ndarray::{Array2, Array3, Axis};

use crate::error::{Error, Result};

pub const HOG_CHANNELS: usize = 31;
pub const DEFAULT_CELL_SIZE: usize = 4;

const ORIENTATIONS: usize = 9;
const TRUNCATION: f64 = 0.2;
const NORM_EPS: f64 = 1e-4;
const TEXTURE_WEIGHT: f64 = 0.2357;
/// Gradients are measured in 8-bit intensity units, the units `NORM_EPS` is calibrated for.
const GRADIENT_SCALE: f64 = 255.0;

/// A multi-channel feature grid.
///
/// Stored channel-major: `data` has shape `(channels, rows, cols)` so each
/// channel is a contiguous plane for the transforms.
#[derive(Debug, Clone, PartialEq)]
pub struct FeaturePatch {
    pub data: Array3<f64>,
    pub cell_size: usize,
}

impl FeaturePatch {
    pub fn new(data: Array3<f64>, cell_size: usize) -> Self {
        FeaturePatch { data, cell_size }
    }

    pub fn channels(&self) -> usize {
        self.data.len_of(Axis(0))
    }

    pub fn rows(&self) -> usize {
        self.data.len_of(Axis(1))
    }

    pub fn cols(&self) -> usize {
        self.data.len_of(Axis(2))
    }

    /// `(rows, cols, channels)`.
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.rows(), self.cols(), self.channels())
    }

    pub fn squared_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }
}

/// Snaps a gradient to one of 18 signed orientation bins.
fn orientation_bin(dx: f64, dy: f64, basis: &[(f64, f64); ORIENTATIONS]) -> usize {
    let mut best = 0.0;
    let mut bin = 0;
    for (o, &(u, v)) in basis.iter().enumerate() {
        let dot = u * dx + v * dy;
        if dot > best {
            best = dot;
            bin = o;
        } else if -dot > best {
            best = -dot;
            bin = o + ORIENTATIONS;
        }
    }
    bin
}

/// Computes unwindowed FHOG features with `floor(h/cell) x floor(w/cell)` cells.
///
/// Channels 0..18 are contrast-sensitive orientations, 18..27 contrast-insensitive
/// orientations, and 27..31 the gradient energy under each of the four
/// surrounding 2x2 block normalizations.
pub fn extract_hog(patch: &Array2<f64>, cell_size: usize) -> Result<FeaturePatch> {
    let (h, w) = patch.dim();
    if cell_size == 0 || h < 2 * cell_size || w < 2 * cell_size {
        return Err(Error::invalid(format!(
            "patch {w}x{h} too small for HOG with cell size {cell_size}"
        )));
    }
    let rows = h / cell_size;
    let cols = w / cell_size;
    let cell = cell_size as f64;

    let mut basis = [(0.0, 0.0); ORIENTATIONS];
    for (o, b) in basis.iter_mut().enumerate() {
        let theta = o as f64 * PI / ORIENTATIONS as f64;
        *b = (theta.cos(), theta.sin());
    }

    // Signed orientation histograms with bilinear spatial voting.
    let mut hist = Array3::<f64>::zeros((2 * ORIENTATIONS, rows, cols));
    for y in 0..h {
        let up = y.saturating_sub(1);
        let down = (y + 1).min(h - 1);
        let yp = (y as f64 + 0.5) / cell - 0.5;
        let iy = yp.floor();
        let fy = yp - iy;
        let iy = iy as i64;
        for x in 0..w {
            let left = x.saturating_sub(1);
            let right = (x + 1).min(w - 1);
            let dx = GRADIENT_SCALE * (patch[[y, right]] - patch[[y, left]]);
            let dy = GRADIENT_SCALE * (patch[[down, x]] - patch[[up, x]]);
            let mag = (dx * dx + dy * dy).sqrt();
            if mag == 0.0 {
                continue;
            }
            let bin = orientation_bin(dx, dy, &basis);
            let xp = (x as f64 + 0.5) / cell - 0.5;
            let ix = xp.floor();
            let fx = xp - ix;
            let ix = ix as i64;
            for (cy, wy) in [(iy, 1.0 - fy), (iy + 1, fy)] {
                if cy < 0 || cy >= rows as i64 || wy == 0.0 {
                    continue;
                }
                for (cx, wx) in [(ix, 1.0 - fx), (ix + 1, fx)] {
                    if cx < 0 || cx >= cols as i64 || wx == 0.0 {
                        continue;
                    }
                    hist[[bin, cy as usize, cx as usize]] += wy * wx * mag;
                }
            }
        }
    }

    let insensitive = Array3::from_shape_fn((ORIENTATIONS, rows, cols), |(o, r, c)| {
        hist[[o, r, c]] + hist[[o + ORIENTATIONS, r, c]]
    });
    let energy = insensitive.map_axis(Axis(0), |v| v.iter().map(|x| x * x).sum::<f64>());

    // blocks[(i, j)] normalizes the 2x2 cells whose top-left cell is (i-1, j-1);
    // out-of-grid cells are replicated from the border.
    let clamp_r = |i: i64| i.clamp(0, rows as i64 - 1) as usize;
    let clamp_c = |j: i64| j.clamp(0, cols as i64 - 1) as usize;
    let blocks = Array2::from_shape_fn((rows + 1, cols + 1), |(i, j)| {
        let (r0, r1) = (clamp_r(i as i64 - 1), clamp_r(i as i64));
        let (c0, c1) = (clamp_c(j as i64 - 1), clamp_c(j as i64));
        let sum = energy[[r0, c0]] + energy[[r0, c1]] + energy[[r1, c0]] + energy[[r1, c1]];
        1.0 / (sum + NORM_EPS).sqrt()
    });

    let mut out = Array3::<f64>::zeros((HOG_CHANNELS, rows, cols));
    for r in 0..rows {
        for c in 0..cols {
            let norms = [
                blocks[[r, c]],
                blocks[[r, c + 1]],
                blocks[[r + 1, c]],
                blocks[[r + 1, c + 1]],
            ];
            let mut texture = [0.0; 4];
            for o in 0..2 * ORIENTATIONS {
                let v = hist[[o, r, c]];
                let mut acc = 0.0;
                for (k, n) in norms.iter().enumerate() {
                    let t = (v * n).min(TRUNCATION);
                    acc += t;
                    texture[k] += t;
                }
                out[[o, r, c]] = 0.5 * acc;
            }
            for o in 0..ORIENTATIONS {
                let v = insensitive[[o, r, c]];
                let acc: f64 = norms.iter().map(|n| (v * n).min(TRUNCATION)).sum();
                out[[2 * ORIENTATIONS + o, r, c]] = 0.5 * acc;
            }
            for (k, t) in texture.iter().enumerate() {
                out[[3 * ORIENTATIONS + k, r, c]] = TEXTURE_WEIGHT * t;
            }
        }
    }
    Ok(FeaturePatch::new(out, cell_size))
}

/// The symmetric Hann window of length `n`; a single tap is defined as 0.
pub fn hann(n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![0.0; n];
    }
    let denom = (n - 1) as f64;
    (0..n)
        .map(|i| 0.5 * (1.0 - (2.0 * PI * i as f64 / denom).cos()))
        .collect()
}

/// Multiplies every channel by the outer product of row and column Hann windows.
pub fn apply_hann(mut fp: FeaturePatch) -> FeaturePatch {
    let wr = hann(fp.rows());
    let wc = hann(fp.cols());
    for mut plane in fp.data.outer_iter_mut() {
        for ((r, c), v) in plane.indexed_iter_mut() {
            *v *= wr[r] * wc[c];
        }
    }
    fp
}

/// HOG extraction followed by the Hann taper.
pub fn windowed_hog(patch: &Array2<f64>, cell_size: usize) -> Result<FeaturePatch> {
    extract_hog(patch, cell_size).map(apply_hann)
}
