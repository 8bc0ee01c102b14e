//! Deterministic synthetic sequences with known ground truth.
//!
//! A square with a seeded smooth random texture moves over a mid-gray
//! background with per-frame Gaussian noise. The square may zoom, and may be
//! hidden for an interval during which its trajectory continues (optionally
//! with a sudden jump). Pixel values are quantized to 8 bits, so a sequence
//! written to PNG reads back identically.

use std::fs;
use std::path::Path;

use image::GrayImage;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::eval::GroundTruth;
use crate::imagery::{BoundingBox, Frame, FrameSource};

const BACKGROUND: f64 = 0.5;
/// Geometry is rounded to this step so the written ground truth is exact.
const GEOMETRY_STEP: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub frames: usize,
    /// `(width, height)` in pixels.
    pub canvas: (usize, usize),
    /// Side of the square on frame 1, in pixels.
    pub side: f64,
    /// Center on frame 1, in box coordinates.
    pub start_center: (f64, f64),
    /// Per-frame `(dx, dy)` in pixels.
    pub motion: (f64, f64),
    /// Inclusive 1-based frame interval during which the square is hidden.
    pub occlusion: Option<(usize, usize)>,
    /// Displacement added to the trajectory from the first occluded frame on.
    pub occlusion_jump: (f64, f64),
    /// Per-frame side multiplier.
    pub zoom: Option<f64>,
    /// Standard deviation of the background noise, in `[0, 1]` intensity units.
    pub noise_sigma: f64,
    /// Grid resolution of the texture; higher means finer detail.
    pub texture_cells: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            frames: 100,
            canvas: (320, 240),
            side: 40.0,
            start_center: (160.0, 120.0),
            motion: (0.0, 0.0),
            occlusion: None,
            occlusion_jump: (0.0, 0.0),
            zoom: None,
            noise_sigma: 0.05,
            texture_cells: 8,
            seed: 0,
        }
    }
}

fn round_geometry(v: f64) -> f64 {
    (v / GEOMETRY_STEP).round() * GEOMETRY_STEP
}

impl SyntheticSpec {
    pub fn is_occluded(&self, frame: usize) -> bool {
        self.occlusion.is_some_and(|(a, b)| (a..=b).contains(&frame))
    }

    /// Ground-truth box on 1-based `frame`.
    pub fn box_at(&self, frame: usize) -> BoundingBox {
        let k = (frame - 1) as f64;
        let jumped = self.occlusion.is_some_and(|(a, _)| frame >= a);
        let (jx, jy) = if jumped { self.occlusion_jump } else { (0.0, 0.0) };
        let side = round_geometry(self.side * self.zoom.unwrap_or(1.0).powf(k));
        BoundingBox {
            cx: round_geometry(self.start_center.0 + self.motion.0 * k + jx),
            cy: round_geometry(self.start_center.1 + self.motion.1 * k + jy),
            w: side,
            h: side,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.frames == 0 {
            return Err(Error::invalid("synthetic sequence needs at least one frame"));
        }
        if self.canvas.0 < 8 || self.canvas.1 < 8 {
            return Err(Error::invalid(format!("canvas {:?} too small", self.canvas)));
        }
        if !(self.side > 0.0 && self.side.is_finite()) {
            return Err(Error::invalid(format!("side {} must be positive", self.side)));
        }
        if self.zoom.is_some_and(|z| !(z > 0.0 && z.is_finite())) {
            return Err(Error::invalid("zoom must be positive"));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::invalid("noise sigma must be non-negative"));
        }
        if self.texture_cells == 0 {
            return Err(Error::invalid("texture needs at least one cell"));
        }
        if let Some((a, b)) = self.occlusion {
            if a == 0 || b < a {
                return Err(Error::invalid(format!("invalid occlusion interval {a}..={b}")));
            }
        }
        let (w, h) = (self.canvas.0 as f64, self.canvas.1 as f64);
        for t in 1..=self.frames {
            if self.is_occluded(t) {
                continue;
            }
            let b = self.box_at(t);
            let iw = (b.right().min(w + 1.0) - b.left().max(1.0)).max(0.0);
            let ih = (b.bottom().min(h + 1.0) - b.top().max(1.0)).max(0.0);
            if iw * ih < 0.5 * b.area() {
                return Err(Error::invalid(format!(
                    "object is less than half inside the canvas on frame {t}"
                )));
            }
        }
        Ok(())
    }
}

/// A rendered-on-demand synthetic sequence.
#[derive(Debug, Clone)]
pub struct Synthetic {
    spec: SyntheticSpec,
    /// Texture control points on a `(cells + 1)^2` grid, sampled bilinearly.
    texture: Array2<f64>,
}

impl Synthetic {
    pub fn new(spec: SyntheticSpec) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let n = spec.texture_cells + 1;
        let texture = Array2::from_shape_fn((n, n), |_| rng.random::<f64>());
        Ok(Synthetic { spec, texture })
    }

    pub fn spec(&self) -> &SyntheticSpec {
        &self.spec
    }

    pub fn ground_truth(&self) -> GroundTruth {
        GroundTruth::new((1..=self.spec.frames).map(|t| self.spec.box_at(t)).collect())
    }

    /// Texture value at normalized coordinates `(u, v)` in `[0, 1)`.
    fn texture_at(&self, u: f64, v: f64) -> f64 {
        let cells = self.spec.texture_cells as f64;
        let (x, y) = (u * cells, v * cells);
        let (x0, y0) = (x.floor() as usize, y.floor() as usize);
        let (fx, fy) = (x - x0 as f64, y - y0 as f64);
        let t = &self.texture;
        let top = t[[y0, x0]] * (1.0 - fx) + t[[y0, x0 + 1]] * fx;
        let bottom = t[[y0 + 1, x0]] * (1.0 - fx) + t[[y0 + 1, x0 + 1]] * fx;
        top * (1.0 - fy) + bottom * fy
    }

    /// Renders 1-based `frame` as 8-bit intensities.
    pub fn render(&self, frame: usize) -> Array2<u8> {
        let (w, h) = self.spec.canvas;
        let mut rng = ChaCha8Rng::seed_from_u64(self.spec.seed);
        rng.set_stream(frame as u64);
        let mut img = Array2::from_shape_fn((h, w), |_| {
            let noise: f64 = rng.sample(StandardNormal);
            BACKGROUND + self.spec.noise_sigma * noise
        });
        if !self.spec.is_occluded(frame) {
            let b = self.spec.box_at(frame);
            for ((r, c), px) in img.indexed_iter_mut() {
                // Pixel (r, c) covers [c + 1, c + 2) x [r + 1, r + 2) in box coordinates.
                let u = (c as f64 + 1.5 - b.left()) / b.w;
                let v = (r as f64 + 1.5 - b.top()) / b.h;
                if (0.0..1.0).contains(&u) && (0.0..1.0).contains(&v) {
                    *px = self.texture_at(u, v);
                }
            }
        }
        img.mapv(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
    }

    /// Writes `0001.png`, `0002.png`, ... and `groundtruth_rect.txt` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let digits = self.spec.frames.to_string().len().max(4);
        (1..=self.spec.frames).into_par_iter().try_for_each(|t| {
            let pixels = self.render(t);
            let (h, w) = pixels.dim();
            let img = GrayImage::from_raw(w as u32, h as u32, pixels.into_raw_vec_and_offset().0)
                .expect("buffer matches dimensions");
            let path = dir.join(format!("{t:0digits$}.png"));
            img.save(&path).map_err(|source| Error::Image { path, source })
        })?;
        let gt_path = dir.join("groundtruth_rect.txt");
        fs::write(&gt_path, self.ground_truth().to_text()).map_err(|e| Error::io(&gt_path, e))
    }
}

impl FrameSource for Synthetic {
    fn len(&self) -> usize {
        self.spec.frames
    }

    fn frame(&self, pos: usize) -> Result<Frame> {
        if pos >= self.spec.frames {
            return Err(Error::invalid(format!(
                "frame {pos} out of range for {} frames",
                self.spec.frames
            )));
        }
        let pixels = self.render(pos + 1).mapv(|v| f64::from(v) / 255.0);
        Frame::new(pixels, pos + 1)
    }
}
