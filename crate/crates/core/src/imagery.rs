//! Frames, bounding boxes and search-window extraction.
//!
//! Box coordinates follow the OTB convention: the pixel with 1-based index
//! `k` covers the continuous interval `[k, k + 1)` on its axis, so a box
//! stored as `x,y,w,h` has center `(x + w/2, y + h/2)` and its top-left
//! pixel is `(x, y)` in 1-based indices.

use std::fs;
use std::path::{Path, PathBuf};

use image::DynamicImage;
use ndarray::Array2;

use crate::error::{Error, Result};

const LUMA_R: f64 = 0.2989;
const LUMA_G: f64 = 0.5870;
const LUMA_B: f64 = 0.1140;

const IMAGE_EXTENSIONS: &[&str] = &["jpg", "jpeg", "png", "bmp", "pgm", "ppm", "pnm"];

/// A grayscale frame with intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pixels: Array2<f64>,
    index: usize,
}

impl Frame {
    /// Wraps a `height x width` intensity matrix. `index` is the 1-based frame number.
    pub fn new(pixels: Array2<f64>, index: usize) -> Result<Self> {
        if pixels.is_empty() {
            return Err(Error::invalid("frame has no pixels"));
        }
        if let Some(v) = pixels.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::invalid(format!(
                "frame intensity {v} outside [0, 1]"
            )));
        }
        Ok(Frame { pixels, index })
    }

    pub fn pixels(&self) -> &Array2<f64> {
        &self.pixels
    }

    pub fn width(&self) -> usize {
        self.pixels.ncols()
    }

    pub fn height(&self) -> usize {
        self.pixels.nrows()
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn with_index(mut self, index: usize) -> Self {
        self.index = index;
        self
    }

    /// Crops `bbox` with replicate padding; see [`extract_subwindow`].
    pub fn crop(&self, bbox: &BoundingBox) -> Result<Array2<f64>> {
        extract_subwindow(&self.pixels, bbox)
    }
}

/// Axis-aligned box stored by center and size, in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl BoundingBox {
    pub fn new(cx: f64, cy: f64, w: f64, h: f64) -> Result<Self> {
        let b = BoundingBox { cx, cy, w, h };
        b.validate()?;
        Ok(b)
    }

    /// Builds a box from its top-left corner and size.
    pub fn from_corner(x: f64, y: f64, w: f64, h: f64) -> Result<Self> {
        Self::new(x + w / 2.0, y + h / 2.0, w, h)
    }

    /// `(x_left, y_top, w, h)`.
    pub fn to_corner(&self) -> (f64, f64, f64, f64) {
        (self.cx - self.w / 2.0, self.cy - self.h / 2.0, self.w, self.h)
    }

    pub fn center(&self) -> (f64, f64) {
        (self.cx, self.cy)
    }

    pub fn size(&self) -> (f64, f64) {
        (self.w, self.h)
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn left(&self) -> f64 {
        self.cx - self.w / 2.0
    }

    pub fn top(&self) -> f64 {
        self.cy - self.h / 2.0
    }

    pub fn right(&self) -> f64 {
        self.cx + self.w / 2.0
    }

    pub fn bottom(&self) -> f64 {
        self.cy + self.h / 2.0
    }

    /// Same center, both sides multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        BoundingBox {
            w: self.w * factor,
            h: self.h * factor,
            ..*self
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.cx, self.cy, self.w, self.h]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.w <= 0.0 || self.h <= 0.0 {
            return Err(Error::invalid(format!("degenerate bounding box {self:?}")));
        }
        Ok(())
    }
}

fn round_half_up(v: f64) -> f64 {
    (v + 0.5).floor()
}

/// Converts an 8-bit image to a normalized grayscale [`Frame`].
///
/// Color input uses `0.2989 R + 0.5870 G + 0.1140 B`; single-channel input is
/// only rescaled by `1/255`.
pub fn to_grayscale(raw: &DynamicImage, index: usize) -> Result<Frame> {
    let (w, h) = (raw.width() as usize, raw.height() as usize);
    if w == 0 || h == 0 {
        return Err(Error::invalid("empty image"));
    }
    let pixels = match raw {
        DynamicImage::ImageLuma8(gray) => {
            Array2::from_shape_fn((h, w), |(r, c)| {
                f64::from(gray.get_pixel(c as u32, r as u32)[0]) / 255.0
            })
        }
        other => {
            let rgb = other.to_rgb8();
            Array2::from_shape_fn((h, w), |(r, c)| {
                let p = rgb.get_pixel(c as u32, r as u32);
                let luma = LUMA_R * f64::from(p[0]) + LUMA_G * f64::from(p[1])
                    + LUMA_B * f64::from(p[2]);
                (luma / 255.0).clamp(0.0, 1.0)
            })
        }
    };
    Frame::new(pixels, index)
}

/// Crops a `round(h) x round(w)` window centered on the box.
///
/// The left edge `cx - round(w)/2` is rounded to the nearest pixel boundary,
/// and coordinates outside the image are clamped to the nearest valid pixel.
pub fn extract_subwindow(pixels: &Array2<f64>, bbox: &BoundingBox) -> Result<Array2<f64>> {
    let out_w = round_half_up(bbox.w);
    let out_h = round_half_up(bbox.h);
    if !(out_w >= 1.0 && out_h >= 1.0) || !bbox.cx.is_finite() || !bbox.cy.is_finite() {
        return Err(Error::invalid(format!("degenerate crop box {bbox:?}")));
    }
    if pixels.is_empty() {
        return Err(Error::invalid("cannot crop an empty image"));
    }
    let (out_w, out_h) = (out_w as usize, out_h as usize);
    // 1-based left boundary -> 0-based pixel index
    let col0 = round_half_up(bbox.cx - out_w as f64 / 2.0) as i64 - 1;
    let row0 = round_half_up(bbox.cy - out_h as f64 / 2.0) as i64 - 1;
    let max_r = pixels.nrows() as i64 - 1;
    let max_c = pixels.ncols() as i64 - 1;
    let cols: Vec<usize> = (0..out_w as i64)
        .map(|j| (col0 + j).clamp(0, max_c) as usize)
        .collect();
    Ok(Array2::from_shape_fn((out_h, out_w), |(i, j)| {
        let r = (row0 + i as i64).clamp(0, max_r) as usize;
        pixels[[r, cols[j]]]
    }))
}

/// Bilinear resampling with half-pixel alignment and edge clamping.
pub fn resize_bilinear(patch: &Array2<f64>, out_w: usize, out_h: usize) -> Result<Array2<f64>> {
    if out_w == 0 || out_h == 0 {
        return Err(Error::invalid(format!(
            "resize target {out_w}x{out_h} must be at least 1x1"
        )));
    }
    if patch.is_empty() {
        return Err(Error::invalid("cannot resize an empty patch"));
    }
    let (in_h, in_w) = patch.dim();
    if (in_h, in_w) == (out_h, out_w) {
        return Ok(patch.clone());
    }
    let taps = |n_in: usize, n_out: usize| -> Vec<(usize, usize, f64)> {
        let ratio = n_in as f64 / n_out as f64;
        (0..n_out)
            .map(|o| {
                let src = ((o as f64 + 0.5) * ratio - 0.5).clamp(0.0, (n_in - 1) as f64);
                let lo = src.floor() as usize;
                let hi = (lo + 1).min(n_in - 1);
                (lo, hi, src - lo as f64)
            })
            .collect()
    };
    let xs = taps(in_w, out_w);
    let ys = taps(in_h, out_h);
    Ok(Array2::from_shape_fn((out_h, out_w), |(i, j)| {
        let (y0, y1, fy) = ys[i];
        let (x0, x1, fx) = xs[j];
        let top = patch[[y0, x0]] * (1.0 - fx) + patch[[y0, x1]] * fx;
        let bottom = patch[[y1, x0]] * (1.0 - fx) + patch[[y1, x1]] * fx;
        top * (1.0 - fy) + bottom * fy
    }))
}

/// Random access to the frames of a sequence. Positions are 0-based; the
/// returned frame carries the 1-based index `pos + 1`.
pub trait FrameSource: Sync {
    fn len(&self) -> usize;

    fn frame(&self, pos: usize) -> Result<Frame>;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl FrameSource for [Frame] {
    fn len(&self) -> usize {
        <[Frame]>::len(self)
    }

    fn frame(&self, pos: usize) -> Result<Frame> {
        self.get(pos)
            .cloned()
            .map(|f| f.with_index(pos + 1))
            .ok_or_else(|| Error::invalid(format!("frame {} out of range", pos + 1)))
    }
}

impl FrameSource for Vec<Frame> {
    fn len(&self) -> usize {
        self.as_slice().len()
    }

    fn frame(&self, pos: usize) -> Result<Frame> {
        self.as_slice().frame(pos)
    }
}

/// A view of `inner` starting at frame position `start`.
pub struct Suffix<'a, S: ?Sized> {
    inner: &'a S,
    start: usize,
}

impl<'a, S: FrameSource + ?Sized> Suffix<'a, S> {
    pub fn new(inner: &'a S, start: usize) -> Self {
        Suffix { inner, start }
    }
}

impl<S: FrameSource + ?Sized> FrameSource for Suffix<'_, S> {
    fn len(&self) -> usize {
        self.inner.len().saturating_sub(self.start)
    }

    fn frame(&self, pos: usize) -> Result<Frame> {
        Ok(self.inner.frame(self.start + pos)?.with_index(pos + 1))
    }
}

/// A directory of numbered image files, decoded lazily.
#[derive(Debug, Clone)]
pub struct ImageSequence {
    paths: Vec<PathBuf>,
}

impl ImageSequence {
    /// Lists the image files in `dir` (or in `dir/img`, the OTB layout) in
    /// lexicographic order.
    pub fn open(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let mut paths = list_images(dir)?;
        if paths.is_empty() {
            let img = dir.join("img");
            if img.is_dir() {
                paths = list_images(&img)?;
            }
        }
        if paths.is_empty() {
            return Err(Error::invalid(format!(
                "no image files found in {}",
                dir.display()
            )));
        }
        Ok(ImageSequence { paths })
    }

    pub fn paths(&self) -> &[PathBuf] {
        &self.paths
    }
}

fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let is_image = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()));
        if is_image && path.is_file() {
            paths.push(path);
        }
    }
    paths.sort();
    Ok(paths)
}

impl FrameSource for ImageSequence {
    fn len(&self) -> usize {
        self.paths.len()
    }

    fn frame(&self, pos: usize) -> Result<Frame> {
        let path = self
            .paths
            .get(pos)
            .ok_or_else(|| Error::invalid(format!("frame {} out of range", pos + 1)))?;
        let img = image::open(path).map_err(|source| Error::Image {
            path: path.clone(),
            source,
        })?;
        to_grayscale(&img, pos + 1)
    }
}
