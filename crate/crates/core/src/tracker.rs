//! The per-frame tracking loop.
//!
//! Each frame: pick a scale step from the peak history, crop and score the
//! search window, then either accept the filter's peak (CFT) or re-detect
//! with particles (PFT) when the peak is below the threshold, and finally
//! update the filter at the new position.

use std::fmt::Write as _;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::features::{windowed_hog, FeaturePatch};
use crate::imagery::{resize_bilinear, BoundingBox, Frame, FrameSource};
use crate::kcf::{self, FilterModel, KcfParams, ResponseMap};
use crate::redetect::{self, Branch, RedetectParams};
use crate::scale::{self, ScaleState};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackerConfig {
    pub kcf: KcfParams,
    pub redetect: RedetectParams,
    pub phi: f64,
    pub psi: f64,
    /// Search window side relative to the target side.
    pub window_factor: f64,
    /// Disable to get the plain KCF baseline (no PFT branch).
    pub redetect_enabled: bool,
    /// Disable to freeze `s_t = 1`.
    pub scale_enabled: bool,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            kcf: KcfParams::default(),
            redetect: RedetectParams::default(),
            phi: scale::DEFAULT_PHI,
            psi: scale::DEFAULT_PSI,
            window_factor: 2.0,
            redetect_enabled: true,
            scale_enabled: true,
        }
    }
}

impl TrackerConfig {
    /// Both extensions disabled.
    pub fn kcf_baseline() -> Self {
        TrackerConfig {
            redetect_enabled: false,
            scale_enabled: false,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.kcf.validate()?;
        self.redetect.validate()?;
        if !(self.phi > self.psi) {
            return Err(Error::invalid(format!(
                "scale thresholds need phi > psi, got phi={} psi={}",
                self.phi, self.psi
            )));
        }
        if !(self.window_factor > 0.0 && self.window_factor.is_finite()) {
            return Err(Error::invalid("window factor must be positive"));
        }
        Ok(())
    }
}

/// Per-frame record of what the tracker did.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameDiagnostics {
    /// 1-based frame number.
    pub frame: usize,
    pub bbox: BoundingBox,
    pub branch: Branch,
    /// Peak response that resolved the frame (the selected particle's on PFT frames).
    pub max_response: f64,
    /// Scale direction, when one was computed.
    pub direction: Option<f64>,
    /// Scale factor actually applied to the size.
    pub scale_factor: f64,
    pub particles_used: usize,
}

impl FrameDiagnostics {
    pub const CSV_HEADER: &'static str = "frame,x,y,w,h,branch,maxR,d_t,s_t,particles_used";

    /// One CSV row; `x,y` is the top-left corner.
    pub fn csv_row(&self) -> String {
        let (x, y, w, h) = self.bbox.to_corner();
        let mut row = format!(
            "{},{x:.3},{y:.3},{w:.3},{h:.3},{},{:.6},",
            self.frame, self.branch, self.max_response
        );
        if let Some(d) = self.direction {
            let _ = write!(row, "{d:.6}");
        }
        let _ = write!(row, ",{},{}", self.scale_factor, self.particles_used);
        row
    }
}

/// Feature-grid and pixel dimensions of the fixed template.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TemplateShape {
    pub rows: usize,
    pub cols: usize,
    pub cell_size: usize,
}

impl TemplateShape {
    pub fn pixel_width(&self) -> usize {
        self.cols * self.cell_size
    }

    pub fn pixel_height(&self) -> usize {
        self.rows * self.cell_size
    }
}

/// Mutable tracking state for one sequence.
#[derive(Debug, Clone)]
pub struct Tracker {
    config: TrackerConfig,
    model: FilterModel,
    position: (f64, f64),
    scale: ScaleState,
    frame_index: usize,
    last_branch: Branch,
    template: TemplateShape,
}

/// Search-window features plus the pixel size of one feature cell in the frame.
struct Window {
    features: FeaturePatch,
    px_per_cell: (f64, f64),
}

impl Tracker {
    /// Trains the initial filter on the window around `initial_box`.
    pub fn init(
        frame: &Frame,
        initial_box: BoundingBox,
        config: TrackerConfig,
    ) -> Result<(Self, FrameDiagnostics)> {
        config.validate()?;
        initial_box.validate()?;
        let cell = config.kcf.cell_size;
        let rows = (config.window_factor * initial_box.h / cell as f64).floor() as usize;
        let cols = (config.window_factor * initial_box.w / cell as f64).floor() as usize;
        if rows < 2 || cols < 2 {
            return Err(Error::invalid(format!(
                "box {}x{} too small for a {cell}-pixel cell grid",
                initial_box.w, initial_box.h
            )));
        }
        let template = TemplateShape {
            rows,
            cols,
            cell_size: cell,
        };
        let labels = kcf::make_labels(
            rows,
            cols,
            (initial_box.h / cell as f64, initial_box.w / cell as f64),
            config.kcf.output_sigma_factor,
        )?;
        let position = initial_box.center();
        let size = initial_box.size();
        let window = window_features(frame, position, size, &config, &template)?;
        let model = kcf::train(&window.features, &labels, &config.kcf)?;
        let own = kcf::detect(&model, &window.features)?.max_value;
        let mut scale = ScaleState::new(size, config.phi, config.psi)?;
        scale.push_response(own);
        let tracker = Tracker {
            config,
            model,
            position,
            scale,
            frame_index: 1,
            last_branch: Branch::Init,
            template,
        };
        let diag = FrameDiagnostics {
            frame: 1,
            bbox: initial_box,
            branch: Branch::Init,
            max_response: own,
            direction: None,
            scale_factor: 1.0,
            particles_used: 0,
        };
        Ok((tracker, diag))
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.config
    }

    pub fn model(&self) -> &FilterModel {
        &self.model
    }

    pub fn template_shape(&self) -> TemplateShape {
        self.template
    }

    pub fn frame_index(&self) -> usize {
        self.frame_index
    }

    pub fn last_branch(&self) -> Branch {
        self.last_branch
    }

    pub fn scale_state(&self) -> &ScaleState {
        &self.scale
    }

    pub fn current_box(&self) -> BoundingBox {
        BoundingBox {
            cx: self.position.0,
            cy: self.position.1,
            w: self.scale.size.0,
            h: self.scale.size.1,
        }
    }

    /// Scores the search window at the current position and size without updating anything.
    pub fn probe(&self, frame: &Frame) -> Result<ResponseMap> {
        let window = window_features(
            frame,
            self.position,
            self.scale.size,
            &self.config,
            &self.template,
        )?;
        kcf::detect(&self.model, &window.features)
    }

    /// Tracks the next frame.
    pub fn step(&mut self, frame: &Frame) -> Result<FrameDiagnostics> {
        let cell = self.config.kcf.cell_size;
        if frame.width() < cell || frame.height() < cell {
            return Err(Error::invalid(format!(
                "frame {}x{} smaller than one {cell}-pixel cell",
                frame.width(),
                frame.height()
            )));
        }
        let t = self.frame_index + 1;
        let bounds = (frame.width() as f64, frame.height() as f64);

        let (direction, mut s_t) = self.pick_scale(t);
        if !self.scale.accepts(s_t, bounds) {
            s_t = 1.0;
        }
        let prev_size = self.scale.size;
        let trial_size = (prev_size.0 * s_t, prev_size.1 * s_t);
        let window = window_features(frame, self.position, trial_size, &self.config, &self.template)?;
        let response = kcf::detect(&self.model, &window.features)?;

        let branch = if t <= 2 || !self.config.redetect_enabled {
            Branch::Cft
        } else {
            redetect::gate(response.max_value, self.config.redetect.threshold)
        };

        let (position, max_response, applied, particles_used) = match branch {
            Branch::Pft => {
                let m = self.config.redetect.particle_count;
                match self.redetect(frame, t) {
                    Ok(sel) => (sel.center, sel.response.max_value, 1.0, m),
                    Err(Error::TrackingFailure(n)) => {
                        log::warn!("frame {t}: all {n} particles failed, holding position");
                        self.frame_index = t;
                        self.last_branch = Branch::Pft;
                        return Ok(FrameDiagnostics {
                            frame: t,
                            bbox: self.current_box(),
                            branch,
                            max_response: response.max_value,
                            direction,
                            scale_factor: 1.0,
                            particles_used: m,
                        });
                    }
                    Err(e) => return Err(e),
                }
            }
            _ => {
                let (dy, dx) = response.displacement();
                let pos = (
                    self.position.0 + dx as f64 * window.px_per_cell.0,
                    self.position.1 + dy as f64 * window.px_per_cell.1,
                );
                self.scale.apply(s_t, bounds);
                (pos, response.max_value, s_t, 0)
            }
        };

        self.position = (position.0.clamp(1.0, bounds.0), position.1.clamp(1.0, bounds.1));
        let refreshed = window_features(
            frame,
            self.position,
            self.scale.size,
            &self.config,
            &self.template,
        )?;
        self.model = kcf::update(&self.model, &refreshed.features)?;
        self.scale.push_response(max_response);
        self.frame_index = t;
        self.last_branch = branch;

        Ok(FrameDiagnostics {
            frame: t,
            bbox: self.current_box(),
            branch,
            max_response,
            direction,
            scale_factor: applied,
            particles_used,
        })
    }

    /// Scale direction and factor for frame `t`, from the last three recorded peaks.
    fn pick_scale(&self, t: usize) -> (Option<f64>, f64) {
        if !self.config.scale_enabled || t < 3 {
            return (None, 1.0);
        }
        match self.scale.direction() {
            None => (None, 1.0),
            Some(Ok(d)) => (Some(d), scale::scale_factor(d, self.scale.phi, self.scale.psi)),
            Some(Err(e)) => {
                log::warn!("frame {t}: {e}; holding scale");
                (Some(0.0), 1.0)
            }
        }
    }

    fn redetect(&self, frame: &Frame, t: usize) -> Result<redetect::Selection> {
        let size = self.scale.size;
        let params = &self.config.redetect;
        let particles = redetect::sample_particles(
            self.position,
            params.sigma_for(size),
            (frame.width(), frame.height()),
            params,
            t as u64,
        )?;
        let scored = redetect::score_particles(particles, &self.model, |center| {
            window_features(frame, center, size, &self.config, &self.template).map(|w| w.features)
        });
        let px_per_cell = window_geometry(size, &self.config, &self.template).1;
        redetect::select_best(&scored, px_per_cell)
    }
}

/// Crop box of the search window and the frame pixels spanned by one feature cell.
fn window_geometry(
    size: (f64, f64),
    config: &TrackerConfig,
    template: &TemplateShape,
) -> ((f64, f64), (f64, f64)) {
    let crop_w = (config.window_factor * size.0 + 0.5).floor().max(1.0);
    let crop_h = (config.window_factor * size.1 + 0.5).floor().max(1.0);
    let cell = template.cell_size as f64;
    (
        (crop_w, crop_h),
        (
            cell * crop_w / template.pixel_width() as f64,
            cell * crop_h / template.pixel_height() as f64,
        ),
    )
}

fn window_features(
    frame: &Frame,
    center: (f64, f64),
    size: (f64, f64),
    config: &TrackerConfig,
    template: &TemplateShape,
) -> Result<Window> {
    let ((crop_w, crop_h), px_per_cell) = window_geometry(size, config, template);
    let bbox = BoundingBox {
        cx: center.0,
        cy: center.1,
        w: crop_w,
        h: crop_h,
    };
    let patch: Array2<f64> = frame.crop(&bbox)?;
    let resized = resize_bilinear(&patch, template.pixel_width(), template.pixel_height())?;
    let features = windowed_hog(&resized, template.cell_size)?;
    Ok(Window {
        features,
        px_per_cell,
    })
}

/// Boxes and diagnostics for every frame of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub boxes: Vec<BoundingBox>,
    pub diagnostics: Vec<FrameDiagnostics>,
}

impl Trajectory {
    pub fn diagnostics_csv(&self) -> String {
        let mut out = String::from(FrameDiagnostics::CSV_HEADER);
        out.push('\n');
        for d in &self.diagnostics {
            out.push_str(&d.csv_row());
            out.push('\n');
        }
        out
    }
}

/// Tracks every frame of `source`, starting from `initial_box` on the first.
pub fn run<S: FrameSource + ?Sized>(
    source: &S,
    initial_box: BoundingBox,
    config: TrackerConfig,
) -> Result<Trajectory> {
    if source.is_empty() {
        return Err(Error::invalid("sequence has no frames"));
    }
    let first = source.frame(0).map_err(|e| e.at_frame(1))?;
    let (mut tracker, diag) = Tracker::init(&first, initial_box, config).map_err(|e| e.at_frame(1))?;
    let mut boxes = Vec::with_capacity(source.len());
    let mut diagnostics = Vec::with_capacity(source.len());
    boxes.push(initial_box);
    diagnostics.push(diag);
    for pos in 1..source.len() {
        let frame = source.frame(pos).map_err(|e| e.at_frame(pos + 1))?;
        let diag = tracker.step(&frame).map_err(|e| e.at_frame(pos + 1))?;
        boxes.push(diag.bbox);
        diagnostics.push(diag);
    }
    Ok(Trajectory { boxes, diagnostics })
}
