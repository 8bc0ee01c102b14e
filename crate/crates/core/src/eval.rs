//! Tracking metrics and the OPE/TRE/SRE evaluation protocols.
//!
//! Boxes on disk use the OTB convention: one `x,y,w,h` line per frame, top-left
//! corner, 1-based pixel coordinates.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::imagery::{BoundingBox, FrameSource, Suffix};
use crate::tracker::{self, TrackerConfig, Trajectory};

/// Number of precision-curve samples (thresholds 0..=50 px).
pub const PRECISION_SAMPLES: usize = 51;
/// Number of success-curve samples (thresholds 0, 0.01, ..., 1).
pub const SUCCESS_SAMPLES: usize = 101;
/// Pixel threshold used to rank by precision.
pub const PRECISION_RANK_THRESHOLD: usize = 20;
pub const DEFAULT_TRE_SEGMENTS: usize = 20;

/// Ground-truth boxes of one sequence, one per frame.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroundTruth {
    pub boxes: Vec<BoundingBox>,
    pub attributes: BTreeSet<String>,
}

impl GroundTruth {
    pub fn new(boxes: Vec<BoundingBox>) -> Self {
        GroundTruth {
            boxes,
            attributes: BTreeSet::new(),
        }
    }

    /// Parses OTB-format text; `origin` only labels error messages.
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut boxes = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let parse_err = |message: String| Error::Parse {
                path: origin.to_path_buf(),
                line: n + 1,
                message,
            };
            let fields: Vec<&str> = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|f| !f.is_empty())
                .collect();
            if fields.len() != 4 {
                return Err(parse_err(format!("expected 4 fields, found {}", fields.len())));
            }
            let mut v = [0.0; 4];
            for (slot, field) in v.iter_mut().zip(&fields) {
                *slot = field
                    .parse()
                    .map_err(|_| parse_err(format!("not a number: {field:?}")))?;
            }
            let bbox = BoundingBox::from_corner(v[0], v[1], v[2], v[3])
                .map_err(|e| parse_err(e.to_string()))?;
            boxes.push(bbox);
        }
        if boxes.is_empty() {
            return Err(Error::Parse {
                path: origin.to_path_buf(),
                line: 0,
                message: "no boxes".into(),
            });
        }
        Ok(GroundTruth::new(boxes))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    /// OTB-format text, one comma-separated line per box.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for b in &self.boxes {
            let (x, y, w, h) = b.to_corner();
            let _ = writeln!(out, "{x},{y},{w},{h}");
        }
        out
    }

    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }
}

/// Pascal VOC overlap: intersection area over union area.
pub fn vor(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let iw = (a.right().min(b.right()) - a.left().max(b.left())).max(0.0);
    let ih = (a.bottom().min(b.bottom()) - a.top().max(b.top())).max(0.0);
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    if union > 0.0 {
        (inter / union).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

/// Center location error in pixels.
pub fn cle(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let (ax, ay) = a.center();
    let (bx, by) = b.center();
    (ax - bx).hypot(ay - by)
}

pub fn precision_thresholds() -> impl Iterator<Item = f64> {
    (0..PRECISION_SAMPLES).map(|i| i as f64)
}

pub fn success_thresholds() -> impl Iterator<Item = f64> {
    (0..SUCCESS_SAMPLES).map(|i| i as f64 / (SUCCESS_SAMPLES - 1) as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub cle: Vec<f64>,
    pub vor: Vec<f64>,
    pub precision_curve: Vec<f64>,
    pub success_curve: Vec<f64>,
    pub precision_at_20: f64,
    pub auc: f64,
}

impl EvalResult {
    /// Builds the curves from per-frame errors.
    pub fn from_errors(cle: Vec<f64>, vor: Vec<f64>) -> Result<Self> {
        if cle.is_empty() || cle.len() != vor.len() {
            return Err(Error::invalid(format!(
                "need equal, non-zero numbers of CLE and VOR samples, got {} and {}",
                cle.len(),
                vor.len()
            )));
        }
        let n = cle.len() as f64;
        let precision_curve: Vec<f64> = precision_thresholds()
            .map(|t| cle.iter().filter(|&&e| e <= t).count() as f64 / n)
            .collect();
        let success_curve: Vec<f64> = success_thresholds()
            .map(|t| vor.iter().filter(|&&o| o > t).count() as f64 / n)
            .collect();
        let auc = success_curve.iter().sum::<f64>() / success_curve.len() as f64;
        Ok(EvalResult {
            precision_at_20: precision_curve[PRECISION_RANK_THRESHOLD],
            cle,
            vor,
            precision_curve,
            success_curve,
            auc,
        })
    }

    /// Pools the frames of several runs into one result.
    pub fn pooled(results: &[EvalResult]) -> Result<Self> {
        let cle = results.iter().flat_map(|r| r.cle.iter().copied()).collect();
        let vor = results.iter().flat_map(|r| r.vor.iter().copied()).collect();
        Self::from_errors(cle, vor)
    }

    pub fn frames(&self) -> usize {
        self.cle.len()
    }

    pub fn mean_cle(&self) -> f64 {
        self.cle.iter().sum::<f64>() / self.cle.len() as f64
    }

    pub fn mean_vor(&self) -> f64 {
        self.vor.iter().sum::<f64>() / self.vor.len() as f64
    }

    /// Whether precision is non-decreasing and success non-increasing.
    pub fn curves_monotone(&self) -> bool {
        self.precision_curve.windows(2).all(|w| w[0] <= w[1])
            && self.success_curve.windows(2).all(|w| w[0] >= w[1])
    }

    pub fn summary(&self) -> Summary {
        Summary {
            frames: self.frames(),
            precision_at_20: self.precision_at_20,
            auc: self.auc,
            mean_vor: self.mean_vor(),
            mean_cle: self.mean_cle(),
        }
    }
}

/// Scalar scores of one run. Timing is deliberately absent so result files
/// stay byte-identical across runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub frames: usize,
    pub precision_at_20: f64,
    pub auc: f64,
    pub mean_vor: f64,
    pub mean_cle: f64,
}

/// Scores tracked boxes against ground truth.
pub fn curves(results: &[BoundingBox], gt: &[BoundingBox]) -> Result<EvalResult> {
    if results.len() != gt.len() {
        return Err(Error::invalid(format!(
            "{} result boxes for {} ground-truth boxes",
            results.len(),
            gt.len()
        )));
    }
    let cle = results.iter().zip(gt).map(|(r, g)| cle(r, g)).collect();
    let vor = results.iter().zip(gt).map(|(r, g)| vor(r, g)).collect();
    EvalResult::from_errors(cle, vor)
}

/// One tracker run under a protocol.
#[derive(Debug, Clone)]
pub struct EvalRun {
    /// Short run identifier, used for file names.
    pub label: String,
    /// 1-based frame the run starts on.
    pub start_frame: usize,
    pub init_box: BoundingBox,
    pub trajectory: Trajectory,
    pub result: EvalResult,
    pub elapsed: Duration,
}

impl EvalRun {
    pub fn fps(&self) -> f64 {
        self.trajectory.boxes.len() as f64 / self.elapsed.as_secs_f64().max(1e-9)
    }
}

fn check_lengths<S: FrameSource + ?Sized>(source: &S, gt: &GroundTruth) -> Result<()> {
    if source.len() != gt.len() {
        return Err(Error::invalid(format!(
            "sequence has {} frames but ground truth has {} boxes",
            source.len(),
            gt.len()
        )));
    }
    if gt.is_empty() {
        return Err(Error::invalid("empty sequence"));
    }
    Ok(())
}

fn timed_run<S: FrameSource + ?Sized>(
    label: String,
    start_frame: usize,
    source: &S,
    init_box: BoundingBox,
    gt: &[BoundingBox],
    config: TrackerConfig,
) -> Result<EvalRun> {
    let started = Instant::now();
    let trajectory = tracker::run(source, init_box, config)?;
    let elapsed = started.elapsed();
    let result = curves(&trajectory.boxes, gt)?;
    Ok(EvalRun {
        label,
        start_frame,
        init_box,
        trajectory,
        result,
        elapsed,
    })
}

/// One pass from the first ground-truth box.
pub fn run_ope<S: FrameSource + ?Sized>(
    config: TrackerConfig,
    source: &S,
    gt: &GroundTruth,
) -> Result<EvalRun> {
    check_lengths(source, gt)?;
    timed_run("ope".into(), 1, source, gt.boxes[0], &gt.boxes, config)
}

/// Evenly spaced 1-based start frames, `1 + floor(k * len / segments)`.
/// More segments than frames are reduced to one per frame.
pub fn tre_start_frames(len: usize, segments: usize) -> Result<Vec<usize>> {
    if len == 0 || segments == 0 {
        return Err(Error::invalid("TRE needs at least one frame and one segment"));
    }
    let segments = if segments > len {
        log::warn!("sequence has {len} frames; reducing TRE segments from {segments} to {len}");
        len
    } else {
        segments
    };
    Ok((0..segments).map(|k| 1 + k * len / segments).collect())
}

/// Per-run TRE results and their pooled average.
#[derive(Debug, Clone)]
pub struct TreReport {
    pub runs: Vec<EvalRun>,
    pub average: EvalResult,
}

/// Restarts at each TRE start frame and tracks to the end of the sequence.
pub fn run_tre<S: FrameSource + ?Sized>(
    config: TrackerConfig,
    source: &S,
    gt: &GroundTruth,
    segments: usize,
) -> Result<TreReport> {
    check_lengths(source, gt)?;
    let starts = tre_start_frames(source.len(), segments)?;
    let runs = starts
        .par_iter()
        .enumerate()
        .map(|(k, &start)| {
            let suffix = Suffix::new(source, start - 1);
            let truth = &gt.boxes[start - 1..];
            timed_run(
                format!("tre_{:02}", k + 1),
                start,
                &suffix,
                truth[0],
                truth,
                config,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let average = EvalResult::pooled(&runs.iter().map(|r| r.result.clone()).collect::<Vec<_>>())?;
    Ok(TreReport { runs, average })
}

/// Magnitudes of the SRE perturbation set.
#[derive(Debug, Clone, PartialEq)]
pub struct SrePerturbations {
    /// Center shift as a fraction of the box width (x) and height (y).
    pub shift_fraction: f64,
    /// Size ratios applied about the center.
    pub scales: [f64; 4],
}

impl Default for SrePerturbations {
    fn default() -> Self {
        SrePerturbations {
            shift_fraction: 0.1,
            scales: [0.8, 0.9, 1.1, 1.2],
        }
    }
}

/// Shift directions in SRE order: four axial, then four diagonal.
const SRE_SHIFTS: [(&str, f64, f64); 8] = [
    ("left", -1.0, 0.0),
    ("right", 1.0, 0.0),
    ("up", 0.0, -1.0),
    ("down", 0.0, 1.0),
    ("up_left", -1.0, -1.0),
    ("up_right", 1.0, -1.0),
    ("down_left", -1.0, 1.0),
    ("down_right", 1.0, 1.0),
];

/// The twelve perturbed initial boxes, labelled. `frame_size` is `(width, height)`:
/// boxes reaching past the image are clipped to it.
pub fn sre_perturbations(
    bbox: &BoundingBox,
    frame_size: (usize, usize),
    set: &SrePerturbations,
) -> Result<Vec<(String, BoundingBox)>> {
    let mut out = Vec::with_capacity(12);
    for (name, sx, sy) in SRE_SHIFTS {
        let b = BoundingBox {
            cx: bbox.cx + sx * set.shift_fraction * bbox.w,
            cy: bbox.cy + sy * set.shift_fraction * bbox.h,
            ..*bbox
        };
        out.push((format!("shift_{name}"), b));
    }
    for s in set.scales {
        out.push((format!("scale_{s}"), BoundingBox {
            w: bbox.w * s,
            h: bbox.h * s,
            ..*bbox
        }));
    }
    out.into_iter()
        .map(|(label, b)| Ok((label.clone(), clip_to_frame(&label, b, frame_size)?)))
        .collect()
}

fn clip_to_frame(label: &str, b: BoundingBox, (width, height): (usize, usize)) -> Result<BoundingBox> {
    // Pixel k covers [k, k + 1), so the image spans [1, width + 1).
    let (min_x, max_x) = (1.0, width as f64 + 1.0);
    let (min_y, max_y) = (1.0, height as f64 + 1.0);
    if b.left() >= min_x && b.right() <= max_x && b.top() >= min_y && b.bottom() <= max_y {
        return Ok(b);
    }
    let left = b.left().max(min_x);
    let right = b.right().min(max_x);
    let top = b.top().max(min_y);
    let bottom = b.bottom().min(max_y);
    log::warn!("SRE perturbation {label} leaves the frame; clipping");
    BoundingBox::from_corner(left, top, right - left, bottom - top)
        .map_err(|_| Error::invalid(format!("SRE perturbation {label} lies outside the frame")))
}

/// Twelve runs from perturbed first boxes, each scored against the unperturbed ground truth.
pub fn run_sre<S: FrameSource + ?Sized>(
    config: TrackerConfig,
    source: &S,
    gt: &GroundTruth,
    set: &SrePerturbations,
) -> Result<Vec<EvalRun>> {
    check_lengths(source, gt)?;
    let first = source.frame(0)?;
    let inits = sre_perturbations(&gt.boxes[0], (first.width(), first.height()), set)?;
    inits
        .into_par_iter()
        .enumerate()
        .map(|(k, (label, init))| {
            timed_run(format!("sre_{:02}_{label}", k + 1), 1, source, init, &gt.boxes, config)
        })
        .collect()
}

/// `frame,x,y,w,h` rows, corner form, with 1-based frame numbers starting at `start_frame`.
pub fn boxes_csv(boxes: &[BoundingBox], start_frame: usize) -> String {
    let mut out = String::from("frame,x,y,w,h\n");
    for (i, b) in boxes.iter().enumerate() {
        let (x, y, w, h) = b.to_corner();
        let _ = writeln!(out, "{},{x:.3},{y:.3},{w:.3},{h:.3}", start_frame + i);
    }
    out
}

/// Two-column `threshold,<name>` CSV.
pub fn curve_csv(name: &str, thresholds: impl Iterator<Item = f64>, values: &[f64]) -> String {
    let mut out = format!("threshold,{name}\n");
    for (t, v) in thresholds.zip(values) {
        let _ = writeln!(out, "{t},{v}");
    }
    out
}

pub fn summary_json(result: &EvalResult) -> String {
    let mut s = serde_json::to_string_pretty(&result.summary()).expect("summary serializes");
    s.push('\n');
    s
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Writes `<stem>_precision.csv`, `<stem>_success.csv` and `<stem>_summary.json`.
pub fn write_result_files(dir: &Path, stem: &str, result: &EvalResult) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_file(
        &dir.join(format!("{stem}_precision.csv")),
        &curve_csv("precision", precision_thresholds(), &result.precision_curve),
    )?;
    write_file(
        &dir.join(format!("{stem}_success.csv")),
        &curve_csv("success", success_thresholds(), &result.success_curve),
    )?;
    write_file(&dir.join(format!("{stem}_summary.json")), &summary_json(result))
}

/// Writes a run's result files plus `<label>_boxes.csv` and `<label>_diagnostics.csv`.
pub fn write_run_files(dir: &Path, run: &EvalRun) -> Result<()> {
    write_result_files(dir, &run.label, &run.result)?;
    write_file(
        &dir.join(format!("{}_boxes.csv", run.label)),
        &boxes_csv(&run.trajectory.boxes, run.start_frame),
    )?;
    write_file(
        &dir.join(format!("{}_diagnostics.csv", run.label)),
        &run.trajectory.diagnostics_csv(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn corner(x: f64, y: f64, w: f64, h: f64) -> BoundingBox {
        BoundingBox::from_corner(x, y, w, h).unwrap()
    }

    #[test]
    fn vor_examples() {
        let a = corner(0.0, 0.0, 10.0, 10.0);
        assert_eq!(vor(&a, &a), 1.0);
        assert_eq!(vor(&a, &corner(20.0, 0.0, 10.0, 10.0)), 0.0);
        assert_eq!(vor(&a, &corner(10.0, 0.0, 10.0, 10.0)), 0.0);
        assert!((vor(&a, &corner(5.0, 0.0, 10.0, 10.0)) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn cle_examples() {
        let a = BoundingBox::new(0.0, 0.0, 4.0, 4.0).unwrap();
        let b = BoundingBox::new(3.0, 4.0, 6.0, 2.0).unwrap();
        assert_eq!(cle(&a, &a), 0.0);
        assert_eq!(cle(&a, &b), 5.0);
        assert_eq!(cle(&b, &a), 5.0);
    }

    /// Counts hits per threshold with an explicit loop over frames.
    fn oracle_curves(cle: &[f64], vor: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = cle.len() as f64;
        let mut p = Vec::new();
        for t in 0..=50 {
            let mut hits = 0;
            for &e in cle {
                if e <= t as f64 {
                    hits += 1;
                }
            }
            p.push(hits as f64 / n);
        }
        let mut s = Vec::new();
        for i in 0..=100 {
            let mut hits = 0;
            for &o in vor {
                if o > i as f64 / 100.0 {
                    hits += 1;
                }
            }
            s.push(hits as f64 / n);
        }
        (p, s)
    }

    fn five_frame_fixture() -> (Vec<BoundingBox>, Vec<BoundingBox>) {
        let gt = vec![
            corner(10.0, 10.0, 20.0, 20.0),
            corner(12.0, 10.0, 20.0, 20.0),
            corner(14.0, 12.0, 20.0, 20.0),
            corner(16.0, 14.0, 20.0, 20.0),
            corner(18.0, 16.0, 20.0, 20.0),
        ];
        let res = vec![
            corner(10.0, 10.0, 20.0, 20.0),
            corner(15.0, 14.0, 20.0, 20.0),
            corner(14.0, 12.0, 10.0, 10.0),
            corner(40.0, 40.0, 20.0, 20.0),
            corner(18.0, 36.0, 20.0, 20.0),
        ];
        (res, gt)
    }

    #[test]
    fn curves_match_threshold_scan() {
        let (res, gt) = five_frame_fixture();
        let r = curves(&res, &gt).unwrap();
        assert_eq!(r.cle[1], 5.0);
        assert_eq!(r.vor[2], 0.25);
        assert_eq!(r.vor[4], 0.0);
        let (p, s) = oracle_curves(&r.cle, &r.vor);
        assert_eq!(r.precision_curve, p);
        assert_eq!(r.success_curve, s);
        assert_eq!(r.precision_at_20, p[20]);
        assert_eq!(r.auc, s.iter().sum::<f64>() / 101.0);
        assert!(r.curves_monotone());
    }

    #[test]
    fn perfect_and_missing_tracks() {
        let (_, gt) = five_frame_fixture();
        let r = curves(&gt, &gt).unwrap();
        assert!(r.precision_curve.iter().all(|&v| v == 1.0));
        assert!(r.success_curve[..100].iter().all(|&v| v == 1.0));
        assert_eq!(r.success_curve[100], 0.0);
        assert!(r.auc > 0.99);

        let far: Vec<_> = gt.iter().map(|b| BoundingBox { cx: b.cx + 500.0, ..*b }).collect();
        let r = curves(&far, &gt).unwrap();
        assert!(r.success_curve.iter().all(|&v| v == 0.0));
        assert_eq!(r.auc, 0.0);
    }

    #[test]
    fn curves_reject_length_mismatch() {
        let (res, gt) = five_frame_fixture();
        assert!(curves(&res[..4], &gt).is_err());
        assert!(curves(&[], &[]).is_err());
    }

    #[test]
    fn tre_schedule() {
        let starts = tre_start_frames(100, 20).unwrap();
        assert_eq!(starts, (0..20).map(|k| 1 + 5 * k).collect::<Vec<_>>());
        assert_eq!(tre_start_frames(7, 1).unwrap(), vec![1]);
        assert_eq!(tre_start_frames(5, 20).unwrap(), vec![1, 2, 3, 4, 5]);
        assert_eq!(tre_start_frames(10, 3).unwrap(), vec![1, 4, 7]);
        assert!(tre_start_frames(10, 0).is_err());
    }

    #[test]
    fn sre_examples() {
        let b = BoundingBox::new(50.0, 60.0, 40.0, 30.0).unwrap();
        let set = sre_perturbations(&b, (320, 240), &SrePerturbations::default()).unwrap();
        assert_eq!(set.len(), 12);
        let right = &set.iter().find(|(l, _)| l == "shift_right").unwrap().1;
        assert_eq!(right.cx, 54.0);
        let big = &set.iter().find(|(l, _)| l == "scale_1.2").unwrap().1;
        assert_eq!((big.w, big.h), (48.0, 36.0));
        assert_eq!(big.center(), b.center());

        let zero = SrePerturbations {
            shift_fraction: 0.0,
            scales: [1.0; 4],
        };
        let same = sre_perturbations(&b, (320, 240), &zero).unwrap();
        assert!(same.iter().all(|(_, p)| *p == b));
    }

    #[test]
    fn sre_clips_to_frame() {
        let b = corner(1.0, 1.0, 40.0, 30.0);
        let set = sre_perturbations(&b, (100, 100), &SrePerturbations::default()).unwrap();
        for (_, p) in &set {
            assert!(p.left() >= 1.0 && p.top() >= 1.0);
            assert!(p.right() <= 101.0 && p.bottom() <= 101.0);
        }
        let left = &set[0].1;
        assert_eq!((left.left(), left.w), (1.0, 36.0));
    }

    #[test]
    fn ground_truth_parsing() {
        let gt = GroundTruth::parse("80,80,40,40\n81\t80 40\t40\n\n", Path::new("gt")).unwrap();
        assert_eq!(gt.len(), 2);
        assert_eq!(gt.boxes[0].center(), (100.0, 100.0));
        assert_eq!(gt.boxes[1].to_corner(), (81.0, 80.0, 40.0, 40.0));
        assert_eq!(gt.to_text(), "80,80,40,40\n81,80,40,40\n");

        let err = GroundTruth::parse("1,2,3,4\n1,2,x,4\n", Path::new("gt")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        assert!(GroundTruth::parse("1,2,3\n", Path::new("gt")).is_err());
        assert!(GroundTruth::parse("1,2,0,4\n", Path::new("gt")).is_err());
        assert!(GroundTruth::parse("", Path::new("gt")).is_err());
    }

    #[test]
    fn pooled_counts_every_frame() {
        let (res, gt) = five_frame_fixture();
        let a = curves(&res, &gt).unwrap();
        let b = curves(&gt, &gt).unwrap();
        let p = EvalResult::pooled(&[a.clone(), b.clone()]).unwrap();
        assert_eq!(p.frames(), 10);
        assert!((p.mean_vor() - (a.mean_vor() + b.mean_vor()) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn curve_files() {
        assert_eq!(
            curve_csv("precision", [0.0, 1.0].into_iter(), &[0.5, 1.0]),
            "threshold,precision\n0,0.5\n1,1\n"
        );
        let b = corner(80.0, 80.0, 40.0, 40.0);
        assert_eq!(boxes_csv(&[b], 3), "frame,x,y,w,h\n3,80.000,80.000,40.000,40.000\n");
    }

    fn arb_box() -> impl Strategy<Value = BoundingBox> {
        (-50.0f64..50.0, -50.0f64..50.0, 1.0f64..40.0, 1.0f64..40.0)
            .prop_map(|(x, y, w, h)| corner(x, y, w, h))
    }

    proptest! {
        #[test]
        fn vor_properties(a in arb_box(), b in arb_box(), c in 0.1f64..10.0) {
            let v = vor(&a, &b);
            prop_assert!((0.0..=1.0).contains(&v));
            prop_assert!((v - vor(&b, &a)).abs() < 1e-12);
            let scale = |r: &BoundingBox| BoundingBox { cx: r.cx * c, cy: r.cy * c, w: r.w * c, h: r.h * c };
            prop_assert!((v - vor(&scale(&a), &scale(&b))).abs() < 1e-9);
            prop_assert!((vor(&a, &a) - 1.0).abs() < 1e-12);
        }

        #[test]
        fn curves_always_monotone(
            errs in proptest::collection::vec((0.0f64..80.0, 0.0f64..=1.0), 1..40)
        ) {
            let (c, v): (Vec<_>, Vec<_>) = errs.into_iter().unzip();
            let r = EvalResult::from_errors(c, v).unwrap();
            prop_assert!(r.curves_monotone());
            prop_assert!((0.0..=1.0).contains(&r.auc));
        }
    }
}
