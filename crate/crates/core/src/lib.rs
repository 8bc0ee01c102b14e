//! CFPFT: a kernelized correlation filter tracker with a confidence-gated
//! particle-filter re-detection branch and a response-ratio scale estimator.
//!
//! The crate is organized bottom-up:
//!
//! * [`imagery`] loads frames and crops search windows.
//! * [`features`] turns a grayscale window into a windowed 31-channel HOG tensor.
//! * [`dft`] provides the 2-D transforms and spectrum algebra.
//! * [`kcf`] trains, evaluates and updates the kernelized correlation filter.
//! * [`redetect`] samples and scores candidate windows when the filter is unsure.
//! * [`scale`] infers the direction of size change from consecutive peak responses.
//! * [`tracker`] runs the per-frame loop.
//! * [`eval`] computes CLE/overlap metrics and the OPE/TRE/SRE protocols.
//! * [`synth`] renders deterministic synthetic sequences with known ground truth.

// `!(a > b)` is used deliberately so that NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dft;
pub mod error;
pub mod eval;
pub mod features;
pub mod imagery;
pub mod kcf;
pub mod redetect;
pub mod scale;
pub mod synth;
pub mod tracker;

pub use error::{Error, Result};

pub use features::FeaturePatch;
pub use imagery::{BoundingBox, Frame, FrameSource};
pub use kcf::{FilterModel, KcfParams, LabelMap, ResponseMap};

pub use redetect::{Branch, RedetectParams};
pub use scale::ScaleState;
pub use tracker::{FrameDiagnostics, Tracker, TrackerConfig, Trajectory};
pub use eval::{EvalResult, GroundTruth};
pub use synth::{Synthetic, SyntheticSpec};
