//! Scale-trend estimation from consecutive peak responses.
//!
//! A peak that falls faster than it did a frame earlier suggests the target
//! is outgrowing the template, so the size steps up by 2%; a peak recovering
//! faster suggests the opposite.

use std::collections::VecDeque;

use crate::error::{Error, Result};

pub const SHRINK: f64 = 0.98;
pub const GROW: f64 = 1.02;
pub const MIN_SIDE: f64 = 4.0;

pub const DEFAULT_PHI: f64 = 0.1;
pub const DEFAULT_PSI: f64 = -0.1;

/// `d_t = r_t / r_{t-1} - r_{t-1} / r_{t-2}`.
pub fn direction(max_r_t: f64, max_r_t1: f64, max_r_t2: f64) -> Result<f64> {
    if !(max_r_t1 > 0.0 && max_r_t2 > 0.0) {
        return Err(Error::Numerical(format!(
            "scale direction needs positive earlier responses, got {max_r_t1} and {max_r_t2}"
        )));
    }
    let d = max_r_t / max_r_t1 - max_r_t1 / max_r_t2;
    if !d.is_finite() {
        return Err(Error::Numerical(format!("scale direction {d} is not finite")));
    }
    Ok(d)
}

/// Three-way scale factor: shrink above `phi`, grow below `psi`, else hold.
pub fn scale_factor(d_t: f64, phi: f64, psi: f64) -> f64 {
    if d_t > phi {
        SHRINK
    } else if d_t < psi {
        GROW
    } else {
        1.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaleState {
    history: VecDeque<f64>,
    /// Current target `(w, h)` in pixels.
    pub size: (f64, f64),
    pub phi: f64,
    pub psi: f64,
}

impl ScaleState {
    pub fn new(size: (f64, f64), phi: f64, psi: f64) -> Result<Self> {
        if !(phi > psi) {
            return Err(Error::invalid(format!(
                "scale thresholds need phi > psi, got phi={phi} psi={psi}"
            )));
        }
        if !(size.0 > 0.0 && size.1 > 0.0) {
            return Err(Error::invalid(format!("target size {size:?} must be positive")));
        }
        Ok(ScaleState {
            history: VecDeque::with_capacity(3),
            size,
            phi,
            psi,
        })
    }

    /// Records a peak response, keeping the latest three.
    pub fn push_response(&mut self, max_r: f64) {
        if self.history.len() == 3 {
            self.history.pop_front();
        }
        self.history.push_back(max_r);
    }

    /// Recorded peaks, oldest first.
    pub fn history(&self) -> impl Iterator<Item = f64> + '_ {
        self.history.iter().copied()
    }

    /// Direction from the three most recent peaks, if three have been recorded.
    pub fn direction(&self) -> Option<Result<f64>> {
        if self.history.len() < 3 {
            return None;
        }
        Some(direction(self.history[2], self.history[1], self.history[0]))
    }

    /// Multiplies both sides by `s_t`. A step that would take either side
    /// below [`MIN_SIDE`] or beyond `bounds = (width, height)` is refused and
    /// the size is left unchanged; returns whether the step was applied.
    pub fn apply(&mut self, s_t: f64, bounds: (f64, f64)) -> bool {
        let fits = self.accepts(s_t, bounds);
        if fits {
            self.size = (self.size.0 * s_t, self.size.1 * s_t);
        }
        fits
    }

    /// Whether [`apply`](Self::apply) would take the step.
    pub fn accepts(&self, s_t: f64, bounds: (f64, f64)) -> bool {
        let (w, h) = (self.size.0 * s_t, self.size.1 * s_t);
        w >= MIN_SIDE && h >= MIN_SIDE && w <= bounds.0 && h <= bounds.1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn direction_examples() {
        assert_eq!(direction(0.5, 0.5, 0.5).unwrap(), 0.0);
        assert!((direction(0.45, 0.40, 0.50).unwrap() - 0.325).abs() < 1e-12);
        assert!((direction(0.32, 0.40, 0.40).unwrap() + 0.2).abs() < 1e-12);
        assert!(direction(0.3, 0.0, 0.4).is_err());
        assert!(direction(0.3, 0.4, -1.0).is_err());
    }

    #[test]
    fn factor_examples() {
        assert_eq!(scale_factor(0.325, DEFAULT_PHI, DEFAULT_PSI), 0.98);
        assert_eq!(scale_factor(0.0, DEFAULT_PHI, DEFAULT_PSI), 1.0);
        assert_eq!(scale_factor(-0.2, DEFAULT_PHI, DEFAULT_PSI), 1.02);
        assert_eq!(scale_factor(0.1, DEFAULT_PHI, DEFAULT_PSI), 1.0);
        assert_eq!(scale_factor(-0.1, DEFAULT_PHI, DEFAULT_PSI), 1.0);
    }

    #[test]
    fn apply_examples() {
        let bounds = (320.0, 240.0);
        let mut s = ScaleState::new((50.0, 80.0), 0.1, -0.1).unwrap();
        assert!(s.apply(1.0, bounds));
        assert_eq!(s.size, (50.0, 80.0));

        let mut s = ScaleState::new((100.0, 100.0), 0.1, -0.1).unwrap();
        s.apply(0.98, bounds);
        s.apply(0.98, bounds);
        assert!((s.size.0 - 96.04).abs() < 1e-9 && (s.size.1 - 96.04).abs() < 1e-9);

        let mut s = ScaleState::new((4.0, 4.0), 0.1, -0.1).unwrap();
        assert!(!s.apply(0.98, bounds));
        assert_eq!(s.size, (4.0, 4.0));

        let mut s = ScaleState::new((300.0, 100.0), 0.1, -0.1).unwrap();
        assert!(!s.apply(1.02, (305.0, 240.0)));
        assert_eq!(s.size, (300.0, 100.0));
    }

    #[test]
    fn thresholds_validated() {
        assert!(ScaleState::new((10.0, 10.0), -0.1, 0.1).is_err());
        assert!(ScaleState::new((0.0, 10.0), 0.1, -0.1).is_err());
    }

    #[test]
    fn history_keeps_latest_three() {
        let mut s = ScaleState::new((10.0, 10.0), 0.1, -0.1).unwrap();
        s.push_response(0.5);
        s.push_response(0.5);
        assert!(s.direction().is_none());
        s.push_response(0.5);
        s.push_response(0.40);
        s.push_response(0.45);
        assert_eq!(s.history().collect::<Vec<_>>(), vec![0.5, 0.40, 0.45]);
        assert!((s.direction().unwrap().unwrap() - 0.325).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn factor_is_monotone(a in -2.0f64..2.0, b in -2.0f64..2.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(scale_factor(lo, 0.1, -0.1) >= scale_factor(hi, 0.1, -0.1));
        }

        #[test]
        fn direction_ignores_common_scale(
            r0 in 0.01f64..1.0, r1 in 0.01f64..1.0, r2 in 0.01f64..1.0, c in 0.1f64..10.0
        ) {
            let d = direction(r2, r1, r0).unwrap();
            let dc = direction(r2 * c, r1 * c, r0 * c).unwrap();
            prop_assert!((d - dc).abs() < 1e-9);
        }

        #[test]
        fn apply_keeps_positive_size_and_aspect(
            w in 4.0f64..200.0, h in 4.0f64..200.0,
            steps in proptest::collection::vec(prop_oneof![Just(0.98), Just(1.0), Just(1.02)], 0..60)
        ) {
            let mut s = ScaleState::new((w, h), 0.1, -0.1).unwrap();
            let aspect = w / h;
            for f in steps {
                s.apply(f, (320.0, 240.0));
                prop_assert!(s.size.0 > 0.0 && s.size.1 > 0.0);
                prop_assert!((s.size.0 / s.size.1 - aspect).abs() <= 1e-12 * aspect);
            }
        }
    }
}
