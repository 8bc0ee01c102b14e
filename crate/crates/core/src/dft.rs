//! Per-channel 2-D DFTs and elementwise spectrum algebra.
//!
//! Forward transforms are unnormalized; the inverse scales by `1/(rows*cols)`.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

use ndarray::{Array2, Array3, ArrayView2, ArrayViewMut2, Axis, Zip};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::features::FeaturePatch;

/// Max-abs imaginary residue tolerated by [`inverse_real`], relative to
/// `max(1, max |real part|)`.
pub const IMAG_TOLERANCE: f64 = 1e-8;

/// A complex multi-channel spectrum, shape `(channels, rows, cols)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub data: Array3<Complex64>,
}

impl Spectrum {
    pub fn new(data: Array3<Complex64>) -> Self {
        Spectrum { data }
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

    /// `(rows, cols, channels)`, matching [`FeaturePatch::shape`].
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.rows(), self.cols(), self.channels())
    }

    /// The single plane of a one-channel spectrum.
    pub fn plane(&self, channel: usize) -> ArrayView2<'_, Complex64> {
        self.data.index_axis(Axis(0), channel)
    }

    fn check_same_shape(&self, other: &Spectrum) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch {
                expected: self.shape(),
                found: other.shape(),
            });
        }
        Ok(())
    }
}

type PlanCache = RwLock<HashMap<(usize, usize), Arc<Plan2d>>>;

struct Plan2d {
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl Plan2d {
    fn new(rows: usize, cols: usize) -> Self {
        let mut planner = FftPlanner::new();
        Plan2d {
            row_fwd: planner.plan_fft_forward(cols),
            row_inv: planner.plan_fft_inverse(cols),
            col_fwd: planner.plan_fft_forward(rows),
            col_inv: planner.plan_fft_inverse(rows),
        }
    }

    fn cached(rows: usize, cols: usize) -> Arc<Plan2d> {
        static CACHE: OnceLock<PlanCache> = OnceLock::new();
        let cache = CACHE.get_or_init(Default::default);
        if let Some(plan) = cache.read().expect("plan cache poisoned").get(&(rows, cols)) {
            return Arc::clone(plan);
        }
        let mut guard = cache.write().expect("plan cache poisoned");
        Arc::clone(
            guard
                .entry((rows, cols))
                .or_insert_with(|| Arc::new(Plan2d::new(rows, cols))),
        )
    }

    /// In-place 2-D transform of a row-major plane.
    fn run(&self, mut plane: ArrayViewMut2<'_, Complex64>, inverse: bool) {
        let (rows, cols) = plane.dim();
        let (row_fft, col_fft) = if inverse {
            (&self.row_inv, &self.col_inv)
        } else {
            (&self.row_fwd, &self.col_fwd)
        };
        let scratch_len = row_fft
            .get_inplace_scratch_len()
            .max(col_fft.get_inplace_scratch_len());
        let mut scratch = vec![Complex64::default(); scratch_len];

        let buf = plane
            .as_slice_mut()
            .expect("spectrum planes are contiguous");
        row_fft.process_with_scratch(buf, &mut scratch);

        let mut transposed = vec![Complex64::default(); rows * cols];
        for r in 0..rows {
            for c in 0..cols {
                transposed[c * rows + r] = buf[r * cols + c];
            }
        }
        col_fft.process_with_scratch(&mut transposed, &mut scratch);
        for r in 0..rows {
            for c in 0..cols {
                buf[r * cols + c] = transposed[c * rows + r];
            }
        }
    }
}

fn forward_planes(data: &Array3<f64>) -> Spectrum {
    let (_, rows, cols) = data.dim();
    let plan = Plan2d::cached(rows, cols);
    let mut out = data.mapv(|v| Complex64::new(v, 0.0));
    for plane in out.outer_iter_mut() {
        plan.run(plane, false);
    }
    Spectrum::new(out)
}

/// Per-channel forward DFT of a feature tensor.
pub fn forward(fp: &FeaturePatch) -> Spectrum {
    forward_planes(&fp.data)
}

/// Forward DFT of a single real plane, as a one-channel spectrum.
pub fn forward_plane(plane: &Array2<f64>) -> Spectrum {
    forward_planes(&plane.view().insert_axis(Axis(0)).to_owned())
}

/// Inverse DFT that asserts the result is real and drops the imaginary residue.
pub fn inverse_real(s: &Spectrum) -> Result<Array3<f64>> {
    let (rows, cols) = (s.rows(), s.cols());
    let plan = Plan2d::cached(rows, cols);
    let mut work = s.data.clone();
    for plane in work.outer_iter_mut() {
        plan.run(plane, true);
    }
    let scale = 1.0 / (rows * cols) as f64;
    let mut max_re = 0.0f64;
    let mut max_im = 0.0f64;
    for v in work.iter() {
        max_re = max_re.max((v.re * scale).abs());
        max_im = max_im.max((v.im * scale).abs());
    }
    if !(max_im <= IMAG_TOLERANCE * max_re.max(1.0)) {
        return Err(Error::Numerical(format!(
            "inverse transform has imaginary residue {max_im:e}; spectrum is not conjugate-symmetric"
        )));
    }
    Ok(work.mapv(|v| v.re * scale))
}

/// Inverse of a one-channel spectrum as a plane.
pub fn inverse_real_plane(s: &Spectrum) -> Result<Array2<f64>> {
    if s.channels() != 1 {
        return Err(Error::invalid(format!(
            "expected a single-channel spectrum, found {} channels",
            s.channels()
        )));
    }
    Ok(inverse_real(s)?.index_axis_move(Axis(0), 0))
}

/// Elementwise complex product.
pub fn hadamard(a: &Spectrum, b: &Spectrum) -> Result<Spectrum> {
    a.check_same_shape(b)?;
    Ok(Spectrum::new(&a.data * &b.data))
}

/// Elementwise complex conjugate.
pub fn conj(a: &Spectrum) -> Spectrum {
    Spectrum::new(a.data.mapv(|v| v.conj()))
}

/// Sum over the channel axis.
pub fn sum_channels(a: &Spectrum) -> Spectrum {
    Spectrum::new(a.data.sum_axis(Axis(0)).insert_axis(Axis(0)))
}

/// `sum_c a_c * conj(b_c)`, the fused form of `sum_channels(hadamard(a, conj(b)))`.
pub fn cross_power(a: &Spectrum, b: &Spectrum) -> Result<Spectrum> {
    a.check_same_shape(b)?;
    let mut acc = Array2::<Complex64>::zeros((a.rows(), a.cols()));
    for (pa, pb) in a.data.outer_iter().zip(b.data.outer_iter()) {
        Zip::from(&mut acc)
            .and(&pa)
            .and(&pb)
            .for_each(|o, &x, &y| *o += x * y.conj());
    }
    Ok(Spectrum::new(acc.insert_axis(Axis(0))))
}
