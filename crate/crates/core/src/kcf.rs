//! Kernelized correlation filter: labels, Gaussian kernel correlation,
//! dual-coefficient training, detection and the linear model update.

use std::io::{self, Read, Write};

use ndarray::{Array2, Array3, Axis, Zip};
use num_complex::Complex64;

use crate::dft::{self, Spectrum};
use crate::error::{Error, Result};
use crate::features::FeaturePatch;

/// Denominators of the ridge solution below this magnitude are rejected.
const MIN_DENOMINATOR: f64 = 1e-12;

const SNAPSHOT_MAGIC: &[u8; 8] = b"CFPFTM01";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KcfParams {
    /// Ridge regularization.
    pub lambda: f64,
    /// Bandwidth of the Gaussian kernel.
    pub kernel_sigma: f64,
    /// Label bandwidth as a fraction of `sqrt(target area)` in cells.
    pub output_sigma_factor: f64,
    /// Learning rate of the linear model update.
    pub gamma: f64,
    pub cell_size: usize,
}

impl Default for KcfParams {
    fn default() -> Self {
        KcfParams {
            lambda: 0.01,
            kernel_sigma: 0.5,
            output_sigma_factor: 0.1,
            gamma: 0.02,
            cell_size: 4,
        }
    }
}

impl KcfParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid(format!("lambda {} must be >= 0", self.lambda)));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::invalid(format!("gamma {} outside [0, 1]", self.gamma)));
        }
        if !(self.kernel_sigma > 0.0 && self.kernel_sigma.is_finite()) {
            return Err(Error::invalid("kernel sigma must be positive"));
        }
        if !(self.output_sigma_factor > 0.0 && self.output_sigma_factor.is_finite()) {
            return Err(Error::invalid("output sigma factor must be positive"));
        }
        if self.cell_size == 0 {
            return Err(Error::invalid("cell size must be at least 1"));
        }
        Ok(())
    }
}

/// Gaussian regression targets with the peak at the zero shift `(0, 0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMap {
    pub values: Array2<f64>,
    pub sigma: f64,
    pub spectrum: Spectrum,
}

/// Offset of index `i` from 0 on a ring of length `n`, in `(-n/2, n/2]`.
fn wrap_offset(i: usize, n: usize) -> i64 {
    if i > n / 2 {
        i as i64 - n as i64
    } else {
        i as i64
    }
}

/// Builds `rows x cols` labels for a target of `target_size_cells = (h, w)` cells.
pub fn make_labels(
    rows: usize,
    cols: usize,
    target_size_cells: (f64, f64),
    output_sigma_factor: f64,
) -> Result<LabelMap> {
    if rows == 0 || cols == 0 {
        return Err(Error::invalid("label map must be at least 1x1"));
    }
    let (h, w) = target_size_cells;
    let sigma = output_sigma_factor * (h * w).sqrt();
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::invalid(format!("label bandwidth {sigma} must be positive")));
    }
    let values = Array2::from_shape_fn((rows, cols), |(m, n)| {
        let dm = wrap_offset(m, rows) as f64;
        let dn = wrap_offset(n, cols) as f64;
        (-(dm * dm + dn * dn) / (2.0 * sigma * sigma)).exp()
    });
    let spectrum = dft::forward_plane(&values);
    Ok(LabelMap {
        values,
        sigma,
        spectrum,
    })
}

fn check_shapes(a: (usize, usize, usize), b: (usize, usize, usize)) -> Result<()> {
    if a != b {
        return Err(Error::ShapeMismatch {
            expected: a,
            found: b,
        });
    }
    Ok(())
}

/// Gaussian kernel correlation evaluated from precomputed spectra.
///
/// `k(m, n) = exp(-max(0, |a|^2 + |b|^2 - 2 c(m, n)) / (sigma^2 D))` where `c`
/// is the cyclic cross-correlation and `D = rows * cols * channels`.
fn kernel_from_spectra(
    fa: &Spectrum,
    norm_a: f64,
    fb: &Spectrum,
    norm_b: f64,
    sigma: f64,
) -> Result<Array2<f64>> {
    let (rows, cols, channels) = fa.shape();
    let cross = dft::inverse_real_plane(&dft::cross_power(fa, fb)?)?;
    let denom = sigma * sigma * (rows * cols * channels) as f64;
    Ok(cross.mapv(|c| (-(norm_a + norm_b - 2.0 * c).max(0.0) / denom).exp()))
}

/// Kernel correlation `k^{ab}` over all cyclic shifts of `b`.
pub fn gaussian_correlation(
    a: &FeaturePatch,
    b: &FeaturePatch,
    kernel_sigma: f64,
) -> Result<Array2<f64>> {
    check_shapes(a.shape(), b.shape())?;
    kernel_from_spectra(
        &dft::forward(a),
        a.squared_norm(),
        &dft::forward(b),
        b.squared_norm(),
        kernel_sigma,
    )
}

/// A trained filter: dual coefficients in the Fourier domain plus the appearance template.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterModel {
    pub alpha_spectrum: Spectrum,
    pub appearance: FeaturePatch,
    pub labels: LabelMap,
    pub params: KcfParams,
    appearance_spectrum: Spectrum,
    appearance_norm: f64,
}

impl FilterModel {
    /// `(rows, cols, channels)` of the feature grid the model operates on.
    pub fn shape(&self) -> (usize, usize, usize) {
        self.appearance.shape()
    }

    /// Writes the model as little-endian binary: magic, `u32` rows/cols/channels,
    /// `u32` cell size, the four real parameters and the label sigma as `f64`, then
    /// `alpha_spectrum` as interleaved `(re, im)` pairs and the appearance values
    /// in channel-major order.
    pub fn write_snapshot<W: Write>(&self, mut w: W) -> io::Result<()> {
        let (rows, cols, channels) = self.shape();
        w.write_all(SNAPSHOT_MAGIC)?;
        for v in [rows, cols, channels, self.params.cell_size] {
            w.write_all(&(v as u32).to_le_bytes())?;
        }
        let p = &self.params;
        for v in [
            p.lambda,
            p.kernel_sigma,
            p.output_sigma_factor,
            p.gamma,
            self.labels.sigma,
        ] {
            w.write_all(&v.to_le_bytes())?;
        }
        for c in self.alpha_spectrum.data.iter() {
            w.write_all(&c.re.to_le_bytes())?;
            w.write_all(&c.im.to_le_bytes())?;
        }
        for v in self.appearance.data.iter() {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    /// Reads a snapshot written by [`FilterModel::write_snapshot`]. Labels are
    /// rebuilt from the stored bandwidth.
    pub fn read_snapshot<R: Read>(mut r: R) -> Result<Self> {
        let bad = |e: io::Error| Error::InvalidInput(format!("truncated model snapshot: {e}"));
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(bad)?;
        if &magic != SNAPSHOT_MAGIC {
            return Err(Error::invalid("not a model snapshot"));
        }
        let read_u32 = |r: &mut R| -> Result<usize> {
            let mut b = [0u8; 4];
            r.read_exact(&mut b).map_err(bad)?;
            Ok(u32::from_le_bytes(b) as usize)
        };
        let rows = read_u32(&mut r)?;
        let cols = read_u32(&mut r)?;
        let channels = read_u32(&mut r)?;
        let cell_size = read_u32(&mut r)?;
        let read_f64 = |r: &mut R| -> Result<f64> {
            let mut b = [0u8; 8];
            r.read_exact(&mut b).map_err(bad)?;
            Ok(f64::from_le_bytes(b))
        };
        let params = KcfParams {
            lambda: read_f64(&mut r)?,
            kernel_sigma: read_f64(&mut r)?,
            output_sigma_factor: read_f64(&mut r)?,
            gamma: read_f64(&mut r)?,
            cell_size,
        };
        let label_sigma = read_f64(&mut r)?;
        let mut alpha = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            let re = read_f64(&mut r)?;
            let im = read_f64(&mut r)?;
            alpha.push(Complex64::new(re, im));
        }
        let mut appearance = Vec::with_capacity(rows * cols * channels);
        for _ in 0..rows * cols * channels {
            appearance.push(read_f64(&mut r)?);
        }
        let shape_err = |e: ndarray::ShapeError| Error::invalid(format!("bad snapshot shape: {e}"));
        let alpha_spectrum =
            Spectrum::new(Array3::from_shape_vec((1, rows, cols), alpha).map_err(shape_err)?);
        let appearance = FeaturePatch::new(
            Array3::from_shape_vec((channels, rows, cols), appearance).map_err(shape_err)?,
            cell_size,
        );
        // sigma = factor * sqrt(h * w) is reproduced by a square target of side sigma/factor.
        let side = label_sigma / params.output_sigma_factor;
        let labels = make_labels(rows, cols, (side, side), params.output_sigma_factor)?;
        Ok(FilterModel::assemble(alpha_spectrum, appearance, labels, params))
    }

    fn assemble(
        alpha_spectrum: Spectrum,
        appearance: FeaturePatch,
        labels: LabelMap,
        params: KcfParams,
    ) -> Self {
        let appearance_spectrum = dft::forward(&appearance);
        let appearance_norm = appearance.squared_norm();
        FilterModel {
            alpha_spectrum,
            appearance,
            labels,
            params,
            appearance_spectrum,
            appearance_norm,
        }
    }
}

/// Solves the kernel ridge regression on all cyclic shifts of `x`:
/// `F(alpha) = F(y) / (F(k^{xx}) + lambda)`.
pub fn train(x: &FeaturePatch, labels: &LabelMap, params: &KcfParams) -> Result<FilterModel> {
    params.validate()?;
    check_shapes(
        (labels.values.nrows(), labels.values.ncols(), x.channels()),
        x.shape(),
    )?;
    let fx = dft::forward(x);
    let norm = x.squared_norm();
    let kxx = kernel_from_spectra(&fx, norm, &fx, norm, params.kernel_sigma)?;
    let fk = dft::forward_plane(&kxx);
    let mut alpha = labels.spectrum.data.clone();
    let mut tiny = None;
    Zip::from(&mut alpha)
        .and(&fk.data)
        .for_each(|a, &k| {
            let den = k + params.lambda;
            if den.norm() < MIN_DENOMINATOR {
                tiny = Some(den.norm());
            }
            *a /= den;
        });
    if let Some(d) = tiny {
        return Err(Error::Numerical(format!(
            "ridge denominator magnitude {d:e} below {MIN_DENOMINATOR:e}"
        )));
    }
    Ok(FilterModel {
        alpha_spectrum: Spectrum::new(alpha),
        appearance: x.clone(),
        labels: labels.clone(),
        params: *params,
        appearance_spectrum: fx,
        appearance_norm: norm,
    })
}

/// Filter response over all cyclic shifts, with the peak decoded.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseMap {
    pub values: Array2<f64>,
    pub max_value: f64,
    /// `(row, col)` of the first maximum in row-major order.
    pub argmax: (usize, usize),
}

impl ResponseMap {
    pub fn from_values(values: Array2<f64>) -> Result<Self> {
        let mut best = f64::NEG_INFINITY;
        let mut argmax = None;
        for ((r, c), &v) in values.indexed_iter() {
            if v.is_nan() {
                return Err(Error::Numerical("response map contains NaN".into()));
            }
            if argmax.is_none() || v > best {
                best = v;
                argmax = Some((r, c));
            }
        }
        let argmax = argmax.ok_or_else(|| Error::invalid("empty response map"))?;
        Ok(ResponseMap {
            values,
            max_value: best,
            argmax,
        })
    }

    /// Signed `(dy, dx)` shift of the peak; indices past half the map wrap to negative.
    pub fn displacement(&self) -> (i64, i64) {
        let (rows, cols) = self.values.dim();
        (
            wrap_offset(self.argmax.0, rows),
            wrap_offset(self.argmax.1, cols),
        )
    }
}

/// Evaluates the filter on a new patch: `f(z) = F^-1(F(k^{z x_hat}) . F(alpha))`.
pub fn detect(model: &FilterModel, z: &FeaturePatch) -> Result<ResponseMap> {
    check_shapes(model.shape(), z.shape())?;
    let fz = dft::forward(z);
    let kz = kernel_from_spectra(
        &fz,
        z.squared_norm(),
        &model.appearance_spectrum,
        model.appearance_norm,
        model.params.kernel_sigma,
    )?;
    let fk = dft::forward_plane(&kz);
    let response = dft::inverse_real_plane(&dft::hadamard(&fk, &model.alpha_spectrum)?)?;
    ResponseMap::from_values(response)
}

/// Linear model update: both `F(alpha)` and the appearance move toward the
/// fresh solution on `x_new` with rate `gamma`.
pub fn update(model: &FilterModel, x_new: &FeaturePatch) -> Result<FilterModel> {
    check_shapes(model.shape(), x_new.shape())?;
    let fresh = train(x_new, &model.labels, &model.params)?;
    let g = model.params.gamma;
    let keep = 1.0 - g;
    let alpha = Zip::from(&model.alpha_spectrum.data)
        .and(&fresh.alpha_spectrum.data)
        .map_collect(|&old, &new| old * keep + new * g);
    let appearance = Zip::from(&model.appearance.data)
        .and(&x_new.data)
        .map_collect(|&old, &new| old * keep + new * g);
    Ok(FilterModel::assemble(
        Spectrum::new(alpha),
        FeaturePatch::new(appearance, model.appearance.cell_size),
        model.labels.clone(),
        model.params,
    ))
}

/// Largest violation of `X[u, v] = conj(X[-u, -v])` over a one-channel spectrum.
pub fn conjugate_asymmetry(s: &Spectrum) -> f64 {
    let plane = s.data.index_axis(Axis(0), 0);
    let (rows, cols) = plane.dim();
    let mut worst = 0.0f64;
    for ((u, v), x) in plane.indexed_iter() {
        let mirror = plane[[(rows - u) % rows, (cols - v) % cols]];
        worst = worst.max((x - mirror.conj()).norm());
    }
    worst
}
