//! Periodic uniform grids on `[0, 2π]^d` (d = 2, 3) and the Fourier-space
//! machinery built on them: forward/inverse transforms, spectral derivatives,
//! quadrature, and application/inversion of even-order constant-coefficient
//! operator symbols.
//!
//! Conventions:
//!
//! * Real fields are stored row-major (last axis contiguous).
//! * `forward` normalizes by the node count, so the `k = 0` mode equals the
//!   field mean and `inverse(forward(f)) = f` to roundoff.
//! * Wavenumbers per axis are the integers in `[−⌊N/2⌋, ⌈N/2⌉−1]`; for even
//!   axis sizes the Nyquist mode is zeroed in odd-order derivatives so that
//!   derivatives of real fields stay real.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Domain edge length per axis; the domain is `[0, 2π]^d`.
pub const AXIS_LENGTH: f64 = 2.0 * PI;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(len: usize, forward: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if forward {
            p.plan_fft_forward(len)
        } else {
            p.plan_fft_inverse(len)
        }
    })
}

/// In-place FFT along every axis of a row-major multi-dimensional buffer.
fn fft_all_axes(data: &mut [Complex64], points: &[usize], forward: bool) {
    for axis in 0..points.len() {
        let n = points[axis];
        let fft = plan(n, forward);
        let stride: usize = points[axis + 1..].iter().product();
        if stride == 1 {
            for chunk in data.chunks_exact_mut(n) {
                fft.process(chunk);
            }
            continue;
        }
        let outer: usize = points[..axis].iter().product();
        let block = n * stride;
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        for o in 0..outer {
            for s in 0..stride {
                let base = o * block + s;
                for (j, slot) in line.iter_mut().enumerate() {
                    *slot = data[base + j * stride];
                }
                fft.process(&mut line);
                for (j, v) in line.iter().enumerate() {
                    data[base + j * stride] = *v;
                }
            }
        }
    }
}

/// A uniform periodic grid on `[0, 2π]^d`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridSpec {
    points: Vec<usize>,
}

/// Build a grid, validating the dimension and per-axis resolution.
pub fn make_grid(dim: usize, points_per_axis: &[usize]) -> Result<GridSpec> {
    GridSpec::new(dim, points_per_axis)
}

impl GridSpec {
    pub fn new(dim: usize, points_per_axis: &[usize]) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::DimensionOutOfRange(dim));
        }
        if points_per_axis.len() != dim {
            return Err(Error::Config(format!(
                "expected {dim} axis sizes, got {}",
                points_per_axis.len()
            )));
        }
        for (axis, &n) in points_per_axis.iter().enumerate() {
            if n < 4 {
                return Err(Error::TooFewPoints { axis, points: n });
            }
        }
        Ok(GridSpec {
            points: points_per_axis.to_vec(),
        })
    }

    pub fn dim(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[usize] {
        &self.points
    }

    /// Total number of grid nodes.
    pub fn len(&self) -> usize {
        self.points.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Grid spacing along `axis`, `2π / N`.
    pub fn spacing(&self, axis: usize) -> f64 {
        AXIS_LENGTH / self.points[axis] as f64
    }

    /// Domain measure `(2π)^d`.
    pub fn volume(&self) -> f64 {
        AXIS_LENGTH.powi(self.dim() as i32)
    }

    /// Node coordinates along `axis`: `0, h, 2h, …, (N−1)h`.
    pub fn coords(&self, axis: usize) -> Vec<f64> {
        let h = self.spacing(axis);
        (0..self.points[axis]).map(|i| i as f64 * h).collect()
    }

    /// Integer wavenumbers along `axis` in FFT storage order:
    /// `0, 1, …, ⌈N/2⌉−1, −⌊N/2⌋, …, −1`.
    pub fn wavenumbers(&self, axis: usize) -> Vec<f64> {
        let n = self.points[axis];
        (0..n).map(|i| wavenumber(n, i)).collect()
    }

    pub(crate) fn check_axis(&self, axis: usize) -> Result<()> {
        if axis >= self.dim() {
            return Err(Error::AxisOutOfRange {
                axis,
                dim: self.dim(),
            });
        }
        Ok(())
    }
}

/// Wavenumber for storage index `i` on an axis of `n` points.
fn wavenumber(n: usize, i: usize) -> f64 {
    let half = n.div_ceil(2);
    if i < half {
        i as f64
    } else {
        i as f64 - n as f64
    }
}

/// True if storage index `i` is the unpaired Nyquist mode (even `n` only).
fn is_nyquist(n: usize, i: usize) -> bool {
    n % 2 == 0 && i == n / 2
}

/// Call `f(flat_index, [k0, k1, k2])` for every mode in row-major order;
/// `k2 = 0` on 2-D grids.
fn visit_modes(points: &[usize], mut f: impl FnMut(usize, f64, f64, f64)) {
    match *points {
        [nx, ny] => {
            let mut flat = 0;
            for i in 0..nx {
                let kx = wavenumber(nx, i);
                for j in 0..ny {
                    f(flat, kx, wavenumber(ny, j), 0.0);
                    flat += 1;
                }
            }
        }
        [nx, ny, nz] => {
            let mut flat = 0;
            for i in 0..nx {
                let kx = wavenumber(nx, i);
                for j in 0..ny {
                    let ky = wavenumber(ny, j);
                    for l in 0..nz {
                        f(flat, kx, ky, wavenumber(nz, l));
                        flat += 1;
                    }
                }
            }
        }
        _ => unreachable!("GridSpec guarantees dim 2 or 3"),
    }
}

/// Call `f(|k|²)` once per mode in row-major storage order.
pub(crate) fn visit_k2(points: &[usize], mut f: impl FnMut(f64)) {
    visit_modes(points, |_, kx, ky, kz| f(kx * kx + ky * ky + kz * kz));
}

/// A real scalar field sampled at the grid nodes, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: GridSpec,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::SizeMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        let field = ScalarField { grid, values };
        field.check_finite("ScalarField::new")?;
        Ok(field)
    }

    pub fn zeros(grid: &GridSpec) -> Self {
        ScalarField {
            grid: grid.clone(),
            values: vec![0.0; grid.len()],
        }
    }

    pub fn constant(grid: &GridSpec, c: f64) -> Self {
        ScalarField {
            grid: grid.clone(),
            values: vec![c; grid.len()],
        }
    }

    /// Sample `f` at every node; the argument is `[x, y]` or `[x, y, z]`.
    pub fn from_fn(grid: &GridSpec, f: impl Fn(&[f64]) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        match grid.points() {
            [nx, ny] => {
                let (hx, hy) = (grid.spacing(0), grid.spacing(1));
                for i in 0..*nx {
                    let x = i as f64 * hx;
                    for j in 0..*ny {
                        values.push(f(&[x, j as f64 * hy]));
                    }
                }
            }
            [nx, ny, nz] => {
                let (hx, hy, hz) = (grid.spacing(0), grid.spacing(1), grid.spacing(2));
                for i in 0..*nx {
                    let x = i as f64 * hx;
                    for j in 0..*ny {
                        let y = j as f64 * hy;
                        for l in 0..*nz {
                            values.push(f(&[x, y, l as f64 * hz]));
                        }
                    }
                }
            }
            _ => unreachable!(),
        }
        ScalarField {
            grid: grid.clone(),
            values,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn check_finite(&self, stage: &'static str) -> Result<()> {
        if self.values.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite { stage })
        }
    }

    /// Pointwise map.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise combination of two fields on the same grid.
    pub fn zip_map(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> ScalarField {
        assert_eq!(self.grid, other.grid, "zip_map on mismatched grids");
        ScalarField {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    /// `self += c * other`.
    pub fn axpy(&mut self, c: f64, other: &ScalarField) {
        assert_eq!(self.grid, other.grid, "axpy on mismatched grids");
        for (a, &b) in self.values.iter_mut().zip(&other.values) {
            *a += c * b;
        }
    }

    pub fn scale(&self, c: f64) -> ScalarField {
        self.map(|v| c * v)
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// `∫ f dx` over `[0, 2π]^d`: spectrally exact trapezoid rule,
    /// `mean × (2π)^d`.
    pub fn integrate(&self) -> f64 {
        self.mean() * self.grid.volume()
    }

    /// `∫ f g dx`.
    pub fn inner(&self, other: &ScalarField) -> f64 {
        assert_eq!(self.grid, other.grid, "inner product on mismatched grids");
        let sum: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| a * b)
            .sum();
        sum / self.values.len() as f64 * self.grid.volume()
    }

    /// `‖f‖_{L²} = (∫ f²)^{1/2}`.
    pub fn l2_norm(&self) -> f64 {
        self.inner(self).max(0.0).sqrt()
    }

    pub fn forward(&self) -> Spectrum {
        let mut modes: Vec<Complex64> = self
            .values
            .iter()
            .map(|&v| Complex64::new(v, 0.0))
            .collect();
        fft_all_axes(&mut modes, self.grid.points(), true);
        let scale = 1.0 / self.grid.len() as f64;
        for m in &mut modes {
            *m *= scale;
        }
        Spectrum {
            grid: self.grid.clone(),
            modes,
        }
    }

    /// First spectral derivative along `axis`.
    pub fn derivative(&self, axis: usize) -> Result<ScalarField> {
        self.grid.check_axis(axis)?;
        Ok(self.forward().derivative(axis)?.inverse())
    }

    pub fn gradient(&self) -> VectorField {
        let spec = self.forward();
        let components = (0..self.grid.dim())
            .map(|axis| spec.derivative(axis).expect("axis in range").inverse())
            .collect();
        VectorField {
            components,
        }
    }

    pub fn laplacian(&self) -> ScalarField {
        self.forward().laplacian().inverse()
    }

    pub fn bilaplacian(&self) -> ScalarField {
        self.forward().bilaplacian().inverse()
    }
}

macro_rules! field_binop {
    ($trait:ident, $method:ident, $op:tt) => {
        impl std::ops::$trait for &ScalarField {
            type Output = ScalarField;
            fn $method(self, rhs: &ScalarField) -> ScalarField {
                self.zip_map(rhs, |a, b| a $op b)
            }
        }
    };
}

field_binop!(Add, add, +);
field_binop!(Sub, sub, -);
field_binop!(Mul, mul, *);

impl std::ops::Mul<f64> for &ScalarField {
    type Output = ScalarField;
    fn mul(self, rhs: f64) -> ScalarField {
        self.scale(rhs)
    }
}

impl std::ops::Neg for &ScalarField {
    type Output = ScalarField;
    fn neg(self) -> ScalarField {
        self.scale(-1.0)
    }
}

/// A vector field with one scalar component per grid axis.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    components: Vec<ScalarField>,
}

impl VectorField {
    pub fn new(components: Vec<ScalarField>) -> Result<Self> {
        let grid = components
            .first()
            .ok_or(Error::GridMismatch)?
            .grid()
            .clone();
        if components.len() != grid.dim() || components.iter().any(|c| *c.grid() != grid) {
            return Err(Error::GridMismatch);
        }
        Ok(VectorField { components })
    }

    pub fn grid(&self) -> &GridSpec {
        self.components[0].grid()
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn component(&self, axis: usize) -> &ScalarField {
        &self.components[axis]
    }

    pub fn components(&self) -> &[ScalarField] {
        &self.components
    }

    /// Pointwise squared magnitude `Σᵢ vᵢ²`.
    pub fn magnitude_sq(&self) -> ScalarField {
        let mut out = ScalarField::zeros(self.grid());
        for c in &self.components {
            for (o, &v) in out.values.iter_mut().zip(&c.values) {
                *o += v * v;
            }
        }
        out
    }

    /// `∇·v`, computed spectrally.
    pub fn divergence(&self) -> ScalarField {
        let mut total = Spectrum::zeros(self.grid());
        for (axis, c) in self.components.iter().enumerate() {
            let d = c.forward().derivative(axis).expect("axis in range");
            for (t, m) in total.modes.iter_mut().zip(&d.modes) {
                *t += m;
            }
        }
        total.inverse()
    }
}

/// Fourier coefficients of a real field; mode `k = 0` holds the field mean.
#[derive(Debug, Clone)]
pub struct Spectrum {
    grid: GridSpec,
    modes: Vec<Complex64>,
}

impl Spectrum {
    pub fn zeros(grid: &GridSpec) -> Self {
        Spectrum {
            grid: grid.clone(),
            modes: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn modes(&self) -> &[Complex64] {
        &self.modes
    }

    pub fn modes_mut(&mut self) -> &mut [Complex64] {
        &mut self.modes
    }

    pub fn inverse(&self) -> ScalarField {
        let mut buf = self.modes.clone();
        fft_all_axes(&mut buf, self.grid.points(), false);
        ScalarField {
            grid: self.grid.clone(),
            values: buf.iter().map(|c| c.re).collect(),
        }
    }

    /// First derivative along `axis`: multiply mode `k` by `i·k_axis`, with
    /// the Nyquist mode zeroed on even axes.
    pub fn derivative(&self, axis: usize) -> Result<Spectrum> {
        self.grid.check_axis(axis)?;
        let n_axis = self.grid.points()[axis];
        let mut out = self.clone();
        visit_modes(self.grid.points(), |flat, kx, ky, kz| {
            let k = [kx, ky, kz][axis];
            // Recover the storage index along `axis` from the wavenumber to
            // detect the Nyquist mode.
            let idx = if k >= 0.0 { k } else { k + n_axis as f64 } as usize;
            let factor = if is_nyquist(n_axis, idx) {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(0.0, k)
            };
            out.modes[flat] *= factor;
        });
        Ok(out)
    }

    /// Multiply each mode by `−|k|²`.
    pub fn laplacian(&self) -> Spectrum {
        let mut out = self.clone();
        visit_modes(self.grid.points(), |flat, kx, ky, kz| {
            out.modes[flat] *= -(kx * kx + ky * ky + kz * kz);
        });
        out
    }

    /// Multiply each mode by `|k|⁴`.
    pub fn bilaplacian(&self) -> Spectrum {
        let mut out = self.clone();
        visit_modes(self.grid.points(), |flat, kx, ky, kz| {
            let k2 = kx * kx + ky * ky + kz * kz;
            out.modes[flat] *= k2 * k2;
        });
        out
    }

    /// Apply the 2/3-rule: zero every mode with `|kᵢ| > Nᵢ/3` on some axis.
    pub fn dealias(&self) -> Spectrum {
        let mut out = self.clone();
        let points = self.grid.points().to_vec();
        visit_modes(&points, |flat, kx, ky, kz| {
            let ks = [kx, ky, kz];
            for (axis, &n) in points.iter().enumerate() {
                if ks[axis].abs() > n as f64 / 3.0 {
                    out.modes[flat] = Complex64::new(0.0, 0.0);
                    break;
                }
            }
        });
        out
    }

    /// Parseval `L²` norm squared: `∫ f² = (2π)^d Σ_k |f̂_k|²`.
    pub fn l2_norm_sq(&self) -> f64 {
        let sum: f64 = self.modes.iter().map(|m| m.norm_sqr()).sum();
        sum * self.grid.volume()
    }

    /// `‖∇f‖² = (2π)^d Σ_k |k|² |f̂_k|²`.
    pub fn grad_norm_sq(&self) -> f64 {
        let mut sum = 0.0;
        visit_modes(self.grid.points(), |flat, kx, ky, kz| {
            sum += (kx * kx + ky * ky + kz * kz) * self.modes[flat].norm_sqr();
        });
        sum * self.grid.volume()
    }

    /// `‖Δf‖² = (2π)^d Σ_k |k|⁴ |f̂_k|²`.
    pub fn lap_norm_sq(&self) -> f64 {
        let mut sum = 0.0;
        visit_modes(self.grid.points(), |flat, kx, ky, kz| {
            let k2 = kx * kx + ky * ky + kz * kz;
            sum += k2 * k2 * self.modes[flat].norm_sqr();
        });
        sum * self.grid.volume()
    }

    /// Multiply mode `k` by `p(|k|²)`.
    pub fn apply_symbol(&self, p: &OperatorSymbol) -> Spectrum {
        let mut out = self.clone();
        visit_modes(self.grid.points(), |flat, kx, ky, kz| {
            out.modes[flat] *= p.eval(kx * kx + ky * ky + kz * kz);
        });
        out
    }

    /// Divide mode `k` by `p(|k|²)`; requires a strictly positive symbol.
    pub fn solve_symbol(&self, p: &OperatorSymbol) -> Result<Spectrum> {
        if p.c0 <= 0.0 {
            return Err(Error::SymbolNotInvertible { c0: p.c0 });
        }
        let mut out = self.clone();
        visit_modes(self.grid.points(), |flat, kx, ky, kz| {
            out.modes[flat] /= p.eval(kx * kx + ky * ky + kz * kz);
        });
        Ok(out)
    }
}

impl std::ops::Add for &Spectrum {
    type Output = Spectrum;
    fn add(self, rhs: &Spectrum) -> Spectrum {
        assert_eq!(self.grid, rhs.grid, "spectrum add on mismatched grids");
        let mut out = self.clone();
        for (o, m) in out.modes.iter_mut().zip(&rhs.modes) {
            *o += m;
        }
        out
    }
}

impl std::ops::Sub for &Spectrum {
    type Output = Spectrum;
    fn sub(self, rhs: &Spectrum) -> Spectrum {
        assert_eq!(self.grid, rhs.grid, "spectrum sub on mismatched grids");
        let mut out = self.clone();
        for (o, m) in out.modes.iter_mut().zip(&rhs.modes) {
            *o -= m;
        }
        out
    }
}

impl std::ops::Mul<f64> for &Spectrum {
    type Output = Spectrum;
    fn mul(self, rhs: f64) -> Spectrum {
        let mut out = self.clone();
        for o in &mut out.modes {
            *o *= rhs;
        }
        out
    }
}

/// The symbol `p(|k|²) = c0 + c1|k|² + c2|k|⁴ + c3|k|⁶` of the operator
/// `c0 − c1Δ + c2Δ² − c3Δ³`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorSymbol {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

impl OperatorSymbol {
    /// All coefficients must be nonnegative; `c0 > 0` is additionally
    /// required for `solve_symbol`.
    pub fn new(c0: f64, c1: f64, c2: f64, c3: f64) -> Result<Self> {
        for (index, value) in [(0, c0), (1, c1), (2, c2), (3, c3)] {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::NegativeSymbolCoefficient { index, value });
            }
        }
        Ok(OperatorSymbol { c0, c1, c2, c3 })
    }

    pub fn eval(&self, k2: f64) -> f64 {
        self.c0 + k2 * (self.c1 + k2 * (self.c2 + k2 * self.c3))
    }
}
