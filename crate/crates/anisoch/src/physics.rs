//! Model kernels for the anisotropic Cahn-Hilliard free energy
//!
//! ```text
//! E(φ) = ∫ γ(n) (½|∇φ|² + F(φ)/ε²) dx + (β/2) ∫ G(φ) dx
//! ```
//!
//! with the fourfold anisotropy `γ(n) = 1 + α(4Σᵢnᵢ⁴ − 3)`, the double well
//! `F(φ) = ¼(φ²−1)²`, and either the linear regularization `G = (Δφ)²` or the
//! Willmore regularization `G = (Δφ − f(φ)/ε²)²`. The interface normal is
//! regularized as `n = ∇φ / sqrt(|∇φ|² + δ²)` so flat regions stay finite.
//!
//! Everything here is a pure function of its inputs; gradients, divergences
//! and Laplacians are spectral, all pointwise nonlinearities are evaluated in
//! real space.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ScalarField, VectorField};

/// Which regularization closes the energy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegKind {
    /// Bi-Laplacian penalty `(β/2)∫(Δφ)²`.
    LinearReg,
    /// Curvature penalty `(β/2)∫(Δφ − f/ε²)²`.
    Willmore,
}

/// Physical and numerical model parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelParams {
    /// Interface width ε.
    pub eps: f64,
    /// Anisotropy strength α.
    pub alpha: f64,
    /// Regularization magnitude β.
    pub beta: f64,
    /// Stabilizer on the identity difference term.
    pub s1: f64,
    /// Stabilizer on the Laplacian difference term.
    pub s2: f64,
    /// Stabilizer on the bi-Laplacian difference term.
    pub s3: f64,
    /// Constant mobility M₀.
    pub m0: f64,
    /// SAV shift B keeping the radicand positive.
    pub b: f64,
    /// Normal regularization δ in `sqrt(|∇φ|² + δ²)`.
    pub delta_n: f64,
    /// Regularization kind.
    pub kind: RegKind,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams::defaults(RegKind::LinearReg)
    }
}

impl ModelParams {
    /// The default parameter set used throughout the experiments:
    /// ε = 6e-2, α = 0.3, β = 6e-4, S₁ = S₂ = 2, S₃ = 1e-3, M₀ = 1, B = 1.
    pub fn defaults(kind: RegKind) -> Self {
        ModelParams {
            eps: 6e-2,
            alpha: 0.3,
            beta: 6e-4,
            s1: 2.0,
            s2: 2.0,
            s3: 1e-3,
            m0: 1.0,
            b: 1.0,
            delta_n: 1e-6,
            kind,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [("eps", self.eps), ("m0", self.m0), ("b", self.b)];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be finite and > 0, got {v}"
                )));
            }
        }
        let nonneg = [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("s1", self.s1),
            ("s2", self.s2),
            ("s3", self.s3),
            ("delta_n", self.delta_n),
        ];
        for (name, v) in nonneg {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be finite and >= 0, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Split of the free energy into its anisotropic and regularization parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyBreakdown {
    /// `∫ γ(n)(½|∇φ|² + F/ε²)`.
    pub aniso_part: f64,
    /// `(β/2)∫G`.
    pub reg_part: f64,
    pub total: f64,
}

/// `F = ¼(φ²−1)²`, `f = F′ = φ³−φ`, `f′ = 3φ²−1`, pointwise.
pub fn double_well(phi: &ScalarField) -> (ScalarField, ScalarField, ScalarField) {
    let cap = phi.map(|p| {
        let q = p * p - 1.0;
        0.25 * q * q
    });
    let f = phi.map(|p| p * (p * p - 1.0));
    let fprime = phi.map(|p| 3.0 * p * p - 1.0);
    (cap, f, fprime)
}

/// Regularized unit normal `n = ∇φ / sqrt(|∇φ|² + δ²)`.
///
/// With `δ = 0` any node where `∇φ` vanishes is rejected rather than letting
/// a 0/0 slip through.
pub fn unit_normal(grad_phi: &VectorField, delta: f64) -> Result<VectorField> {
    let mag2 = grad_phi.magnitude_sq();
    if delta == 0.0 && mag2.values().iter().any(|&m| m == 0.0) {
        return Err(Error::NonFinite {
            stage: "unit_normal: |∇φ| = 0 with δ = 0",
        });
    }
    let d2 = delta * delta;
    let inv_len = mag2.map(|m| 1.0 / (m + d2).sqrt());
    let components = grad_phi
        .components()
        .iter()
        .map(|c| c * &inv_len)
        .collect();
    VectorField::new(components)
}

/// Fourfold anisotropy `γ(n) = 1 + α(4Σᵢnᵢ⁴ − 3)`.
pub fn gamma(n: &VectorField, alpha: f64) -> ScalarField {
    let mut quartic = ScalarField::zeros(n.grid());
    for c in n.components() {
        for (q, &v) in quartic.values_mut().iter_mut().zip(c.values()) {
            *q += v * v * v * v;
        }
    }
    quartic.map(|s| 1.0 + alpha * (4.0 * s - 3.0))
}

/// Gradient of γ with respect to the normal: component `i` is `16 α nᵢ³`.
pub fn gamma_n_gradient(n: &VectorField, alpha: f64) -> VectorField {
    let components = n
        .components()
        .iter()
        .map(|c| c.map(|v| 16.0 * alpha * v * v * v))
        .collect();
    VectorField::new(components).expect("components share the normal's grid")
}

/// The vector field entering the anisotropic chemical potential:
///
/// ```text
/// m = γ(n) ∇φ + (P ∇ₙγ / |∇φ|_δ) (½|∇φ|² + F/ε²),  P = I − nnᵀ
/// ```
///
/// `m` is the exact gradient-part of the variational derivative of the
/// δ-regularized anisotropic energy, which is what makes the finite-difference
/// variational checks converge at second order.
pub fn m_field(phi: &ScalarField, params: &ModelParams) -> Result<VectorField> {
    let grad = phi.gradient();
    m_field_from_grad(phi, &grad, params)
}

fn m_field_from_grad(
    phi: &ScalarField,
    grad: &VectorField,
    params: &ModelParams,
) -> Result<VectorField> {
    let dim = grad.dim();
    let n = unit_normal(grad, params.delta_n)?;
    let gam = gamma(&n, params.alpha);
    let dgam = gamma_n_gradient(&n, params.alpha);
    let (cap, _, _) = double_well(phi);
    let mag2 = grad.magnitude_sq();
    let inv_eps2 = 1.0 / (params.eps * params.eps);
    let d2 = params.delta_n * params.delta_n;

    let len = phi.grid().len();
    let mut comps: Vec<Vec<f64>> = vec![Vec::with_capacity(len); dim];
    for idx in 0..len {
        // n·∇ₙγ once per node, then project: (P v)ᵢ = vᵢ − nᵢ (n·v).
        let mut n_dot_dg = 0.0;
        for a in 0..dim {
            n_dot_dg += n.component(a).values()[idx] * dgam.component(a).values()[idx];
        }
        let pot = 0.5 * mag2.values()[idx] + cap.values()[idx] * inv_eps2;
        let inv_len = 1.0 / (mag2.values()[idx] + d2).sqrt();
        let g = gam.values()[idx];
        for a in 0..dim {
            let proj = dgam.component(a).values()[idx] - n.component(a).values()[idx] * n_dot_dg;
            comps[a].push(g * grad.component(a).values()[idx] + proj * inv_len * pot);
        }
    }

    let fields = comps
        .into_iter()
        .map(|v| ScalarField::new(phi.grid().clone(), v))
        .collect::<Result<Vec<_>>>()
        .map_err(|_| Error::NonFinite {
            stage: "m_field: non-finite output (δ too small?)",
        })?;
    VectorField::new(fields)
}

/// Anisotropic part of the chemical potential, `(1/ε²)γ(n)f(φ) − ∇·m`;
/// this is the numerator of the SAV field `H(φ)`.
pub fn variational_force(phi: &ScalarField, params: &ModelParams) -> Result<ScalarField> {
    let grad = phi.gradient();
    let n = unit_normal(&grad, params.delta_n)?;
    let gam = gamma(&n, params.alpha);
    let (_, f, _) = double_well(phi);
    let m = m_field_from_grad(phi, &grad, params)?;
    let div_m = m.divergence();
    let inv_eps2 = 1.0 / (params.eps * params.eps);
    let mut out = gam.zip_map(&f, |g, fv| g * fv * inv_eps2);
    out.axpy(-1.0, &div_m);
    Ok(out)
}

/// Willmore regularization force `β(Δ − f′/ε²)(Δφ − f/ε²)`, computed by
/// first forming `w = Δφ − f/ε²` and then `β(Δw − f′ w/ε²)`.
pub fn willmore_force(phi: &ScalarField, params: &ModelParams) -> ScalarField {
    let inv_eps2 = 1.0 / (params.eps * params.eps);
    let (_, f, fprime) = double_well(phi);
    let mut w = phi.laplacian();
    w.axpy(-inv_eps2, &f);
    let mut out = w.laplacian();
    let damp = fprime.zip_map(&w, |fp, wv| fp * wv * inv_eps2);
    out.axpy(-1.0, &damp);
    out.scale(params.beta)
}

/// `w = Δφ − f(φ)/ε²`, the integrand root of the Willmore penalty.
fn willmore_w(phi: &ScalarField, params: &ModelParams) -> ScalarField {
    let inv_eps2 = 1.0 / (params.eps * params.eps);
    let (_, f, _) = double_well(phi);
    let mut w = phi.laplacian();
    w.axpy(-inv_eps2, &f);
    w
}

/// Total free energy split into anisotropic and regularization parts.
pub fn original_energy(phi: &ScalarField, params: &ModelParams) -> Result<EnergyBreakdown> {
    let aniso_part = aniso_energy(phi, params)?;
    let reg_part = match params.kind {
        RegKind::LinearReg => {
            let lap = phi.laplacian();
            0.5 * params.beta * lap.inner(&lap)
        }
        RegKind::Willmore => {
            let w = willmore_w(phi, params);
            0.5 * params.beta * w.inner(&w)
        }
    };
    Ok(EnergyBreakdown {
        aniso_part,
        reg_part,
        total: aniso_part + reg_part,
    })
}

/// `∫ γ(n)(½|∇φ|² + F/ε²)`.
pub fn aniso_energy(phi: &ScalarField, params: &ModelParams) -> Result<f64> {
    let grad = phi.gradient();
    let n = unit_normal(&grad, params.delta_n)?;
    let gam = gamma(&n, params.alpha);
    let (cap, _, _) = double_well(phi);
    let mag2 = grad.magnitude_sq();
    let inv_eps2 = 1.0 / (params.eps * params.eps);
    let integrand = ScalarField::new(
        phi.grid().clone(),
        gam.values()
            .iter()
            .zip(mag2.values())
            .zip(cap.values())
            .map(|((&g, &m2), &fc)| g * (0.5 * m2 + fc * inv_eps2))
            .collect(),
    )?;
    Ok(integrand.integrate())
}

/// Radicand of the auxiliary variable: the nonlinear energy part plus `B`.
/// For the linear regularization only the anisotropic energy enters; for
/// Willmore the curvature penalty is included too.
pub fn sav_radicand(phi: &ScalarField, params: &ModelParams) -> Result<f64> {
    let mut radicand = aniso_energy(phi, params)? + params.b;
    if params.kind == RegKind::Willmore {
        let w = willmore_w(phi, params);
        radicand += 0.5 * params.beta * w.inner(&w);
    }
    Ok(radicand)
}

/// The SAV nonlinear field (`H(φ)` for the linear regularization, `Z(φ)` for
/// Willmore): the relevant force numerator over the square root of the
/// radicand. Also returns the radicand itself.
pub fn sav_field(phi: &ScalarField, params: &ModelParams) -> Result<(ScalarField, f64)> {
    let radicand = sav_radicand(phi, params)?;
    if !(radicand > 0.0) {
        return Err(Error::RadicandNotPositive { value: radicand });
    }
    let mut numerator = variational_force(phi, params)?;
    if params.kind == RegKind::Willmore {
        numerator.axpy(1.0, &willmore_force(phi, params));
    }
    let field = numerator.scale(1.0 / radicand.sqrt());
    field.check_finite("sav_field")?;
    Ok((field, radicand))
}

/// `U(0) = sqrt(radicand at φ⁰)`.
pub fn u_initial(phi0: &ScalarField, params: &ModelParams) -> Result<f64> {
    let radicand = sav_radicand(phi0, params)?;
    if !(radicand > 0.0) {
        return Err(Error::RadicandNotPositive { value: radicand });
    }
    Ok(radicand.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_grid, GridSpec};
    use std::f64::consts::PI;

    fn grid2(n: usize) -> GridSpec {
        make_grid(2, &[n, n]).unwrap()
    }

    fn const_vector(grid: &GridSpec, comps: &[f64]) -> VectorField {
        VectorField::new(
            comps
                .iter()
                .map(|&c| ScalarField::constant(grid, c))
                .collect(),
        )
        .unwrap()
    }

    fn max_abs_diff(a: &ScalarField, b: &ScalarField) -> f64 {
        a.values()
            .iter()
            .zip(b.values())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn double_well_values() {
        let g = grid2(4);
        for (p, want_cap, want_f, want_fp) in [
            (1.0, 0.0, 0.0, 2.0),
            (-1.0, 0.0, 0.0, 2.0),
            (0.0, 0.25, 0.0, -1.0),
            (2.0, 2.25, 6.0, 11.0),
        ] {
            let (cap, f, fp) = double_well(&ScalarField::constant(&g, p));
            assert!((cap.values()[0] - want_cap).abs() < 1e-15);
            assert!((f.values()[0] - want_f).abs() < 1e-15);
            assert!((fp.values()[0] - want_fp).abs() < 1e-15);
        }
    }

    #[test]
    fn unit_normal_normalizes() {
        let g = grid2(4);
        let n = unit_normal(&const_vector(&g, &[3.0, 4.0]), 0.0).unwrap();
        assert!((n.component(0).values()[0] - 0.6).abs() < 1e-15);
        assert!((n.component(1).values()[0] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn unit_normal_regularized_zero() {
        let g = grid2(4);
        let n = unit_normal(&const_vector(&g, &[0.0, 0.0]), 1e-6).unwrap();
        assert_eq!(n.component(0).values()[0], 0.0);
        assert_eq!(n.component(1).values()[0], 0.0);
        assert!(unit_normal(&const_vector(&g, &[0.0, 0.0]), 0.0).is_err());
    }

    #[test]
    fn unit_normal_bounded_by_one() {
        let g = grid2(16);
        let phi = ScalarField::from_fn(&g, |x| (x[0].sin() * (2.0 * x[1]).cos()).tanh());
        let n = unit_normal(&phi.gradient(), 1e-6).unwrap();
        for m2 in n.magnitude_sq().values() {
            assert!(*m2 <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn gamma_axis_and_diagonal() {
        let g = grid2(4);
        let axis = gamma(&const_vector(&g, &[1.0, 0.0]), 0.3);
        assert!((axis.values()[0] - 1.3).abs() < 1e-14);
        let s = 1.0 / 2f64.sqrt();
        let diag = gamma(&const_vector(&g, &[s, s]), 0.3);
        assert!((diag.values()[0] - 0.7).abs() < 1e-14);
        let iso = gamma(&const_vector(&g, &[s, s]), 0.0);
        assert!((iso.values()[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn gamma_bounds_on_unit_vectors() {
        let g = grid2(4);
        let alpha = 0.3;
        // 2D: sweep the circle, expect 1−α ≤ γ ≤ 1+α.
        for i in 0..64 {
            let t = i as f64 / 64.0 * 2.0 * PI;
            let gm = gamma(&const_vector(&g, &[t.cos(), t.sin()]), alpha);
            let v = gm.values()[0];
            assert!(v >= 1.0 - alpha - 1e-12 && v <= 1.0 + alpha + 1e-12);
        }
        // 3D minimum at the body diagonal: 1 − (5/3)α.
        let g3 = make_grid(3, &[4, 4, 4]).unwrap();
        let s = 1.0 / 3f64.sqrt();
        let gm = gamma(&const_vector(&g3, &[s, s, s]), alpha);
        assert!((gm.values()[0] - (1.0 - 5.0 / 3.0 * alpha)).abs() < 1e-13);
    }

    #[test]
    fn gamma_n_gradient_matches_finite_differences() {
        let g = grid2(4);
        let alpha = 0.3;
        let at = gamma_n_gradient(&const_vector(&g, &[1.0, 0.0]), alpha);
        assert!((at.component(0).values()[0] - 4.8).abs() < 1e-13);
        assert!(at.component(1).values()[0].abs() < 1e-15);
        assert!(
            gamma_n_gradient(&const_vector(&g, &[0.3, -0.4]), 0.0)
                .component(0)
                .values()[0]
                == 0.0
        );

        // Centered finite differences of γ in n-space, O(h²) agreement.
        let n0 = [0.4, -0.7];
        let h = 1e-5;
        let analytic = gamma_n_gradient(&const_vector(&g, &n0), alpha);
        for axis in 0..2 {
            let mut plus = n0;
            let mut minus = n0;
            plus[axis] += h;
            minus[axis] -= h;
            let gp = gamma(&const_vector(&g, &plus), alpha).values()[0];
            let gm = gamma(&const_vector(&g, &minus), alpha).values()[0];
            let fd = (gp - gm) / (2.0 * h);
            assert!(
                (fd - analytic.component(axis).values()[0]).abs() < 1e-8,
                "axis {axis}: fd {fd} vs analytic {}",
                analytic.component(axis).values()[0]
            );
        }
    }

    #[test]
    fn m_field_isotropic_is_gradient() {
        let g = grid2(16);
        let mut params = ModelParams::defaults(RegKind::LinearReg);
        params.alpha = 0.0;
        let phi = ScalarField::from_fn(&g, |x| x[0].sin() * x[1].cos());
        let m = m_field(&phi, &params).unwrap();
        let grad = phi.gradient();
        for a in 0..2 {
            assert!(max_abs_diff(m.component(a), grad.component(a)) < 1e-12);
        }
    }

    #[test]
    fn m_field_vanishes_on_constant() {
        let g = grid2(8);
        let params = ModelParams::defaults(RegKind::LinearReg);
        let m = m_field(&ScalarField::constant(&g, 0.3), &params).unwrap();
        for a in 0..2 {
            assert!(m.component(a).values().iter().all(|v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn variational_force_constant_field() {
        let g = grid2(8);
        let params = ModelParams::defaults(RegKind::LinearReg);
        // φ ≡ c: force is the constant γ(n=0)·f(c)/ε² with γ(0) = 1 − 3α.
        let c = 0.5;
        let force = variational_force(&ScalarField::constant(&g, c), &params).unwrap();
        let want = (1.0 - 3.0 * params.alpha) * (c * c * c - c) / (params.eps * params.eps);
        for v in force.values() {
            assert!((v - want).abs() < 1e-9 * want.abs().max(1.0));
        }
        // Pure phases: f(±1) = 0 and m = 0.
        for c in [1.0, -1.0] {
            let force = variational_force(&ScalarField::constant(&g, c), &params).unwrap();
            assert!(force.values().iter().all(|v| v.abs() < 1e-10));
        }
    }

    #[test]
    fn isotropic_force_closed_form() {
        let g = grid2(24);
        let mut params = ModelParams::defaults(RegKind::LinearReg);
        params.alpha = 0.0;
        let phi = ScalarField::from_fn(&g, |x| 0.3 * x[0].sin() * x[1].cos());
        let force = variational_force(&phi, &params).unwrap();
        let (_, f, _) = double_well(&phi);
        let mut exact = f.scale(1.0 / (params.eps * params.eps));
        exact.axpy(-1.0, &phi.laplacian());
        assert!(max_abs_diff(&force, &exact) < 1e-10);
    }

    #[test]
    fn willmore_force_trivial_cases() {
        let g = grid2(8);
        let params = ModelParams::defaults(RegKind::Willmore);
        for c in [1.0, -1.0] {
            let out = willmore_force(&ScalarField::constant(&g, c), &params);
            assert!(out.values().iter().all(|v| v.abs() < 1e-12));
        }
        let mut nobeta = params;
        nobeta.beta = 0.0;
        let phi = ScalarField::from_fn(&g, |x| x[0].sin());
        let out = willmore_force(&phi, &nobeta);
        assert!(out.values().iter().all(|v| v.abs() < 1e-15));
    }

    /// Centered finite difference of an energy functional in the direction ψ.
    fn directional_fd(
        energy: impl Fn(&ScalarField) -> f64,
        phi: &ScalarField,
        psi: &ScalarField,
        s: f64,
    ) -> f64 {
        let mut plus = phi.clone();
        plus.axpy(s, psi);
        let mut minus = phi.clone();
        minus.axpy(-s, psi);
        (energy(&plus) - energy(&minus)) / (2.0 * s)
    }

    /// A perturbation pair with overlapping harmonic content and shifted
    /// phases, so the directional derivative cannot vanish by orthogonality
    /// and the finite-difference comparison is non-vacuous.
    fn fd_pair(g: &GridSpec) -> (ScalarField, ScalarField) {
        let phi = ScalarField::from_fn(g, |x| {
            0.5 * x[0].sin() * x[1].cos()
                + 0.1 * (2.0 * x[1] + 0.3).sin()
                + 0.07 * (x[0] + 2.0 * x[1] + 0.4).cos()
        });
        let psi = ScalarField::from_fn(g, |x| {
            0.3 * x[0].sin() * x[1].cos()
                + 0.2 * (x[0] + 0.7).cos() * (2.0 * x[1] + 0.3).sin()
                + 0.15 * (x[0] + x[1]).sin()
        });
        (phi, psi)
    }

    #[test]
    fn variational_force_matches_energy_derivative() {
        let g = grid2(24);
        let params = ModelParams::defaults(RegKind::LinearReg);
        let (phi, psi) = fd_pair(&g);
        let force = variational_force(&phi, &params).unwrap();
        let rhs = force.inner(&psi);
        assert!(rhs.abs() > 100.0, "degenerate direction, rhs = {rhs}");
        let energy = |f: &ScalarField| aniso_energy(f, &params).unwrap();

        let err = |s: f64| (directional_fd(energy, &phi, &psi, s) - rhs).abs();
        let (e0, e1, e2, e3) = (err(1e-2), err(5e-3), err(1e-3), err(1e-4));
        assert!(e2 < 1e-2, "mismatch {e2} at s = 1e-3 against rhs {rhs}");
        // Centered differences decay at second order until roundoff.
        let order_a = (e0 / e1).log2();
        let order_b = (e2 / e3).log10();
        assert!((1.8..=2.2).contains(&order_a), "order {order_a} ({e0}, {e1})");
        assert!((1.8..=2.2).contains(&order_b), "order {order_b} ({e2}, {e3})");
    }

    #[test]
    fn willmore_force_matches_energy_derivative() {
        let g = grid2(24);
        let params = ModelParams::defaults(RegKind::Willmore);
        let (phi, psi) = fd_pair(&g);
        let force = willmore_force(&phi, &params);
        let rhs = force.inner(&psi);
        assert!(rhs.abs() > 10.0, "degenerate direction, rhs = {rhs}");
        let energy = |f: &ScalarField| {
            let w = willmore_w(f, &params);
            0.5 * params.beta * w.inner(&w)
        };
        let err = |s: f64| (directional_fd(energy, &phi, &psi, s) - rhs).abs();
        let (e0, e1, e2) = (err(1e-2), err(5e-3), err(1e-3));
        assert!(e2 < 1e-3, "mismatch {e2} at s = 1e-3 against rhs {rhs}");
        let order = (e0 / e1).log2();
        assert!((1.8..=2.2).contains(&order), "order {order} ({e0}, {e1})");
    }

    #[test]
    fn original_energy_pure_phase_is_zero() {
        let g = grid2(8);
        for kind in [RegKind::LinearReg, RegKind::Willmore] {
            let params = ModelParams::defaults(kind);
            let e = original_energy(&ScalarField::constant(&g, 1.0), &params).unwrap();
            assert!(e.total.abs() < 1e-12);
        }
    }

    #[test]
    fn original_energy_isotropic_quadrature() {
        // α = 0, β = 0, φ = sin x on [0,2π]²:
        //   ∫ ½|∇φ|² = π², ∫ F(sin x) dx dy = 3π²/8.
        let g = grid2(32);
        let mut params = ModelParams::defaults(RegKind::LinearReg);
        params.alpha = 0.0;
        params.beta = 0.0;
        let phi = ScalarField::from_fn(&g, |x| x[0].sin());
        let e = original_energy(&phi, &params).unwrap();
        let want = PI * PI + 3.0 * PI * PI / 8.0 / (params.eps * params.eps);
        assert!(
            (e.aniso_part - want).abs() < 1e-9 * want,
            "aniso {} vs quadrature {want}",
            e.aniso_part
        );
        assert_eq!(e.reg_part, 0.0);
    }

    #[test]
    fn sav_field_pure_phase() {
        let g = grid2(8);
        for kind in [RegKind::LinearReg, RegKind::Willmore] {
            let params = ModelParams::defaults(kind);
            let (h, radicand) = sav_field(&ScalarField::constant(&g, 1.0), &params).unwrap();
            assert!((radicand - 1.0).abs() < 1e-12);
            assert!(h.values().iter().all(|v| v.abs() < 1e-10));
            assert!((u_initial(&ScalarField::constant(&g, 1.0), &params).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn u_initial_monotone_in_b() {
        let g = grid2(16);
        let phi = ScalarField::from_fn(&g, |x| x[0].sin() * x[1].cos());
        let mut params = ModelParams::defaults(RegKind::LinearReg);
        let mut last = 0.0;
        for b in [0.5, 1.0, 2.0, 4.0] {
            params.b = b;
            let u = u_initial(&phi, &params).unwrap();
            assert!(u > last);
            last = u;
        }
    }

    #[test]
    fn sav_consistency_with_energy() {
        // U² − B must reproduce the nonlinear energy part for both kinds.
        let g = grid2(24);
        let phi = ScalarField::from_fn(&g, |x| 0.7 * x[0].sin() * x[1].cos());
        for kind in [RegKind::LinearReg, RegKind::Willmore] {
            let params = ModelParams::defaults(kind);
            let u = u_initial(&phi, &params).unwrap();
            let e = original_energy(&phi, &params).unwrap();
            let want = match kind {
                RegKind::LinearReg => e.aniso_part,
                RegKind::Willmore => e.aniso_part + e.reg_part,
            };
            assert!(
                ((u * u - params.b) - want).abs() <= 1e-10 * want.abs().max(1.0),
                "{kind:?}: U²−B = {} vs energy {want}",
                u * u - params.b
            );
        }
    }

    #[test]
    fn willmore_sav_field_cross_check() {
        // Compose independently validated kernels: numerator from
        // variational_force + willmore_force, radicand from the energy.
        let g = grid2(24);
        let mut params = ModelParams::defaults(RegKind::Willmore);
        params.alpha = 0.0;
        let phi = ScalarField::from_fn(&g, |x| x[0].sin());
        let (z, radicand) = sav_field(&phi, &params).unwrap();
        let e = original_energy(&phi, &params).unwrap();
        let want_rad = e.aniso_part + e.reg_part + params.b;
        assert!((radicand - want_rad).abs() < 1e-9 * want_rad);
        let mut numerator = variational_force(&phi, &params).unwrap();
        numerator.axpy(1.0, &willmore_force(&phi, &params));
        let expect = numerator.scale(1.0 / want_rad.sqrt());
        assert!(max_abs_diff(&z, &expect) < 1e-10);
    }

    #[test]
    fn params_validation() {
        let mut p = ModelParams::defaults(RegKind::LinearReg);
        assert!(p.validate().is_ok());
        p.alpha = -0.1;
        assert!(p.validate().is_err());
        p.alpha = 0.3;
        p.eps = 0.0;
        assert!(p.validate().is_err());
    }
}
