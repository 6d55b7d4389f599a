//! Initial-condition library and the manufactured-solution machinery.
//!
//! Every scenario lives on `[0, 2π]^d`. The tanh-profile conditions place
//! circles/spheres of radius `r` via `−tanh((dist − r)/(w·ε))`; the spinodal
//! conditions perturb a uniform background with small seeded noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridSpec, ScalarField};
use crate::physics::{double_well, willmore_force, ModelParams, RegKind};

/// Catalog of runnable scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// `sin(x)cos(y)` — the manufactured-solution profile at t = 0.
    ExactTrig,
    /// One circle of radius 1.7 centered at (π, π), width 2ε.
    Circle,
    /// Two circles of radii 1.5 and 0.7, width 1.2ε, shifted by +1.
    TwoCircles,
    /// Uniform −0.4 background with 0.001-amplitude seeded noise (2D).
    Spinodal2d,
    /// One sphere of radius 1.7 centered at (π, π, π), width 2ε.
    Sphere,
    /// Two spheres of radii 1.5 and 0.7, width 1.2ε, shifted by +1.
    TwoSpheres,
    /// Uniform −0.4 background with 0.001-amplitude seeded noise (3D).
    Spinodal3d,
    /// The unperturbed mixture φ ≡ −0.4 (2D). A fixed point of the
    /// dynamics; useful as an end-to-end smoke test where every check must
    /// pass trivially.
    Constant,
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::ExactTrig => "exact_trig",
            Scenario::Circle => "circle",
            Scenario::TwoCircles => "two_circles",
            Scenario::Spinodal2d => "spinodal2d",
            Scenario::Sphere => "sphere",
            Scenario::TwoSpheres => "two_spheres",
            Scenario::Spinodal3d => "spinodal3d",
            Scenario::Constant => "constant",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Ok(match name {
            "exact_trig" => Scenario::ExactTrig,
            "circle" => Scenario::Circle,
            "two_circles" => Scenario::TwoCircles,
            "spinodal2d" => Scenario::Spinodal2d,
            "sphere" => Scenario::Sphere,
            "two_spheres" => Scenario::TwoSpheres,
            "spinodal3d" => Scenario::Spinodal3d,
            "constant" => Scenario::Constant,
            other => return Err(Error::UnknownScenario(other.to_string())),
        })
    }

    /// Spatial dimension the scenario is defined for.
    pub fn dim(&self) -> usize {
        match self {
            Scenario::ExactTrig
            | Scenario::Circle
            | Scenario::TwoCircles
            | Scenario::Spinodal2d
            | Scenario::Constant => 2,
            Scenario::Sphere | Scenario::TwoSpheres | Scenario::Spinodal3d => 3,
        }
    }
}

/// A fully specified experiment.
#[derive(Debug, Clone)]
pub struct ScenarioSpec {
    pub name: Scenario,
    pub grid: GridSpec,
    pub params: ModelParams,
    pub dt: f64,
    pub t_final: f64,
    /// Seed for the spinodal noise; ignored by deterministic scenarios.
    pub seed: u64,
}

fn check_dim(scenario: &'static str, expected: usize, grid: &GridSpec) -> Result<()> {
    if grid.dim() != expected {
        return Err(Error::ScenarioDimension {
            scenario,
            expected,
            got: grid.dim(),
        });
    }
    Ok(())
}

const PI: f64 = std::f64::consts::PI;

/// Centers and radii of the two-circle / two-sphere conditions.
const TWO_BODIES: [([f64; 3], f64); 2] = [
    ([PI - 0.7, PI - 0.6, PI], 1.5),
    ([PI + 1.65, PI + 1.6, PI], 0.7),
];

fn spinodal(grid: &GridSpec, seed: u64) -> ScalarField {
    // i.i.d. uniform noise on [−1, 1], drawn in row-major node order so the
    // field is bit-reproducible for a fixed seed.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..grid.len())
        .map(|_| -0.4 + 0.001 * rng.gen_range(-1.0..1.0))
        .collect();
    ScalarField::new(grid.clone(), values).expect("noise values are finite")
}

/// Build the initial condition for a scenario.
pub fn initial_condition(spec: &ScenarioSpec) -> Result<ScalarField> {
    let eps = spec.params.eps;
    let grid = &spec.grid;
    match spec.name {
        Scenario::ExactTrig => {
            check_dim("exact_trig", 2, grid)?;
            exact_solution(0.0, grid)
        }
        Scenario::Circle => {
            check_dim("circle", 2, grid)?;
            Ok(ScalarField::from_fn(grid, |x| {
                let r = ((x[0] - PI).powi(2) + (x[1] - PI).powi(2)).sqrt();
                -((r - 1.7) / (2.0 * eps)).tanh()
            }))
        }
        Scenario::Sphere => {
            check_dim("sphere", 3, grid)?;
            Ok(ScalarField::from_fn(grid, |x| {
                let r = ((x[0] - PI).powi(2) + (x[1] - PI).powi(2) + (x[2] - PI).powi(2)).sqrt();
                -((r - 1.7) / (2.0 * eps)).tanh()
            }))
        }
        Scenario::TwoCircles => {
            check_dim("two_circles", 2, grid)?;
            Ok(ScalarField::from_fn(grid, |x| {
                let mut v = 1.0;
                for (c, r) in TWO_BODIES {
                    let d = ((x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2)).sqrt();
                    v -= ((d - r) / (1.2 * eps)).tanh();
                }
                v
            }))
        }
        Scenario::TwoSpheres => {
            check_dim("two_spheres", 3, grid)?;
            Ok(ScalarField::from_fn(grid, |x| {
                let mut v = 1.0;
                for (c, r) in TWO_BODIES {
                    let d = ((x[0] - c[0]).powi(2)
                        + (x[1] - c[1]).powi(2)
                        + (x[2] - c[2]).powi(2))
                    .sqrt();
                    v -= ((d - r) / (1.2 * eps)).tanh();
                }
                v
            }))
        }
        Scenario::Spinodal2d => {
            check_dim("spinodal2d", 2, grid)?;
            Ok(spinodal(grid, spec.seed))
        }
        Scenario::Spinodal3d => {
            check_dim("spinodal3d", 3, grid)?;
            Ok(spinodal(grid, spec.seed))
        }
        Scenario::Constant => {
            check_dim("constant", 2, grid)?;
            Ok(ScalarField::constant(grid, -0.4))
        }
    }
}

/// The presumed exact solution of the manufactured test,
/// `φ(x, y, t) = sin(x)cos(y)cos(t)`.
pub fn exact_solution(t: f64, grid: &GridSpec) -> Result<ScalarField> {
    check_dim("exact_trig", 2, grid)?;
    let ct = t.cos();
    Ok(ScalarField::from_fn(grid, |x| {
        x[0].sin() * x[1].cos() * ct
    }))
}

/// Forcing that makes `sin(x)cos(y)cos(t)` solve the isotropic system:
/// `S = ∂ₜφₑ − M₀ Δμ(φₑ)` with `∂ₜφₑ = −sin(x)cos(y)sin(t)` analytic and
/// `μ(φₑ)` evaluated spectrally on the grid for the configured
/// regularization.
///
/// Defined only for the isotropic setting; anisotropic parameters are
/// rejected.
pub fn manufactured_forcing(t: f64, grid: &GridSpec, params: &ModelParams) -> Result<ScalarField> {
    if params.alpha != 0.0 {
        return Err(Error::AnisotropicForcing(params.alpha));
    }
    let phi_e = exact_solution(t, grid)?;
    let st = t.sin();
    let dphi_dt = ScalarField::from_fn(grid, |x| -x[0].sin() * x[1].cos() * st);
    Ok(forcing_from_profile(&phi_e, &dphi_dt, params))
}

/// `S = ∂ₜφ − M₀Δμ(φ)` for a prescribed profile and its time derivative.
pub(crate) fn forcing_from_profile(
    phi: &ScalarField,
    dphi_dt: &ScalarField,
    params: &ModelParams,
) -> ScalarField {
    let inv_eps2 = 1.0 / (params.eps * params.eps);
    let (_, f, _) = double_well(phi);
    // Isotropic chemical potential: f/ε² − Δφ plus the regularization force.
    let mut mu = f.scale(inv_eps2);
    mu.axpy(-1.0, &phi.laplacian());
    match params.kind {
        RegKind::LinearReg => mu.axpy(params.beta, &phi.bilaplacian()),
        RegKind::Willmore => mu.axpy(1.0, &willmore_force(phi, params)),
    }
    let mut out = dphi_dt.clone();
    out.axpy(-params.m0, &mu.laplacian());
    out
}
