//! Pseudo-spectral solver for the anisotropic Cahn-Hilliard equation on
//! periodic domains, with two stabilized BDF2 time integrators built on a
//! scalar auxiliary variable (SAV) reformulation: one for the linear
//! (bi-Laplacian) regularization and one for the nonlinear Willmore
//! regularization.
//!
//! The crate is organized as follows:
//!
//! * [`grid`] — uniform periodic grids on `[0, 2π]^d`, FFT-based transforms,
//!   spectral differential operators, quadrature, and diagonal solves of
//!   even-order constant-coefficient operators.
//! * [`physics`] — pointwise/variational kernels: double-well potential,
//!   fourfold anisotropy, the vector field `m`, energies, and the SAV
//!   nonlinear fields.
//! * [`stepper`] — the two BDF2 SAV schemes realized through a three-solve
//!   decoupling with a rank-one scalar correction.
//! * [`diagnostics`] — energy/mass accounting, the discrete energy-law
//!   check, variational-derivative checks, a dense-solve oracle, and the
//!   temporal convergence harness.
//! * [`experiments`] — the library of initial conditions and the
//!   manufactured-solution forcing.
//! * [`config`], [`output`] — run configuration, CSV/snapshot/image writers.

pub mod config;
pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod grid;
pub mod output;
pub mod physics;
pub mod stepper;

pub use error::{Error, Result};
pub use grid::{make_grid, GridSpec, OperatorSymbol, ScalarField, Spectrum, VectorField};
pub use physics::{EnergyBreakdown, ModelParams, RegKind};
pub use stepper::{SavState, StepOutput, StepperConfig};
