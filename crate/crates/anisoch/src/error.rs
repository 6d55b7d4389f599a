use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the solver stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grid dimension must be 2 or 3, got {0}")]
    DimensionOutOfRange(usize),

    #[error("axis {axis} needs at least 4 points, got {points}")]
    TooFewPoints { axis: usize, points: usize },

    #[error("axis {axis} out of range for a {dim}-dimensional grid")]
    AxisOutOfRange { axis: usize, dim: usize },

    #[error("field/grid size mismatch: expected {expected} values, got {got}")]
    SizeMismatch { expected: usize, got: usize },

    #[error("grids of the operands do not match")]
    GridMismatch,

    #[error("non-finite values encountered at stage `{stage}`")]
    NonFinite { stage: &'static str },

    #[error("operator symbol with c0 = {c0} is not invertible (need c0 > 0)")]
    SymbolNotInvertible { c0: f64 },

    #[error("negative coefficient {value} at position c{index} of an operator symbol")]
    NegativeSymbolCoefficient { index: usize, value: f64 },

    #[error(
        "auxiliary-variable radicand is not positive ({value}); \
         anisotropy too strong for the chosen shift, or bad parameters"
    )]
    RadicandNotPositive { value: f64 },

    #[error("rank-one scalar denominator {value} fell below 1; operator assembly is broken")]
    DenominatorBelowOne { value: f64 },

    #[error("invalid model parameter: {0}")]
    InvalidParameter(String),

    #[error("step count must be at least 1")]
    ZeroSteps,

    #[error("time step {step} failed: {source}")]
    StepFailed {
        step: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("dense oracle limited to {limit} nodes, grid has {nodes}")]
    OracleTooLarge { nodes: usize, limit: usize },

    #[error("dense oracle matrix is singular")]
    SingularOracleMatrix,

    #[error("scenario `{0}` is unknown")]
    UnknownScenario(String),

    #[error("scenario `{scenario}` needs a {expected}-dimensional grid, got {got} axes")]
    ScenarioDimension {
        scenario: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("manufactured forcing requires the isotropic setting (alpha = 0), got alpha = {0}")]
    AnisotropicForcing(f64),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("snapshot `{path}`: {reason}")]
    Snapshot { path: PathBuf, reason: String },

    #[error("energy trace `{path}`: {reason}")]
    Trace { path: PathBuf, reason: String },

    #[error("slice index {index} out of range for axis {axis} with {points} points")]
    SliceIndexOutOfRange {
        axis: usize,
        index: usize,
        points: usize,
    },

    #[error("time step ladder: {0}")]
    Ladder(String),
}

pub type Result<T> = std::result::Result<T, Error>;
