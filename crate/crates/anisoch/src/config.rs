//! Run configuration: a flat, typed, line-oriented format (TOML) with a
//! `[params]` section for the model and a `[checks]` section for the
//! verification toggles.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::{Scenario, ScenarioSpec};
use crate::grid::make_grid;
use crate::physics::ModelParams;

/// Which verification passes a `run` performs after time stepping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Checks {
    /// Verify `Eⁿ⁺¹ − Eⁿ ≤ −δt·dissipationⁿ⁺¹` on the recorded trace.
    pub energy_law: bool,
    /// Verify `∫φ` stays constant to roundoff (skipped on forced runs).
    pub mass: bool,
    /// Re-run the first step through the dense solver and compare.
    pub oracle: bool,
}

impl Default for Checks {
    fn default() -> Self {
        Checks {
            energy_law: true,
            mass: true,
            oracle: false,
        }
    }
}

fn default_every() -> u64 {
    1
}

/// A complete, parseable description of one simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: Scenario,
    /// Grid extents per axis; the axis count fixes the dimension.
    pub grid: Vec<usize>,
    pub dt: f64,
    pub t_final: f64,
    #[serde(default)]
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Write a field snapshot every this many steps (and at the end).
    #[serde(default = "default_every")]
    pub snapshot_every: u64,
    /// Record an energy row every this many steps.
    #[serde(default = "default_every")]
    pub trace_every: u64,
    #[serde(default)]
    pub params: ModelParams,
    #[serde(default)]
    pub checks: Checks,
}

impl RunConfig {
    /// Validate every invariant that the type system cannot express.
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_final.is_finite() && self.t_final >= 0.0) {
            return Err(Error::Config(format!(
                "t_final must be nonnegative, got {}",
                self.t_final
            )));
        }
        if self.snapshot_every < 1 || self.trace_every < 1 {
            return Err(Error::Config(
                "snapshot_every and trace_every must be at least 1".into(),
            ));
        }
        let grid = make_grid(self.grid.len(), &self.grid)?;
        if grid.dim() != self.scenario.dim() {
            return Err(Error::Config(format!(
                "scenario `{}` is {}-dimensional but the grid has {} axes",
                self.scenario.name(),
                self.scenario.dim(),
                grid.dim()
            )));
        }
        Ok(())
    }

    /// Number of time steps implied by `t_final` and `dt`. `t_final` must be
    /// an (almost exact) whole multiple of `dt`.
    pub fn steps(&self) -> Result<u64> {
        if self.t_final == 0.0 {
            return Ok(0);
        }
        let n = (self.t_final / self.dt).round();
        if n < 1.0 || ((n * self.dt - self.t_final) / self.t_final).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "dt = {} does not divide t_final = {}",
                self.dt, self.t_final
            )));
        }
        Ok(n as u64)
    }

    /// Materialize the scenario description (validates first).
    pub fn scenario_spec(&self) -> Result<ScenarioSpec> {
        self.validate()?;
        Ok(ScenarioSpec {
            name: self.scenario,
            grid: make_grid(self.grid.len(), &self.grid)?,
            params: self.params,
            dt: self.dt,
            t_final: self.t_final,
            seed: self.seed,
        })
    }
}

/// Parse a configuration document and validate it.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

/// Serialize a configuration so that [`parse_config`] reproduces it exactly.
pub fn serialize_config(cfg: &RunConfig) -> Result<String> {
    toml::to_string_pretty(cfg).map_err(|e| Error::Config(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::RegKind;

    const MINIMAL: &str = r#"
scenario = "circle"
grid = [64, 64]
dt = 1e-4
t_final = 0.01
output_dir = "out"

[params]
"#;

    #[test]
    fn empty_params_section_gives_defaults() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.params.eps, 6e-2);
        assert_eq!(cfg.params.alpha, 0.3);
        assert_eq!(cfg.params.beta, 6e-4);
        assert_eq!(cfg.params.s1, 2.0);
        assert_eq!(cfg.params.s2, 2.0);
        assert_eq!(cfg.params.s3, 1e-3);
        assert_eq!(cfg.params.b, 1.0);
        assert_eq!(cfg.params.kind, RegKind::LinearReg);
        assert!(cfg.checks.energy_law && cfg.checks.mass && !cfg.checks.oracle);
        assert_eq!(cfg.snapshot_every, 1);
        assert_eq!(cfg.steps().unwrap(), 100);
    }

    #[test]
    fn missing_params_section_also_defaults() {
        let text = MINIMAL.replace("[params]\n", "");
        let cfg = parse_config(&text).unwrap();
        assert_eq!(cfg.params, ModelParams::default());
    }

    #[test]
    fn negative_alpha_rejected() {
        let text = format!("{MINIMAL}alpha = -0.1\n");
        let err = parse_config(&text).unwrap_err();
        assert!(err.to_string().contains("alpha"), "{err}");
    }

    #[test]
    fn round_trip_parses_equal() {
        let text = format!(
            "{MINIMAL}kind = \"willmore\"\neps = 0.05\n\n[checks]\noracle = true\n"
        );
        let cfg = parse_config(&text).unwrap();
        let serialized = serialize_config(&cfg).unwrap();
        let cfg2 = parse_config(&serialized).unwrap();
        assert_eq!(cfg, cfg2);
        assert_eq!(cfg2.params.kind, RegKind::Willmore);
        assert_eq!(cfg2.params.eps, 0.05);
        assert!(cfg2.checks.oracle);
    }

    #[test]
    fn unknown_keys_rejected() {
        let top = format!("wibble = 3\n{MINIMAL}");
        assert!(matches!(parse_config(&top), Err(Error::Config(_))));
        let nested = format!("{MINIMAL}wibble = 3\n");
        assert!(matches!(parse_config(&nested), Err(Error::Config(_))));
    }

    #[test]
    fn intervals_must_be_positive() {
        let text = MINIMAL.replace("output_dir = \"out\"", "output_dir = \"out\"\nsnapshot_every = 0");
        let err = parse_config(&text).unwrap_err();
        assert!(err.to_string().contains("snapshot_every"), "{err}");
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let text = MINIMAL.replace("grid = [64, 64]", "grid = [16, 16, 16]");
        let err = parse_config(&text).unwrap_err();
        assert!(err.to_string().contains("dimensional"), "{err}");
    }

    #[test]
    fn bad_dt_and_missing_fields() {
        let text = MINIMAL.replace("dt = 1e-4", "dt = 0.0");
        assert!(parse_config(&text).is_err());
        let text = MINIMAL.replace("dt = 1e-4\n", "");
        let err = parse_config(&text).unwrap_err();
        assert!(err.to_string().contains("dt"), "{err}");
    }

    #[test]
    fn steps_requires_divisibility() {
        let mut cfg = parse_config(MINIMAL).unwrap();
        cfg.dt = 3e-4;
        assert!(cfg.steps().is_err());
        cfg.t_final = 0.0;
        assert_eq!(cfg.steps().unwrap(), 0);
    }

    #[test]
    fn scenario_spec_carries_everything() {
        let cfg = parse_config(MINIMAL).unwrap();
        let spec = cfg.scenario_spec().unwrap();
        assert_eq!(spec.grid.points(), &[64, 64]);
        assert_eq!(spec.name, Scenario::Circle);
        assert_eq!(spec.dt, 1e-4);
    }

    #[test]
    fn three_dimensional_config() {
        let text = MINIMAL
            .replace("scenario = \"circle\"", "scenario = \"sphere\"")
            .replace("grid = [64, 64]", "grid = [32, 32, 32]");
        let cfg = parse_config(&text).unwrap();
        assert_eq!(cfg.scenario_spec().unwrap().grid.dim(), 3);
    }
}
