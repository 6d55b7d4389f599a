//! C ABI over the solver: an opaque simulation handle, integer status
//! codes, and a thread-local last-error message.
//!
//! The header `include/anisoch.h` is regenerated by `build.rs` (cbindgen)
//! on every build. Contract highlights:
//!
//! * Every function is safe to call with NULL handles/pointers; it reports
//!   [`AchStatus::NullPointer`] instead of crashing.
//! * On any non-OK status the thread-local message returned by
//!   [`ach_last_error_message`] describes the failure. The pointer stays
//!   valid until the next failing call on the same thread.
//! * A handle is created from the same TOML document the CLI `run` command
//!   accepts. The scenario, grid, time step, seed, and model parameters are
//!   taken from it; `t_final`, `output_dir`, and the check flags are the
//!   batch driver's business and are ignored here.
//! * Handles are not thread-safe; drive each handle from one thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use anisoch::config::parse_config;
use anisoch::experiments::{initial_condition, manufactured_forcing, Scenario};
use anisoch::output::write_snapshot;
use anisoch::physics::original_energy;
use anisoch::stepper::{bootstrap, step, StepperConfig};
use anisoch::{ModelParams, SavState};

/// Status code returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AchStatus {
    /// Success.
    Ok = 0,
    /// A required pointer argument was NULL.
    NullPointer = 1,
    /// Malformed input (bad UTF-8, bad configuration, bad axis, ...).
    InvalidArgument = 2,
    /// The solver reported an error; see `ach_last_error_message`.
    Runtime = 3,
    /// The caller's buffer is too small for the requested data.
    BufferTooSmall = 4,
    /// A filesystem operation failed.
    Io = 5,
    /// An internal invariant failed (a bug; please report it).
    Panic = 6,
}

/// Opaque simulation handle. Create with `ach_sim_new_from_config`,
/// destroy with `ach_sim_free`.
pub struct AchSimulation {
    state: SavState,
    params: ModelParams,
    cfg: StepperConfig,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> =
        RefCell::new(CString::new("no error").expect("static string"));
}

fn set_error(msg: impl Into<String>) {
    let sanitized = msg.into().replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).expect("NUL bytes replaced");
    });
}

/// Run `body` with panic containment, translating panics into
/// [`AchStatus::Panic`] instead of unwinding across the FFI boundary.
fn guarded(body: impl FnOnce() -> AchStatus) -> AchStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".to_string());
            set_error(format!("internal panic: {msg}"));
            AchStatus::Panic
        }
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ach_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message describing the most recent failure on this thread. Never NULL;
/// the pointer is invalidated by the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ach_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Create a simulation from a TOML run configuration (see the crate README
/// for the grammar). On success writes the new handle to `out`.
///
/// # Safety
/// `toml_text` must be a NUL-terminated string; `out` must be valid for one
/// pointer write.
#[no_mangle]
pub unsafe extern "C" fn ach_sim_new_from_config(
    toml_text: *const c_char,
    out: *mut *mut AchSimulation,
) -> AchStatus {
    if toml_text.is_null() || out.is_null() {
        set_error("toml_text and out must be non-NULL");
        return AchStatus::NullPointer;
    }
    let text = match CStr::from_ptr(toml_text).to_str() {
        Ok(t) => t.to_owned(),
        Err(_) => {
            set_error("configuration text is not valid UTF-8");
            return AchStatus::InvalidArgument;
        }
    };
    guarded(|| {
        let cfg = match parse_config(&text) {
            Ok(c) => c,
            Err(e) => {
                set_error(e.to_string());
                return AchStatus::InvalidArgument;
            }
        };
        let build = || -> anisoch::Result<AchSimulation> {
            let spec = cfg.scenario_spec()?;
            let params = spec.params;
            let mut step_cfg = StepperConfig::new(cfg.dt);
            if spec.name == Scenario::ExactTrig {
                manufactured_forcing(0.0, &spec.grid, &params)?;
                step_cfg = step_cfg.with_forcing(move |t, grid| {
                    manufactured_forcing(t, grid, &params).expect("validated at creation")
                });
            }
            let phi0 = initial_condition(&spec)?;
            let state = bootstrap(phi0, &params)?;
            Ok(AchSimulation {
                state,
                params,
                cfg: step_cfg,
            })
        };
        match build() {
            Ok(sim) => {
                out.write(Box::into_raw(Box::new(sim)));
                AchStatus::Ok
            }
            Err(e) => {
                set_error(e.to_string());
                AchStatus::Runtime
            }
        }
    })
}

/// Advance the simulation by `n_steps` time steps.
///
/// # Safety
/// `sim` must be a live handle from `ach_sim_new_from_config`.
#[no_mangle]
pub unsafe extern "C" fn ach_sim_step(sim: *mut AchSimulation, n_steps: u64) -> AchStatus {
    let Some(sim) = sim.as_mut() else {
        set_error("sim must be non-NULL");
        return AchStatus::NullPointer;
    };
    guarded(|| {
        for _ in 0..n_steps {
            match step(&sim.state, &sim.cfg, &sim.params) {
                Ok(out) => sim.state = out.state,
                Err(e) => {
                    set_error(e.to_string());
                    return AchStatus::Runtime;
                }
            }
        }
        AchStatus::Ok
    })
}

unsafe fn scalar_query<T>(
    sim: *const AchSimulation,
    out: *mut T,
    compute: impl FnOnce(&AchSimulation) -> Result<T, (AchStatus, String)>,
) -> AchStatus {
    let Some(sim) = sim.as_ref() else {
        set_error("sim must be non-NULL");
        return AchStatus::NullPointer;
    };
    if out.is_null() {
        set_error("out must be non-NULL");
        return AchStatus::NullPointer;
    }
    guarded(|| match compute(sim) {
        Ok(v) => {
            out.write(v);
            AchStatus::Ok
        }
        Err((status, msg)) => {
            set_error(msg);
            status
        }
    })
}

/// Current simulation time.
///
/// # Safety
/// `sim` must be a live handle; `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn ach_sim_time(sim: *const AchSimulation, out: *mut f64) -> AchStatus {
    scalar_query(sim, out, |s| Ok(s.state.time))
}

/// Number of completed steps.
///
/// # Safety
/// `sim` must be a live handle; `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn ach_sim_step_count(
    sim: *const AchSimulation,
    out: *mut u64,
) -> AchStatus {
    scalar_query(sim, out, |s| Ok(s.state.step))
}

/// Original (physical) free energy of the current field.
///
/// # Safety
/// `sim` must be a live handle; `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn ach_sim_energy(sim: *const AchSimulation, out: *mut f64) -> AchStatus {
    scalar_query(sim, out, |s| {
        original_energy(&s.state.phi_n, &s.params)
            .map(|e| e.total)
            .map_err(|e| (AchStatus::Runtime, e.to_string()))
    })
}

/// Conserved quantity `∫φ` of the current field.
///
/// # Safety
/// `sim` must be a live handle; `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn ach_sim_mass(sim: *const AchSimulation, out: *mut f64) -> AchStatus {
    scalar_query(sim, out, |s| Ok(s.state.phi_n.integrate()))
}

/// Number of grid nodes (the length `ach_sim_copy_field` requires).
///
/// # Safety
/// `sim` must be a live handle; `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn ach_sim_field_len(
    sim: *const AchSimulation,
    out: *mut usize,
) -> AchStatus {
    scalar_query(sim, out, |s| Ok(s.state.phi_n.grid().len()))
}

/// Spatial dimension (2 or 3).
///
/// # Safety
/// `sim` must be a live handle; `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn ach_sim_grid_dim(
    sim: *const AchSimulation,
    out: *mut usize,
) -> AchStatus {
    scalar_query(sim, out, |s| Ok(s.state.phi_n.grid().dim()))
}

/// Grid points along `axis` (0-based).
///
/// # Safety
/// `sim` must be a live handle; `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn ach_sim_grid_points(
    sim: *const AchSimulation,
    axis: usize,
    out: *mut usize,
) -> AchStatus {
    scalar_query(sim, out, |s| {
        let grid = s.state.phi_n.grid();
        grid.points().get(axis).copied().ok_or((
            AchStatus::InvalidArgument,
            format!("axis {axis} out of range for a {}-dimensional grid", grid.dim()),
        ))
    })
}

/// Copy the current field (row-major node order) into `buffer`.
/// `len` must equal the value reported by `ach_sim_field_len`.
///
/// # Safety
/// `sim` must be a live handle; `buffer` must be valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn ach_sim_copy_field(
    sim: *const AchSimulation,
    buffer: *mut f64,
    len: usize,
) -> AchStatus {
    let Some(sim) = sim.as_ref() else {
        set_error("sim must be non-NULL");
        return AchStatus::NullPointer;
    };
    if buffer.is_null() {
        set_error("buffer must be non-NULL");
        return AchStatus::NullPointer;
    }
    let values = sim.state.phi_n.values();
    if len != values.len() {
        set_error(format!(
            "buffer has {len} slots, field needs exactly {}",
            values.len()
        ));
        return AchStatus::BufferTooSmall;
    }
    guarded(|| {
        std::ptr::copy_nonoverlapping(values.as_ptr(), buffer, values.len());
        AchStatus::Ok
    })
}

/// Write the current field to `path` in the solver's snapshot format
/// (`SAVFLD01`; readable by the library and by `read_snapshot`).
///
/// # Safety
/// `sim` must be a live handle; `path` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ach_sim_write_snapshot(
    sim: *const AchSimulation,
    path: *const c_char,
) -> AchStatus {
    let Some(sim) = sim.as_ref() else {
        set_error("sim must be non-NULL");
        return AchStatus::NullPointer;
    };
    if path.is_null() {
        set_error("path must be non-NULL");
        return AchStatus::NullPointer;
    }
    let path = match CStr::from_ptr(path).to_str() {
        Ok(p) => PathBuf::from(p),
        Err(_) => {
            set_error("path is not valid UTF-8");
            return AchStatus::InvalidArgument;
        }
    };
    guarded(|| match write_snapshot(&sim.state.phi_n, sim.state.time, &path) {
        Ok(()) => AchStatus::Ok,
        Err(e) => {
            set_error(e.to_string());
            AchStatus::Io
        }
    })
}

/// Destroy a handle. NULL is accepted and ignored.
///
/// # Safety
/// `sim` must be NULL or a live handle; it must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ach_sim_free(sim: *mut AchSimulation) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ffi::CString;
    use std::ptr;

    const CIRCLE_CFG: &str = r#"
scenario = "circle"
grid = [32, 32]
dt = 1e-3
t_final = 1e-2
output_dir = "unused"

[params]
"#;

    fn new_sim(text: &str) -> *mut AchSimulation {
        let ctext = CString::new(text).unwrap();
        let mut handle: *mut AchSimulation = ptr::null_mut();
        let status = unsafe { ach_sim_new_from_config(ctext.as_ptr(), &mut handle) };
        assert_eq!(status, AchStatus::Ok, "{}", last_error());
        assert!(!handle.is_null());
        handle
    }

    fn last_error() -> String {
        unsafe {
            CStr::from_ptr(ach_last_error_message())
                .to_string_lossy()
                .into_owned()
        }
    }

    #[test]
    fn lifecycle_and_energy_decay() {
        // 64² resolves the ε = 6e-2 interface; on an under-resolved grid
        // the original energy has no reason to decay.
        let sim = new_sim(
            r#"
scenario = "circle"
grid = [64, 64]
dt = 1e-4
t_final = 1e-3
output_dir = "unused"
"#,
        );
        unsafe {
            let mut e0 = 0.0;
            assert_eq!(ach_sim_energy(sim, &mut e0), AchStatus::Ok);
            assert_eq!(ach_sim_step(sim, 10), AchStatus::Ok);

            let mut e1 = 0.0;
            assert_eq!(ach_sim_energy(sim, &mut e1), AchStatus::Ok);
            assert!(e1 < e0, "energy should decay: {e0} -> {e1}");

            let mut t = 0.0;
            assert_eq!(ach_sim_time(sim, &mut t), AchStatus::Ok);
            assert!((t - 1e-3).abs() < 1e-12);

            let mut n = 0u64;
            assert_eq!(ach_sim_step_count(sim, &mut n), AchStatus::Ok);
            assert_eq!(n, 10);

            ach_sim_free(sim);
        }
    }

    #[test]
    fn field_copy_matches_library_run() {
        let sim = new_sim(CIRCLE_CFG);
        unsafe {
            assert_eq!(ach_sim_step(sim, 5), AchStatus::Ok);
            let mut len = 0usize;
            assert_eq!(ach_sim_field_len(sim, &mut len), AchStatus::Ok);
            assert_eq!(len, 32 * 32);
            let mut buf = vec![0.0f64; len];
            assert_eq!(
                ach_sim_copy_field(sim, buf.as_mut_ptr(), len),
                AchStatus::Ok
            );

            // Same trajectory straight through the library.
            let cfg = parse_config(CIRCLE_CFG).unwrap();
            let spec = cfg.scenario_spec().unwrap();
            let phi0 = initial_condition(&spec).unwrap();
            let reference = anisoch::stepper::run(
                phi0,
                &StepperConfig::new(cfg.dt),
                &spec.params,
                5,
                |_| {},
            )
            .unwrap();
            for (a, b) in buf.iter().zip(reference.phi_n.values()) {
                assert_eq!(a, b, "FFI trajectory must be bit-identical");
            }
            ach_sim_free(sim);
        }
    }

    #[test]
    fn grid_queries() {
        let sim = new_sim(CIRCLE_CFG);
        unsafe {
            let mut dim = 0usize;
            assert_eq!(ach_sim_grid_dim(sim, &mut dim), AchStatus::Ok);
            assert_eq!(dim, 2);
            let mut n = 0usize;
            assert_eq!(ach_sim_grid_points(sim, 1, &mut n), AchStatus::Ok);
            assert_eq!(n, 32);
            assert_eq!(
                ach_sim_grid_points(sim, 2, &mut n),
                AchStatus::InvalidArgument
            );
            let mut mass = 0.0;
            assert_eq!(ach_sim_mass(sim, &mut mass), AchStatus::Ok);
            assert!(mass.is_finite());
            ach_sim_free(sim);
        }
    }

    #[test]
    fn error_paths() {
        unsafe {
            let mut handle: *mut AchSimulation = ptr::null_mut();
            assert_eq!(
                ach_sim_new_from_config(ptr::null(), &mut handle),
                AchStatus::NullPointer
            );

            let bad = CString::new("scenario = \"circle\"").unwrap();
            assert_eq!(
                ach_sim_new_from_config(bad.as_ptr(), &mut handle),
                AchStatus::InvalidArgument
            );
            assert!(!last_error().is_empty());

            assert_eq!(ach_sim_step(ptr::null_mut(), 1), AchStatus::NullPointer);
            let mut t = 0.0;
            assert_eq!(ach_sim_time(ptr::null(), &mut t), AchStatus::NullPointer);

            let sim = new_sim(CIRCLE_CFG);
            let mut buf = vec![0.0f64; 7];
            assert_eq!(
                ach_sim_copy_field(sim, buf.as_mut_ptr(), buf.len()),
                AchStatus::BufferTooSmall
            );
            assert_eq!(
                ach_sim_write_snapshot(sim, ptr::null()),
                AchStatus::NullPointer
            );
            ach_sim_free(sim);
            ach_sim_free(ptr::null_mut());
        }
    }

    #[test]
    fn snapshot_round_trip() {
        let dir = std::env::temp_dir().join("anisoch_capi_snapshot_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("state.snap");
        let sim = new_sim(CIRCLE_CFG);
        unsafe {
            assert_eq!(ach_sim_step(sim, 3), AchStatus::Ok);
            let cpath = CString::new(path.to_str().unwrap()).unwrap();
            assert_eq!(ach_sim_write_snapshot(sim, cpath.as_ptr()), AchStatus::Ok);

            let (field, time) = anisoch::output::read_snapshot(&path).unwrap();
            let mut buf = vec![0.0f64; field.values().len()];
            assert_eq!(
                ach_sim_copy_field(sim, buf.as_mut_ptr(), buf.len()),
                AchStatus::Ok
            );
            assert_eq!(field.values(), &buf[..]);
            assert!((time - 3e-3).abs() < 1e-12);
            ach_sim_free(sim);
        }
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn version_and_default_message() {
        unsafe {
            let v = CStr::from_ptr(ach_version()).to_str().unwrap();
            assert_eq!(v, env!("CARGO_PKG_VERSION"));
            assert!(!CStr::from_ptr(ach_last_error_message())
                .to_str()
                .unwrap()
                .is_empty());
        }
    }
}
