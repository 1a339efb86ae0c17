//! C interface. Objects are opaque handles created and destroyed through
//! this API; every fallible call returns a `WtStatus` and stores a message
//! retrievable with `wt_last_error`. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use wt_empc::empc::{ControlCommand, EmpcController, Measurements};
use wt_empc::sim::{compute_metrics, run_simulation, Metrics, Scenario, SimConfig, SimLog};
use wt_empc::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WtStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Infeasible = 4,
    Solver = 5,
    Io = 6,
    Numerical = 7,
    Panic = 8,
}

/// Simulation configuration.
pub struct WtConfig {
    inner: SimConfig,
}

/// One controller instance.
pub struct WtController {
    inner: EmpcController,
    n_locations: usize,
}

/// Log and metrics of a finished closed-loop run.
pub struct WtRun {
    log: SimLog,
    metrics: Metrics,
    aborted: bool,
}

/// Actuator command, SI units.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct WtCommand {
    pub torque_g: f64,
    pub pitch: f64,
    pub p_r: f64,
    pub p_g: f64,
    pub k_pred: f64,
    /// Nonzero when the previous command was repeated.
    pub held: i32,
}

/// Scalar summary of a run.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct WtRunSummary {
    pub steps: usize,
    pub plateaus: usize,
    pub energy_j: f64,
    pub mean_solve_time_s: f64,
    pub max_solve_time_s: f64,
    pub degraded_steps: usize,
    pub held_steps: usize,
    pub max_terminal_gap: f64,
    /// Nonzero when the run stopped early.
    pub aborted: i32,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> WtStatus {
    match e {
        Error::Config(_) | Error::Parse { .. } => WtStatus::Config,
        Error::InfeasibleTarget(_) => WtStatus::Infeasible,
        Error::Qp(_) => WtStatus::Solver,
        Error::Io(_) | Error::Csv(_) | Error::Json(_) => WtStatus::Io,
        Error::InvalidParameter(_) | Error::Dimension(_) | Error::Domain(_) => WtStatus::InvalidArgument,
        _ => WtStatus::Numerical,
    }
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), (WtStatus, String)>) -> WtStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => WtStatus::Ok,
        Ok(Err((s, msg))) => {
            set_error(msg);
            s
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            WtStatus::Panic
        }
    }
}

fn lib(e: Error) -> (WtStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (WtStatus, String) {
    (WtStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (WtStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| (WtStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length without the NUL.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn wt_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr(), buf as *mut u8, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Default configuration (staircase 6 to 17 m/s, N_p = 100, multi-mode).
#[no_mangle]
pub extern "C" fn wt_config_default() -> *mut WtConfig {
    Box::into_raw(Box::new(WtConfig { inner: SimConfig::default() }))
}

/// Parses a TOML configuration. Relative table paths resolve against the
/// working directory.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wt_config_parse(text: *const c_char, out: *mut *mut WtConfig) -> WtStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let text = str_arg(text, "text")?;
        let cfg = SimConfig::parse(text, Path::new(".")).map_err(lib)?;
        *out = Box::into_raw(Box::new(WtConfig { inner: cfg }));
        Ok(())
    })
}

/// Sets the prediction horizon.
///
/// # Safety
/// `cfg` must come from this API.
#[no_mangle]
pub unsafe extern "C" fn wt_config_set_horizon(cfg: *mut WtConfig, horizon: usize) -> WtStatus {
    guard(|| {
        let cfg = cfg.as_mut().ok_or_else(|| null("cfg"))?;
        if horizon == 0 {
            return Err((WtStatus::InvalidArgument, "horizon must be positive".into()));
        }
        cfg.inner.controller.horizon = horizon;
        Ok(())
    })
}

/// Replaces the wind profile by a constant speed for `duration` seconds.
///
/// # Safety
/// `cfg` must come from this API.
#[no_mangle]
pub unsafe extern "C" fn wt_config_set_constant_wind(cfg: *mut WtConfig, speed: f64, duration: f64) -> WtStatus {
    guard(|| {
        let cfg = cfg.as_mut().ok_or_else(|| null("cfg"))?;
        cfg.inner.wind = wt_empc::sim::WindProfile::constant(speed, duration).map_err(lib)?;
        Ok(())
    })
}

/// # Safety
/// `cfg` must be null or come from this API, and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn wt_config_free(cfg: *mut WtConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Builds a controller for the configured turbine and tower.
///
/// # Safety
/// `cfg` must come from this API and `out` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wt_controller_new(cfg: *const WtConfig, out: *mut *mut WtController) -> WtStatus {
    guard(|| {
        let cfg = cfg.as_ref().ok_or_else(|| null("cfg"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let c = &cfg.inner;
        let turbine = c.build_turbine().map_err(lib)?;
        let tower = c.tower.build().map_err(lib)?;
        let n_locations = tower.n_locations();
        let inner = EmpcController::new(c.controller.clone(), turbine, &tower).map_err(lib)?;
        *out = Box::into_raw(Box::new(WtController { inner, n_locations }));
        Ok(())
    })
}

/// Number of tower locations expected by `wt_controller_step`, base included.
///
/// # Safety
/// `ctrl` must be null or come from this API.
#[no_mangle]
pub unsafe extern "C" fn wt_controller_locations(ctrl: *const WtController) -> usize {
    ctrl.as_ref().map_or(0, |c| c.n_locations)
}

/// One control step from measured generator speed (rad/s) and tower
/// displacement / velocity at every location (m, m/s), at wind `v_w` (m/s).
///
/// # Safety
/// `x_p` and `v_p` must hold `n` values; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn wt_controller_step(
    ctrl: *mut WtController,
    omega_g: f64,
    x_p: *const f64,
    v_p: *const f64,
    n: usize,
    v_w: f64,
    out: *mut WtCommand,
) -> WtStatus {
    guard(|| {
        let ctrl = ctrl.as_mut().ok_or_else(|| null("ctrl"))?;
        if x_p.is_null() || v_p.is_null() || out.is_null() {
            return Err(null("x_p, v_p or out"));
        }
        if n != ctrl.n_locations {
            return Err((WtStatus::InvalidArgument, format!("expected {} locations, got {n}", ctrl.n_locations)));
        }
        let meas = Measurements {
            omega_g,
            x_p: std::slice::from_raw_parts(x_p, n).to_vec(),
            v_p: std::slice::from_raw_parts(v_p, n).to_vec(),
        };
        let c: ControlCommand = ctrl.inner.control_step(&meas, v_w).map_err(lib)?;
        *out = WtCommand {
            torque_g: c.torque_g,
            pitch: c.pitch,
            p_r: c.p_r,
            p_g: c.p_g,
            k_pred: c.k_pred,
            held: c.held as i32,
        };
        Ok(())
    })
}

/// # Safety
/// `ctrl` must be null or come from this API, and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn wt_controller_free(ctrl: *mut WtController) {
    if !ctrl.is_null() {
        drop(Box::from_raw(ctrl));
    }
}

/// Runs the configured closed-loop scenario.
///
/// # Safety
/// `cfg` must come from this API and `out` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wt_simulate(cfg: *const WtConfig, out: *mut *mut WtRun) -> WtStatus {
    guard(|| {
        let cfg = cfg.as_ref().ok_or_else(|| null("cfg"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let sc = Scenario::from_config(&cfg.inner).map_err(lib)?;
        let o = run_simulation(&sc).map_err(lib)?;
        let metrics =
            compute_metrics(&o.log, &sc.wind.plateaus(), &sc.settings, sc.controller.sample_time, &sc.turbine.params);
        *out = Box::into_raw(Box::new(WtRun { log: o.log, metrics, aborted: o.aborted.is_some() }));
        Ok(())
    })
}

/// # Safety
/// `run` must come from this API and `out` be valid.
#[no_mangle]
pub unsafe extern "C" fn wt_run_summary(run: *const WtRun, out: *mut WtRunSummary) -> WtStatus {
    guard(|| {
        let run = run.as_ref().ok_or_else(|| null("run"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let m = &run.metrics;
        *out = WtRunSummary {
            steps: m.steps,
            plateaus: m.plateaus.len(),
            energy_j: m.energy_j,
            mean_solve_time_s: m.mean_solve_time_s,
            max_solve_time_s: m.max_solve_time_s,
            degraded_steps: m.degraded_steps,
            held_steps: m.held_steps,
            max_terminal_gap: m.max_terminal_gap,
            aborted: run.aborted as i32,
        };
        Ok(())
    })
}

/// Settled mean electrical power (W) of plateau `index`.
///
/// # Safety
/// `run` must come from this API and `out` be valid.
#[no_mangle]
pub unsafe extern "C" fn wt_run_plateau_power(run: *const WtRun, index: usize, out: *mut f64) -> WtStatus {
    guard(|| {
        let run = run.as_ref().ok_or_else(|| null("run"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let p = run
            .metrics
            .plateaus
            .get(index)
            .ok_or_else(|| (WtStatus::InvalidArgument, format!("no plateau {index}")))?;
        *out = p.p_g;
        Ok(())
    })
}

/// Writes the time series as CSV.
///
/// # Safety
/// `run` must come from this API and `path` be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn wt_run_write_csv(run: *const WtRun, path: *const c_char) -> WtStatus {
    guard(|| {
        let run = run.as_ref().ok_or_else(|| null("run"))?;
        let path = str_arg(path, "path")?;
        run.log.write_csv(Path::new(path)).map_err(lib)
    })
}

/// # Safety
/// `run` must be null or come from this API, and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn wt_run_free(run: *mut WtRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}
