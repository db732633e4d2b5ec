//! C ABI for the `feedopt` simulator and certificate checker.
//!
//! Every function returns a [`FeedoptStatus`]. On failure the message is
//! available from [`feedopt_last_error`] on the calling thread. Handles are
//! opaque and must be released with the matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::fs::File;
use std::io::BufWriter;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use feedopt::config::{load_scenario, parse_scenario};
use feedopt::experiments::run_experiment;
use feedopt::output::{write_csv, ArcSeries, RunSummary};
use feedopt::report::{certificate_report, Analysis};
use feedopt::sim::{simulate, HybridArc, JumpKind, Scenario};
use feedopt::Error;

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeedoptStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    ParseError = 3,
    InvalidArgument = 4,
    NumericalError = 5,
    IoError = 6,
    UnknownExperiment = 7,
    OutOfRange = 8,
    BufferTooSmall = 9,
    Panic = 10,
}

/// A parsed scenario.
pub struct FeedoptScenario {
    inner: Scenario,
}

/// A simulated hybrid arc with its monitor series.
pub struct FeedoptArc {
    scenario: Scenario,
    arc: HybridArc,
    series: ArcSeries,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> FeedoptStatus {
    match e {
        Error::Parse { .. } => FeedoptStatus::ParseError,
        Error::Io(_) => FeedoptStatus::IoError,
        Error::UnknownExperiment(_) => FeedoptStatus::UnknownExperiment,
        Error::InvalidArgument(_)
        | Error::DimensionMismatch(_)
        | Error::InvalidRate(_)
        | Error::OutOfHorizon { .. }
        | Error::RestartConditionViolated { .. }
        | Error::StiffnessBudgetExceeded { .. }
        | Error::EmptyVarrhoWindow { .. }
        | Error::TimerOutOfRange { .. }
        | Error::JumpNotEnabled { .. } => FeedoptStatus::InvalidArgument,
        Error::NotHurwitz { .. }
        | Error::SingularSystem
        | Error::SingularA
        | Error::ConvergenceFailure
        | Error::NotSolvable(_) => FeedoptStatus::NumericalError,
    }
}

fn fail(status: FeedoptStatus, msg: impl Into<String>) -> FeedoptStatus {
    set_error(msg.into());
    status
}

/// Runs `f`, mapping errors and panics to status codes.
fn guard(f: impl FnOnce() -> Result<(), FeedoptStatus>) -> FeedoptStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            FeedoptStatus::Ok
        }
        Ok(Err(status)) => status,
        Err(_) => fail(FeedoptStatus::Panic, "internal panic"),
    }
}

fn lift<T>(r: feedopt::Result<T>) -> Result<T, FeedoptStatus> {
    r.map_err(|e| fail(status_of(&e), e.to_string()))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, FeedoptStatus> {
    if p.is_null() {
        return Err(fail(FeedoptStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(FeedoptStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, FeedoptStatus> {
    p.as_ref().ok_or_else(|| fail(FeedoptStatus::NullPointer, format!("{what} is null")))
}

fn out_arg<T>(p: *mut T, what: &str) -> Result<(), FeedoptStatus> {
    if p.is_null() {
        Err(fail(FeedoptStatus::NullPointer, format!("{what} is null")))
    } else {
        Ok(())
    }
}

fn to_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).expect("nul bytes removed").into_raw()
}

/// Message of the last call on this thread, or null if it succeeded. Valid
/// until the next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn feedopt_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn feedopt_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn feedopt_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Loads a scenario file.
///
/// # Safety
/// `path` is a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn feedopt_scenario_load(path: *const c_char, out: *mut *mut FeedoptScenario) -> FeedoptStatus {
    guard(|| {
        out_arg(out, "out")?;
        let path = str_arg(path, "path")?;
        let inner = lift(load_scenario(Path::new(path)))?;
        *out = Box::into_raw(Box::new(FeedoptScenario { inner }));
        Ok(())
    })
}

/// Parses a scenario document held in memory.
///
/// # Safety
/// `text` is a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn feedopt_scenario_parse(text: *const c_char, out: *mut *mut FeedoptScenario) -> FeedoptStatus {
    guard(|| {
        out_arg(out, "out")?;
        let text = str_arg(text, "text")?;
        let inner = lift(parse_scenario(text, "<memory>"))?;
        *out = Box::into_raw(Box::new(FeedoptScenario { inner }));
        Ok(())
    })
}

/// # Safety
/// `sc` comes from `feedopt_scenario_load`/`_parse` or is null.
#[no_mangle]
pub unsafe extern "C" fn feedopt_scenario_free(sc: *mut FeedoptScenario) {
    if !sc.is_null() {
        drop(Box::from_raw(sc));
    }
}

/// Plant dimensions and mode count. Any output pointer may be null.
///
/// # Safety
/// `sc` is a live handle.
#[no_mangle]
pub unsafe extern "C" fn feedopt_scenario_dims(
    sc: *const FeedoptScenario,
    n: *mut usize,
    m: *mut usize,
    p: *mut usize,
    q: *mut usize,
    modes: *mut usize,
) -> FeedoptStatus {
    guard(|| {
        let plant = &ref_arg(sc, "scenario")?.inner.plant;
        for (ptr, v) in [(n, plant.n()), (m, plant.m()), (p, plant.p()), (q, plant.q()), (modes, plant.modes.len())] {
            if !ptr.is_null() {
                *ptr = v;
            }
        }
        Ok(())
    })
}

/// Evaluates the certificates. `all_pass` receives 1 or 0; `report`, if not
/// null, receives the text report (free with `feedopt_string_free`).
///
/// # Safety
/// `sc` is a live handle; `all_pass` is writable.
#[no_mangle]
pub unsafe extern "C" fn feedopt_scenario_check(
    sc: *const FeedoptScenario,
    all_pass: *mut i32,
    report: *mut *mut c_char,
) -> FeedoptStatus {
    guard(|| {
        out_arg(all_pass, "all_pass")?;
        let sc = ref_arg(sc, "scenario")?;
        let rep = lift(certificate_report(&sc.inner))?;
        *all_pass = i32::from(rep.all_pass());
        if !report.is_null() {
            *report = to_c_string(rep.render_text() + &rep.render_kv());
        }
        Ok(())
    })
}

/// Simulates the scenario. Divergence is not an error; see `feedopt_arc_summary`.
///
/// # Safety
/// `sc` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn feedopt_simulate(sc: *const FeedoptScenario, out: *mut *mut FeedoptArc) -> FeedoptStatus {
    guard(|| {
        out_arg(out, "out")?;
        let scenario = ref_arg(sc, "scenario")?.inner.clone();
        lift(scenario.validate())?;
        let analysis = lift(Analysis::new(&scenario))?;
        let arc = lift(simulate(&scenario))?;
        let series = ArcSeries::new(&scenario, &analysis, &arc);
        *out = Box::into_raw(Box::new(FeedoptArc { scenario, arc, series }));
        Ok(())
    })
}

/// # Safety
/// `arc` comes from `feedopt_simulate` or is null.
#[no_mangle]
pub unsafe extern "C" fn feedopt_arc_free(arc: *mut FeedoptArc) {
    if !arc.is_null() {
        drop(Box::from_raw(arc));
    }
}

/// Number of samples; 0 for a null handle.
///
/// # Safety
/// `arc` is a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn feedopt_arc_len(arc: *const FeedoptArc) -> usize {
    arc.as_ref().map_or(0, |a| a.arc.samples.len())
}

/// Length of the state vector: n plus the controller dimension.
///
/// # Safety
/// `arc` is a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn feedopt_arc_state_dim(arc: *const FeedoptArc) -> usize {
    arc.as_ref().and_then(|a| a.arc.samples.first()).map_or(0, |s| s.state.len())
}

/// Reads sample `index`. `state` receives `feedopt_arc_state_dim` values
/// and may be null to skip; `sigma` is 1-based.
///
/// # Safety
/// `arc` is a live handle; output pointers are writable; `state` holds
/// `state_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn feedopt_arc_sample(
    arc: *const FeedoptArc,
    index: usize,
    t: *mut f64,
    j: *mut usize,
    sigma: *mut usize,
    err_track: *mut f64,
    state: *mut f64,
    state_len: usize,
) -> FeedoptStatus {
    guard(|| {
        let a = ref_arg(arc, "arc")?;
        let s = a.arc.samples.get(index).ok_or_else(|| {
            fail(
                FeedoptStatus::OutOfRange,
                format!("index {index} out of range for {} samples", a.arc.samples.len()),
            )
        })?;
        if !state.is_null() {
            if state_len < s.state.len() {
                return Err(fail(
                    FeedoptStatus::BufferTooSmall,
                    format!("state buffer holds {state_len}, need {}", s.state.len()),
                ));
            }
            ptr::copy_nonoverlapping(s.state.as_ptr(), state, s.state.len());
        }
        if !t.is_null() {
            *t = s.time.t;
        }
        if !j.is_null() {
            *j = s.time.j;
        }
        if !sigma.is_null() {
            *sigma = s.sigma + 1;
        }
        if !err_track.is_null() {
            *err_track = a.series.err_track[index];
        }
        Ok(())
    })
}

/// Run summary. `diverged_at` is NaN unless `diverged` is 1. Output pointers
/// may be null.
///
/// # Safety
/// `arc` is a live handle.
#[no_mangle]
pub unsafe extern "C" fn feedopt_arc_summary(
    arc: *const FeedoptArc,
    final_error: *mut f64,
    plant_switches: *mut usize,
    controller_resets: *mut usize,
    diverged: *mut i32,
    diverged_at: *mut f64,
) -> FeedoptStatus {
    guard(|| {
        let a = ref_arg(arc, "arc")?;
        let s = RunSummary::new(&a.arc, &a.series);
        if !final_error.is_null() {
            *final_error = s.final_error;
        }
        if !plant_switches.is_null() {
            *plant_switches = a.arc.count(JumpKind::PlantSwitch);
        }
        if !controller_resets.is_null() {
            *controller_resets = a.arc.count(JumpKind::ControllerReset);
        }
        if !diverged.is_null() {
            *diverged = i32::from(s.divergence.is_some());
        }
        if !diverged_at.is_null() {
            *diverged_at = s.divergence.unwrap_or(f64::NAN);
        }
        Ok(())
    })
}

/// Writes the arc as CSV.
///
/// # Safety
/// `arc` is a live handle; `path` is a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn feedopt_arc_write_csv(arc: *const FeedoptArc, path: *const c_char) -> FeedoptStatus {
    guard(|| {
        let a = ref_arg(arc, "arc")?;
        let path = str_arg(path, "path")?;
        let file = File::create(path).map_err(|e| fail(FeedoptStatus::IoError, format!("{path}: {e}")))?;
        lift(write_csv(BufWriter::new(file), &a.scenario, &a.arc, &a.series))
    })
}

/// Runs a named experiment, writing its CSVs and summary into `out_dir`.
/// `all_pass` receives 1 if every check passed.
///
/// # Safety
/// `name` and `out_dir` are NUL-terminated strings; `all_pass` is writable.
#[no_mangle]
pub unsafe extern "C" fn feedopt_experiment_run(
    name: *const c_char,
    seed: u64,
    out_dir: *const c_char,
    all_pass: *mut i32,
) -> FeedoptStatus {
    guard(|| {
        out_arg(all_pass, "all_pass")?;
        let name = str_arg(name, "name")?;
        let dir = str_arg(out_dir, "out_dir")?;
        let res = lift(run_experiment(name, seed))?;
        lift(res.write(Path::new(dir)))?;
        *all_pass = i32::from(res.all_pass());
        Ok(())
    })
}
