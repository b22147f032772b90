//! C interface to the byzreg simulator and checker.
//!
//! Scenarios and results are opaque handles owned by the caller and released
//! with the matching `_free` function. Every fallible call returns a
//! [`ByzregStatus`]; on failure, [`byzreg_last_error_message`] describes the
//! most recent error on the calling thread. Strings returned through out
//! parameters are NUL-terminated UTF-8 and must be released with
//! [`byzreg_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use byzreg::checker::{check_trace, Report};
use byzreg::runner;
use byzreg::scenario::{Scenario, ScenarioError};
use byzreg::trace::Trace;

/// Opaque scenario handle.
pub struct ByzregScenario {
    inner: Scenario,
}

/// Opaque handle to one checked run.
pub struct ByzregResult {
    trace: Trace,
    report: Report,
    passed: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ByzregStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    ParseError = 3,
    InvalidScenario = 4,
    SimulationError = 5,
    Panic = 6,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn guard(f: impl FnOnce() -> Result<(), (ByzregStatus, String)>) -> ByzregStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ByzregStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            ByzregStatus::Panic
        }
    }
}

fn null(what: &str) -> (ByzregStatus, String) {
    (ByzregStatus::NullPointer, format!("{what} is null"))
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (ByzregStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| (ByzregStatus::InvalidUtf8, format!("{what}: {e}")))
}

fn scenario_status(e: ScenarioError) -> (ByzregStatus, String) {
    let status = match e {
        ScenarioError::Parse(_) => ByzregStatus::ParseError,
        _ => ByzregStatus::InvalidScenario,
    };
    (status, e.to_string())
}

fn to_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).expect("NUL bytes removed").into_raw()
}

/// Parses a scenario from TOML text.
///
/// # Safety
/// `toml` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn byzreg_scenario_from_toml(toml: *const c_char, out: *mut *mut ByzregScenario) -> ByzregStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let text = read_str(toml, "toml")?;
        let inner = Scenario::from_toml(text).map_err(scenario_status)?;
        *out = Box::into_raw(Box::new(ByzregScenario { inner }));
        Ok(())
    })
}

/// Loads a bundled scenario by name.
///
/// # Safety
/// `name` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn byzreg_scenario_bundled(name: *const c_char, out: *mut *mut ByzregScenario) -> ByzregStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let name = read_str(name, "name")?;
        let text = byzreg::scenario::bundled(name)
            .ok_or_else(|| (ByzregStatus::InvalidScenario, format!("unknown bundled scenario `{name}`")))?;
        let mut inner = Scenario::from_toml(text).map_err(scenario_status)?;
        inner.name = name.to_string();
        *out = Box::into_raw(Box::new(ByzregScenario { inner }));
        Ok(())
    })
}

/// Reports the scenario's seed range `[start, end)`.
///
/// # Safety
/// All pointers must be valid; `scenario` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn byzreg_scenario_seeds(
    scenario: *const ByzregScenario,
    start: *mut u64,
    end: *mut u64,
) -> ByzregStatus {
    guard(|| {
        let s = scenario.as_ref().ok_or_else(|| null("scenario"))?;
        if start.is_null() || end.is_null() {
            return Err(null("start/end"));
        }
        *start = s.inner.seeds.start;
        *end = s.inner.seeds.end;
        Ok(())
    })
}

/// Releases a scenario. Null is ignored.
///
/// # Safety
/// `scenario` must be null or come from this library and not be used again.
#[no_mangle]
pub unsafe extern "C" fn byzreg_scenario_free(scenario: *mut ByzregScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Simulates `seed` and checks the trace.
///
/// # Safety
/// `scenario` must come from this library and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn byzreg_run(
    scenario: *const ByzregScenario,
    seed: u64,
    out: *mut *mut ByzregResult,
) -> ByzregStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let s = scenario.as_ref().ok_or_else(|| null("scenario"))?;
        let config = s.inner.config(seed).map_err(|e| (ByzregStatus::InvalidScenario, e.to_string()))?;
        let trace = byzreg::run(&config).map_err(|e| (ByzregStatus::SimulationError, e.to_string()))?;
        let report = check_trace(&trace);
        let passed = runner::judge(&s.inner, &report);
        *out = Box::into_raw(Box::new(ByzregResult { trace, report, passed }));
        Ok(())
    })
}

/// Whether every verdict of the run passed.
///
/// # Safety
/// `result` must come from this library and `passed` must be valid.
#[no_mangle]
pub unsafe extern "C" fn byzreg_result_passed(result: *const ByzregResult, passed: *mut bool) -> ByzregStatus {
    guard(|| {
        let r = result.as_ref().ok_or_else(|| null("result"))?;
        if passed.is_null() {
            return Err(null("passed"));
        }
        *passed = r.passed;
        Ok(())
    })
}

/// Number of delivery steps the run took.
///
/// # Safety
/// `result` must come from this library and `steps` must be valid.
#[no_mangle]
pub unsafe extern "C" fn byzreg_result_steps(result: *const ByzregResult, steps: *mut u64) -> ByzregStatus {
    guard(|| {
        let r = result.as_ref().ok_or_else(|| null("result"))?;
        if steps.is_null() {
            return Err(null("steps"));
        }
        *steps = r.trace.footer.steps;
        Ok(())
    })
}

unsafe fn result_string(
    result: *const ByzregResult,
    out: *mut *mut c_char,
    f: impl FnOnce(&ByzregResult) -> Result<String, (ByzregStatus, String)>,
) -> ByzregStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let r = result.as_ref().ok_or_else(|| null("result"))?;
        *out = to_c_string(f(r)?);
        Ok(())
    })
}

/// Hex SHA-256 of the serialized trace.
///
/// # Safety
/// `result` must come from this library and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn byzreg_result_trace_hash(result: *const ByzregResult, out: *mut *mut c_char) -> ByzregStatus {
    result_string(result, out, |r| Ok(r.trace.hash()))
}

/// The trace as JSON lines.
///
/// # Safety
/// `result` must come from this library and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn byzreg_result_trace_jsonl(result: *const ByzregResult, out: *mut *mut c_char) -> ByzregStatus {
    result_string(result, out, |r| Ok(r.trace.to_jsonl()))
}

/// The checker report as JSON.
///
/// # Safety
/// `result` must come from this library and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn byzreg_result_report_json(result: *const ByzregResult, out: *mut *mut c_char) -> ByzregStatus {
    result_string(result, out, |r| {
        serde_json::to_string(&r.report).map_err(|e| (ByzregStatus::SimulationError, e.to_string()))
    })
}

/// Releases a result. Null is ignored.
///
/// # Safety
/// `result` must be null or come from this library and not be used again.
#[no_mangle]
pub unsafe extern "C" fn byzreg_result_free(result: *mut ByzregResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// Checks a recorded JSON-lines trace. Writes the report JSON to `report`
/// and whether every verdict passed to `passed`.
///
/// # Safety
/// `jsonl` must be a valid NUL-terminated string; other pointers valid.
#[no_mangle]
pub unsafe extern "C" fn byzreg_check_trace(
    jsonl: *const c_char,
    report: *mut *mut c_char,
    passed: *mut bool,
) -> ByzregStatus {
    guard(|| {
        if report.is_null() || passed.is_null() {
            return Err(null("report/passed"));
        }
        *report = ptr::null_mut();
        let text = read_str(jsonl, "jsonl")?;
        let trace = Trace::read_jsonl(text.as_bytes()).map_err(|e| (ByzregStatus::ParseError, e.to_string()))?;
        let r = check_trace(&trace);
        let json = serde_json::to_string(&r).map_err(|e| (ByzregStatus::SimulationError, e.to_string()))?;
        *passed = r.passed();
        *report = to_c_string(json);
        Ok(())
    })
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must be null or come from this library and not be used again.
#[no_mangle]
pub unsafe extern "C" fn byzreg_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Message of the last error on this thread, or null. The pointer stays
/// valid until the next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn byzreg_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version, statically allocated.
#[no_mangle]
pub extern "C" fn byzreg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
