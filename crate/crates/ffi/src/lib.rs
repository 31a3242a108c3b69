//! C ABI over the `wdmqkd` analysis chain.
//!
//! Scenarios are opaque handles. Every call returns a [`WqStatus`]; on
//! failure `wq_last_error()` describes the problem until the next call on
//! the same thread. Strings returned through out-pointers are owned by the
//! caller and released with `wq_string_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use wdmqkd::config::parse_config;
use wdmqkd::detection::{combine_jitter, JitterChain};
use wdmqkd::link::plan_compensation;
use wdmqkd::optimizer::{sweep_skr, SweepSpec};
use wdmqkd::presets::preset;
use wdmqkd::scenario::{KeyMode, Scenario};
use wdmqkd::security::{finite_key, FiniteKeyProblem};
use wdmqkd::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WqStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidConfig = 3,
    Domain = 4,
    Fit = 5,
    Contract = 6,
    Io = 7,
    Format = 8,
    Panic = 9,
}

/// Opaque scenario handle.
pub struct WqScenario {
    inner: Scenario,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let c = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> WqStatus {
    match e {
        Error::Domain(_) => WqStatus::Domain,
        Error::Fit(_) => WqStatus::Fit,
        Error::Contract(_) => WqStatus::Contract,
        Error::Config(_) => WqStatus::InvalidConfig,
        Error::Io { .. } => WqStatus::Io,
        Error::Format(_) => WqStatus::Format,
    }
}

/// Runs `f`, mapping errors and panics to a status and the last-error slot.
fn guard(f: impl FnOnce() -> Result<(), WqStatus>) -> WqStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => WqStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic");
            WqStatus::Panic
        }
    }
}

fn fail(e: Error) -> WqStatus {
    set_error(e.to_string());
    status_of(&e)
}

unsafe fn read_str<'a>(p: *const c_char) -> Result<&'a str, WqStatus> {
    if p.is_null() {
        set_error("null string argument");
        return Err(WqStatus::NullPointer);
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error("argument is not valid UTF-8");
        WqStatus::InvalidUtf8
    })
}

unsafe fn scenario<'a>(s: *const WqScenario) -> Result<&'a Scenario, WqStatus> {
    s.as_ref().map(|h| &h.inner).ok_or_else(|| {
        set_error("null scenario handle");
        WqStatus::NullPointer
    })
}

unsafe fn put<T>(out: *mut T, v: T) -> Result<(), WqStatus> {
    if out.is_null() {
        set_error("null output pointer");
        return Err(WqStatus::NullPointer);
    }
    out.write(v);
    Ok(())
}

unsafe fn put_json(out: *mut *mut c_char, v: &impl serde::Serialize) -> Result<(), WqStatus> {
    let text = serde_json::to_string(v).map_err(|e| fail(Error::Format(e.to_string())))?;
    let c = CString::new(text).map_err(|e| fail(Error::Format(e.to_string())))?;
    put(out, c.into_raw())
}

fn build(cfg: Result<wdmqkd::config::ScenarioConfig, Error>) -> Result<Box<WqScenario>, WqStatus> {
    let inner = cfg.and_then(|c| Scenario::from_config(&c)).map_err(fail)?;
    Ok(Box::new(WqScenario { inner }))
}

/// Message for the last failed call on this thread, or null. Valid until the
/// next call.
#[no_mangle]
pub extern "C" fn wq_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Parses and validates scenario text; `*out` receives a new handle.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wq_scenario_from_config(text: *const c_char, out: *mut *mut WqScenario) -> WqStatus {
    guard(|| {
        let text = read_str(text)?;
        let h = build(parse_config(text))?;
        put(out, Box::into_raw(h))
    })
}

/// Loads a bundled scenario ("201km", "301km", "404km").
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wq_scenario_from_preset(name: *const c_char, out: *mut *mut WqScenario) -> WqStatus {
    guard(|| {
        let name = read_str(name)?;
        let h = build(preset(name))?;
        put(out, Box::into_raw(h))
    })
}

/// Releases a handle; null is ignored.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn wq_scenario_free(s: *mut WqScenario) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Releases a string returned by this library; null is ignored.
///
/// # Safety
/// `p` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn wq_string_free(p: *mut c_char) {
    if !p.is_null() {
        drop(CString::from_raw(p));
    }
}

/// Number of channel pairs in the scenario's plan.
///
/// # Safety
/// `s` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wq_channel_count(s: *const WqScenario, out: *mut usize) -> WqStatus {
    guard(|| put(out, scenario(s)?.plan.pairs.len()))
}

/// Two-photon loss total, dB.
///
/// # Safety
/// `s` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wq_loss_total_db(s: *const WqScenario, out: *mut f64) -> WqStatus {
    guard(|| put(out, scenario(s)?.loss_budget().total_db))
}

/// Loss table as JSON.
///
/// # Safety
/// `s` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wq_loss_budget_json(s: *const WqScenario, out: *mut *mut c_char) -> WqStatus {
    guard(|| put_json(out, &scenario(s)?.loss_budget()))
}

/// Per-channel dispersion and timing uncertainty as JSON.
///
/// # Safety
/// `s` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wq_timing_json(s: *const WqScenario, out: *mut *mut c_char) -> WqStatus {
    guard(|| {
        let rows = scenario(s)?.timing().map_err(fail)?;
        put_json(out, &rows)
    })
}

/// Device counts chosen by the compensation planner for the bare link,
/// targeting the central channel. `counts` receives `[DCM, DCF]`.
///
/// # Safety
/// `s` must be a live handle and `counts` point to two writable `usize`.
#[no_mangle]
pub unsafe extern "C" fn wq_plan_compensation(s: *const WqScenario, counts: *mut usize) -> WqStatus {
    guard(|| {
        let sc = scenario(s)?;
        let central = sc.plan.central().ok_or_else(|| fail(Error::Domain("empty channel plan".into())))?;
        let plan = plan_compensation(&sc.bare_link(), &sc.catalog(), central, &sc.plan, sc.config.catalog.residual_threshold_ps);
        put(counts, plan.counts[0])?;
        put(counts.add(1), plan.counts[1])
    })
}

/// Key report as JSON; `finite` selects the headline mode.
///
/// # Safety
/// `s` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wq_key_report_json(s: *const WqScenario, finite: bool, out: *mut *mut c_char) -> WqStatus {
    guard(|| {
        let mode = if finite { KeyMode::Finite } else { KeyMode::Asymptotic };
        let r = scenario(s)?.key_report(mode).map_err(fail)?;
        put_json(out, &r)
    })
}

/// Sweep optimum as JSON (`rate`, `width_ps`, `qber`, `skr`).
///
/// # Safety
/// `s` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wq_optimize_json(s: *const WqScenario, out: *mut *mut c_char) -> WqStatus {
    guard(|| {
        let spec = SweepSpec::from_scenario(scenario(s)?).map_err(fail)?;
        let r = sweep_skr(&spec).map_err(fail)?;
        put_json(out, &r.argmax)
    })
}

/// Root-sum-square of `len` jitter FWHMs.
///
/// # Safety
/// `fwhms` must point to `len` readable doubles and `out` be valid.
#[no_mangle]
pub unsafe extern "C" fn wq_combine_jitter(fwhms: *const f64, len: usize, out: *mut f64) -> WqStatus {
    guard(|| {
        if fwhms.is_null() && len > 0 {
            set_error("null jitter array");
            return Err(WqStatus::NullPointer);
        }
        let v = if len == 0 { &[][..] } else { std::slice::from_raw_parts(fwhms, len) };
        let j = combine_jitter(&JitterChain::from_fwhms(v)).map_err(fail)?;
        put(out, j)
    })
}

/// Finite-key length for a sifted block of `m` bits at QBER `delta`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wq_finite_key_bits(m: u64, delta: f64, out: *mut u64) -> WqStatus {
    guard(|| {
        let k = finite_key(&FiniteKeyProblem::new(m, delta)).map_err(fail)?;
        put(out, k.secure_bits)
    })
}
