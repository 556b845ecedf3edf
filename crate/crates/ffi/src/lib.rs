//! C ABI over `ggplab`: opaque configuration and report handles, integer status codes,
//! a thread-local last-error message. Strings returned to C are freed with `ggp_string_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ggplab::config::RunConfig;
use ggplab::exponents::{exponents, parse_rational};
use ggplab::report::{Report, Status};
use ggplab::Error;

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GgpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidConfig = 2,
    UnknownSuite = 3,
    BadTheta = 4,
    InvalidUtf8 = 5,
    Io = 6,
    Internal = 7,
    Panic = 8,
}

/// Opaque run configuration.
pub struct GgpConfig {
    inner: RunConfig,
}

/// Opaque verification report.
pub struct GgpReport {
    inner: Report,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let s = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(s).ok());
}

fn status_of(e: &Error) -> GgpStatus {
    match e {
        Error::InvalidConfig(_) => GgpStatus::InvalidConfig,
        Error::UnknownSuite(_) => GgpStatus::UnknownSuite,
        Error::BadTheta => GgpStatus::BadTheta,
        Error::Io(_) | Error::Cache(_) => GgpStatus::Io,
        _ => GgpStatus::Internal,
    }
}

fn fail(e: Error) -> GgpStatus {
    let s = status_of(&e);
    set_error(e.to_string());
    s
}

fn guard(f: impl FnOnce() -> GgpStatus) -> GgpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => {
            set_error("panic inside ggplab");
            GgpStatus::Panic
        }
    }
}

unsafe fn read_str<'a>(s: *const c_char) -> Result<&'a str, GgpStatus> {
    if s.is_null() {
        set_error("null string argument");
        return Err(GgpStatus::NullPointer);
    }
    CStr::from_ptr(s).to_str().map_err(|_| {
        set_error("argument is not valid UTF-8");
        GgpStatus::InvalidUtf8
    })
}

fn to_c(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).map(CString::into_raw).unwrap_or(ptr::null_mut())
}

/// Last error message on this thread, or null. Valid until the next failing call.
#[no_mangle]
pub extern "C" fn ggp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// New configuration with default parameters and no suites.
#[no_mangle]
pub extern "C" fn ggp_config_new() -> *mut GgpConfig {
    Box::into_raw(Box::new(GgpConfig { inner: RunConfig::default() }))
}

/// # Safety
/// `cfg` must come from `ggp_config_new` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ggp_config_free(cfg: *mut GgpConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Sets one key, using the long flag names of the CLI (`suite`, `n`, `p`, `seed`, ...).
///
/// # Safety
/// `cfg` must be a live handle; `key` and `value` NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn ggp_config_set(cfg: *mut GgpConfig, key: *const c_char, value: *const c_char) -> GgpStatus {
    guard(|| {
        let Some(cfg) = cfg.as_mut() else {
            set_error("null config");
            return GgpStatus::NullPointer;
        };
        let (k, v) = match (read_str(key), read_str(value)) {
            (Ok(k), Ok(v)) => (k, v),
            (Err(s), _) | (_, Err(s)) => return s,
        };
        match cfg.inner.apply(k, v) {
            Ok(()) => GgpStatus::Ok,
            Err(e) => fail(e),
        }
    })
}

/// Parses a flat `key = value` text block into the configuration.
///
/// # Safety
/// `cfg` must be a live handle; `text` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ggp_config_load_text(cfg: *mut GgpConfig, text: *const c_char) -> GgpStatus {
    guard(|| {
        let Some(cfg) = cfg.as_mut() else {
            set_error("null config");
            return GgpStatus::NullPointer;
        };
        let t = match read_str(text) {
            Ok(t) => t,
            Err(s) => return s,
        };
        match cfg.inner.apply_text(t) {
            Ok(()) => GgpStatus::Ok,
            Err(e) => fail(e),
        }
    })
}

/// Validates and runs the configured suites. On success `*out` receives a report handle.
///
/// # Safety
/// `cfg` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ggp_run(cfg: *const GgpConfig, out: *mut *mut GgpReport) -> GgpStatus {
    guard(|| {
        let (Some(cfg), false) = (cfg.as_ref(), out.is_null()) else {
            set_error("null argument");
            return GgpStatus::NullPointer;
        };
        *out = ptr::null_mut();
        match ggplab::suites::run_suites(&cfg.inner) {
            Ok(r) => {
                *out = Box::into_raw(Box::new(GgpReport { inner: r }));
                GgpStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `rep` must come from `ggp_run` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ggp_report_free(rep: *mut GgpReport) {
    if !rep.is_null() {
        drop(Box::from_raw(rep));
    }
}

/// 1 when no asserted check failed, 0 otherwise, -1 on a null handle.
///
/// # Safety
/// `rep` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn ggp_report_passed(rep: *const GgpReport) -> i32 {
    rep.as_ref().map_or(-1, |r| r.inner.passed() as i32)
}

/// # Safety
/// `rep` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn ggp_report_suite_count(rep: *const GgpReport) -> usize {
    rep.as_ref().map_or(0, |r| r.inner.suites.len())
}

/// Counts suites with the given status: 0 pass, 1 fail, 2 report-only, 3 skipped.
///
/// # Safety
/// `rep` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn ggp_report_count_status(rep: *const GgpReport, status: i32) -> usize {
    let want = match status {
        0 => Status::Pass,
        1 => Status::Fail,
        2 => Status::ReportOnly,
        3 => Status::Skipped,
        _ => return 0,
    };
    rep.as_ref().map_or(0, |r| r.inner.suites.iter().filter(|s| s.status == want).count())
}

/// JSON rendering of the report; free with `ggp_string_free`.
///
/// # Safety
/// `rep` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn ggp_report_json(rep: *const GgpReport) -> *mut c_char {
    match rep.as_ref() {
        Some(r) => to_c(r.inner.to_json()),
        None => {
            set_error("null report");
            ptr::null_mut()
        }
    }
}

/// Markdown rendering of the report; free with `ggp_string_free`.
///
/// # Safety
/// `rep` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn ggp_report_markdown(rep: *const GgpReport) -> *mut c_char {
    match rep.as_ref() {
        Some(r) => to_c(r.inner.to_markdown()),
        None => {
            set_error("null report");
            ptr::null_mut()
        }
    }
}

/// Exponent record for (n, l, theta) as JSON with exact rationals; `theta` is "a/b" or a decimal.
///
/// # Safety
/// `theta` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ggp_exponents_json(n: u32, l: u32, theta: *const c_char, out: *mut *mut c_char) -> GgpStatus {
    guard(|| {
        if out.is_null() {
            set_error("null output pointer");
            return GgpStatus::NullPointer;
        }
        *out = ptr::null_mut();
        let t = match read_str(theta) {
            Ok(t) => t,
            Err(s) => return s,
        };
        match parse_rational(t).and_then(|t| exponents(n, l, t)) {
            Ok(r) => {
                *out = to_c(serde_json::to_string(&r).expect("record serializes"));
                GgpStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ggp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
