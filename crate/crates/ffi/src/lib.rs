//! C ABI over the simulator: parse a TOML configuration, execute runs,
//! sweeps, and bound reports, and hand results back as JSON strings.
//!
//! Conventions: every function returns a `CdsgdStatus`; out-parameters are
//! written only on `Ok`; strings returned through out-parameters are owned
//! by the caller and must be released with `cdsgd_string_free`; the last
//! failure message is available per thread via `cdsgd_last_error`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::str::FromStr;

use cdsgd::harness::ops::{self, AlgorithmSpec, SweepParam};
use cdsgd::harness::runner;
use cdsgd::harness::RunConfig;

/// Status codes returned by every entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CdsgdStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    InvalidConfig = 3,
    RunFailed = 4,
    Panic = 5,
}

/// Opaque parsed configuration.
pub struct CdsgdConfig {
    inner: RunConfig,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let sanitized: String = msg.chars().filter(|&c| c != '\0').collect();
    LAST_ERROR.with(|e| {
        *e.borrow_mut() = CString::new(sanitized).expect("no interior nul");
    });
}

fn fail(status: CdsgdStatus, msg: &str) -> CdsgdStatus {
    set_error(msg);
    status
}

/// Message for the most recent failure on this thread. The pointer stays
/// valid until the next failing call on the same thread; do not free it.
#[no_mangle]
pub extern "C" fn cdsgd_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

unsafe fn read_str<'a>(ptr: *const c_char) -> Result<&'a str, CdsgdStatus> {
    if ptr.is_null() {
        set_error("null string argument");
        return Err(CdsgdStatus::NullArgument);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error("string argument is not valid UTF-8");
        CdsgdStatus::InvalidUtf8
    })
}

fn write_string(out: *mut *mut c_char, s: String) -> CdsgdStatus {
    let sanitized: String = s.chars().filter(|&c| c != '\0').collect();
    let c = CString::new(sanitized).expect("no interior nul");
    unsafe { *out = c.into_raw() };
    CdsgdStatus::Ok
}

fn guarded(f: impl FnOnce() -> CdsgdStatus) -> CdsgdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(CdsgdStatus::Panic, "internal panic"),
    }
}

/// Parses a TOML configuration string into an opaque handle.
///
/// # Safety
/// `toml` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cdsgd_config_parse(
    toml: *const c_char,
    out: *mut *mut CdsgdConfig,
) -> CdsgdStatus {
    guarded(|| {
        if out.is_null() {
            return fail(CdsgdStatus::NullArgument, "null out pointer");
        }
        let text = match read_str(toml) {
            Ok(t) => t,
            Err(s) => return s,
        };
        match RunConfig::from_toml_str(text) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(CdsgdConfig { inner }));
                CdsgdStatus::Ok
            }
            Err(e) => fail(CdsgdStatus::InvalidConfig, &e.to_string()),
        }
    })
}

/// Loads a TOML configuration from a file path.
///
/// # Safety
/// `path` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cdsgd_config_from_file(
    path: *const c_char,
    out: *mut *mut CdsgdConfig,
) -> CdsgdStatus {
    guarded(|| {
        if out.is_null() {
            return fail(CdsgdStatus::NullArgument, "null out pointer");
        }
        let p = match read_str(path) {
            Ok(t) => t,
            Err(s) => return s,
        };
        match RunConfig::from_file(Path::new(p)) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(CdsgdConfig { inner }));
                CdsgdStatus::Ok
            }
            Err(e) => fail(CdsgdStatus::InvalidConfig, &e.to_string()),
        }
    })
}

/// Overrides the master seed on a parsed configuration.
///
/// # Safety
/// `cfg` must be a live handle from a `cdsgd_config_*` constructor.
#[no_mangle]
pub unsafe extern "C" fn cdsgd_config_set_seed(cfg: *mut CdsgdConfig, seed: u64) -> CdsgdStatus {
    guarded(|| {
        let Some(cfg) = cfg.as_mut() else {
            return fail(CdsgdStatus::NullArgument, "null config handle");
        };
        cfg.inner.apply_overrides(Some(seed), None, false);
        CdsgdStatus::Ok
    })
}

/// Returns the stable configuration hash as a hex string.
///
/// # Safety
/// `cfg` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cdsgd_config_hash(
    cfg: *const CdsgdConfig,
    out: *mut *mut c_char,
) -> CdsgdStatus {
    guarded(|| {
        let Some(cfg) = cfg.as_ref() else {
            return fail(CdsgdStatus::NullArgument, "null config handle");
        };
        if out.is_null() {
            return fail(CdsgdStatus::NullArgument, "null out pointer");
        }
        write_string(out, cfg.inner.hash())
    })
}

/// Releases a configuration handle. Null is a no-op.
///
/// # Safety
/// `cfg` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cdsgd_config_free(cfg: *mut CdsgdConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Runs the configured trajectory and returns the full record as JSON.
///
/// # Safety
/// `cfg` must be a live handle and `out_json` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cdsgd_run_json(
    cfg: *const CdsgdConfig,
    out_json: *mut *mut c_char,
) -> CdsgdStatus {
    guarded(|| {
        let Some(cfg) = cfg.as_ref() else {
            return fail(CdsgdStatus::NullArgument, "null config handle");
        };
        if out_json.is_null() {
            return fail(CdsgdStatus::NullArgument, "null out pointer");
        }
        let rec = match runner::run(&cfg.inner) {
            Ok(r) => r,
            Err(e) => return fail(CdsgdStatus::RunFailed, &e.to_string()),
        };
        match serde_json::to_string(&rec) {
            Ok(s) => write_string(out_json, s),
            Err(e) => fail(CdsgdStatus::RunFailed, &e.to_string()),
        }
    })
}

/// Computes the bound report for every algorithm kind and returns JSON.
///
/// # Safety
/// `cfg` must be a live handle and `out_json` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cdsgd_bounds_json(
    cfg: *const CdsgdConfig,
    out_json: *mut *mut c_char,
) -> CdsgdStatus {
    guarded(|| {
        let Some(cfg) = cfg.as_ref() else {
            return fail(CdsgdStatus::NullArgument, "null config handle");
        };
        if out_json.is_null() {
            return fail(CdsgdStatus::NullArgument, "null out pointer");
        }
        let report = match ops::bounds(&cfg.inner) {
            Ok(r) => r,
            Err(e) => return fail(CdsgdStatus::RunFailed, &e.to_string()),
        };
        match serde_json::to_string(&report) {
            Ok(s) => write_string(out_json, s),
            Err(e) => fail(CdsgdStatus::RunFailed, &e.to_string()),
        }
    })
}

/// Runs every algorithm spec in `specs` (space-separated, each in the CLI
/// `kind:key=val,...` form) on the shared configuration and returns the
/// comparison as JSON.
///
/// # Safety
/// `cfg` must be a live handle, `specs` a valid NUL-terminated string, and
/// `out_json` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cdsgd_compare_json(
    cfg: *const CdsgdConfig,
    specs: *const c_char,
    out_json: *mut *mut c_char,
) -> CdsgdStatus {
    guarded(|| {
        let Some(cfg) = cfg.as_ref() else {
            return fail(CdsgdStatus::NullArgument, "null config handle");
        };
        if out_json.is_null() {
            return fail(CdsgdStatus::NullArgument, "null out pointer");
        }
        let spec_str = match read_str(specs) {
            Ok(t) => t,
            Err(s) => return s,
        };
        let parsed: Result<Vec<AlgorithmSpec>, _> = spec_str
            .split_whitespace()
            .map(AlgorithmSpec::from_str)
            .collect();
        let parsed = match parsed {
            Ok(p) => p,
            Err(e) => return fail(CdsgdStatus::InvalidConfig, &e.to_string()),
        };
        let report = match ops::compare(&cfg.inner, &parsed) {
            Ok(r) => r,
            Err(e) => return fail(CdsgdStatus::RunFailed, &e.to_string()),
        };
        match serde_json::to_string(&report) {
            Ok(s) => write_string(out_json, s),
            Err(e) => fail(CdsgdStatus::RunFailed, &e.to_string()),
        }
    })
}

/// Sweeps one hyper-parameter ("alpha", "omega", or "tau") over `values`
/// and returns the sweep report as JSON.
///
/// # Safety
/// `cfg` must be a live handle, `param` a valid NUL-terminated string,
/// `values` a readable array of `n_values` doubles, and `out_json` a valid
/// pointer.
#[no_mangle]
pub unsafe extern "C" fn cdsgd_sweep_json(
    cfg: *const CdsgdConfig,
    param: *const c_char,
    values: *const f64,
    n_values: usize,
    out_json: *mut *mut c_char,
) -> CdsgdStatus {
    guarded(|| {
        let Some(cfg) = cfg.as_ref() else {
            return fail(CdsgdStatus::NullArgument, "null config handle");
        };
        if out_json.is_null() || (values.is_null() && n_values > 0) {
            return fail(CdsgdStatus::NullArgument, "null out or values pointer");
        }
        let param_str = match read_str(param) {
            Ok(t) => t,
            Err(s) => return s,
        };
        let param = match SweepParam::from_str(param_str) {
            Ok(p) => p,
            Err(e) => return fail(CdsgdStatus::InvalidConfig, &e.to_string()),
        };
        let vals = if n_values == 0 {
            &[][..]
        } else {
            std::slice::from_raw_parts(values, n_values)
        };
        let report = match ops::sweep(&cfg.inner, param, vals) {
            Ok(r) => r,
            Err(e) => return fail(CdsgdStatus::RunFailed, &e.to_string()),
        };
        match serde_json::to_string(&report) {
            Ok(s) => write_string(out_json, s),
            Err(e) => fail(CdsgdStatus::RunFailed, &e.to_string()),
        }
    })
}

/// Releases a string returned through an out-parameter. Null is a no-op.
///
/// # Safety
/// `s` must be null or a string produced by this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn cdsgd_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ptr;

    const TOML: &str = "
[topology]
kind = \"ring\"
n-agents = 5
weights = \"lazy-metropolis\"

[objective]
kind = \"quadratic\"
dimension = 2

[algorithm]
kind = \"g-cdsgd\"
alpha = 0.02
omega = 0.5

[run]
iterations = 20
master-seed = 7
\0";

    unsafe fn parse() -> *mut CdsgdConfig {
        let mut cfg: *mut CdsgdConfig = ptr::null_mut();
        let st = cdsgd_config_parse(TOML.as_ptr() as *const c_char, &mut cfg);
        assert_eq!(st, CdsgdStatus::Ok);
        assert!(!cfg.is_null());
        cfg
    }

    unsafe fn take_string(p: *mut c_char) -> String {
        let s = CStr::from_ptr(p).to_str().unwrap().to_string();
        cdsgd_string_free(p);
        s
    }

    #[test]
    fn parse_run_and_free() {
        unsafe {
            let cfg = parse();
            let mut json: *mut c_char = ptr::null_mut();
            assert_eq!(cdsgd_run_json(cfg, &mut json), CdsgdStatus::Ok);
            let s = take_string(json);
            let v: serde_json::Value = serde_json::from_str(&s).unwrap();
            assert_eq!(v["algorithm"], "g-cdsgd");
            assert_eq!(v["rows"].as_array().unwrap().len(), 21);
            cdsgd_config_free(cfg);
        }
    }

    #[test]
    fn bad_toml_reports_error() {
        unsafe {
            let mut cfg: *mut CdsgdConfig = ptr::null_mut();
            let st = cdsgd_config_parse(b"not toml [\0".as_ptr() as *const c_char, &mut cfg);
            assert_eq!(st, CdsgdStatus::InvalidConfig);
            assert!(cfg.is_null());
            let msg = CStr::from_ptr(cdsgd_last_error()).to_str().unwrap();
            assert!(!msg.is_empty());
        }
    }

    #[test]
    fn null_arguments_are_rejected() {
        unsafe {
            let mut json: *mut c_char = ptr::null_mut();
            assert_eq!(
                cdsgd_run_json(ptr::null(), &mut json),
                CdsgdStatus::NullArgument
            );
            let mut cfg: *mut CdsgdConfig = ptr::null_mut();
            assert_eq!(
                cdsgd_config_parse(ptr::null(), &mut cfg),
                CdsgdStatus::NullArgument
            );
            cdsgd_config_free(ptr::null_mut());
            cdsgd_string_free(ptr::null_mut());
        }
    }

    #[test]
    fn seed_changes_stochastic_output_only() {
        unsafe {
            let cfg = parse();
            let mut hash_a: *mut c_char = ptr::null_mut();
            assert_eq!(cdsgd_config_hash(cfg, &mut hash_a), CdsgdStatus::Ok);
            let a = take_string(hash_a);
            assert_eq!(cdsgd_config_set_seed(cfg, 99), CdsgdStatus::Ok);
            let mut hash_b: *mut c_char = ptr::null_mut();
            assert_eq!(cdsgd_config_hash(cfg, &mut hash_b), CdsgdStatus::Ok);
            let b = take_string(hash_b);
            assert_ne!(a, b);
            cdsgd_config_free(cfg);
        }
    }

    #[test]
    fn compare_and_sweep_round_trip() {
        unsafe {
            let cfg = parse();
            let mut json: *mut c_char = ptr::null_mut();
            assert_eq!(
                cdsgd_compare_json(
                    cfg,
                    b"cdsgd g-cdsgd:omega=0.5\0".as_ptr() as *const c_char,
                    &mut json
                ),
                CdsgdStatus::Ok
            );
            let v: serde_json::Value = serde_json::from_str(&take_string(json)).unwrap();
            assert_eq!(v["labels"].as_array().unwrap().len(), 2);

            let vals = [0.2_f64, 1.0];
            let mut json: *mut c_char = ptr::null_mut();
            assert_eq!(
                cdsgd_sweep_json(
                    cfg,
                    b"omega\0".as_ptr() as *const c_char,
                    vals.as_ptr(),
                    vals.len(),
                    &mut json
                ),
                CdsgdStatus::Ok
            );
            let v: serde_json::Value = serde_json::from_str(&take_string(json)).unwrap();
            assert_eq!(v["entries"].as_array().unwrap().len(), 2);

            // invalid sweep values reject the whole sweep
            let bad = [0.2_f64, 1.5];
            let mut json: *mut c_char = ptr::null_mut();
            assert_eq!(
                cdsgd_sweep_json(
                    cfg,
                    b"omega\0".as_ptr() as *const c_char,
                    bad.as_ptr(),
                    bad.len(),
                    &mut json
                ),
                CdsgdStatus::RunFailed
            );
            cdsgd_config_free(cfg);
        }
    }
}
