//! C ABI over `shm_core`.
//!
//! Every fallible function returns an [`ShmStatus`]; on failure the message is
//! kept per thread and can be read with [`shm_last_error`]. Handles are opaque
//! and must be released with their `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::fs::File;
use std::panic::{catch_unwind, AssertUnwindSafe};

use shm_core::anomaly::{self, PredictiveDistribution};
use shm_core::fem::{self, FoundationModel, StructureTemplate};
use shm_core::hiermc::PosteriorChains;
use shm_core::surrogate::{FeModel, Surrogate};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    OutOfDomain = 3,
    Io = 4,
    Parse = 5,
    Numerical = 6,
    NotFound = 7,
    Panic = 99,
}

/// Frequency-stiffness surrogate.
pub struct ShmSurrogate(Surrogate);

/// Posterior draws read from a chains CSV file.
pub struct ShmChains(PosteriorChains);

/// Posterior-predictive frequency draws for one structure.
pub struct ShmPredictive(PredictiveDistribution);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let s = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(s).unwrap_or_default());
}

struct Fail(ShmStatus, String);

impl Fail {
    fn new(status: ShmStatus, msg: impl ToString) -> Self {
        Fail(status, msg.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> ShmStatus {
    set_error("");
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ShmStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside shm");
            ShmStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail::new(ShmStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Fail::new(ShmStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| Fail::new(ShmStatus::NullPointer, format!("{what} is null")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| Fail::new(ShmStatus::NullPointer, format!("{what} is null")))
}

fn template(name: &str) -> Result<StructureTemplate, Fail> {
    StructureTemplate::builtin(name).map_err(|e| Fail::new(ShmStatus::NotFound, e))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn shm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread; empty after a success.
/// Valid until the next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn shm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// First bending frequency (Hz) of a built-in template on uniform Winkler
/// springs of the given stiffness per unit length (N/m^2).
///
/// # Safety
/// `template_name` must be a NUL-terminated string; `out_hz` must be writable.
#[no_mangle]
pub unsafe extern "C" fn shm_fe_first_frequency(
    template_name: *const c_char,
    stiffness: f64,
    scour_depth: f64,
    out_hz: *mut f64,
) -> ShmStatus {
    guard(|| {
        let t = template(str_arg(template_name, "template_name")?)?;
        let out = out_arg(out_hz, "out_hz")?;
        if !(stiffness >= 0.0 && stiffness.is_finite() && scour_depth >= 0.0 && scour_depth.is_finite()) {
            return Err(Fail::new(ShmStatus::InvalidArgument, "stiffness and scour depth must be finite and >= 0"));
        }
        let rho = fem::default_water_density(&t);
        let f = fem::first_frequency(&t, &FoundationModel::winkler(stiffness, scour_depth), fem::DEFAULT_ELEMENTS, rho)
            .map_err(|e| Fail::new(ShmStatus::Numerical, e))?;
        *out = f;
        Ok(())
    })
}

/// Fit a surrogate for a built-in template over `[lo, hi]`.
///
/// # Safety
/// `template_name` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn shm_surrogate_fit(
    template_name: *const c_char,
    lo: f64,
    hi: f64,
    n_points: usize,
    degree: usize,
    out: *mut *mut ShmSurrogate,
) -> ShmStatus {
    guard(|| {
        let t = template(str_arg(template_name, "template_name")?)?;
        let out = out_arg(out, "out")?;
        if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo < hi) {
            return Err(Fail::new(ShmStatus::InvalidArgument, format!("bad domain [{lo}, {hi}]")));
        }
        let sur = FeModel::new(t, (lo, hi))
            .fit_surrogate(n_points, degree)
            .map_err(|e| Fail::new(ShmStatus::Numerical, e))?;
        *out = Box::into_raw(Box::new(ShmSurrogate(sur)));
        Ok(())
    })
}

/// Load a surrogate from JSON, either bare or wrapped in a `surrogate` field
/// as written by the CLI.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn shm_surrogate_load(path: *const c_char, out: *mut *mut ShmSurrogate) -> ShmStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let out = out_arg(out, "out")?;
        let text = std::fs::read_to_string(path).map_err(|e| Fail::new(ShmStatus::Io, format!("{path}: {e}")))?;
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| Fail::new(ShmStatus::Parse, format!("{path}: {e}")))?;
        let body = value.get("surrogate").cloned().unwrap_or(value);
        let sur: Surrogate =
            serde_json::from_value(body).map_err(|e| Fail::new(ShmStatus::Parse, format!("{path}: {e}")))?;
        *out = Box::into_raw(Box::new(ShmSurrogate(sur)));
        Ok(())
    })
}

/// # Safety
/// `h` must be a surrogate handle; `out_hz` must be writable.
#[no_mangle]
pub unsafe extern "C" fn shm_surrogate_eval(h: *const ShmSurrogate, stiffness: f64, out_hz: *mut f64) -> ShmStatus {
    guard(|| {
        let sur = &handle(h, "surrogate")?.0;
        let out = out_arg(out_hz, "out_hz")?;
        *out = sur.eval(stiffness).map_err(|e| Fail::new(ShmStatus::OutOfDomain, e))?;
        Ok(())
    })
}

/// # Safety
/// `h` must be a surrogate handle; `lo` and `hi` must be writable.
#[no_mangle]
pub unsafe extern "C" fn shm_surrogate_domain(h: *const ShmSurrogate, lo: *mut f64, hi: *mut f64) -> ShmStatus {
    guard(|| {
        let [a, b] = handle(h, "surrogate")?.0.domain;
        *out_arg(lo, "lo")? = a;
        *out_arg(hi, "hi")? = b;
        Ok(())
    })
}

/// # Safety
/// `h` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn shm_surrogate_free(h: *mut ShmSurrogate) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Read a chains CSV file written by `shm sample`.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn shm_chains_load(path: *const c_char, out: *mut *mut ShmChains) -> ShmStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let out = out_arg(out, "out")?;
        let f = File::open(path).map_err(|e| Fail::new(ShmStatus::Io, format!("{path}: {e}")))?;
        let chains = PosteriorChains::read_csv(f).map_err(|e| Fail::new(ShmStatus::Parse, format!("{path}: {e}")))?;
        *out = Box::into_raw(Box::new(ShmChains(chains)));
        Ok(())
    })
}

/// Number of chains and post-warmup draws per chain.
///
/// # Safety
/// `h` must be a chains handle; the outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn shm_chains_shape(h: *const ShmChains, n_chains: *mut usize, n_draws: *mut usize) -> ShmStatus {
    guard(|| {
        let c = &handle(h, "chains")?.0;
        *out_arg(n_chains, "n_chains")? = c.chains.len();
        *out_arg(n_draws, "n_draws")? = c.chains.first().map_or(0, |c| c.draws.len());
        Ok(())
    })
}

/// Copy the pooled draws of parameter `name` into `buf`. `len` receives the
/// number of draws; when `buf` is null or `cap` is too small nothing is copied
/// and `InvalidArgument` is returned with `len` set.
///
/// # Safety
/// `h` must be a chains handle, `name` a NUL-terminated string, `buf` null or
/// valid for `cap` writes, `len` writable.
#[no_mangle]
pub unsafe extern "C" fn shm_chains_param(
    h: *const ShmChains,
    name: *const c_char,
    buf: *mut f64,
    cap: usize,
    len: *mut usize,
) -> ShmStatus {
    guard(|| {
        let c = &handle(h, "chains")?.0;
        let name = str_arg(name, "name")?;
        let len = out_arg(len, "len")?;
        let draws = c.pooled(name).map_err(|e| Fail::new(ShmStatus::NotFound, e))?;
        *len = draws.len();
        if buf.is_null() || cap < draws.len() {
            return Err(Fail::new(ShmStatus::InvalidArgument, format!("buffer holds {cap}, need {}", draws.len())));
        }
        std::slice::from_raw_parts_mut(buf, draws.len()).copy_from_slice(&draws);
        Ok(())
    })
}

/// # Safety
/// `h` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn shm_chains_free(h: *mut ShmChains) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Posterior-predictive distribution of the first frequency of one structure.
///
/// # Safety
/// `chains` and `surrogate` must be handles, `structure_id` a NUL-terminated
/// string, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn shm_predictive_new(
    chains: *const ShmChains,
    surrogate: *const ShmSurrogate,
    structure_id: *const c_char,
    seed: u64,
    out: *mut *mut ShmPredictive,
) -> ShmStatus {
    guard(|| {
        let c = &handle(chains, "chains")?.0;
        let s = &handle(surrogate, "surrogate")?.0;
        let id = str_arg(structure_id, "structure_id")?;
        let out = out_arg(out, "out")?;
        let pred = anomaly::posterior_predictive(c, s, id, seed).map_err(|e| match e {
            anomaly::AnomalyError::NoSuchStructure(_) => Fail::new(ShmStatus::NotFound, e),
            _ => Fail::new(ShmStatus::Numerical, e),
        })?;
        *out = Box::into_raw(Box::new(ShmPredictive(pred)));
        Ok(())
    })
}

/// Mean and variance of the predictive draws.
///
/// # Safety
/// `h` must be a predictive handle; the outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn shm_predictive_moments(
    h: *const ShmPredictive,
    mean: *mut f64,
    variance: *mut f64,
) -> ShmStatus {
    guard(|| {
        let p = &handle(h, "predictive")?.0;
        *out_arg(mean, "mean")? = p.mean();
        *out_arg(variance, "variance")? = p.variance();
        Ok(())
    })
}

/// Fraction of predictive draws at or below `frequency_hz`.
///
/// # Safety
/// `h` must be a predictive handle; `out_p` must be writable.
#[no_mangle]
pub unsafe extern "C" fn shm_predictive_tail_probability(
    h: *const ShmPredictive,
    frequency_hz: f64,
    out_p: *mut f64,
) -> ShmStatus {
    guard(|| {
        let p = &handle(h, "predictive")?.0;
        let out = out_arg(out_p, "out_p")?;
        *out = anomaly::tail_probability(p, frequency_hz).map_err(|e| Fail::new(ShmStatus::Numerical, e))?;
        Ok(())
    })
}

/// # Safety
/// `h` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn shm_predictive_free(h: *mut ShmPredictive) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}
