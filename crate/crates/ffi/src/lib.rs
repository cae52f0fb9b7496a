//! C ABI for `optsub`.
//!
//! Every fallible function returns an [`OptsubStatus`]; on failure the
//! message is kept per thread and read back with
//! [`optsub_last_error_message`]. Datasets are opaque handles created by
//! [`optsub_dataset_new`] and released with [`optsub_dataset_free`].
//! Output arrays are caller-allocated.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use optsub::error::Error;
use optsub::optprob::{self, HMode, Provenance};
use optsub::pipeline::{self, PipelineOptions};
use optsub::{Dataset, Family, NormVector, RngSeed, SamplingPlan, Schema, Scheme};

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptsubStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DataError = 3,
    NumericalError = 4,
    BufferTooSmall = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptsubFamily {
    Ols = 0,
    Logistic = 1,
    Poisson = 2,
    Binomial = 3,
    Gamma = 4,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptsubScheme {
    WithReplacement = 0,
    Poisson = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptsubHMode {
    Quantile = 0,
    Infinity = 1,
}

/// Opaque dataset handle.
pub struct OptsubDataset {
    inner: Dataset,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> OptsubStatus {
    match e {
        Error::InvalidArgument(_) => OptsubStatus::InvalidArgument,
        Error::Domain { .. } => OptsubStatus::DataError,
        e if e.is_data_error() => OptsubStatus::DataError,
        _ => OptsubStatus::NumericalError,
    }
}

fn guard(f: impl FnOnce() -> Result<(), OptsubStatus>) -> OptsubStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => OptsubStatus::Ok,
        Ok(Err(status)) => status,
        Err(_) => {
            set_error("internal panic".into());
            OptsubStatus::Panic
        }
    }
}

fn fail(e: Error) -> OptsubStatus {
    let status = status_of(&e);
    set_error(format!("{}: {e}", e.kind()));
    status
}

fn null(what: &str) -> OptsubStatus {
    set_error(format!("null pointer: {what}"));
    OptsubStatus::NullPointer
}

unsafe fn input<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], OptsubStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn output<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], OptsubStatus> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts_mut(p, len))
}

fn family(f: OptsubFamily) -> Family {
    match f {
        OptsubFamily::Ols => Family::Ols,
        OptsubFamily::Logistic => Family::Logistic,
        OptsubFamily::Poisson => Family::Poisson,
        OptsubFamily::Binomial => Family::Binomial,
        OptsubFamily::Gamma => Family::Gamma,
    }
}

fn scheme(s: OptsubScheme) -> Scheme {
    match s {
        OptsubScheme::WithReplacement => Scheme::WithReplacement,
        OptsubScheme::Poisson => Scheme::Poisson,
    }
}

fn norms(t: *const f64, n: usize) -> Result<NormVector, OptsubStatus> {
    let t = unsafe { input(t, n, "norms")? };
    NormVector::new(t.to_vec()).map_err(fail)
}

/// Copies `msg` into `buf` (NUL-terminated, truncated to `len`) and returns
/// the full message length excluding the terminator, or 0 if no error is set.
///
/// # Safety
/// `buf` must point to `len` writable bytes or be null.
#[no_mangle]
pub unsafe extern "C" fn optsub_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| match &*e.borrow() {
        None => 0,
        Some(msg) => {
            let bytes = msg.as_bytes();
            if !buf.is_null() && len > 0 {
                let k = bytes.len().min(len - 1);
                ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, k);
                *buf.add(k) = 0;
            }
            bytes.len()
        }
    })
}

/// Static, NUL-terminated library version.
#[no_mangle]
pub extern "C" fn optsub_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Builds a dataset from `n` rows of `p` covariates stored row-major in `x`
/// and responses `y`. `trials` may be null; otherwise it holds `n` binomial
/// trial counts. On success `*out` owns the handle.
///
/// # Safety
/// `x` must hold `n * p` values, `y` and (if non-null) `trials` `n` values,
/// and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn optsub_dataset_new(
    x: *const f64,
    y: *const f64,
    trials: *const f64,
    n: usize,
    p: usize,
    out: *mut *mut OptsubDataset,
) -> OptsubStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let x = input(x, n * p, "x")?.to_vec();
        let y = input(y, n, "y")?.to_vec();
        let mut schema = Schema::anonymous(p);
        let trials = if trials.is_null() {
            None
        } else {
            schema.trials = Some("trials".into());
            Some(input(trials, n, "trials")?.to_vec())
        };
        let inner = Dataset::new(schema, x, y, trials).map_err(fail)?;
        *out = Box::into_raw(Box::new(OptsubDataset { inner }));
        Ok(())
    })
}

/// Releases a dataset handle. Null is ignored.
///
/// # Safety
/// `data` must come from [`optsub_dataset_new`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn optsub_dataset_free(data: *mut OptsubDataset) {
    if !data.is_null() {
        drop(Box::from_raw(data));
    }
}

/// Number of rows, or 0 for a null handle.
///
/// # Safety
/// `data` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn optsub_dataset_len(data: *const OptsubDataset) -> usize {
    data.as_ref().map_or(0, |d| d.inner.len())
}

/// Number of covariates, or 0 for a null handle.
///
/// # Safety
/// `data` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn optsub_dataset_dim(data: *const OptsubDataset) -> usize {
    data.as_ref().map_or(0, |d| d.inner.dim())
}

/// `pi[i] = t[i] / sum(t)`.
///
/// # Safety
/// `t` and `pi` must hold `n` values.
#[no_mangle]
pub unsafe extern "C" fn optsub_plan_with_replacement(t: *const f64, n: usize, pi: *mut f64) -> OptsubStatus {
    guard(|| {
        let plan = optprob::opt_probs_withreplacement(&norms(t, n)?).map_err(fail)?;
        output(pi, n, "pi")?.copy_from_slice(&plan.pi);
        Ok(())
    })
}

/// Poisson plan with expected size `s`. Writes the truncation count to `g`
/// and the threshold to `h` when those are non-null.
///
/// # Safety
/// `t` and `pi` must hold `n` values; `g` and `h` must be writable or null.
#[no_mangle]
pub unsafe extern "C" fn optsub_plan_poisson(
    t: *const f64,
    n: usize,
    s: usize,
    pi: *mut f64,
    g: *mut usize,
    h: *mut f64,
) -> OptsubStatus {
    guard(|| {
        let plan = optprob::opt_probs_poisson(&norms(t, n)?, s).map_err(fail)?;
        output(pi, n, "pi")?.copy_from_slice(&plan.pi);
        if let Some(th) = plan.threshold {
            if !g.is_null() {
                *g = th.g;
            }
            if !h.is_null() {
                *h = th.h;
            }
        }
        Ok(())
    })
}

/// `out[i] = (1 - alpha) pi[i] + alpha / n`. `out` may alias `pi`.
///
/// # Safety
/// `pi` and `out` must hold `n` values.
#[no_mangle]
pub unsafe extern "C" fn optsub_defensive_mix(pi: *const f64, n: usize, alpha: f64, out: *mut f64) -> OptsubStatus {
    guard(|| {
        if n == 0 {
            return Err(fail(Error::InvalidArgument("empty probability vector".into())));
        }
        let pi = input(pi, n, "pi")?.to_vec();
        optsub::sampling::check_distribution(&pi).map_err(fail)?;
        let plan = SamplingPlan {
            pi,
            scheme: Scheme::WithReplacement,
            alpha: 0.0,
            threshold: None,
            provenance: Provenance::Exact,
        };
        let mixed = optprob::defensive_mix(&plan, alpha).map_err(fail)?;
        output(out, n, "out")?.copy_from_slice(&mixed.pi);
        Ok(())
    })
}

/// Full-data M-estimate; `theta` must hold `theta_len == dim` values.
///
/// # Safety
/// `data` must be a live handle and `theta` must hold `theta_len` values.
#[no_mangle]
pub unsafe extern "C" fn optsub_fit_full(
    data: *const OptsubDataset,
    fam: OptsubFamily,
    theta: *mut f64,
    theta_len: usize,
) -> OptsubStatus {
    guard(|| {
        let data = data.as_ref().ok_or_else(|| null("data"))?;
        if theta_len < data.inner.dim() {
            set_error(format!("theta needs {} slots, got {theta_len}", data.inner.dim()));
            return Err(OptsubStatus::BufferTooSmall);
        }
        let fam = family(fam);
        fam.validate(&data.inner).map_err(fail)?;
        let report = pipeline::fit_full(fam, &data.inner).map_err(fail)?;
        output(theta, theta_len, "theta")?[..report.theta.len()].copy_from_slice(&report.theta);
        Ok(())
    })
}

/// Two-stage subsample estimate: a uniform pilot of size `s0`, a second
/// stage of (expected) size `s` from pilot-estimated optimal probabilities
/// mixed with weight `alpha`, then aggregation. `b` and `h_mode` tune the
/// Poisson threshold. Writes the aggregated estimate (or the second-stage
/// estimate if the two cannot be combined) to `theta`.
///
/// # Safety
/// `data` must be a live handle and `theta` must hold `theta_len` values.
#[no_mangle]
pub unsafe extern "C" fn optsub_subsample_fit(
    data: *const OptsubDataset,
    fam: OptsubFamily,
    sch: OptsubScheme,
    s0: usize,
    s: usize,
    alpha: f64,
    b: f64,
    h_mode: OptsubHMode,
    seed: u64,
    theta: *mut f64,
    theta_len: usize,
) -> OptsubStatus {
    guard(|| {
        let data = data.as_ref().ok_or_else(|| null("data"))?;
        if theta_len < data.inner.dim() {
            set_error(format!("theta needs {} slots, got {theta_len}", data.inner.dim()));
            return Err(OptsubStatus::BufferTooSmall);
        }
        let fam = family(fam);
        fam.validate(&data.inner).map_err(fail)?;
        let h_mode = match h_mode {
            OptsubHMode::Quantile => HMode::Quantile,
            OptsubHMode::Infinity => HMode::Infinity,
        };
        let opts = PipelineOptions::new(s0, s).alpha(alpha).b(b).h_mode(h_mode);
        let res = pipeline::run(fam, &data.inner, scheme(sch), &opts, RngSeed::new(seed, 0)).map_err(fail)?;
        let est = res.estimate();
        output(theta, theta_len, "theta")?[..est.len()].copy_from_slice(est);
        Ok(())
    })
}
