//! C ABI for lpplab.
//!
//! Every fallible call returns an [`LppStatus`]; on failure the message is
//! available from [`lpp_last_error`] on the same thread. Results are written
//! through out-pointers. Handles are opaque and released with their `_free`
//! function. Panics never cross the boundary; they surface as
//! `LPP_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use lpplab::brownian::gue_lambda_max;
use lpplab::harness::{self, ExperimentConfig};
use lpplab::lattice::{passage_time, passage_time_with_path, LatticeInstance};
use lpplab::stats::{ks_one_sample, ScalingRule, SampleSet};
use lpplab::tracy_widom::TwReference;
use lpplab::weights::{StreamKey, WeightSpec};
use lpplab::LppError;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LppStatus {
    Ok = 0,
    InvalidParameter = 1,
    OutOfDomain = 2,
    Degenerate = 3,
    MemoryBudget = 4,
    EnumerationGuard = 5,
    NoConvergence = 6,
    Quadrature = 7,
    MissingProfile = 8,
    Parse = 9,
    Schema = 10,
    BudgetRefused = 11,
    Incomplete = 12,
    Io = 13,
    NullPointer = 14,
    Panic = 15,
}

impl From<&LppError> for LppStatus {
    fn from(e: &LppError) -> Self {
        match e {
            LppError::InvalidParameter(_) => LppStatus::InvalidParameter,
            LppError::OutOfDomain { .. } => LppStatus::OutOfDomain,
            LppError::Degenerate(_) => LppStatus::Degenerate,
            LppError::MemoryBudget { .. } => LppStatus::MemoryBudget,
            LppError::EnumerationGuard { .. } => LppStatus::EnumerationGuard,
            LppError::NoConvergence { .. } => LppStatus::NoConvergence,
            LppError::Quadrature { .. } => LppStatus::Quadrature,
            LppError::MissingProfile => LppStatus::MissingProfile,
            LppError::Parse(_) => LppStatus::Parse,
            LppError::Schema { .. } => LppStatus::Schema,
            LppError::BudgetRefused(_) => LppStatus::BudgetRefused,
            LppError::Incomplete { .. } => LppStatus::Incomplete,
            LppError::Io { .. } => LppStatus::Io,
        }
    }
}

/// Opaque weight distribution.
pub struct LppWeightSpec(WeightSpec);

/// Opaque tabulated Tracy-Widom GUE distribution.
pub struct LppTwReference(TwReference);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

enum Fail {
    Lib(LppError),
    Null(&'static str),
}

impl From<LppError> for Fail {
    fn from(e: LppError) -> Self {
        Fail::Lib(e)
    }
}

type FfiResult = Result<(), Fail>;

fn guard(f: impl FnOnce() -> FfiResult) -> LppStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LppStatus::Ok,
        Ok(Err(Fail::Lib(e))) => {
            let status = LppStatus::from(&e);
            set_error(e.to_string());
            status
        }
        Ok(Err(Fail::Null(name))) => {
            set_error(format!("null pointer passed as `{name}`"));
            LppStatus::NullPointer
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            LppStatus::Panic
        }
    }
}

unsafe fn out<'a, T>(p: *mut T, name: &'static str) -> Result<&'a mut T, Fail> {
    unsafe { p.as_mut() }.ok_or(Fail::Null(name))
}

unsafe fn input<'a, T>(p: *const T, name: &'static str) -> Result<&'a T, Fail> {
    unsafe { p.as_ref() }.ok_or(Fail::Null(name))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, name: &'static str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::Null(name));
    }
    Ok(unsafe { std::slice::from_raw_parts(p, len) })
}

unsafe fn text<'a>(p: *const c_char, name: &'static str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail::Null(name));
    }
    unsafe { CStr::from_ptr(p) }
        .to_str()
        .map_err(|_| Fail::Lib(LppError::Parse(format!("`{name}` is not valid UTF-8"))))
}

/// Message of the last failed call on this thread, or NULL. The pointer is
/// valid until the next lpplab call on the same thread.
#[no_mangle]
pub extern "C" fn lpp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn lpp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parse a weight spec such as `"family=exponential, rate=1"`.
///
/// # Safety
/// `fragment` must be a NUL-terminated string; `out_spec` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lpp_weight_spec_parse(fragment: *const c_char, out_spec: *mut *mut LppWeightSpec) -> LppStatus {
    guard(|| {
        let spec: WeightSpec = unsafe { text(fragment, "fragment")? }.parse()?;
        *unsafe { out(out_spec, "out_spec")? } = Box::into_raw(Box::new(LppWeightSpec(spec)));
        Ok(())
    })
}

/// The affinely standardized (mean 0, variance 1) copy of `spec`.
///
/// # Safety
/// `spec` must come from this library; `out_spec` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lpp_weight_spec_standardize(
    spec: *const LppWeightSpec,
    out_spec: *mut *mut LppWeightSpec,
) -> LppStatus {
    guard(|| {
        let std = unsafe { input(spec, "spec")? }.0.standardize()?;
        *unsafe { out(out_spec, "out_spec")? } = Box::into_raw(Box::new(LppWeightSpec(std)));
        Ok(())
    })
}

/// # Safety
/// `spec` must come from this library and must not be used afterwards. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn lpp_weight_spec_free(spec: *mut LppWeightSpec) {
    if !spec.is_null() {
        drop(unsafe { Box::from_raw(spec) });
    }
}

/// # Safety
/// `spec` must come from this library; the out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn lpp_weight_spec_moments(
    spec: *const LppWeightSpec,
    out_mean: *mut f64,
    out_variance: *mut f64,
) -> LppStatus {
    guard(|| {
        let s = &unsafe { input(spec, "spec")? }.0;
        *unsafe { out(out_mean, "out_mean")? } = s.mu();
        *unsafe { out(out_variance, "out_variance")? } = s.sigma2();
        Ok(())
    })
}

/// Passage time `T(n, k)` over a row-major grid of `k` rows of `n + 1`
/// weights, bottom row first.
///
/// # Safety
/// `weights` must point to `(n + 1) * k` doubles; `out_value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lpp_passage_time(n: usize, k: usize, weights: *const f64, out_value: *mut f64) -> LppStatus {
    guard(|| {
        let len = (n + 1).checked_mul(k).ok_or(LppError::InvalidParameter("grid size overflows".into()))?;
        let w = unsafe { slice(weights, len, "weights")? };
        let inst = LatticeInstance::from_grid(n, k, w.to_vec())?;
        *unsafe { out(out_value, "out_value")? } = passage_time(&inst);
        Ok(())
    })
}

/// Passage time plus the row profile `v_0..v_n` of the lowest optimal path.
///
/// # Safety
/// `weights` must point to `(n + 1) * k` doubles, `out_profile` to `n + 1` writable slots.
#[no_mangle]
pub unsafe extern "C" fn lpp_passage_time_with_path(
    n: usize,
    k: usize,
    weights: *const f64,
    out_value: *mut f64,
    out_profile: *mut usize,
) -> LppStatus {
    guard(|| {
        let len = (n + 1).checked_mul(k).ok_or(LppError::InvalidParameter("grid size overflows".into()))?;
        let w = unsafe { slice(weights, len, "weights")? };
        let value = unsafe { out(out_value, "out_value")? };
        if out_profile.is_null() {
            return Err(Fail::Null("out_profile"));
        }
        let res = passage_time_with_path(&LatticeInstance::from_grid(n, k, w.to_vec())?)?;
        let profile = res.row_profile.ok_or(LppError::MissingProfile)?;
        unsafe { std::slice::from_raw_parts_mut(out_profile, n + 1) }.copy_from_slice(&profile);
        *value = res.value;
        Ok(())
    })
}

/// Passage time with weights drawn from `spec` on the stream of
/// `(master_seed, replica)`; no grid is materialized.
///
/// # Safety
/// `spec` must come from this library; `out_value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lpp_passage_time_streamed(
    n: usize,
    k: usize,
    spec: *const LppWeightSpec,
    master_seed: u64,
    replica: u64,
    out_value: *mut f64,
) -> LppStatus {
    guard(|| {
        let s = unsafe { input(spec, "spec")? }.0;
        let inst = LatticeInstance::streamed(n, k, s, StreamKey::new(master_seed, replica, 1))?;
        *unsafe { out(out_value, "out_value")? } = passage_time(&inst);
        Ok(())
    })
}

/// `(t - n mu - 2 sigma n^((1+a)/2)) / (sigma n^(1/2 - a/6))`.
///
/// # Safety
/// `out_value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lpp_scaling_apply(
    n: u64,
    a: f64,
    mu: f64,
    sigma: f64,
    t: f64,
    out_value: *mut f64,
) -> LppStatus {
    guard(|| {
        let rule = ScalingRule::new(n, a, mu, sigma)?;
        *unsafe { out(out_value, "out_value")? } = rule.apply(t);
        Ok(())
    })
}

/// Largest eigenvalue of a `k × k` GUE matrix, normalized so the spectrum
/// edge sits at `2 sqrt(k)`.
///
/// # Safety
/// `out_value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lpp_gue_lambda_max(k: usize, master_seed: u64, replica: u64, out_value: *mut f64) -> LppStatus {
    guard(|| {
        *unsafe { out(out_value, "out_value")? } = gue_lambda_max(k, StreamKey::new(master_seed, replica, 1))?;
        Ok(())
    })
}

/// Build a Tracy-Widom table with the given quadrature order and grid step.
///
/// # Safety
/// `out_ref` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lpp_tw_reference_new(order: usize, step: f64, out_ref: *mut *mut LppTwReference) -> LppStatus {
    guard(|| {
        let table = TwReference::build(order, step)?;
        *unsafe { out(out_ref, "out_ref")? } = Box::into_raw(Box::new(LppTwReference(table)));
        Ok(())
    })
}

/// # Safety
/// `table` must come from this library and must not be used afterwards. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn lpp_tw_reference_free(table: *mut LppTwReference) {
    if !table.is_null() {
        drop(unsafe { Box::from_raw(table) });
    }
}

/// # Safety
/// `table` must come from this library; `out_value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lpp_tw_cdf(table: *const LppTwReference, s: f64, out_value: *mut f64) -> LppStatus {
    guard(|| {
        *unsafe { out(out_value, "out_value")? } = unsafe { input(table, "table")? }.0.cdf(s);
        Ok(())
    })
}

/// # Safety
/// `table` must come from this library; `out_value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lpp_tw_density(table: *const LppTwReference, s: f64, out_value: *mut f64) -> LppStatus {
    guard(|| {
        *unsafe { out(out_value, "out_value")? } = unsafe { input(table, "table")? }.0.density(s);
        Ok(())
    })
}

/// # Safety
/// `table` must come from this library; `out_value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lpp_tw_quantile(table: *const LppTwReference, u: f64, out_value: *mut f64) -> LppStatus {
    guard(|| {
        let q = unsafe { input(table, "table")? }.0.quantile(u)?;
        *unsafe { out(out_value, "out_value")? } = q;
        Ok(())
    })
}

/// # Safety
/// `table` must come from this library; the out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn lpp_tw_mean_variance(
    table: *const LppTwReference,
    out_mean: *mut f64,
    out_variance: *mut f64,
) -> LppStatus {
    guard(|| {
        let (m, v) = unsafe { input(table, "table")? }.0.mean_variance();
        *unsafe { out(out_mean, "out_mean")? } = m;
        *unsafe { out(out_variance, "out_variance")? } = v;
        Ok(())
    })
}

/// One-sample Kolmogorov-Smirnov distance between `values` and the table.
///
/// # Safety
/// `values` must point to `len` doubles; `table` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn lpp_ks_tw(
    table: *const LppTwReference,
    values: *const f64,
    len: usize,
    out_value: *mut f64,
) -> LppStatus {
    guard(|| {
        let t = &unsafe { input(table, "table")? }.0;
        let set = SampleSet::new(unsafe { slice(values, len, "values")? }.to_vec())?;
        *unsafe { out(out_value, "out_value")? } = ks_one_sample(&set, t)?;
        Ok(())
    })
}

/// Run the experiment described by a TOML config file. `output_override`
/// may be NULL; `workers` of 0 means the default. `out_complete` is set to 1
/// when every replica finished.
///
/// # Safety
/// `config_path` must be NUL-terminated; `output_override` NULL or NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn lpp_run_config(
    config_path: *const c_char,
    output_override: *const c_char,
    workers: usize,
    out_complete: *mut i32,
) -> LppStatus {
    guard(|| {
        let path = PathBuf::from(unsafe { text(config_path, "config_path")? });
        let mut cfg = ExperimentConfig::load(&path)?;
        if !output_override.is_null() {
            cfg.output = PathBuf::from(unsafe { text(output_override, "output_override")? });
        }
        let complete = unsafe { out(out_complete, "out_complete")? };
        let opts = harness::RunOptions {
            workers: (workers > 0).then_some(workers),
            ..Default::default()
        };
        *complete = harness::run_with(&cfg, &opts)?.complete as i32;
        Ok(())
    })
}
