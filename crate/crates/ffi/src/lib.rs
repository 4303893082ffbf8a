// SPDX-License-Identifier: MIT OR Apache-2.0

//! C ABI over `parcs-core`.
//!
//! Every fallible function returns a [`ParcsStatus`]; on failure a message is
//! stored per thread and can be read with [`parcs_last_error_message`].
//! Handles are opaque and must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use parcs_core::detect::{detect, DetectConfig, Detection, Method};
use parcs_core::infer::{BlockSize, BootstrapConfig, CpTest};
use parcs_core::rng::RngSpec;
use parcs_core::series::MultiSeries;
use parcs_core::ParcsError;

/// Status codes returned by every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParcsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    NoVariance = 3,
    NegativeCount = 4,
    Config = 5,
    InfeasibleBlocks = 6,
    Parse = 7,
    Io = 8,
    Internal = 9,
    OutOfRange = 10,
    Panic = 11,
}

/// Detection method selector.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParcsMethod {
    Parcs = 0,
    Cusum = 1,
    CusumMl = 2,
    Binseg = 3,
}

impl From<ParcsMethod> for Method {
    fn from(m: ParcsMethod) -> Self {
        match m {
            ParcsMethod::Parcs => Method::Parcs,
            ParcsMethod::Cusum => Method::Cusum,
            ParcsMethod::CusumMl => Method::CusumMl,
            ParcsMethod::Binseg => Method::Binseg,
        }
    }
}

/// Detection options. Fill with [`parcs_detect_options_default`] and adjust.
///
/// `forward == 0` selects the default forward bound, a NaN `gamma` selects the
/// method's default weighting and `block_size == 0` estimates the block size.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct ParcsDetectOptions {
    pub method: ParcsMethod,
    pub max_cps: usize,
    pub forward: usize,
    pub gamma: f64,
    pub max_depth: usize,
    pub sqrt_preprocess: bool,
    pub alpha: f64,
    pub permutations: usize,
    pub block_size: usize,
    pub ma_upper_bound: usize,
    pub ma_alpha: f64,
    pub shared_permutation: bool,
    pub seed: u64,
}

impl ParcsDetectOptions {
    fn to_config(self) -> DetectConfig {
        let base = DetectConfig::default();
        DetectConfig {
            method: self.method.into(),
            max_cps: self.max_cps,
            forward: (self.forward > 0).then_some(self.forward),
            gamma: (!self.gamma.is_nan()).then_some(self.gamma),
            max_depth: self.max_depth,
            sqrt_preprocess: self.sqrt_preprocess,
            bootstrap: BootstrapConfig {
                permutations: self.permutations,
                alpha: self.alpha,
                block_size: match self.block_size {
                    0 => BlockSize::Auto,
                    k => BlockSize::Fixed(k),
                },
                ma_upper_bound: self.ma_upper_bound,
                ma_alpha: self.ma_alpha,
                shared_permutation: self.shared_permutation,
                ..base.bootstrap
            },
        }
    }
}

/// One tested change point.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct ParcsChangePoint {
    /// Number of observations before the jump (the 1-based last index of the old regime).
    pub location: usize,
    pub rank: usize,
    pub statistic: f64,
    pub threshold: f64,
    pub p_value: f64,
}

/// Opaque multivariate series.
pub struct ParcsSeries {
    inner: MultiSeries,
}

/// Opaque detection result.
pub struct ParcsResult {
    detection: Detection,
    json: CString,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &ParcsError) -> ParcsStatus {
    match e {
        ParcsError::InvalidInput(_) => ParcsStatus::InvalidInput,
        ParcsError::NoVariance => ParcsStatus::NoVariance,
        ParcsError::NegativeCount { .. } => ParcsStatus::NegativeCount,
        ParcsError::Config(_) => ParcsStatus::Config,
        ParcsError::InfeasibleBlocks(_) => ParcsStatus::InfeasibleBlocks,
        ParcsError::Parse(_) => ParcsStatus::Parse,
        ParcsError::Io(_) => ParcsStatus::Io,
        _ => ParcsStatus::Internal,
    }
}

fn fail(status: ParcsStatus, msg: impl Into<String>) -> ParcsStatus {
    set_error(msg.into());
    status
}

fn guard(f: impl FnOnce() -> ParcsStatus) -> ParcsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => fail(ParcsStatus::Panic, "panic inside parcs"),
    }
}

fn from_core<T>(r: parcs_core::Result<T>) -> Result<T, ParcsStatus> {
    r.map_err(|e| fail(status_of(&e), e.to_string()))
}

/// Message for the last failure on the calling thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn parcs_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn parcs_version() -> *const c_char {
    static VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(v) => v,
        Err(_) => c"unknown",
    };
    VERSION.as_ptr()
}

/// Builds a series from `len * covariates` values stored column by column:
/// covariate `n` occupies `data[n * len .. (n + 1) * len]`.
///
/// # Safety
/// `data` must point to `len * covariates` readable doubles and `out` must be
/// a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn parcs_series_new(
    data: *const f64,
    len: usize,
    covariates: usize,
    out: *mut *mut ParcsSeries,
) -> ParcsStatus {
    guard(|| {
        if data.is_null() || out.is_null() {
            return fail(ParcsStatus::NullPointer, "null pointer argument");
        }
        *out = ptr::null_mut();
        let Some(total) = len.checked_mul(covariates) else {
            return fail(ParcsStatus::InvalidInput, "len * covariates overflows");
        };
        let values = std::slice::from_raw_parts(data, total);
        let columns = if len == 0 { Vec::new() } else { values.chunks(len).map(<[f64]>::to_vec).collect() };
        match from_core(MultiSeries::from_columns(columns)) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(ParcsSeries { inner }));
                ParcsStatus::Ok
            }
            Err(s) => s,
        }
    })
}

/// # Safety
/// `series` must be NULL or a handle from [`parcs_series_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn parcs_series_free(series: *mut ParcsSeries) {
    if !series.is_null() {
        drop(Box::from_raw(series));
    }
}

/// # Safety
/// `series` must be NULL or a valid handle.
#[no_mangle]
pub unsafe extern "C" fn parcs_series_len(series: *const ParcsSeries) -> usize {
    series.as_ref().map_or(0, |s| s.inner.len())
}

/// # Safety
/// `series` must be NULL or a valid handle.
#[no_mangle]
pub unsafe extern "C" fn parcs_series_covariates(series: *const ParcsSeries) -> usize {
    series.as_ref().map_or(0, |s| s.inner.covariates())
}

/// Writes the default options (PARCS with M = 3, 10000 permutations,
/// alpha = 0.05, estimated block size, seed 0).
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn parcs_detect_options_default(out: *mut ParcsDetectOptions) -> ParcsStatus {
    let Some(out) = out.as_mut() else {
        return fail(ParcsStatus::NullPointer, "null pointer argument");
    };
    let d = DetectConfig::default();
    *out = ParcsDetectOptions {
        method: ParcsMethod::Parcs,
        max_cps: d.max_cps,
        forward: d.forward.unwrap_or(0),
        gamma: d.gamma.unwrap_or(f64::NAN),
        max_depth: d.max_depth,
        sqrt_preprocess: d.sqrt_preprocess,
        alpha: d.bootstrap.alpha,
        permutations: d.bootstrap.permutations,
        block_size: 0,
        ma_upper_bound: d.bootstrap.ma_upper_bound,
        ma_alpha: d.bootstrap.ma_alpha,
        shared_permutation: d.bootstrap.shared_permutation,
        seed: 0,
    };
    ParcsStatus::Ok
}

/// Runs detection. On success `*out` receives a result handle.
///
/// # Safety
/// `series` and `options` must be valid; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn parcs_detect(
    series: *const ParcsSeries,
    options: *const ParcsDetectOptions,
    out: *mut *mut ParcsResult,
) -> ParcsStatus {
    guard(|| {
        let (Some(series), Some(options)) = (series.as_ref(), options.as_ref()) else {
            return fail(ParcsStatus::NullPointer, "null pointer argument");
        };
        if out.is_null() {
            return fail(ParcsStatus::NullPointer, "null pointer argument");
        }
        *out = ptr::null_mut();
        let config = options.to_config();
        let run = || -> parcs_core::Result<ParcsResult> {
            config.validate()?;
            let detection = detect(&series.inner, &config, RngSpec::new(options.seed))?;
            let doc = parcs_core::cli::result_document(&series.inner, &config, options.seed, &detection)?;
            let json = CString::new(doc.to_string()).map_err(|e| ParcsError::Internal(e.to_string()))?;
            Ok(ParcsResult { detection, json })
        };
        match from_core(run()) {
            Ok(r) => {
                *out = Box::into_raw(Box::new(r));
                ParcsStatus::Ok
            }
            Err(s) => s,
        }
    })
}

/// # Safety
/// `result` must be NULL or a handle from [`parcs_detect`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn parcs_result_free(result: *mut ParcsResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

fn tests_of(r: &ParcsResult, accepted: bool) -> &[CpTest] {
    if accepted {
        &r.detection.result.accepted
    } else {
        &r.detection.result.rejected
    }
}

/// Number of accepted (`accepted == true`) or rejected change points.
///
/// # Safety
/// `result` must be NULL or a valid handle.
#[no_mangle]
pub unsafe extern "C" fn parcs_result_count(result: *const ParcsResult, accepted: bool) -> usize {
    result.as_ref().map_or(0, |r| tests_of(r, accepted).len())
}

/// Copies change point `index` of the accepted or rejected list into `*out`.
///
/// # Safety
/// `result` must be a valid handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn parcs_result_change_point(
    result: *const ParcsResult,
    accepted: bool,
    index: usize,
    out: *mut ParcsChangePoint,
) -> ParcsStatus {
    let (Some(r), Some(out)) = (result.as_ref(), out.as_mut()) else {
        return fail(ParcsStatus::NullPointer, "null pointer argument");
    };
    let Some(t) = tests_of(r, accepted).get(index) else {
        return fail(ParcsStatus::OutOfRange, format!("change point index {index} out of range"));
    };
    *out = ParcsChangePoint {
        location: t.location,
        rank: t.rank,
        statistic: t.statistic,
        threshold: t.threshold,
        p_value: t.p_value,
    };
    ParcsStatus::Ok
}

fn copy_out(values: &[f64], buf: *mut f64, capacity: usize, written: *mut usize) -> ParcsStatus {
    // SAFETY: the callers' contracts require `buf` to hold `capacity` doubles.
    unsafe {
        if let Some(w) = written.as_mut() {
            *w = values.len();
        }
        if capacity < values.len() {
            return fail(ParcsStatus::OutOfRange, format!("buffer holds {capacity} values, {} needed", values.len()));
        }
        if !values.is_empty() {
            if buf.is_null() {
                return fail(ParcsStatus::NullPointer, "null buffer");
            }
            ptr::copy_nonoverlapping(values.as_ptr(), buf, values.len());
        }
    }
    ParcsStatus::Ok
}

/// Copies the per-covariate jump estimates of a change point into `buf`.
/// `*written` (if not NULL) receives the number of values required.
///
/// # Safety
/// `result` must be a valid handle and `buf` must hold `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn parcs_result_step_weights(
    result: *const ParcsResult,
    accepted: bool,
    index: usize,
    buf: *mut f64,
    capacity: usize,
    written: *mut usize,
) -> ParcsStatus {
    let Some(r) = result.as_ref() else {
        return fail(ParcsStatus::NullPointer, "null pointer argument");
    };
    match tests_of(r, accepted).get(index) {
        Some(t) => copy_out(&t.step_weights, buf, capacity, written),
        None => fail(ParcsStatus::OutOfRange, format!("change point index {index} out of range")),
    }
}

/// Copies the reconstructed mean of `covariate` into `buf`.
///
/// # Safety
/// `result` must be a valid handle and `buf` must hold `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn parcs_result_reconstructed(
    result: *const ParcsResult,
    covariate: usize,
    buf: *mut f64,
    capacity: usize,
    written: *mut usize,
) -> ParcsStatus {
    let Some(r) = result.as_ref() else {
        return fail(ParcsStatus::NullPointer, "null pointer argument");
    };
    match r.detection.reconstructed.get(covariate) {
        Some(values) => copy_out(values, buf, capacity, written),
        None => fail(ParcsStatus::OutOfRange, format!("covariate {covariate} out of range")),
    }
}

/// Block length used by the bootstrap.
///
/// # Safety
/// `result` must be NULL or a valid handle.
#[no_mangle]
pub unsafe extern "C" fn parcs_result_block_size(result: *const ParcsResult) -> usize {
    result.as_ref().map_or(0, |r| r.detection.result.block_size)
}

/// Estimated MA order, or -1 when the block size was fixed.
///
/// # Safety
/// `result` must be NULL or a valid handle.
#[no_mangle]
pub unsafe extern "C" fn parcs_result_ma_order(result: *const ParcsResult) -> i64 {
    result
        .as_ref()
        .and_then(|r| r.detection.result.estimated_q)
        .map_or(-1, |q| q as i64)
}

/// The result as a JSON document. The string is owned by the handle.
///
/// # Safety
/// `result` must be NULL or a valid handle.
#[no_mangle]
pub unsafe extern "C" fn parcs_result_json(result: *const ParcsResult) -> *const c_char {
    result.as_ref().map_or(ptr::null(), |r| r.json.as_ptr())
}
