//! C ABI for the borrowkit library.
//!
//! Conventions:
//!
//! * Every fallible entry point returns a [`BkStatus`] and writes its result
//!   through an out-pointer. `BK_STATUS_OK` is zero.
//! * Strings returned by the library are heap-allocated, NUL-terminated UTF-8
//!   and must be released with [`bk_string_free`]. Datasets are opaque
//!   handles released with [`bk_dataset_free`].
//! * On any non-OK status a thread-local error message is set; fetch it with
//!   [`bk_last_error_message`]. Each API call clears the previous message.
//! * All entry points catch panics and report them as `BK_STATUS_PANIC`
//!   instead of unwinding across the FFI boundary.
//!
//! Handles are not synchronized: a `BkDataset` may be used from one thread at
//! a time. Distinct handles are independent.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::fs::File;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use borrowkit::{
    run_analysis, run_mpi, run_study, scenario_csv, study_json, AnalysisConfig, Dataset, Error,
    StudyConfig,
};

/// Status code returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BkStatus {
    /// Success.
    Ok = 0,
    /// Runtime failure (I/O, parse, or statistical degeneracy).
    Runtime = 1,
    /// Invalid input: bad schema, configuration, or argument.
    Invalid = 2,
    /// A required pointer argument was NULL.
    NullPointer = 3,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 4,
    /// An internal panic was caught at the boundary.
    Panic = 5,
}

/// Opaque dataset handle produced by `bk_dataset_read_csv`.
pub struct BkDataset {
    inner: Dataset,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: &str) {
    let sanitized = msg.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = Some(CString::new(sanitized).unwrap_or_default());
    });
}

fn clear_error() {
    LAST_ERROR.with(|slot| slot.borrow_mut().take());
}

fn status_of(err: &Error) -> BkStatus {
    if err.exit_code() == 2 {
        BkStatus::Invalid
    } else {
        BkStatus::Runtime
    }
}

/// Runs the body with the error slot cleared and panics contained.
fn guarded(f: impl FnOnce() -> BkStatus) -> BkStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic caught at the FFI boundary");
            BkStatus::Panic
        }
    }
}

/// # Safety
/// `p` must be NULL or point to a NUL-terminated string.
unsafe fn require_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, BkStatus> {
    if p.is_null() {
        set_error(&format!("{what} must not be NULL"));
        return Err(BkStatus::NullPointer);
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error(&format!("{what} is not valid UTF-8"));
        BkStatus::InvalidUtf8
    })
}

fn emit_string(text: String, out: *mut *mut c_char) -> BkStatus {
    if out.is_null() {
        set_error("output pointer must not be NULL");
        return BkStatus::NullPointer;
    }
    match CString::new(text) {
        Ok(s) => {
            unsafe { *out = s.into_raw() };
            BkStatus::Ok
        }
        Err(_) => {
            set_error("result contained an interior NUL byte");
            BkStatus::Runtime
        }
    }
}

/// Returns the library version as a static NUL-terminated string.
/// The pointer is valid for the life of the process; do not free it.
#[no_mangle]
pub extern "C" fn bk_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Returns a copy of the last error message for this thread, or NULL when the
/// previous call succeeded. Release the copy with `bk_string_free`.
#[no_mangle]
pub extern "C" fn bk_last_error_message() -> *mut c_char {
    LAST_ERROR.with(|slot| match &*slot.borrow() {
        Some(msg) => msg.clone().into_raw(),
        None => ptr::null_mut(),
    })
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must be NULL or a pointer previously returned by a `bk_` function that
/// documents `bk_string_free` as its deallocator, and not freed before.
#[no_mangle]
pub unsafe extern "C" fn bk_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Reads an analysis dataset from a CSV file.
///
/// `covariate_columns` is an array of `n_covariates` column names. On success
/// writes a new handle to `out`; release it with `bk_dataset_free`.
///
/// # Safety
/// All string arguments must be NUL-terminated; `covariate_columns` must
/// point to `n_covariates` valid strings (it may be NULL when
/// `n_covariates` is zero); `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bk_dataset_read_csv(
    path: *const c_char,
    outcome_column: *const c_char,
    treatment_column: *const c_char,
    source_column: *const c_char,
    covariate_columns: *const *const c_char,
    n_covariates: usize,
    out: *mut *mut BkDataset,
) -> BkStatus {
    guarded(|| {
        if out.is_null() {
            set_error("output pointer must not be NULL");
            return BkStatus::NullPointer;
        }
        let path = match require_str(path, "path") {
            Ok(s) => s,
            Err(status) => return status,
        };
        let outcome = match require_str(outcome_column, "outcome column") {
            Ok(s) => s,
            Err(status) => return status,
        };
        let treatment = match require_str(treatment_column, "treatment column") {
            Ok(s) => s,
            Err(status) => return status,
        };
        let source = match require_str(source_column, "source column") {
            Ok(s) => s,
            Err(status) => return status,
        };
        if covariate_columns.is_null() && n_covariates > 0 {
            set_error("covariate list must not be NULL when n_covariates > 0");
            return BkStatus::NullPointer;
        }
        let mut covariates = Vec::with_capacity(n_covariates);
        for i in 0..n_covariates {
            match require_str(*covariate_columns.add(i), "covariate column") {
                Ok(s) => covariates.push(s.to_string()),
                Err(status) => return status,
            }
        }

        let file = match File::open(path) {
            Ok(f) => f,
            Err(e) => {
                set_error(&format!("cannot open {path}: {e}"));
                return BkStatus::Runtime;
            }
        };
        match Dataset::read_csv(file, outcome, treatment, source, &covariates) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(BkDataset { inner }));
                BkStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                status_of(&e)
            }
        }
    })
}

/// Writes the arm sizes of a dataset. Any of the out-pointers may be NULL to
/// skip that count.
///
/// # Safety
/// `dataset` must be a live handle from `bk_dataset_read_csv`.
#[no_mangle]
pub unsafe extern "C" fn bk_dataset_counts(
    dataset: *const BkDataset,
    n_treated: *mut usize,
    n_control: *mut usize,
    n_external: *mut usize,
) -> BkStatus {
    guarded(|| {
        if dataset.is_null() {
            set_error("dataset must not be NULL");
            return BkStatus::NullPointer;
        }
        let ds = &(*dataset).inner;
        if !n_treated.is_null() {
            *n_treated = ds.treatment.n();
        }
        if !n_control.is_null() {
            *n_control = ds.control.n();
        }
        if !n_external.is_null() {
            *n_external = ds.external.as_ref().map_or(0, |a| a.n());
        }
        BkStatus::Ok
    })
}

/// Releases a dataset handle. NULL is ignored.
///
/// # Safety
/// `dataset` must be NULL or a handle from `bk_dataset_read_csv` that has not
/// been freed before.
#[no_mangle]
pub unsafe extern "C" fn bk_dataset_free(dataset: *mut BkDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Runs the borrowing analysis described by a JSON configuration and writes
/// the full report as a JSON string to `out`.
///
/// The configuration uses the same schema as the CLI `analyze` subcommand;
/// its column names must match the ones the dataset was read with.
///
/// # Safety
/// `dataset` must be a live handle; `config_json` must be NUL-terminated;
/// `out` must be a valid pointer. Free the result with `bk_string_free`.
#[no_mangle]
pub unsafe extern "C" fn bk_analyze_json(
    dataset: *const BkDataset,
    config_json: *const c_char,
    out: *mut *mut c_char,
) -> BkStatus {
    guarded(|| {
        if dataset.is_null() {
            set_error("dataset must not be NULL");
            return BkStatus::NullPointer;
        }
        let config = match require_str(config_json, "configuration") {
            Ok(s) => s,
            Err(status) => return status,
        };
        let cfg = match AnalysisConfig::from_json(config) {
            Ok(c) => c,
            Err(e) => {
                set_error(&e.to_string());
                return status_of(&e);
            }
        };
        match run_analysis(&(*dataset).inner, &cfg) {
            Ok(report) => match serde_json::to_string_pretty(&report) {
                Ok(json) => emit_string(json, out),
                Err(e) => {
                    set_error(&format!("report serialization failed: {e}"));
                    BkStatus::Runtime
                }
            },
            Err(e) => {
                set_error(&e.to_string());
                status_of(&e)
            }
        }
    })
}

/// Computes the mean/variance compatibility indices and calibrated borrowing
/// strengths for a dataset, writing them as a JSON string to `out`.
///
/// # Safety
/// Same contract as `bk_analyze_json`.
#[no_mangle]
pub unsafe extern "C" fn bk_mpi_json(
    dataset: *const BkDataset,
    config_json: *const c_char,
    out: *mut *mut c_char,
) -> BkStatus {
    guarded(|| {
        if dataset.is_null() {
            set_error("dataset must not be NULL");
            return BkStatus::NullPointer;
        }
        let config = match require_str(config_json, "configuration") {
            Ok(s) => s,
            Err(status) => return status,
        };
        let cfg = match AnalysisConfig::from_json(config) {
            Ok(c) => c,
            Err(e) => {
                set_error(&e.to_string());
                return status_of(&e);
            }
        };
        match run_mpi(&(*dataset).inner, &cfg) {
            Ok(summary) => match serde_json::to_string_pretty(&summary) {
                Ok(json) => emit_string(json, out),
                Err(e) => {
                    set_error(&format!("summary serialization failed: {e}"));
                    BkStatus::Runtime
                }
            },
            Err(e) => {
                set_error(&e.to_string());
                status_of(&e)
            }
        }
    })
}

/// Runs a simulation study from a JSON study configuration and writes the
/// full trace (configuration echo, metric rows, calibration records) as a
/// JSON string to `out`.
///
/// # Safety
/// `config_json` must be NUL-terminated; `out` must be a valid pointer. Free
/// the result with `bk_string_free`.
#[no_mangle]
pub unsafe extern "C" fn bk_simulate_json(
    config_json: *const c_char,
    out: *mut *mut c_char,
) -> BkStatus {
    guarded(|| {
        let config = match require_str(config_json, "configuration") {
            Ok(s) => s,
            Err(status) => return status,
        };
        let cfg: StudyConfig = match serde_json::from_str(config) {
            Ok(c) => c,
            Err(e) => {
                set_error(&format!("invalid study configuration: {e}"));
                return BkStatus::Invalid;
            }
        };
        let result = match run_study(&cfg) {
            Ok(r) => r,
            Err(e) => {
                set_error(&e.to_string());
                return status_of(&e);
            }
        };
        match study_json(&cfg, &result) {
            Ok(json) => emit_string(json, out),
            Err(e) => {
                set_error(&e.to_string());
                status_of(&e)
            }
        }
    })
}

/// Writes the built-in simulation scenario table as a CSV string to `out`.
/// Free the result with `bk_string_free`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bk_scenarios_csv(out: *mut *mut c_char) -> BkStatus {
    guarded(|| emit_string(scenario_csv(), out))
}
