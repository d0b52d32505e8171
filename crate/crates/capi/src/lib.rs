//! C interface over the stage builder: opaque stage handles, status codes
//! for call mechanics, and JSON strings for structured results.
//!
//! Conventions:
//! - Every function returning [`SubshiftStatus`] reports only whether the
//!   call itself succeeded. Domain outcomes (a build stopping short of its
//!   target, a verification failing) travel through out parameters.
//! - Strings returned through `*mut *mut c_char` are NUL-terminated UTF-8
//!   owned by the caller; release them with [`subshift_string_free`].
//! - Handles returned through `*mut *mut SubshiftStage` are released with
//!   [`subshift_stage_free`]. Both free functions accept null.
//! - On any non-ok status a thread-local message is set; fetch a copy with
//!   [`subshift_last_error`].

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::os::raw::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};

use serde::Deserialize;
use serde_json::json;
use subshift::construction::{
    build_next, init_stage, rational_from_string, verify_stage_pair, FillRule, Stage, StageParams,
};

/// Opaque handle to one built stage: its side, schedules, and pattern set.
pub struct SubshiftStage(Stage);

/// Call outcome. Zero is success; everything else leaves a message
/// retrievable with [`subshift_last_error`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubshiftStatus {
    /// The call completed.
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// The input was rejected: malformed JSON, bad parameters, or a
    /// geometry mismatch between arguments.
    InvalidInput = 3,
    /// File reading or writing failed.
    Io = 4,
    /// An internal invariant broke; the library state is still usable.
    Internal = 5,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: &str) {
    let owned = CString::new(message.replace('\0', " "))
        .unwrap_or_else(|_| CString::new("error message unavailable").unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(owned));
}

fn clear_last_error() {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
}

fn fail(status: SubshiftStatus, message: &str) -> SubshiftStatus {
    set_last_error(message);
    status
}

fn status_of(e: &subshift::error::Error) -> SubshiftStatus {
    match e {
        subshift::error::Error::Io(_) => SubshiftStatus::Io,
        _ => SubshiftStatus::InvalidInput,
    }
}

/// Runs a fallible body behind a panic guard so unwinding never crosses
/// the language boundary.
fn guarded(body: impl FnOnce() -> SubshiftStatus) -> SubshiftStatus {
    clear_last_error();
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => fail(SubshiftStatus::Internal, "internal panic"),
    }
}

/// # Safety
/// `text` must be a valid NUL-terminated string or null.
unsafe fn read_str<'a>(text: *const c_char) -> Result<&'a str, SubshiftStatus> {
    if text.is_null() {
        return Err(fail(SubshiftStatus::NullArgument, "string argument is null"));
    }
    CStr::from_ptr(text)
        .to_str()
        .map_err(|_| fail(SubshiftStatus::InvalidUtf8, "string argument is not UTF-8"))
}

fn into_c_string(text: String) -> Result<*mut c_char, SubshiftStatus> {
    CString::new(text)
        .map(CString::into_raw)
        .map_err(|_| fail(SubshiftStatus::Internal, "output contained a NUL byte"))
}

/// # Safety
/// `out` must be null or valid for writing one pointer.
unsafe fn write_json(out: *mut *mut c_char, value: &serde_json::Value) -> Result<(), SubshiftStatus> {
    if out.is_null() {
        return Ok(());
    }
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| fail(SubshiftStatus::Internal, &e.to_string()))?;
    *out = into_c_string(text)?;
    Ok(())
}

/// Build parameters accepted by [`subshift_build_next`], as JSON:
/// `l`, `m`, `d` required; `target` required; rationals are "p/q" strings.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BuildParams {
    l: u64,
    m: u64,
    d: String,
    #[serde(default = "default_nu")]
    nu: String,
    #[serde(default = "default_slack")]
    slack: String,
    target: usize,
    #[serde(default)]
    budget: Option<usize>,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_fill")]
    fill: String,
}

fn default_nu() -> String {
    "1/10".into()
}

fn default_slack() -> String {
    "1/2".into()
}

fn default_fill() -> String {
    "random".into()
}

impl BuildParams {
    fn into_stage_params(self) -> Result<StageParams, subshift::error::Error> {
        Ok(StageParams {
            l: self.l,
            m_next: self.m,
            d_tol: rational_from_string(&self.d)?,
            nu: rational_from_string(&self.nu)?,
            slack: rational_from_string(&self.slack)?,
            target: self.target,
            budget: self.budget.unwrap_or(self.target.saturating_mul(100)),
            seed: self.seed,
            fill: FillRule::parse(&self.fill)?,
        })
    }
}

fn stage_summary(stage: &Stage) -> serde_json::Value {
    json!({
        "format": 1,
        "k": stage.k(),
        "d": stage.dim(),
        "side": stage.side(),
        "modulus": stage.modulus(),
        "count": stage.patterns().len(),
    })
}

/// Creates the initial stage in `dim` dimensions and stores the new handle
/// in `out`.
///
/// # Safety
/// `out` must be valid for writing one pointer.
#[no_mangle]
pub unsafe extern "C" fn subshift_stage_init(
    dim: usize,
    out: *mut *mut SubshiftStage,
) -> SubshiftStatus {
    guarded(|| {
        if out.is_null() {
            return fail(SubshiftStatus::NullArgument, "out handle is null");
        }
        match init_stage(dim) {
            Ok(stage) => {
                *out = Box::into_raw(Box::new(SubshiftStage(stage)));
                SubshiftStatus::Ok
            }
            Err(e) => fail(status_of(&e), &e.to_string()),
        }
    })
}

/// Parses a stage from its JSON serialization and stores the new handle in
/// `out`.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be valid for writing
/// one pointer.
#[no_mangle]
pub unsafe extern "C" fn subshift_stage_from_json(
    text: *const c_char,
    out: *mut *mut SubshiftStage,
) -> SubshiftStatus {
    guarded(|| {
        if out.is_null() {
            return fail(SubshiftStatus::NullArgument, "out handle is null");
        }
        let text = match read_str(text) {
            Ok(t) => t,
            Err(status) => return status,
        };
        match Stage::from_json(text) {
            Ok(stage) => {
                *out = Box::into_raw(Box::new(SubshiftStage(stage)));
                SubshiftStatus::Ok
            }
            Err(e) => fail(status_of(&e), &e.to_string()),
        }
    })
}

/// Reads a stage file from `path` and stores the new handle in `out`.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be valid for writing
/// one pointer.
#[no_mangle]
pub unsafe extern "C" fn subshift_stage_read_file(
    path: *const c_char,
    out: *mut *mut SubshiftStage,
) -> SubshiftStatus {
    guarded(|| {
        if out.is_null() {
            return fail(SubshiftStatus::NullArgument, "out handle is null");
        }
        let path = match read_str(path) {
            Ok(t) => t,
            Err(status) => return status,
        };
        match Stage::read_file(std::path::Path::new(path)) {
            Ok(stage) => {
                *out = Box::into_raw(Box::new(SubshiftStage(stage)));
                SubshiftStatus::Ok
            }
            Err(e) => fail(status_of(&e), &e.to_string()),
        }
    })
}

/// Serializes the stage to its canonical JSON form and stores a new string
/// in `out`.
///
/// # Safety
/// `stage` must be a live handle from this library; `out` must be valid for
/// writing one pointer.
#[no_mangle]
pub unsafe extern "C" fn subshift_stage_to_json(
    stage: *const SubshiftStage,
    out: *mut *mut c_char,
) -> SubshiftStatus {
    guarded(|| {
        if stage.is_null() || out.is_null() {
            return fail(SubshiftStatus::NullArgument, "stage or out is null");
        }
        match into_c_string((*stage).0.to_json()) {
            Ok(text) => {
                *out = text;
                SubshiftStatus::Ok
            }
            Err(status) => status,
        }
    })
}

/// Writes the stage file to `path`.
///
/// # Safety
/// `stage` must be a live handle from this library; `path` must be a
/// NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn subshift_stage_write_file(
    stage: *const SubshiftStage,
    path: *const c_char,
) -> SubshiftStatus {
    guarded(|| {
        if stage.is_null() {
            return fail(SubshiftStatus::NullArgument, "stage is null");
        }
        let path = match read_str(path) {
            Ok(t) => t,
            Err(status) => return status,
        };
        match (*stage).0.write_file(std::path::Path::new(path)) {
            Ok(()) => SubshiftStatus::Ok,
            Err(e) => fail(status_of(&e), &e.to_string()),
        }
    })
}

/// Stores the stage's dimension in `out`.
///
/// # Safety
/// `stage` must be a live handle from this library; `out` must be valid for
/// writing one value.
#[no_mangle]
pub unsafe extern "C" fn subshift_stage_dim(
    stage: *const SubshiftStage,
    out: *mut usize,
) -> SubshiftStatus {
    guarded(|| {
        if stage.is_null() || out.is_null() {
            return fail(SubshiftStatus::NullArgument, "stage or out is null");
        }
        *out = (*stage).0.dim();
        SubshiftStatus::Ok
    })
}

/// Stores the stage's one-based index in `out`.
///
/// # Safety
/// `stage` must be a live handle from this library; `out` must be valid for
/// writing one value.
#[no_mangle]
pub unsafe extern "C" fn subshift_stage_index(
    stage: *const SubshiftStage,
    out: *mut usize,
) -> SubshiftStatus {
    guarded(|| {
        if stage.is_null() || out.is_null() {
            return fail(SubshiftStatus::NullArgument, "stage or out is null");
        }
        *out = (*stage).0.k();
        SubshiftStatus::Ok
    })
}

/// Stores the side length of the stage's patterns in `out`.
///
/// # Safety
/// `stage` must be a live handle from this library; `out` must be valid for
/// writing one value.
#[no_mangle]
pub unsafe extern "C" fn subshift_stage_side(
    stage: *const SubshiftStage,
    out: *mut u64,
) -> SubshiftStatus {
    guarded(|| {
        if stage.is_null() || out.is_null() {
            return fail(SubshiftStatus::NullArgument, "stage or out is null");
        }
        *out = (*stage).0.side();
        SubshiftStatus::Ok
    })
}

/// Stores the stage's residue modulus in `out`.
///
/// # Safety
/// `stage` must be a live handle from this library; `out` must be valid for
/// writing one value.
#[no_mangle]
pub unsafe extern "C" fn subshift_stage_modulus(
    stage: *const SubshiftStage,
    out: *mut u64,
) -> SubshiftStatus {
    guarded(|| {
        if stage.is_null() || out.is_null() {
            return fail(SubshiftStatus::NullArgument, "stage or out is null");
        }
        *out = (*stage).0.modulus();
        SubshiftStatus::Ok
    })
}

/// Stores the number of stored patterns in `out`.
///
/// # Safety
/// `stage` must be a live handle from this library; `out` must be valid for
/// writing one value.
#[no_mangle]
pub unsafe extern "C" fn subshift_stage_pattern_count(
    stage: *const SubshiftStage,
    out: *mut usize,
) -> SubshiftStatus {
    guarded(|| {
        if stage.is_null() || out.is_null() {
            return fail(SubshiftStatus::NullArgument, "stage or out is null");
        }
        *out = (*stage).0.patterns().len();
        SubshiftStatus::Ok
    })
}

/// Builds the next stage from `prev` using JSON parameters, e.g.
/// `{"l": 6, "m": 6, "d": "3/10", "target": 40, "seed": 1}` with optional
/// `nu` (default "1/10"), `slack` (default "1/2"), `budget` (default
/// 100 * target), `seed` (default 0), and `fill` (default "random", also
/// "all_zero", "all_one", or "explicit:bits").
///
/// `out_complete` receives whether the target count was reached within the
/// draw budget; a stage handle is produced either way. `out_report_json`
/// may be null when the caller does not want the build report.
///
/// # Safety
/// `prev` must be a live handle from this library; `params_json` must be a
/// NUL-terminated string; `out_stage` and `out_complete` must be valid for
/// writing; `out_report_json` must be null or valid for writing.
#[no_mangle]
pub unsafe extern "C" fn subshift_build_next(
    prev: *const SubshiftStage,
    params_json: *const c_char,
    out_stage: *mut *mut SubshiftStage,
    out_complete: *mut bool,
    out_report_json: *mut *mut c_char,
) -> SubshiftStatus {
    guarded(|| {
        if prev.is_null() || out_stage.is_null() || out_complete.is_null() {
            return fail(
                SubshiftStatus::NullArgument,
                "prev, out_stage, or out_complete is null",
            );
        }
        let text = match read_str(params_json) {
            Ok(t) => t,
            Err(status) => return status,
        };
        let raw: BuildParams = match serde_json::from_str(text) {
            Ok(p) => p,
            Err(e) => return fail(SubshiftStatus::InvalidInput, &e.to_string()),
        };
        let params = match raw.into_stage_params() {
            Ok(p) => p,
            Err(e) => return fail(SubshiftStatus::InvalidInput, &e.to_string()),
        };
        let (next, report) = match build_next(&(*prev).0, &params) {
            Ok(pair) => pair,
            Err(e) => return fail(status_of(&e), &e.to_string()),
        };
        let mut summary = stage_summary(&next);
        summary["draws"] = json!(report.draws);
        summary["passed"] = json!(report.passed);
        summary["accepted"] = json!(report.accepted);
        summary["complete"] = json!(report.complete);
        summary["level"] = json!(report.level);
        if let Err(status) = write_json(out_report_json, &summary) {
            return status;
        }
        *out_complete = report.complete;
        *out_stage = Box::into_raw(Box::new(SubshiftStage(next)));
        SubshiftStatus::Ok
    })
}

/// Re-derives every stored condition for a consecutive stage pair.
/// `out_pass` receives the verdict; `out_report_json` may be null, or
/// receives the full report with per-condition flags and counterexamples.
///
/// # Safety
/// `earlier` and `later` must be live handles from this library;
/// `out_pass` must be valid for writing; `out_report_json` must be null or
/// valid for writing.
#[no_mangle]
pub unsafe extern "C" fn subshift_verify_pair(
    earlier: *const SubshiftStage,
    later: *const SubshiftStage,
    out_pass: *mut bool,
    out_report_json: *mut *mut c_char,
) -> SubshiftStatus {
    guarded(|| {
        if earlier.is_null() || later.is_null() || out_pass.is_null() {
            return fail(
                SubshiftStatus::NullArgument,
                "earlier, later, or out_pass is null",
            );
        }
        let report = match verify_stage_pair(&(*earlier).0, &(*later).0) {
            Ok(r) => r,
            Err(e) => return fail(status_of(&e), &e.to_string()),
        };
        let value = json!({
            "format": 1,
            "pass": report.pass,
            "k": report.k,
            "level": report.level,
            "structure_ok": report.structure_ok,
            "gcd_ok": report.gcd_ok,
            "concatenation_ok": report.concatenation_ok,
            "coverage_ok": report.coverage_ok,
            "window_ok": report.window_ok,
            "coincidence_ok": report.coincidence_ok,
            "counterexamples": report.counterexamples,
        });
        if let Err(status) = write_json(out_report_json, &value) {
            return status;
        }
        *out_pass = report.pass;
        SubshiftStatus::Ok
    })
}

/// Releases a stage handle. Null is accepted and ignored.
///
/// # Safety
/// `stage` must be null or a handle from this library that has not been
/// freed before.
#[no_mangle]
pub unsafe extern "C" fn subshift_stage_free(stage: *mut SubshiftStage) {
    if !stage.is_null() {
        drop(Box::from_raw(stage));
    }
}

/// Releases a string returned by this library. Null is accepted and
/// ignored.
///
/// # Safety
/// `text` must be null or a string from this library that has not been
/// freed before.
#[no_mangle]
pub unsafe extern "C" fn subshift_string_free(text: *mut c_char) {
    if !text.is_null() {
        drop(CString::from_raw(text));
    }
}

/// Returns a copy of the message from the most recent failing call on this
/// thread, or null when the last call succeeded. The caller releases the
/// copy with [`subshift_string_free`].
#[no_mangle]
pub extern "C" fn subshift_last_error() -> *mut c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow()
            .as_ref()
            .map(|msg| msg.clone().into_raw())
            .unwrap_or(std::ptr::null_mut())
    })
}
