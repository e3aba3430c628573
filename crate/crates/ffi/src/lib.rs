//! C ABI over `randcover`.
//!
//! Handles are opaque pointers created by `rc_*_new`/`rc_*_from_json` and
//! released by the matching `rc_*_free`. Every fallible call returns an
//! `RcStatus`; on failure `rc_last_error` describes the cause for the
//! calling thread. Strings returned by the library are freed with
//! `rc_string_free`.

use randcover::cli::RunConfig;
use randcover::covering::{self, CoveringRealization, GridSet, StageMode, StageWindow};
use randcover::lengths::LengthSequenceSpec;
use randcover::Error;
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    InvalidArgument = 4,
    OutOfRange = 5,
    Infeasible = 6,
    Budget = 7,
    Numerical = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RcStageMode {
    Contained = 0,
    Intersected = 1,
}

/// Validated length sequence.
pub struct RcLengthSpec(LengthSequenceSpec);

/// One covering realization (seed, sequence, N).
pub struct RcRealization(CoveringRealization);

/// Set of dyadic cubes at a fixed level.
pub struct RcGridSet(GridSet);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let s = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(s).unwrap());
}

fn status_of(e: &Error) -> RcStatus {
    match e {
        Error::InvalidArgument(_) | Error::LevelMismatch(..) | Error::NotAligned(_) => RcStatus::InvalidArgument,
        Error::OutOfHorizon(_) | Error::RadiusCap(_) => RcStatus::OutOfRange,
        Error::Infeasible(_) => RcStatus::Infeasible,
        Error::Budget(_) => RcStatus::Budget,
        Error::ZeroMass(_) | Error::Conditioning(_) | Error::TooFewPoints { .. } => RcStatus::Numerical,
    }
}

type FfiResult = Result<(), (RcStatus, String)>;

fn fail(status: RcStatus, msg: impl Into<String>) -> FfiResult {
    Err((status, msg.into()))
}

fn lib(e: Error) -> (RcStatus, String) {
    (status_of(&e), e.to_string())
}

/// Runs `f`, converting errors and panics into a status.
fn guard(f: impl FnOnce() -> FfiResult) -> RcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            RcStatus::Ok
        }
        Ok(Err((s, msg))) => {
            set_error(msg);
            s
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(msg);
            RcStatus::Panic
        }
    }
}

unsafe fn read_str<'a>(p: *const c_char) -> Result<&'a str, (RcStatus, String)> {
    if p.is_null() {
        return Err((RcStatus::NullPointer, "null string".into()));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| (RcStatus::InvalidUtf8, e.to_string()))
}

unsafe fn out_ref<'a, T>(p: *mut T) -> Result<&'a mut T, (RcStatus, String)> {
    p.as_mut().ok_or((RcStatus::NullPointer, "null output pointer".into()))
}

unsafe fn handle<'a, T>(p: *const T) -> Result<&'a T, (RcStatus, String)> {
    p.as_ref().ok_or((RcStatus::NullPointer, "null handle".into()))
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).unwrap().into_raw()
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next library call on this thread.
#[no_mangle]
pub extern "C" fn rc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Frees a string returned by this library.
///
/// # Safety
/// `s` must be null or a pointer obtained from this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses and validates a length sequence from JSON, e.g.
/// `{"variant":"power_law","alpha":0.5,"c":0.5,"d":1}`.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rc_length_spec_from_json(json: *const c_char, out: *mut *mut RcLengthSpec) -> RcStatus {
    guard(|| {
        let out = out_ref(out)?;
        *out = ptr::null_mut();
        let spec: LengthSequenceSpec =
            serde_json::from_str(read_str(json)?).map_err(|e| (RcStatus::Parse, e.to_string()))?;
        spec.validate().map_err(lib)?;
        *out = Box::into_raw(Box::new(RcLengthSpec(spec)));
        Ok(())
    })
}

/// l_n for 1 ≤ n, written to `out`.
///
/// # Safety
/// `spec` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rc_length_spec_value(spec: *const RcLengthSpec, n: u64, out: *mut f64) -> RcStatus {
    guard(|| {
        let spec = handle(spec)?;
        *out_ref(out)? = spec.0.value_at(n).map_err(lib)?;
        Ok(())
    })
}

/// # Safety
/// `spec` must be null or a handle from `rc_length_spec_from_json` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rc_length_spec_free(spec: *mut RcLengthSpec) {
    if !spec.is_null() {
        drop(Box::from_raw(spec));
    }
}

/// Realization of the first `n` balls under `seed`. The spec is copied, so
/// it may be freed afterwards.
///
/// # Safety
/// `spec` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rc_realization_new(
    seed: u64,
    spec: *const RcLengthSpec,
    n: u64,
    out: *mut *mut RcRealization,
) -> RcStatus {
    guard(|| {
        let out = out_ref(out)?;
        *out = ptr::null_mut();
        let r = covering::realize(seed, &handle(spec)?.0, n).map_err(lib)?;
        *out = Box::into_raw(Box::new(RcRealization(r)));
        Ok(())
    })
}

/// Writes the center of ball `j` (1 ≤ j ≤ N) into `coords[0..d]`.
///
/// # Safety
/// `r` must be a live handle; `coords` must have room for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn rc_realization_center(r: *const RcRealization, j: u64, coords: *mut f64, len: usize) -> RcStatus {
    guard(|| {
        let r = &handle(r)?.0;
        if j == 0 || j > r.n {
            return fail(RcStatus::OutOfRange, format!("ball index {j} outside 1..={}", r.n));
        }
        if coords.is_null() {
            return fail(RcStatus::NullPointer, "null coordinate buffer");
        }
        if len < r.dim() {
            return fail(RcStatus::InvalidArgument, format!("buffer holds {len} < d = {}", r.dim()));
        }
        let c = r.center(j);
        std::slice::from_raw_parts_mut(coords, r.dim()).copy_from_slice(c.coords());
        Ok(())
    })
}

/// Radius l_j / 2 of ball `j`.
///
/// # Safety
/// `r` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rc_realization_radius(r: *const RcRealization, j: u64, out: *mut f64) -> RcStatus {
    guard(|| {
        let r = &handle(r)?.0;
        if j == 0 || j > r.n {
            return fail(RcStatus::OutOfRange, format!("ball index {j} outside 1..={}", r.n));
        }
        *out_ref(out)? = r.radius(j).map_err(lib)?;
        Ok(())
    })
}

/// # Safety
/// `r` must be null or a handle from `rc_realization_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rc_realization_free(r: *mut RcRealization) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// Level-`level` grid image of the balls with index in [first, last].
///
/// # Safety
/// `r` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rc_gridset_stage(
    r: *const RcRealization,
    first: u64,
    last: u64,
    level: u32,
    mode: RcStageMode,
    out: *mut *mut RcGridSet,
) -> RcStatus {
    guard(|| {
        let out = out_ref(out)?;
        *out = ptr::null_mut();
        let r = &handle(r)?.0;
        let w = StageWindow::new(first, last).map_err(lib)?;
        let mode = match mode {
            RcStageMode::Contained => StageMode::Contained,
            RcStageMode::Intersected => StageMode::Intersected,
        };
        let g = covering::stage_gridset(r, w, level, mode).map_err(lib)?;
        *out = Box::into_raw(Box::new(RcGridSet(g)));
        Ok(())
    })
}

/// Run-length text form of a grid set (see `rc_gridset_from_rle`).
///
/// # Safety
/// `g` must be a live handle; `out` must be writable. Free the result with
/// `rc_string_free`.
#[no_mangle]
pub unsafe extern "C" fn rc_gridset_to_rle(g: *const RcGridSet, out: *mut *mut c_char) -> RcStatus {
    guard(|| {
        let out = out_ref(out)?;
        *out = into_c_string(handle(g)?.0.to_rle());
        Ok(())
    })
}

/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rc_gridset_from_rle(text: *const c_char, out: *mut *mut RcGridSet) -> RcStatus {
    guard(|| {
        let out = out_ref(out)?;
        *out = ptr::null_mut();
        let g = GridSet::from_rle(read_str(text)?).map_err(lib)?;
        *out = Box::into_raw(Box::new(RcGridSet(g)));
        Ok(())
    })
}

/// Number of cubes in the set.
///
/// # Safety
/// `g` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rc_gridset_count(g: *const RcGridSet, out: *mut u64) -> RcStatus {
    guard(|| {
        *out_ref(out)? = handle(g)?.0.count();
        Ok(())
    })
}

/// Whether the cube with linear index `i` is in the set.
///
/// # Safety
/// `g` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rc_gridset_contains(g: *const RcGridSet, i: u64, out: *mut bool) -> RcStatus {
    guard(|| {
        let g = &handle(g)?.0;
        if i >= g.cells() {
            return fail(RcStatus::OutOfRange, format!("cube index {i} ≥ {}", g.cells()));
        }
        *out_ref(out)? = g.contains_linear(i);
        Ok(())
    })
}

/// Whether two grid sets share a cube; the coarser one is refined first.
///
/// # Safety
/// `a` and `b` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rc_gridset_hits(a: *const RcGridSet, b: *const RcGridSet, out: *mut bool) -> RcStatus {
    guard(|| {
        *out_ref(out)? = covering::hits(&handle(a)?.0, &handle(b)?.0).map_err(lib)?;
        Ok(())
    })
}

/// # Safety
/// `g` must be null or a grid set handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rc_gridset_free(g: *mut RcGridSet) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// Runs one experiment from a JSON config with the same fields as the CLI
/// TOML (`experiment`, `params`, `seed`, `trials`) and returns the report
/// as JSON. A failing verdict is still `RC_STATUS_OK`; read it from the
/// report.
///
/// # Safety
/// `config_json` must be a NUL-terminated string; `out` must be writable.
/// Free the result with `rc_string_free`.
#[no_mangle]
pub unsafe extern "C" fn rc_run_experiment_json(config_json: *const c_char, out: *mut *mut c_char) -> RcStatus {
    guard(|| {
        let out = out_ref(out)?;
        *out = ptr::null_mut();
        let cfg: RunConfig =
            serde_json::from_str(read_str(config_json)?).map_err(|e| (RcStatus::Parse, e.to_string()))?;
        cfg.validate().map_err(|e| match e {
            randcover::cli::CliError::Run(e) => lib(e),
            other => (RcStatus::Parse, other.to_string()),
        })?;
        let report = randcover::cli::run_report(&cfg).map_err(lib)?;
        *out = into_c_string(report.to_json());
        Ok(())
    })
}
