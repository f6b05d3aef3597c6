//! C ABI over pemkit's perception error models.
//!
//! Models and injectors are opaque handles owned by the caller and released
//! with their `_free` function. Every fallible call returns a [`PemStatus`];
//! on failure [`pem_last_error_message`] describes the most recent error on
//! the calling thread. The header `include/pemkit.h` is generated at build
//! time.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use pemkit::pem::{load_model, model_from_json, GridSpec, ModelError, OcclusionLevel, PemModel};
use pemkit::server::{ErrorCode, Session, WireObject};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PemStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Parse = 4,
    InvalidModel = 5,
    InvalidArgument = 6,
    InvalidFrame = 7,
    TimeRegression = 8,
    DuplicateId = 9,
    BufferTooSmall = 10,
    Panic = 11,
}

/// Ground-truth object in the ego frame: `x` right, `y` ahead, meters.
/// `occlusion` is the visibility level 0..=3.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PemObject {
    pub id: u64,
    pub x: f64,
    pub y: f64,
    pub occlusion: u8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PemPerceived {
    pub source_id: u64,
    pub x: f64,
    pub y: f64,
}

/// Opaque model handle.
pub struct PemModelHandle {
    model: Arc<PemModel>,
}

/// Opaque injector handle: one seeded perception stream over a model.
pub struct PemInjector {
    session: Session,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(status: PemStatus, msg: impl Into<String>) -> PemStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> PemStatus) -> PemStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(PemStatus::Panic, "internal panic"),
    }
}

fn model_status(e: &ModelError) -> PemStatus {
    match e {
        ModelError::Io(_) => PemStatus::Io,
        ModelError::Parse(_) => PemStatus::Parse,
        _ => PemStatus::InvalidModel,
    }
}

unsafe fn read_str<'a>(s: *const c_char) -> Result<&'a str, PemStatus> {
    if s.is_null() {
        return Err(fail(PemStatus::NullPointer, "string argument is null"));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| fail(PemStatus::InvalidUtf8, "string argument is not UTF-8"))
}

unsafe fn emit_model(model: PemModel, out: *mut *mut PemModelHandle) -> PemStatus {
    *out = Box::into_raw(Box::new(PemModelHandle { model: Arc::new(model) }));
    PemStatus::Ok
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn pem_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pem_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a model file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pem_model_load(path: *const c_char, out: *mut *mut PemModelHandle) -> PemStatus {
    guard(|| {
        if out.is_null() {
            return fail(PemStatus::NullPointer, "out is null");
        }
        let path = match read_str(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        match load_model(path) {
            Ok(m) => emit_model(m, out),
            Err(e) => fail(model_status(&e), format!("{path}: {e}")),
        }
    })
}

/// Parses a model from its JSON text.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pem_model_from_json(json: *const c_char, out: *mut *mut PemModelHandle) -> PemStatus {
    guard(|| {
        if out.is_null() {
            return fail(PemStatus::NullPointer, "out is null");
        }
        let text = match read_str(json) {
            Ok(t) => t,
            Err(s) => return s,
        };
        match model_from_json(text) {
            Ok(m) => emit_model(m, out),
            Err(e) => fail(model_status(&e), e.to_string()),
        }
    })
}

/// Error-free model (always detects, no position error) on the given grid.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pem_model_perfect(
    sector_width_deg: f64,
    ring_depth_m: f64,
    max_radius_m: f64,
    out: *mut *mut PemModelHandle,
) -> PemStatus {
    guard(|| {
        if out.is_null() {
            return fail(PemStatus::NullPointer, "out is null");
        }
        match GridSpec::new(sector_width_deg, ring_depth_m, max_radius_m) {
            Ok(g) => emit_model(PemModel::perfect(g), out),
            Err(e) => fail(PemStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Releases a model. Injectors created from it stay valid.
///
/// # Safety
/// `model` must come from this library and not be used afterwards; null is
/// ignored.
#[no_mangle]
pub unsafe extern "C" fn pem_model_free(model: *mut PemModelHandle) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of conditions (occlusion levels x rings x sectors); 0 for null.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pem_model_condition_count(model: *const PemModelHandle) -> usize {
    model.as_ref().map_or(0, |m| m.model.grid.n_conditions())
}

/// Stationary detection probability of condition `index`.
///
/// # Safety
/// `model` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pem_model_stationary_detection(
    model: *const PemModelHandle,
    index: usize,
    out: *mut f64,
) -> PemStatus {
    guard(|| {
        let (Some(m), false) = (model.as_ref(), out.is_null()) else {
            return fail(PemStatus::NullPointer, "model or out is null");
        };
        if index >= m.model.grid.n_conditions() {
            return fail(PemStatus::InvalidArgument, format!("condition {index} out of range"));
        }
        *out = m.model.params_at(index).transition.stationary_detection();
        PemStatus::Ok
    })
}

/// Starts a perception stream over `model` with the given seed.
///
/// # Safety
/// `model` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pem_injector_new(
    model: *const PemModelHandle,
    seed: u64,
    rate_hz: f64,
    out: *mut *mut PemInjector,
) -> PemStatus {
    guard(|| {
        let (Some(m), false) = (model.as_ref(), out.is_null()) else {
            return fail(PemStatus::NullPointer, "model or out is null");
        };
        if !(rate_hz.is_finite() && rate_hz > 0.0) {
            return fail(PemStatus::InvalidArgument, format!("rate {rate_hz} Hz is not positive"));
        }
        let session = Session::new(m.model.metadata.clone(), m.model.clone(), seed, rate_hz);
        *out = Box::into_raw(Box::new(PemInjector { session }));
        PemStatus::Ok
    })
}

/// Perceives one frame. `out` must hold at least `n_objects` entries; the
/// number written goes to `n_out`. A rejected frame leaves the injector
/// unchanged.
///
/// # Safety
/// `injector` must be a live handle, `objects` must point to `n_objects`
/// entries (or be null when `n_objects` is 0), `out` to `out_capacity`
/// entries and `n_out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn pem_injector_process(
    injector: *mut PemInjector,
    t: f64,
    objects: *const PemObject,
    n_objects: usize,
    out: *mut PemPerceived,
    out_capacity: usize,
    n_out: *mut usize,
) -> PemStatus {
    guard(|| {
        let Some(inj) = injector.as_mut() else {
            return fail(PemStatus::NullPointer, "injector is null");
        };
        if n_out.is_null() || (n_objects > 0 && (objects.is_null() || out.is_null())) {
            return fail(PemStatus::NullPointer, "objects, out or n_out is null");
        }
        if out_capacity < n_objects {
            return fail(
                PemStatus::BufferTooSmall,
                format!("output holds {out_capacity} entries, frame has {n_objects} objects"),
            );
        }
        let input = if n_objects == 0 { &[][..] } else { std::slice::from_raw_parts(objects, n_objects) };
        let mut wire = Vec::with_capacity(n_objects);
        for o in input {
            let Some(occ) = OcclusionLevel::from_index(o.occlusion as usize) else {
                return fail(PemStatus::InvalidFrame, format!("object {} has occlusion {}", o.id, o.occlusion));
            };
            wire.push(WireObject {
                id: o.id,
                x: o.x,
                y: o.y,
                occ,
            });
        }
        match inj.session.process_frame(t, &wire) {
            Ok(perceived) => {
                for (k, p) in perceived.iter().enumerate() {
                    *out.add(k) = PemPerceived {
                        source_id: p.source_id,
                        x: p.x,
                        y: p.y,
                    };
                }
                *n_out = perceived.len();
                PemStatus::Ok
            }
            Err(e) => {
                let status = match e.code {
                    ErrorCode::TimeRegression => PemStatus::TimeRegression,
                    ErrorCode::DuplicateId => PemStatus::DuplicateId,
                    _ => PemStatus::InvalidFrame,
                };
                fail(status, e.message)
            }
        }
    })
}

/// Clears tracks and moves to the next random stream, as a server reset does.
///
/// # Safety
/// `injector` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pem_injector_reset(injector: *mut PemInjector) -> PemStatus {
    guard(|| match injector.as_mut() {
        Some(inj) => {
            inj.session.reset();
            PemStatus::Ok
        }
        None => fail(PemStatus::NullPointer, "injector is null"),
    })
}

/// # Safety
/// `injector` must come from this library and not be used afterwards; null
/// is ignored.
#[no_mangle]
pub unsafe extern "C" fn pem_injector_free(injector: *mut PemInjector) {
    if !injector.is_null() {
        drop(Box::from_raw(injector));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn message() -> String {
        let p = pem_last_error_message();
        unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
    }

    #[test]
    fn panics_become_status() {
        assert_eq!(guard(|| panic!("boom")), PemStatus::Panic);
        assert_eq!(message(), "internal panic");
        assert_eq!(guard(|| PemStatus::Ok), PemStatus::Ok);
        assert!(pem_last_error_message().is_null());
    }

    #[test]
    fn interior_nul_is_kept_readable() {
        fail(PemStatus::Parse, "a\0b");
        assert_eq!(message(), "a b");
    }
}
