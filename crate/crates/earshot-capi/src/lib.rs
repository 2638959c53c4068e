//! C interface to the earshot toolkit.
//!
//! The surface is intentionally small: load a trained localization model
//! from disk, query its dimensions, run inverse prediction on feature
//! vectors, and render a binaural room impulse response straight to a WAV
//! file.
//!
//! Conventions shared by every function:
//!
//! * Fallible calls return an [`EarshotStatus`]. Any value other than
//!   `Ok` leaves output arguments untouched; a human-readable message is
//!   then available from [`earshot_last_error`] on the same thread.
//! * Handles returned by a `*_load` function are owned by the caller and
//!   must be released exactly once with the paired `*_free` function.
//! * Pointer arguments must be valid for the stated lengths, and strings
//!   are NUL-terminated UTF-8.
//! * Internal panics are caught at the boundary and reported as
//!   [`EarshotStatus::Panic`] instead of unwinding into C.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::slice;

use earshot::gllim::GllimModel;
use earshot::head::HeadModel;
use earshot::io::write_wav_stereo;
use earshot::render::{simulate_brir, SimConfig};
use earshot::room::{RoomSpec, SourceSpec, N_BANDS};
use earshot::Error;

/// Result code returned by every fallible function in this interface.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EarshotStatus {
    /// The call succeeded.
    Ok = 0,
    /// A required pointer argument was NULL.
    NullArgument = 1,
    /// An argument value was out of range, malformed, or not UTF-8.
    InvalidArgument = 2,
    /// A buffer length does not match the model's dimensions.
    ShapeMismatch = 3,
    /// A file or named resource does not exist.
    NotFound = 4,
    /// A file exists but is not in the expected format.
    BadFormat = 5,
    /// The operation failed while running (I/O, numerics, simulation).
    RuntimeError = 6,
    /// An internal panic was caught at the boundary. The process is still
    /// usable but the library state that call touched should be treated
    /// as suspect.
    Panic = 7,
}

/// Opaque handle to a loaded localization model.
///
/// Obtain one with [`earshot_model_load`] and release it with
/// [`earshot_model_free`].
pub struct EarshotModel {
    inner: GllimModel,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    // NUL bytes cannot appear inside a C string; replace rather than fail.
    let clean: String = msg
        .chars()
        .map(|c| if c == '\0' { ' ' } else { c })
        .collect();
    let stored = CString::new(clean).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = stored);
}

fn status_of(err: &Error) -> EarshotStatus {
    match err {
        Error::InvalidScene(_) | Error::InvalidConfig(_) => EarshotStatus::InvalidArgument,
        Error::ShapeMismatch(_) => EarshotStatus::ShapeMismatch,
        Error::NotFound(_) => EarshotStatus::NotFound,
        Error::Format(_) => EarshotStatus::BadFormat,
        Error::Io(io) if io.kind() == std::io::ErrorKind::NotFound => EarshotStatus::NotFound,
        _ => EarshotStatus::RuntimeError,
    }
}

fn fail(err: &Error) -> EarshotStatus {
    set_last_error(&err.to_string());
    status_of(err)
}

/// Runs a boundary body, converting panics into `Panic` status codes so
/// they never unwind across the C ABI.
fn guard<F: FnOnce() -> EarshotStatus>(body: F) -> EarshotStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| (*s).to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "internal panic".to_string());
            set_last_error(&format!("internal panic: {msg}"));
            EarshotStatus::Panic
        }
    }
}

/// Reads a required NUL-terminated UTF-8 string argument.
///
/// # Safety
/// `ptr` must be NULL or point to a NUL-terminated string.
unsafe fn read_str<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, EarshotStatus> {
    if ptr.is_null() {
        set_last_error(&format!("{what} is NULL"));
        return Err(EarshotStatus::NullArgument);
    }
    match CStr::from_ptr(ptr).to_str() {
        Ok(s) => Ok(s),
        Err(_) => {
            set_last_error(&format!("{what} is not valid UTF-8"));
            Err(EarshotStatus::InvalidArgument)
        }
    }
}

/// Returns the library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn earshot_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Returns the message recorded by the most recent failing call on the
/// current thread, or an empty string if none has failed yet.
///
/// The pointer stays valid until the next failing call on the same
/// thread; copy the string if it must outlive that.
#[no_mangle]
pub extern "C" fn earshot_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Returns a static description of a status code (e.g. `"shape mismatch"`).
#[no_mangle]
pub extern "C" fn earshot_status_message(status: EarshotStatus) -> *const c_char {
    let msg: &'static str = match status {
        EarshotStatus::Ok => "ok\0",
        EarshotStatus::NullArgument => "required pointer argument was NULL\0",
        EarshotStatus::InvalidArgument => "invalid argument\0",
        EarshotStatus::ShapeMismatch => "shape mismatch\0",
        EarshotStatus::NotFound => "not found\0",
        EarshotStatus::BadFormat => "bad file format\0",
        EarshotStatus::RuntimeError => "runtime error\0",
        EarshotStatus::Panic => "internal panic\0",
    };
    msg.as_ptr() as *const c_char
}

/// Loads a trained model from `path` and stores the new handle in
/// `*out_model`. On failure `*out_model` is left untouched.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out_model` a valid
/// writable pointer. The returned handle must be released with
/// [`earshot_model_free`].
#[no_mangle]
pub unsafe extern "C" fn earshot_model_load(
    path: *const c_char,
    out_model: *mut *mut EarshotModel,
) -> EarshotStatus {
    guard(|| {
        if out_model.is_null() {
            set_last_error("out_model is NULL");
            return EarshotStatus::NullArgument;
        }
        let path = match read_str(path, "path") {
            Ok(s) => s,
            Err(status) => return status,
        };
        match GllimModel::load(Path::new(path)) {
            Ok(inner) => {
                *out_model = Box::into_raw(Box::new(EarshotModel { inner }));
                EarshotStatus::Ok
            }
            Err(err) => fail(&err),
        }
    })
}

/// Releases a handle returned by [`earshot_model_load`]. Passing NULL is
/// a no-op.
///
/// # Safety
/// `model` must be NULL or a handle from [`earshot_model_load`] that has
/// not been freed yet; it must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn earshot_model_free(model: *mut EarshotModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Returns the model's feature dimension D, or 0 if `model` is NULL.
///
/// # Safety
/// `model` must be NULL or a live handle from [`earshot_model_load`].
#[no_mangle]
pub unsafe extern "C" fn earshot_model_feature_dim(model: *const EarshotModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.feature_dim)
}

/// Returns the model's parameter dimension L, or 0 if `model` is NULL.
///
/// # Safety
/// `model` must be NULL or a live handle from [`earshot_model_load`].
#[no_mangle]
pub unsafe extern "C" fn earshot_model_param_dim(model: *const EarshotModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.param_dim)
}

/// Returns the number of mixture components K, or 0 if `model` is NULL.
///
/// # Safety
/// `model` must be NULL or a live handle from [`earshot_model_load`].
#[no_mangle]
pub unsafe extern "C" fn earshot_model_component_count(model: *const EarshotModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.n_components)
}

/// Copies the NUL-terminated name of parameter slot `index` (for example
/// `"azimuth_deg"`) into `buf`.
///
/// Fails with `ShapeMismatch` if the buffer is too small for the name
/// plus its terminator.
///
/// # Safety
/// `model` must be a live handle, and `buf` must be writable for
/// `buf_len` bytes.
#[no_mangle]
pub unsafe extern "C" fn earshot_model_param_name(
    model: *const EarshotModel,
    index: usize,
    buf: *mut c_char,
    buf_len: usize,
) -> EarshotStatus {
    guard(|| {
        let Some(model) = model.as_ref() else {
            set_last_error("model is NULL");
            return EarshotStatus::NullArgument;
        };
        if buf.is_null() {
            set_last_error("buf is NULL");
            return EarshotStatus::NullArgument;
        }
        let Some(name) = model.inner.param_names.get(index) else {
            set_last_error(&format!(
                "parameter index {index} out of range (model has {})",
                model.inner.param_dim
            ));
            return EarshotStatus::InvalidArgument;
        };
        let bytes = name.as_bytes();
        if buf_len < bytes.len() + 1 {
            set_last_error(&format!(
                "buffer of {buf_len} bytes cannot hold a {}-byte name plus terminator",
                bytes.len()
            ));
            return EarshotStatus::ShapeMismatch;
        }
        std::ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, bytes.len());
        *buf.add(bytes.len()) = 0;
        EarshotStatus::Ok
    })
}

/// Runs inverse prediction: maps one feature vector to the parameter
/// estimate that most plausibly produced it.
///
/// `features` must hold `earshot_model_feature_dim` values and
/// `out_params` must have room for `earshot_model_param_dim` values.
/// `out_responsibilities` may be NULL; if given it must have room for
/// `earshot_model_component_count` values and receives the posterior
/// component weights (non-negative, summing to 1).
///
/// # Safety
/// `model` must be a live handle and the pointers valid for the stated
/// lengths.
#[no_mangle]
pub unsafe extern "C" fn earshot_model_predict(
    model: *const EarshotModel,
    features: *const f64,
    n_features: usize,
    out_params: *mut f64,
    n_params: usize,
    out_responsibilities: *mut f64,
) -> EarshotStatus {
    guard(|| {
        let Some(model) = model.as_ref() else {
            set_last_error("model is NULL");
            return EarshotStatus::NullArgument;
        };
        if features.is_null() {
            set_last_error("features is NULL");
            return EarshotStatus::NullArgument;
        }
        if out_params.is_null() {
            set_last_error("out_params is NULL");
            return EarshotStatus::NullArgument;
        }
        if n_params != model.inner.param_dim {
            set_last_error(&format!(
                "out_params has room for {n_params} values, model predicts {}",
                model.inner.param_dim
            ));
            return EarshotStatus::ShapeMismatch;
        }
        let y = slice::from_raw_parts(features, n_features);
        match model.inner.inverse_predict(y) {
            Ok((params, resp)) => {
                std::ptr::copy_nonoverlapping(params.as_ptr(), out_params, params.len());
                if !out_responsibilities.is_null() {
                    std::ptr::copy_nonoverlapping(resp.as_ptr(), out_responsibilities, resp.len());
                }
                EarshotStatus::Ok
            }
            Err(err) => fail(&err),
        }
    })
}

/// Simulates a binaural room impulse response for one source in the
/// reference room and writes it to `path` as a stereo float WAV file.
///
/// The source sits at `azimuth_deg`/`elevation_deg` (degrees, zero ahead,
/// azimuth positive to the left, elevation positive up) and `range_m`
/// metres from the listener. `wall_absorption` in [0, 1] is applied to
/// every wall and frequency band. Equal inputs and `seed` give
/// byte-identical files.
///
/// # Safety
/// `path` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn earshot_render_wav(
    azimuth_deg: f64,
    elevation_deg: f64,
    range_m: f64,
    wall_absorption: f64,
    seed: u64,
    path: *const c_char,
) -> EarshotStatus {
    guard(|| {
        let path = match read_str(path, "path") {
            Ok(s) => s,
            Err(status) => return status,
        };
        if !(0.0..=1.0).contains(&wall_absorption) || !wall_absorption.is_finite() {
            set_last_error(&format!("wall_absorption {wall_absorption} outside [0, 1]"));
            return EarshotStatus::InvalidArgument;
        }
        let room = RoomSpec::reference_room([wall_absorption; N_BANDS]);
        let source = SourceSpec {
            azimuth: azimuth_deg,
            elevation: elevation_deg,
            range: range_m,
        };
        let head = HeadModel::default_sphere();
        let config = SimConfig::default();
        let rir = match simulate_brir(&room, &source, &head, &config, seed) {
            Ok(rir) => rir,
            Err(err) => return fail(&err),
        };
        match write_wav_stereo(
            Path::new(path),
            &rir.left,
            &rir.right,
            rir.sample_rate as u32,
        ) {
            Ok(()) => EarshotStatus::Ok,
            Err(err) => fail(&err),
        }
    })
}
