//! C ABI over the `aninorm` library.
//!
//! Models are opaque heap handles created by one of the `aninorm_model_*`
//! constructors and released with [`aninorm_model_free`]. Every fallible call
//! returns an [`AninormStatus`]; on failure a message is available from
//! [`aninorm_last_error`] on the same thread. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use aninorm::anisotropy::{mean_anisotropy, AnisoStatus};
use aninorm::{verify, AnisoQuery, Error, Matrix, ShapingFilter, StateSpaceModel};

/// Opaque model handle.
pub struct AninormModel {
    inner: StateSpaceModel,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AninormStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Unstable = 3,
    NoStabilizingSolution = 4,
    MaxIterations = 5,
    Numerical = 6,
    Io = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AninormNormKind {
    Converged = 0,
    BoundaryA0 = 1,
    BoundaryHinf = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct AninormResult {
    pub gamma: f64,
    pub gamma_hat: f64,
    /// NaN when the optimum is approached only as eta grows without bound.
    pub eta_star: f64,
    pub q_star: f64,
    pub evaluations: u64,
    pub kind: AninormNormKind,
    pub h2_norm: f64,
    pub hinf_norm: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> AninormStatus {
    match e {
        Error::Dimension(_) | Error::NonFinite(_) | Error::InvalidArgument(_) | Error::NotSquare { .. } => {
            AninormStatus::InvalidArgument
        }
        Error::Schema(_) | Error::Io(_) => AninormStatus::Io,
        Error::Unstable(_) => AninormStatus::Unstable,
        Error::NoStabilizingSolution { .. } | Error::BracketFailure(_) => {
            AninormStatus::NoStabilizingSolution
        }
        Error::MaxIterationsExceeded(_) | Error::ToleranceNotReached { .. } => AninormStatus::MaxIterations,
        _ => AninormStatus::Numerical,
    }
}

/// Runs `body`, converting errors and panics into status codes.
fn guard(body: impl FnOnce() -> Result<(), (AninormStatus, String)>) -> AninormStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            AninormStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            AninormStatus::Panic
        }
    }
}

fn lib<T>(r: aninorm::Result<T>) -> Result<T, (AninormStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (AninormStatus, String) {
    (AninormStatus::NullPointer, format!("{what} is null"))
}

unsafe fn model_ref<'a>(model: *const AninormModel) -> Result<&'a StateSpaceModel, (AninormStatus, String)> {
    // SAFETY: the caller passes a handle from a constructor of this crate.
    unsafe { model.as_ref() }
        .map(|m| &m.inner)
        .ok_or_else(|| null("model"))
}

unsafe fn write<T>(out: *mut T, value: T) -> Result<(), (AninormStatus, String)> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    // SAFETY: non-null and, per the caller's contract, valid for writes.
    unsafe { out.write(value) };
    Ok(())
}

/// Reads a `rows x cols` row-major block; a zero-sized block may be null.
unsafe fn read_matrix(
    data: *const f64,
    rows: usize,
    cols: usize,
    what: &str,
) -> Result<Matrix, (AninormStatus, String)> {
    if rows * cols == 0 {
        return Ok(Matrix::zeros(rows, cols));
    }
    if data.is_null() {
        return Err(null(what));
    }
    // SAFETY: the caller guarantees `rows * cols` readable doubles.
    let slice = unsafe { std::slice::from_raw_parts(data, rows * cols) };
    Ok(Matrix::from_row_slice(rows, cols, slice))
}

unsafe fn read_path<'a>(path: *const c_char) -> Result<&'a str, (AninormStatus, String)> {
    if path.is_null() {
        return Err(null("path"));
    }
    // SAFETY: the caller passes a NUL-terminated string.
    unsafe { CStr::from_ptr(path) }
        .to_str()
        .map_err(|_| (AninormStatus::InvalidArgument, "path is not valid UTF-8".into()))
}

fn boxed(model: StateSpaceModel) -> *mut AninormModel {
    Box::into_raw(Box::new(AninormModel { inner: model }))
}

/// Builds a model from row-major `A` (n x n), `B` (n x m), `C` (p x n) and
/// `D` (p x m). With `n = 0`, `a`, `b` and `c` may be null.
///
/// # Safety
/// Each non-empty array must hold the stated number of doubles; `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn aninorm_model_new(
    n: usize,
    m: usize,
    p: usize,
    a: *const f64,
    b: *const f64,
    c: *const f64,
    d: *const f64,
    out: *mut *mut AninormModel,
) -> AninormStatus {
    guard(|| unsafe {
        let model = lib(StateSpaceModel::new(
            read_matrix(a, n, n, "A")?,
            read_matrix(b, n, m, "B")?,
            read_matrix(c, p, n, "C")?,
            read_matrix(d, p, m, "D")?,
        ))?;
        if out.is_null() {
            return Err(null("output pointer"));
        }
        write(out, boxed(model))
    })
}

/// Seeded random stable model.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn aninorm_model_random_stable(
    n: usize,
    m: usize,
    p: usize,
    seed: u64,
    rho_cap: f64,
    out: *mut *mut AninormModel,
) -> AninormStatus {
    guard(|| unsafe {
        if out.is_null() {
            return Err(null("output pointer"));
        }
        let model = lib(StateSpaceModel::random_stable(n, m, p, seed, rho_cap))?;
        write(out, boxed(model))
    })
}

/// # Safety
/// `path` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn aninorm_model_load_json(
    path: *const c_char,
    out: *mut *mut AninormModel,
) -> AninormStatus {
    guard(|| unsafe {
        if out.is_null() {
            return Err(null("output pointer"));
        }
        let model = lib(StateSpaceModel::load(read_path(path)?))?;
        write(out, boxed(model))
    })
}

/// # Safety
/// `model` must be a live handle; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn aninorm_model_save_json(
    model: *const AninormModel,
    path: *const c_char,
) -> AninormStatus {
    guard(|| unsafe { lib(model_ref(model)?.save(read_path(path)?)) })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `model` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn aninorm_model_free(model: *mut AninormModel) {
    if !model.is_null() {
        // SAFETY: created by Box::into_raw in this crate.
        drop(unsafe { Box::from_raw(model) });
    }
}

/// # Safety
/// `model` must be a live handle; the outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn aninorm_model_dims(
    model: *const AninormModel,
    n: *mut usize,
    m: *mut usize,
    p: *mut usize,
) -> AninormStatus {
    guard(|| unsafe {
        let f = model_ref(model)?;
        write(n, f.states())?;
        write(m, f.inputs())?;
        write(p, f.outputs())
    })
}

/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn aninorm_model_is_stable(
    model: *const AninormModel,
    out: *mut bool,
) -> AninormStatus {
    guard(|| unsafe { write(out, model_ref(model)?.is_stable()) })
}

/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn aninorm_h2_norm(model: *const AninormModel, out: *mut f64) -> AninormStatus {
    guard(|| unsafe { write(out, lib(aninorm::h2_norm(model_ref(model)?))?) })
}

/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn aninorm_hinf_norm(
    model: *const AninormModel,
    tol: f64,
    out: *mut f64,
) -> AninormStatus {
    guard(|| unsafe { write(out, lib(aninorm::hinf_norm(model_ref(model)?, tol))?) })
}

/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn aninorm_anisotropic_norm(
    model: *const AninormModel,
    a: f64,
    tol: f64,
    out: *mut AninormResult,
) -> AninormStatus {
    guard(|| unsafe {
        let f = model_ref(model)?.clone();
        let r = lib(aninorm::anisotropic_norm(&AnisoQuery::new(f, a).with_tol(tol)))?;
        write(
            out,
            AninormResult {
                gamma: r.gamma,
                gamma_hat: r.gamma_hat,
                eta_star: r.eta_star.unwrap_or(f64::NAN),
                q_star: r.q_star,
                evaluations: r.evaluations as u64,
                kind: match r.status {
                    AnisoStatus::Converged => AninormNormKind::Converged,
                    AnisoStatus::BoundaryA0 => AninormNormKind::BoundaryA0,
                    AnisoStatus::BoundaryHinf => AninormNormKind::BoundaryHinf,
                },
                h2_norm: r.h2_norm,
                hinf_norm: r.hinf_norm,
            },
        )
    })
}

/// Mean anisotropy of a square stable model; `+inf` when its spectral
/// density is singular somewhere on the unit circle.
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn aninorm_mean_anisotropy(
    model: *const AninormModel,
    grid: usize,
    out: *mut f64,
) -> AninormStatus {
    guard(|| unsafe {
        let g = lib(ShapingFilter::new(model_ref(model)?.clone()))?;
        write(out, lib(mean_anisotropy(&g, grid))?)
    })
}

/// # Safety
/// `model` must be a live handle; the outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn aninorm_feasible(
    model: *const AninormModel,
    a: f64,
    gamma: f64,
    tol: f64,
    feasible: *mut bool,
    norm: *mut f64,
) -> AninormStatus {
    guard(|| unsafe {
        let r = lib(aninorm::aninorm_feasible(model_ref(model)?, a, gamma, tol))?;
        write(feasible, r.feasible)?;
        write(norm, r.norm)
    })
}

/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn aninorm_grid_oracle_norm(
    model: *const AninormModel,
    a: f64,
    grid: usize,
    out: *mut f64,
) -> AninormStatus {
    guard(|| unsafe {
        write(
            out,
            lib(verify::grid_oracle_norm(model_ref(model)?, a, grid))?.gamma,
        )
    })
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn aninorm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn aninorm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
