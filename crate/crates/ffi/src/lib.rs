//! C interface to `nearcommute`.
//!
//! Matrices and reports cross the boundary as opaque handles owned by the
//! caller and released with the matching `*_free` function. Every fallible
//! call returns an [`NcStatus`]; the message of the most recent failure on
//! the calling thread is available through [`nc_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use nearcommute::error::Error;
use nearcommute::gallery::voiculescu;
use nearcommute::matcore::ComplexMatrix;
use nearcommute::pipeline::{commute_hermitian_pair, CommuteReport, PipelineConfig};
use num_complex::Complex64;

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NcStatus {
    Ok = 0,
    NullPointer = 1,
    DimMismatch = 2,
    NonFinite = 3,
    NotHermitian = 4,
    NotUnitary = 5,
    InvalidInput = 6,
    Hypothesis = 7,
    Numerical = 8,
    Budget = 9,
    Panic = 10,
    Other = 11,
}

/// A square complex matrix.
pub struct NcMatrix(ComplexMatrix);

/// The result of a commuting-approximation run.
pub struct NcReport(CommuteReport);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let text = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = text);
}

fn status_of(err: &Error) -> NcStatus {
    match err {
        Error::DimMismatch(_) => NcStatus::DimMismatch,
        Error::NonFinite(_) => NcStatus::NonFinite,
        Error::NotHermitian(_) => NcStatus::NotHermitian,
        Error::NotUnitary(_) => NcStatus::NotUnitary,
        Error::InvalidInput(_) => NcStatus::InvalidInput,
        Error::Hypothesis(_) | Error::NotApplicable(_) => NcStatus::Hypothesis,
        Error::Numerical(_) | Error::Divergent(_) => NcStatus::Numerical,
        Error::Budget(_) => NcStatus::Budget,
        _ => NcStatus::Other,
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (NcStatus, String)>) -> NcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => NcStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            NcStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (NcStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (NcStatus, String) {
    (NcStatus::NullPointer, format!("{what} is null"))
}

unsafe fn matrix_ref<'a>(m: *const NcMatrix, what: &str) -> Result<&'a ComplexMatrix, (NcStatus, String)> {
    m.as_ref().map(|m| &m.0).ok_or_else(|| null(what))
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn nc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the last error message of this thread into `buf` (nul-terminated,
/// truncated to `len`). Returns the full message length without the nul.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn nc_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let bytes = e.borrow();
        let bytes = bytes.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr().cast(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Static name of a status code.
#[no_mangle]
pub extern "C" fn nc_status_name(status: NcStatus) -> *const c_char {
    let s: &'static CStr = match status {
        NcStatus::Ok => c"ok",
        NcStatus::NullPointer => c"null pointer",
        NcStatus::DimMismatch => c"dimension mismatch",
        NcStatus::NonFinite => c"non-finite input",
        NcStatus::NotHermitian => c"not Hermitian",
        NcStatus::NotUnitary => c"not unitary",
        NcStatus::InvalidInput => c"invalid input",
        NcStatus::Hypothesis => c"hypothesis violated",
        NcStatus::Numerical => c"numerical failure",
        NcStatus::Budget => c"budget exceeded",
        NcStatus::Panic => c"internal panic",
        NcStatus::Other => c"other error",
    };
    s.as_ptr()
}

/// Builds a `dim`×`dim` matrix from row-major real and imaginary parts.
/// `im` may be null for a real matrix.
///
/// # Safety
/// `re` (and `im` when non-null) must point to `dim*dim` readable doubles;
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nc_matrix_new(dim: usize, re: *const f64, im: *const f64, out: *mut *mut NcMatrix) -> NcStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if re.is_null() && dim > 0 {
            return Err(null("re"));
        }
        let len = dim.checked_mul(dim).ok_or((NcStatus::InvalidInput, "dimension overflows".to_string()))?;
        let re = if dim == 0 { &[][..] } else { std::slice::from_raw_parts(re, len) };
        let im = if im.is_null() || dim == 0 { None } else { Some(std::slice::from_raw_parts(im, len)) };
        let m = ComplexMatrix::from_fn(dim, dim, |i, j| {
            let k = i * dim + j;
            Complex64::new(re[k], im.map_or(0.0, |v| v[k]))
        });
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err((NcStatus::NonFinite, "matrix entries are not finite".into()));
        }
        *out = Box::into_raw(Box::new(NcMatrix(m)));
        Ok(())
    })
}

/// Dimension of a matrix, or 0 for null.
///
/// # Safety
/// `m` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn nc_matrix_dim(m: *const NcMatrix) -> usize {
    m.as_ref().map_or(0, |m| m.0.nrows())
}

/// Copies the entries row-major into `re` and `im` (either may be null).
///
/// # Safety
/// `m` must be a live handle; non-null outputs must hold `dim*dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn nc_matrix_read(m: *const NcMatrix, re: *mut f64, im: *mut f64) -> NcStatus {
    guard(|| {
        let m = matrix_ref(m, "matrix")?;
        let n = m.nrows();
        for i in 0..n {
            for j in 0..n {
                let k = i * n + j;
                if !re.is_null() {
                    *re.add(k) = m[(i, j)].re;
                }
                if !im.is_null() {
                    *im.add(k) = m[(i, j)].im;
                }
            }
        }
        Ok(())
    })
}

/// Releases a matrix. Null is accepted.
///
/// # Safety
/// `m` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn nc_matrix_free(m: *mut NcMatrix) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Commuting Hermitian approximation of a pair of Hermitian contractions.
/// A non-positive `gamma2` selects the default.
///
/// # Safety
/// `a`, `b` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nc_commute_pair(a: *const NcMatrix, b: *const NcMatrix, gamma2: f64, out: *mut *mut NcReport) -> NcStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let a = matrix_ref(a, "a")?;
        let b = matrix_ref(b, "b")?;
        let mut cfg = PipelineConfig::default();
        if gamma2 > 0.0 {
            cfg.gamma2 = gamma2;
        }
        let rep = commute_hermitian_pair(a, b, &cfg).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(NcReport(rep)));
        Ok(())
    })
}

/// New handles to the commuting outputs A′ and B′ (either output may be null).
///
/// # Safety
/// `r` must be a live report handle.
#[no_mangle]
pub unsafe extern "C" fn nc_report_outputs(r: *const NcReport, a_out: *mut *mut NcMatrix, b_out: *mut *mut NcMatrix) -> NcStatus {
    guard(|| {
        let r = r.as_ref().ok_or_else(|| null("report"))?;
        if !a_out.is_null() {
            *a_out = Box::into_raw(Box::new(NcMatrix(r.0.a_prime.clone())));
        }
        if !b_out.is_null() {
            *b_out = Box::into_raw(Box::new(NcMatrix(r.0.b_prime.clone())));
        }
        Ok(())
    })
}

/// ‖A−A′‖, ‖B−B′‖ and ‖[A′,B′]‖ (any output may be null).
///
/// # Safety
/// `r` must be a live report handle.
#[no_mangle]
pub unsafe extern "C" fn nc_report_distances(r: *const NcReport, dist_a: *mut f64, dist_b: *mut f64, residual: *mut f64) -> NcStatus {
    guard(|| {
        let r = r.as_ref().ok_or_else(|| null("report"))?;
        for (p, v) in [(dist_a, r.0.dist_a), (dist_b, r.0.dist_b), (residual, r.0.comm_residual)] {
            if !p.is_null() {
                *p = v;
            }
        }
        Ok(())
    })
}

/// 1 if every a-posteriori bound recorded in the report holds, 0 otherwise
/// or for null.
///
/// # Safety
/// `r` must be null or a live report handle.
#[no_mangle]
pub unsafe extern "C" fn nc_report_bounds_pass(r: *const NcReport) -> i32 {
    r.as_ref().map_or(0, |r| i32::from(r.0.bounds_pass()))
}

/// Releases a report. Null is accepted.
///
/// # Safety
/// `r` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn nc_report_free(r: *mut NcReport) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// The n×n Voiculescu unitaries U (clock) and V (shift).
///
/// # Safety
/// `u_out` and `v_out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nc_voiculescu(n: usize, u_out: *mut *mut NcMatrix, v_out: *mut *mut NcMatrix) -> NcStatus {
    guard(|| {
        if u_out.is_null() || v_out.is_null() {
            return Err(null("output"));
        }
        let (u, v) = voiculescu(n).map_err(lib_err)?;
        *u_out = Box::into_raw(Box::new(NcMatrix(u)));
        *v_out = Box::into_raw(Box::new(NcMatrix(v)));
        Ok(())
    })
}
