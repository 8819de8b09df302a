//! C ABI over `ssh_jumptime`.
//!
//! Every function returns an [`SjtStatus`]; results come back through out
//! pointers. Handles are opaque and must be released with the matching
//! `*_free` function. The message of the last failure on the calling thread
//! is available from [`sjt_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ssh_jumptime::emulator::{build_extended, jumptime_states_from_ancilla, kcc_emulated, EmulationSettings};
use ssh_jumptime::ssh::{kcc_closed_form, winding_number};
use ssh_jumptime::{BlochParams, ComplexMatrix, Error, ErrorClass, ExtendedModel, MomentumPair, PhaseResult, SweepConfig};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SjtStatus {
    Ok = 0,
    Io = 1,
    Usage = 2,
    Numerical = 3,
    Singular = 4,
    NullPointer = 5,
    Panic = 6,
}

impl From<&Error> for SjtStatus {
    fn from(e: &Error) -> Self {
        match e.class() {
            ErrorClass::Usage => SjtStatus::Usage,
            ErrorClass::Numerical => SjtStatus::Numerical,
            ErrorClass::Singular => SjtStatus::Singular,
            ErrorClass::Io => SjtStatus::Io,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn guard(f: impl FnOnce() -> Result<(), SjtStatus>) -> SjtStatus {
    set_error(String::new());
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SjtStatus::Ok,
        Ok(Err(status)) => status,
        Err(_) => {
            set_error("internal panic".into());
            SjtStatus::Panic
        }
    }
}

fn fail(e: Error) -> SjtStatus {
    let status = SjtStatus::from(&e);
    set_error(e.to_string());
    status
}

fn check_out<T>(p: *mut T) -> Result<(), SjtStatus> {
    if p.is_null() {
        set_error("null output pointer".into());
        Err(SjtStatus::NullPointer)
    } else {
        Ok(())
    }
}

/// Opaque ancilla-extended model.
pub struct SjtExtendedModel(ExtendedModel);

/// Opaque result of a phase sweep.
pub struct SjtSweepResult(PhaseResult);

/// Copy the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length in bytes.
///
/// # Safety
/// `buf` must be null or point to at least `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn sjt_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sjt_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Closed-form jump-time propagator `K(p, p')`.
///
/// # Safety
/// `re` and `im` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sjt_kcc_closed_form(
    v: f64,
    w: f64,
    gamma: f64,
    p: f64,
    p_prime: f64,
    re: *mut f64,
    im: *mut f64,
) -> SjtStatus {
    guard(|| {
        check_out(re)?;
        check_out(im)?;
        let k = BlochParams::new(v, w, gamma)
            .and_then(|prm| kcc_closed_form(&prm, MomentumPair::new(p, p_prime)?))
            .map_err(fail)?;
        *re = k.re;
        *im = k.im;
        Ok(())
    })
}

/// Winding number of the Bloch vector on an `n_grid`-point loop.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sjt_winding_number(v: f64, w: f64, n_grid: usize, out: *mut i64) -> SjtStatus {
    guard(|| {
        check_out(out)?;
        let wind = BlochParams::new(v, w, 1.0)
            .and_then(|prm| winding_number(&prm, n_grid))
            .map_err(fail)?;
        *out = wind.value;
        Ok(())
    })
}

/// Build the extended model for `(p, p')` with a 2- or 3-level ancilla.
///
/// # Safety
/// `out` must be valid for writes. The handle written there must be released
/// with [`sjt_extended_free`].
#[no_mangle]
pub unsafe extern "C" fn sjt_extended_new(
    v: f64,
    w: f64,
    gamma: f64,
    p: f64,
    p_prime: f64,
    ancilla_dim: usize,
    out: *mut *mut SjtExtendedModel,
) -> SjtStatus {
    guard(|| {
        check_out(out)?;
        *out = ptr::null_mut();
        let ext = BlochParams::new(v, w, gamma)
            .and_then(|prm| build_extended(&prm, MomentumPair::new(p, p_prime)?, ancilla_dim))
            .map_err(fail)?;
        *out = Box::into_raw(Box::new(SjtExtendedModel(ext)));
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle from [`sjt_extended_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sjt_extended_free(model: *mut SjtExtendedModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Hilbert-space dimension of the extended model (0 for a null handle).
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sjt_extended_dim(model: *const SjtExtendedModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.dim())
}

/// Emulated propagator on the grid `k Δt`, `Δt = t_final / n_final`.
///
/// # Safety
/// `model` must be a live handle; `re` and `im` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sjt_extended_kcc(
    model: *const SjtExtendedModel,
    t_final: f64,
    n_final: usize,
    re: *mut f64,
    im: *mut f64,
) -> SjtStatus {
    guard(|| {
        check_out(re)?;
        check_out(im)?;
        let ext = model.as_ref().ok_or_else(|| {
            set_error("null model handle".into());
            SjtStatus::NullPointer
        })?;
        let k = EmulationSettings::new(t_final, n_final)
            .and_then(|s| kcc_emulated(&ext.0, &s))
            .map_err(fail)?;
        *re = k.re;
        *im = k.im;
        Ok(())
    })
}

/// # Safety
/// `out` must have room for `2 · rows · cols` doubles.
unsafe fn write_interleaved(m: &ComplexMatrix, out: *mut f64) {
    for (i, z) in m.as_slice().iter().enumerate() {
        *out.add(2 * i) = z.re;
        *out.add(2 * i + 1) = z.im;
    }
}

/// Unnormalized first- and second-jump states (4×4, branch ⊗ sublattice)
/// from the ancilla blocks. Each output receives 32 doubles: row-major
/// entries as interleaved (re, im) pairs.
///
/// # Safety
/// `model` must be a live handle; `rho1` and `rho2` must each point to 32
/// writable doubles.
#[no_mangle]
pub unsafe extern "C" fn sjt_extended_jump_states(
    model: *const SjtExtendedModel,
    t_final: f64,
    n_final: usize,
    rho1: *mut f64,
    rho2: *mut f64,
) -> SjtStatus {
    guard(|| {
        check_out(rho1)?;
        check_out(rho2)?;
        let ext = model.as_ref().ok_or_else(|| {
            set_error("null model handle".into());
            SjtStatus::NullPointer
        })?;
        let (r1, r2) = EmulationSettings::new(t_final, n_final)
            .and_then(|s| jumptime_states_from_ancilla(&ext.0, &s))
            .map_err(fail)?;
        write_interleaved(r1.matrix(), rho1);
        write_interleaved(r2.matrix(), rho2);
        Ok(())
    })
}

/// Run a phase sweep configured by TOML text (keys as in the CLI config
/// file; an empty string uses the defaults).
///
/// # Safety
/// `config_toml` must be a NUL-terminated UTF-8 string; `out` must be valid
/// for writes. The result must be released with [`sjt_sweep_free`].
#[no_mangle]
pub unsafe extern "C" fn sjt_sweep_run(config_toml: *const c_char, out: *mut *mut SjtSweepResult) -> SjtStatus {
    guard(|| {
        check_out(out)?;
        *out = ptr::null_mut();
        if config_toml.is_null() {
            set_error("null config string".into());
            return Err(SjtStatus::NullPointer);
        }
        let text = CStr::from_ptr(config_toml)
            .to_str()
            .map_err(|_| fail(Error::Config("config is not UTF-8".into())))?;
        let result = SweepConfig::from_toml_str(text)
            .and_then(|cfg| cfg.run())
            .map_err(fail)?;
        *out = Box::into_raw(Box::new(SjtSweepResult(result)));
        Ok(())
    })
}

/// Number of rows (0 for a null handle).
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sjt_sweep_len(result: *const SjtSweepResult) -> usize {
    result.as_ref().map_or(0, |r| r.0.rows.len())
}

/// Row `index` as `(w, Re T, Im T)`.
///
/// # Safety
/// `result` must be a live handle; the out pointers must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sjt_sweep_row(
    result: *const SjtSweepResult,
    index: usize,
    w: *mut f64,
    t_re: *mut f64,
    t_im: *mut f64,
) -> SjtStatus {
    guard(|| {
        check_out(w)?;
        check_out(t_re)?;
        check_out(t_im)?;
        let res = result.as_ref().ok_or_else(|| {
            set_error("null result handle".into());
            SjtStatus::NullPointer
        })?;
        let row = res.0.rows.get(index).ok_or_else(|| {
            set_error(format!("row {index} out of range"));
            SjtStatus::Usage
        })?;
        *w = row.w;
        *t_re = row.t_re;
        *t_im = row.t_im;
        Ok(())
    })
}

/// # Safety
/// `result` must be null or a handle from [`sjt_sweep_run`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sjt_sweep_free(result: *mut SjtSweepResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}
