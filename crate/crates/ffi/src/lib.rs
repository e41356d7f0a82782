//! C ABI over `qptkit`.
//!
//! Objects cross the boundary as opaque handles created by `qpt_*_new` /
//! builder functions and released by the matching `qpt_*_free`. Every
//! fallible call returns a [`QptStatus`]; on failure the message is kept in
//! a thread-local slot readable with [`qpt_last_error`]. Panics never unwind
//! into C: they are caught and reported as `QPT_STATUS_PANIC`.
//!
//! Strings returned through `char **` are owned by the caller and must be
//! released with [`qpt_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, c_double, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use qptkit::channel::{NoiseModel, SimulatedExecutor};
use qptkit::circuit::{build_brickwall, build_trotter1, build_trotter2, qasm, Bc, Circuit};
use qptkit::compress::{epsilon, exact_propagator};
use qptkit::experiment::{self, ExperimentConfig, ExperimentKind};
use qptkit::tomo::full::reconstruct_chi;
use qptkit::tomo::{lambda_spectrum, process_fidelity, run_full_qpt, superoperator_from_chi, ChiMatrix};
use qptkit::Error;

/// Result codes shared by every fallible function.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QptStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    /// Singular systems, contract violations, dimension mismatches.
    Numerical = 4,
    Io = 5,
    /// The caller's buffer is too small; the required length is reported.
    BufferTooSmall = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QptBoundary {
    Open = 0,
    Periodic = 1,
}

impl From<QptBoundary> for Bc {
    fn from(b: QptBoundary) -> Bc {
        match b {
            QptBoundary::Open => Bc::Open,
            QptBoundary::Periodic => Bc::Periodic,
        }
    }
}

/// Circuit handle.
pub struct QptCircuit(Circuit);

/// Simulated noisy executor handle.
pub struct QptExecutor(SimulatedExecutor);

/// Process matrix handle.
pub struct QptChi(ChiMatrix);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> QptStatus {
    match e {
        Error::Config(_) | Error::Json(_) | Error::Parse { .. } => QptStatus::Config,
        Error::Io(_) => QptStatus::Io,
        Error::InvalidArgument(_) | Error::UnsupportedGate { .. } | Error::LengthMismatch { .. } | Error::Overflow(_) => {
            QptStatus::InvalidArgument
        }
        _ => QptStatus::Numerical,
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (QptStatus, String)>) -> QptStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            QptStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            QptStatus::Panic
        }
    }
}

fn lib<T>(r: qptkit::Result<T>) -> Result<T, (QptStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (QptStatus, String) {
    (QptStatus::NullPointer, format!("{what} is null"))
}

unsafe fn as_ref<'a, T>(p: *const T, what: &str) -> Result<&'a T, (QptStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn as_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (QptStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| (QptStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), (QptStatus, String)> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).expect("interior NULs removed").into_raw()
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn qpt_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next qptkit call on the same thread.
#[no_mangle]
pub extern "C" fn qpt_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// # Safety
/// `s` must be NULL or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn qpt_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Trotter circuit of the Heisenberg chain, `order` 1 or 2, `steps` time steps.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qpt_circuit_trotter(
    order: u32,
    num_qubits: usize,
    bc: QptBoundary,
    t: c_double,
    steps: usize,
    out: *mut *mut QptCircuit,
) -> QptStatus {
    guard(|| {
        let c = match order {
            1 => lib(build_trotter1(num_qubits, bc.into(), t, steps))?,
            2 => lib(build_trotter2(num_qubits, bc.into(), t, steps))?,
            _ => return Err((QptStatus::InvalidArgument, format!("Trotter order must be 1 or 2, got {order}"))),
        };
        write_out(out, Box::into_raw(Box::new(QptCircuit(c))), "out")
    })
}

/// Brickwall circuit with `len` parameters.
///
/// # Safety
/// `theta` must point to `len` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn qpt_circuit_brickwall(
    num_qubits: usize,
    layers: usize,
    theta: *const c_double,
    len: usize,
    out: *mut *mut QptCircuit,
) -> QptStatus {
    guard(|| {
        if theta.is_null() && len > 0 {
            return Err(null("theta"));
        }
        let params = if len == 0 { &[][..] } else { std::slice::from_raw_parts(theta, len) };
        let c = lib(build_brickwall(num_qubits, layers, params))?;
        write_out(out, Box::into_raw(Box::new(QptCircuit(c))), "out")
    })
}

/// Parses the OpenQASM 3 subset written by [`qpt_circuit_to_qasm`].
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn qpt_circuit_from_qasm(text: *const c_char, out: *mut *mut QptCircuit) -> QptStatus {
    guard(|| {
        let c = lib(qasm::parse(as_str(text, "text")?))?;
        write_out(out, Box::into_raw(Box::new(QptCircuit(c))), "out")
    })
}

/// # Safety
/// `c` must be NULL or a handle from this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn qpt_circuit_free(c: *mut QptCircuit) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

/// Qubit count, 0 for NULL.
///
/// # Safety
/// `c` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qpt_circuit_num_qubits(c: *const QptCircuit) -> usize {
    c.as_ref().map_or(0, |c| c.0.num_qubits())
}

/// CNOT count after lowering, 0 for NULL.
///
/// # Safety
/// `c` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qpt_circuit_cnot_count(c: *const QptCircuit) -> usize {
    c.as_ref().map_or(0, |c| c.0.cnot_count())
}

/// Gate-level OpenQASM 3; free the result with [`qpt_string_free`].
///
/// # Safety
/// `c` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn qpt_circuit_to_qasm(c: *const QptCircuit, out: *mut *mut c_char) -> QptStatus {
    guard(|| {
        let c = as_ref(c, "circuit")?;
        let text = lib(qptkit::circuit::decompose(&c.0).and_then(|d| qasm::export(&d)))?;
        write_out(out, into_c_string(text), "out")
    })
}

/// Approximation error ε of `c` against `exp(-iHt)`.
///
/// # Safety
/// `c` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn qpt_epsilon(c: *const QptCircuit, bc: QptBoundary, t: c_double, out: *mut c_double) -> QptStatus {
    guard(|| {
        let c = as_ref(c, "circuit")?;
        let u = lib(exact_propagator(c.0.num_qubits(), bc.into(), t))?;
        let e = lib(c.0.unitary().and_then(|v| epsilon(&u, &v)))?;
        write_out(out, e, "out")
    })
}

/// Executor with depolarizing gate noise and readout flips. SPAM noise is
/// applied when `noisy_spam` is nonzero.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn qpt_executor_new(
    p1: c_double,
    p2: c_double,
    p_ro: c_double,
    noisy_spam: bool,
    seed: u64,
    out: *mut *mut QptExecutor,
) -> QptStatus {
    guard(|| {
        let nm = NoiseModel { p1, p2, p_ro, noisy_spam, seed, ..NoiseModel::default() };
        let e = SimulatedExecutor::new(nm).map_err(|e| (QptStatus::InvalidArgument, e.to_string()))?;
        write_out(out, Box::into_raw(Box::new(QptExecutor(e))), "out")
    })
}

/// # Safety
/// `e` must be NULL or a handle from this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn qpt_executor_free(e: *mut QptExecutor) {
    if !e.is_null() {
        drop(Box::from_raw(e));
    }
}

/// Full process tomography of `c` (at most 3 qubits); `shots == 0` uses
/// exact expectation values.
///
/// # Safety
/// Handles must be live and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn qpt_full_qpt(
    exec: *const QptExecutor,
    c: *const QptCircuit,
    shots: usize,
    out: *mut *mut QptChi,
) -> QptStatus {
    guard(|| {
        let (exec, c) = (as_ref(exec, "executor")?, as_ref(c, "circuit")?);
        let chi = lib(run_full_qpt(&exec.0, &c.0, shots).and_then(|d| reconstruct_chi(&d)))?;
        write_out(out, Box::into_raw(Box::new(QptChi(chi))), "out")
    })
}

/// χ of the exact propagator `exp(-iHt)`.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn qpt_chi_ideal(num_qubits: usize, bc: QptBoundary, t: c_double, out: *mut *mut QptChi) -> QptStatus {
    guard(|| {
        if num_qubits > qptkit::tomo::MAX_TOMO_QUBITS {
            return Err((QptStatus::InvalidArgument, format!("χ supports at most {} qubits", qptkit::tomo::MAX_TOMO_QUBITS)));
        }
        let chi = lib(exact_propagator(num_qubits, bc.into(), t).and_then(|u| ChiMatrix::from_unitary(&u)))?;
        write_out(out, Box::into_raw(Box::new(QptChi(chi))), "out")
    })
}

/// # Safety
/// `chi` must be NULL or a handle from this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn qpt_chi_free(chi: *mut QptChi) {
    if !chi.is_null() {
        drop(Box::from_raw(chi));
    }
}

/// Side length `4^L` of χ, 0 for NULL.
///
/// # Safety
/// `chi` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qpt_chi_dim(chi: *const QptChi) -> usize {
    chi.as_ref().map_or(0, |c| c.0.dim())
}

/// Entry `χ_mn`.
///
/// # Safety
/// `chi` must be live; `re` and `im` valid.
#[no_mangle]
pub unsafe extern "C" fn qpt_chi_get(chi: *const QptChi, m: usize, n: usize, re: *mut c_double, im: *mut c_double) -> QptStatus {
    guard(|| {
        let chi = as_ref(chi, "chi")?;
        let d = chi.0.dim();
        if m >= d || n >= d {
            return Err((QptStatus::InvalidArgument, format!("index ({m}, {n}) out of range for dimension {d}")));
        }
        let v = chi.0.get(m, n);
        write_out(re, v.re, "re")?;
        write_out(im, v.im, "im")
    })
}

/// `Re Tr(χ_ideal† χ_exp)`.
///
/// # Safety
/// Handles must be live and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn qpt_process_fidelity(ideal: *const QptChi, exp: *const QptChi, out: *mut c_double) -> QptStatus {
    guard(|| {
        let f = lib(process_fidelity(&as_ref(ideal, "ideal")?.0, &as_ref(exp, "exp")?.0))?;
        write_out(out, f, "out")
    })
}

/// Eigenvalues of the superoperator of `chi`, sorted by argument.
///
/// `re` and `im` receive up to `cap` values; `len` always receives the
/// total count, and `QPT_STATUS_BUFFER_TOO_SMALL` is returned if `cap` is
/// short. Passing `cap == 0` with NULL buffers queries the size.
///
/// # Safety
/// `re` and `im` must hold `cap` doubles; `len` must be valid.
#[no_mangle]
pub unsafe extern "C" fn qpt_chi_spectrum(
    chi: *const QptChi,
    re: *mut c_double,
    im: *mut c_double,
    cap: usize,
    len: *mut usize,
) -> QptStatus {
    guard(|| {
        let chi = as_ref(chi, "chi")?;
        let ev = lib(superoperator_from_chi(&chi.0).and_then(|l| lambda_spectrum(&l)))?;
        write_out(len, ev.len(), "len")?;
        if cap < ev.len() {
            return Err((QptStatus::BufferTooSmall, format!("spectrum has {} values, buffer holds {cap}", ev.len())));
        }
        if re.is_null() || im.is_null() {
            return Err(null("output buffer"));
        }
        for (k, z) in ev.iter().enumerate() {
            re.add(k).write(z.re);
            im.add(k).write(z.im);
        }
        Ok(())
    })
}

/// Runs one experiment pipeline from TOML config text. `kind` is one of
/// `compress`, `infidelity_scan`, `full_qpt`, `sqpt`, `twirl`, `spectrum`,
/// `export_qasm`. The result record is returned as JSON; free it with
/// [`qpt_string_free`].
///
/// # Safety
/// `config_toml` and `kind` must be NUL-terminated; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn qpt_run_experiment(config_toml: *const c_char, kind: *const c_char, out: *mut *mut c_char) -> QptStatus {
    guard(|| {
        let mut cfg = lib(ExperimentConfig::from_toml(as_str(config_toml, "config_toml")?, &[]))?;
        let kind: ExperimentKind = serde_json::from_value(serde_json::Value::String(as_str(kind, "kind")?.into()))
            .map_err(|e| (QptStatus::InvalidArgument, format!("unknown experiment kind: {e}")))?;
        cfg.kind = Some(kind);
        let record = lib(experiment::run(&cfg))?;
        let json = serde_json::to_string(&record).map_err(|e| (QptStatus::Numerical, e.to_string()))?;
        write_out(out, into_c_string(json), "out")
    })
}
