//! C ABI over the solver.
//!
//! A simulation lives behind an opaque `KvSim` handle created from a preset
//! name or TOML text and released with [`kv_sim_free`]. Every fallible call
//! returns a [`KvStatus`]; the message of the most recent failure on the
//! calling thread is available through [`kv_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use kvtherm::io::load_experiment;
use kvtherm::timeloop::StepRecord;
use kvtherm::{Error, Simulation};

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KvStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    NotFound = 3,
    Parse = 4,
    Validation = 5,
    Solver = 6,
    Finished = 7,
    BufferTooSmall = 8,
    Io = 9,
    Panic = 10,
}

/// Opaque simulation handle.
pub struct KvSim {
    sim: Simulation,
    last: Option<StepRecord>,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn fail(status: KvStatus, message: impl Into<String>) -> KvStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = message.into());
    status
}

fn classify(err: &Error) -> KvStatus {
    match err {
        Error::NotFound(_) => KvStatus::NotFound,
        Error::Parse { .. } => KvStatus::Parse,
        Error::Validation(_) => KvStatus::Validation,
        Error::Io(_) => KvStatus::Io,
        _ => KvStatus::Solver,
    }
}

fn from_error(err: Error) -> KvStatus {
    fail(classify(&err), err.to_string())
}

fn guarded(body: impl FnOnce() -> KvStatus) -> KvStatus {
    catch_unwind(AssertUnwindSafe(body)).unwrap_or_else(|_| fail(KvStatus::Panic, "internal panic"))
}

unsafe fn str_arg<'a>(p: *const c_char) -> Result<&'a str, KvStatus> {
    if p.is_null() {
        return Err(fail(KvStatus::NullPointer, "string argument is null"));
    }
    CStr::from_ptr(p).to_str().map_err(|_| fail(KvStatus::InvalidUtf8, "string argument is not valid UTF-8"))
}

fn create(cfg: kvtherm::Result<kvtherm::experiments::ExperimentConfig>, workers: usize, out: *mut *mut KvSim) -> KvStatus {
    let sim = match cfg.and_then(|c| c.build(workers)) {
        Ok(s) => s,
        Err(e) => return from_error(e),
    };
    // SAFETY: the caller checked `out` for null.
    unsafe { *out = Box::into_raw(Box::new(KvSim { sim, last: None })) };
    KvStatus::Ok
}

/// Creates a simulation from a preset name or a config file path.
/// `workers = 0` uses all cores.
///
/// # Safety
/// `source` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn kv_sim_from_preset(source: *const c_char, workers: usize, out: *mut *mut KvSim) -> KvStatus {
    guarded(|| {
        if out.is_null() {
            return fail(KvStatus::NullPointer, "out is null");
        }
        *out = ptr::null_mut();
        match str_arg(source) {
            Ok(s) => create(load_experiment(s, &[]), workers, out),
            Err(st) => st,
        }
    })
}

/// Creates a simulation from TOML configuration text.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn kv_sim_from_toml(text: *const c_char, workers: usize, out: *mut *mut KvSim) -> KvStatus {
    guarded(|| {
        if out.is_null() {
            return fail(KvStatus::NullPointer, "out is null");
        }
        *out = ptr::null_mut();
        match str_arg(text) {
            Ok(s) => create(kvtherm::io::parse_config(s), workers, out),
            Err(st) => st,
        }
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `sim` must come from a constructor of this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn kv_sim_free(sim: *mut KvSim) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

unsafe fn handle<'a>(sim: *mut KvSim) -> Result<&'a mut KvSim, KvStatus> {
    sim.as_mut().ok_or_else(|| fail(KvStatus::NullPointer, "simulation handle is null"))
}

/// Advances one time step. Returns `Finished` once all steps are done.
///
/// # Safety
/// `sim` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn kv_sim_step(sim: *mut KvSim) -> KvStatus {
    guarded(|| {
        let h = match handle(sim) {
            Ok(h) => h,
            Err(st) => return st,
        };
        if h.sim.is_finished() {
            return fail(KvStatus::Finished, "all steps are done");
        }
        match h.sim.step() {
            Ok(rec) => {
                h.last = Some(rec.clone());
                KvStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Runs the remaining steps.
///
/// # Safety
/// `sim` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn kv_sim_run(sim: *mut KvSim) -> KvStatus {
    loop {
        match kv_sim_step(sim) {
            KvStatus::Ok => {}
            KvStatus::Finished => return KvStatus::Ok,
            other => return other,
        }
    }
}

/// Number of mesh nodes, or 0 for a null handle.
///
/// # Safety
/// `sim` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn kv_sim_num_nodes(sim: *const KvSim) -> usize {
    sim.as_ref().map_or(0, |h| h.sim.setup().disc.num_nodes())
}

/// Completed steps, or 0 for a null handle.
///
/// # Safety
/// `sim` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn kv_sim_steps_done(sim: *const KvSim) -> usize {
    sim.as_ref().map_or(0, |h| h.sim.steps_done())
}

/// Current time, or NaN for a null handle.
///
/// # Safety
/// `sim` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn kv_sim_time(sim: *const KvSim) -> f64 {
    sim.as_ref().map_or(f64::NAN, |h| h.sim.state().time)
}

/// Dissipation and total internal energy of the last step (both 0 before the first).
///
/// # Safety
/// `sim` must be a live handle; the outputs must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn kv_sim_last_energies(sim: *const KvSim, dissipation: *mut f64, internal_energy: *mut f64) -> KvStatus {
    let Some(h) = sim.as_ref() else { return fail(KvStatus::NullPointer, "simulation handle is null") };
    if dissipation.is_null() || internal_energy.is_null() {
        return fail(KvStatus::NullPointer, "output pointer is null");
    }
    let (d, w) = h.last.as_ref().map_or((0.0, 0.0), |r| (r.mech.dissipation, r.thermal.internal_energy));
    *dissipation = d;
    *internal_energy = w;
    KvStatus::Ok
}

unsafe fn copy_out(src: &[f64], buf: *mut f64, len: usize) -> KvStatus {
    if buf.is_null() {
        return fail(KvStatus::NullPointer, "buffer is null");
    }
    if len < src.len() {
        return fail(KvStatus::BufferTooSmall, format!("buffer holds {len} values, {} needed", src.len()));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
    KvStatus::Ok
}

/// Copies nodal temperatures (`num_nodes` values).
///
/// # Safety
/// `sim` must be a live handle and `buf` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn kv_sim_temperature(sim: *const KvSim, buf: *mut f64, len: usize) -> KvStatus {
    match sim.as_ref() {
        Some(h) => copy_out(&h.sim.state().theta, buf, len),
        None => fail(KvStatus::NullPointer, "simulation handle is null"),
    }
}

/// Copies deformed nodal positions, interleaved `x0 y0 x1 y1 ...` (`2 * num_nodes` values).
///
/// # Safety
/// `sim` must be a live handle and `buf` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn kv_sim_positions(sim: *const KvSim, buf: *mut f64, len: usize) -> KvStatus {
    match sim.as_ref() {
        Some(h) => copy_out(&h.sim.state().y, buf, len),
        None => fail(KvStatus::NullPointer, "simulation handle is null"),
    }
}

/// Copies the calling thread's last error message, NUL-terminated and
/// truncated to `len`. Returns the full message length in bytes.
///
/// # Safety
/// `buf` must be null or valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn kv_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}
