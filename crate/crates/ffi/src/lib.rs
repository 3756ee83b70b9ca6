//! C ABI for the multifrac library.
//!
//! Every fallible call returns an [`MfStatus`]; on failure the message is
//! kept per thread and read back with [`mf_last_error_message`]. Simulators
//! are opaque handles created from a JSON run configuration and released
//! with [`mf_simulator_free`]. Output buffers are owned by the caller.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use multifrac::config::RunConfig;
use multifrac::gaussian::{self, Law, MbmEvaluation};
use multifrac::hurst::HurstSpec;
use multifrac::kernels::KernelSpec;
use multifrac::simulate::{simulate_ensemble, Process, SimConfig};
use multifrac::Error;

/// Result codes of the C interface.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Config = 3,
    InvalidArgument = 4,
    Numerical = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

/// Simulator built from a run configuration.
pub struct MfSimulator {
    kernel: KernelSpec,
    hurst: HurstSpec,
    sim: SimConfig,
    process: Process,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn status_of(err: &Error) -> MfStatus {
    match err {
        Error::Config(_) | Error::Json(_) => MfStatus::Config,
        Error::InvalidParameter(_) | Error::Range(_) | Error::Empty(_) | Error::InvalidGrid(_) => {
            MfStatus::InvalidArgument
        }
        _ => MfStatus::Numerical,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (MfStatus, String)>) -> MfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            MfStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            MfStatus::Panic
        }
    }
}

fn lib(err: Error) -> (MfStatus, String) {
    (status_of(&err), err.to_string())
}

fn null(name: &str) -> (MfStatus, String) {
    (MfStatus::NullPointer, format!("{name} is null"))
}

/// Copies the last error message of this thread into `buf` with a trailing
/// NUL, truncating to `len`. Returns the full message length without NUL.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn mf_last_error_message(buf: *mut c_char, len: usize) -> usize {
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

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a simulator from a JSON run configuration.
///
/// # Safety
/// `config_json` must be null or a NUL-terminated string; `out` must be null
/// or valid for writing one pointer.
#[no_mangle]
pub unsafe extern "C" fn mf_simulator_new(config_json: *const c_char, out: *mut *mut MfSimulator) -> MfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        if config_json.is_null() {
            return Err(null("config_json"));
        }
        let text = CStr::from_ptr(config_json)
            .to_str()
            .map_err(|e| (MfStatus::InvalidUtf8, e.to_string()))?;
        let cfg = RunConfig::from_json(text).map_err(lib)?;
        let sim = MfSimulator {
            kernel: cfg.kernel_spec().map_err(lib)?,
            hurst: cfg.hurst.clone(),
            sim: cfg.sim_config().map_err(lib)?,
            process: cfg.sim.process,
        };
        *out = Box::into_raw(Box::new(sim));
        Ok(())
    })
}

/// Releases a simulator. Null is ignored.
///
/// # Safety
/// `sim` must be null or a handle from [`mf_simulator_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mf_simulator_free(sim: *mut MfSimulator) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Number of output nodes of one simulated path, or 0 for a null handle.
///
/// # Safety
/// `sim` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mf_simulator_n_nodes(sim: *const MfSimulator) -> usize {
    sim.as_ref().map_or(0, |s| s.sim.grid.n_nodes())
}

/// Simulates one path on `(seed, stream_id)` and writes its values at the
/// output nodes to `values`. When `hurst` is not null the realized Hurst
/// exponent at the same nodes is written there. Both buffers need
/// [`mf_simulator_n_nodes`] entries, passed as `len`.
///
/// # Safety
/// `sim` must be a live handle; `values` and a non-null `hurst` must point to
/// `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn mf_simulator_simulate(
    sim: *const MfSimulator,
    seed: u64,
    stream_id: u64,
    values: *mut f64,
    hurst: *mut f64,
    len: usize,
) -> MfStatus {
    guard(|| {
        let s = sim.as_ref().ok_or_else(|| null("sim"))?;
        if values.is_null() {
            return Err(null("values"));
        }
        let n = s.sim.grid.n_nodes();
        if len < n {
            return Err((MfStatus::BufferTooSmall, format!("buffer holds {len} values, {n} needed")));
        }
        let cfg = s.sim.with_seed(seed, stream_id);
        let mut paths = simulate_ensemble(&s.kernel, &s.hurst, &cfg, 1, s.process).map_err(lib)?;
        let (x, h) = paths.pop().expect("one path");
        ptr::copy_nonoverlapping(x.values().as_ptr(), values, n);
        if !hurst.is_null() {
            for (k, t) in s.sim.grid.nodes().enumerate() {
                *hurst.add(k) = h.at(t);
            }
        }
        Ok(())
    })
}

unsafe fn write_out(out: *mut f64, value: multifrac::Result<f64>) -> Result<(), (MfStatus, String)> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = value.map_err(lib)?;
    Ok(())
}

/// Covariance of fractional Brownian motion with exponent `h`.
///
/// # Safety
/// `out` must be null or valid for writing one double.
#[no_mangle]
pub unsafe extern "C" fn mf_fbm_cov(t: f64, s: f64, h: f64, out: *mut f64) -> MfStatus {
    guard(|| write_out(out, gaussian::fbm_cov(t, s, h)))
}

/// Covariance of the multifractional field at `(t, h_t)` and `(s, h_s)`.
/// With `strict` set the removable singularity is an error instead of
/// being evaluated as a limit.
///
/// # Safety
/// `out` must be null or valid for writing one double.
#[no_mangle]
pub unsafe extern "C" fn mf_mbm_cov(t: f64, s: f64, h_t: f64, h_s: f64, strict: bool, out: *mut f64) -> MfStatus {
    let eval = if strict { MbmEvaluation::Strict } else { MbmEvaluation::Limit };
    guard(|| write_out(out, gaussian::mbm_cov(t, s, h_t, h_s, eval)))
}

/// Covariance of the process with a random constant exponent drawn from the
/// mixture `(h_values, h_weights)` of `n` atoms and constant scale `sigma`.
/// `h_weights` may be null for equal weights.
///
/// # Safety
/// `h_values` and a non-null `h_weights` must point to `n` readable doubles;
/// `out` must be null or valid for writing one double.
#[no_mangle]
pub unsafe extern "C" fn mf_stationary_cov(
    t: f64,
    s: f64,
    h_values: *const f64,
    h_weights: *const f64,
    n: usize,
    sigma: f64,
    out: *mut f64,
) -> MfStatus {
    guard(|| {
        if h_values.is_null() {
            return Err(null("h_values"));
        }
        if n == 0 {
            return Err((MfStatus::InvalidArgument, "no Hurst atoms".into()));
        }
        let values = std::slice::from_raw_parts(h_values, n).to_vec();
        let weights =
            if h_weights.is_null() { vec![1.0; n] } else { std::slice::from_raw_parts(h_weights, n).to_vec() };
        let law = Law::Mixture { values, weights };
        write_out(out, gaussian::stationary_cov(t, s, &law, &Law::point(sigma)).map(|e| e.value))
    })
}
