//! C ABI for `dephasim`.
//!
//! Objects are opaque handles created by the `*_new`, `*_family` and trace
//! constructors and released with the matching `*_free`. Every fallible call
//! returns a
//! [`DephasimStatus`]; on failure [`dephasim_last_error`] describes the
//! problem for the calling thread. Output pointers are written only on
//! success.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use dephasim::dynamics::{comb_trace, monte_carlo_trace};
use dephasim::measures::{blp_measure, protection};
use dephasim::optimizer::{optimize_ndd, ContinuumMethod, FitnessModel};
use dephasim::postprocess::smooth;
use dephasim::sequences::Family;
use dephasim::spectra::build_noise_model;
use dephasim::{
    DecoherenceTrace, EnsembleSpec, EnvironmentSpec, Error, GaConfig, Normalization, PulseSequence,
    SmoothingConfig,
};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DephasimStatus {
    Ok = 0,
    InvalidParameter = 1,
    Domain = 2,
    Coverage = 3,
    OutOfRange = 4,
    Quadrature = 5,
    Infeasible = 6,
    NonPositive = 7,
    GridMismatch = 8,
    Unsupported = 9,
    Io = 10,
    Parse = 11,
    NullPointer = 12,
    BufferTooSmall = 13,
    Panic = 14,
}

impl From<&Error> for DephasimStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::InvalidParameter { .. } => DephasimStatus::InvalidParameter,
            Error::Domain(_) => DephasimStatus::Domain,
            Error::Coverage { .. } => DephasimStatus::Coverage,
            Error::OutOfRange { .. } => DephasimStatus::OutOfRange,
            Error::Quadrature { .. } => DephasimStatus::Quadrature,
            Error::Infeasible { .. } => DephasimStatus::Infeasible,
            Error::NonPositive { .. } => DephasimStatus::NonPositive,
            Error::GridMismatch(_) => DephasimStatus::GridMismatch,
            Error::Unsupported(_) => DephasimStatus::Unsupported,
            Error::Io(_) => DephasimStatus::Io,
            Error::Json(_) | Error::Parse(_) => DephasimStatus::Parse,
        }
    }
}

/// Standard pulse-sequence families.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DephasimFamily {
    Free = 0,
    Pdd = 1,
    Cpmg = 2,
    Udd = 3,
}

/// Ohmic-family environment plus the scale of its continuum exponent.
pub struct DephasimEnvironment {
    spec: EnvironmentSpec,
    normalization: Normalization,
}

pub struct DephasimSequence(PulseSequence);

pub struct DephasimTrace(DecoherenceTrace);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

struct Failure(DephasimStatus);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = DephasimStatus::from(&e);
        set_error(e.to_string());
        Failure(status)
    }
}

fn null(what: &str) -> Failure {
    set_error(format!("{what} is null"));
    Failure(DephasimStatus::NullPointer)
}

/// Run `f`, turning errors and panics into status codes.
fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> DephasimStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DephasimStatus::Ok,
        Ok(Err(Failure(status))) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            DephasimStatus::Panic
        }
    }
}

unsafe fn get<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn put<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn put_box<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    out.write(Box::into_raw(Box::new(value)));
    Ok(())
}

unsafe fn copy_out(src: &[f64], out: *mut f64, capacity: usize) -> Result<(), Failure> {
    if capacity < src.len() {
        set_error(format!("buffer holds {capacity} values, {} needed", src.len()));
        return Err(Failure(DephasimStatus::BufferTooSmall));
    }
    if !src.is_empty() {
        if out.is_null() {
            return Err(null("out"));
        }
        ptr::copy_nonoverlapping(src.as_ptr(), out, src.len());
    }
    Ok(())
}

/// Message for the last failed call on this thread, or an empty string.
/// Valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn dephasim_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn dephasim_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

// ---------------------------------------------------------------------------
// environment

/// Ohmic environment with cutoff `omega_c` (rad/s) and `k_B·T` in units of
/// `ħω` (0 for zero temperature). The continuum exponent starts out
/// comb-normalized with `ω_b = 2π·4` rad/s.
///
/// # Safety
/// `out` must be valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn dephasim_environment_new(
    s: f64,
    lambda: f64,
    omega_c: f64,
    temperature_energy: f64,
    out: *mut *mut DephasimEnvironment,
) -> DephasimStatus {
    guard(|| {
        let spec = EnvironmentSpec::new(s, lambda, omega_c, temperature_energy)?;
        put_box(
            out,
            DephasimEnvironment {
                spec,
                normalization: Normalization::standard(),
            },
        )
    })
}

/// Use the bath integral itself as the continuum exponent.
///
/// # Safety
/// `env` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn dephasim_environment_use_bath_normalization(
    env: *mut DephasimEnvironment,
) -> DephasimStatus {
    guard(|| {
        let env = env.as_mut().ok_or_else(|| null("env"))?;
        env.normalization = Normalization::Bath;
        Ok(())
    })
}

/// Divide the bath integral by `omega_b`, matching a comb of spacing `omega_b`.
///
/// # Safety
/// `env` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn dephasim_environment_use_comb_normalization(
    env: *mut DephasimEnvironment,
    omega_b: f64,
) -> DephasimStatus {
    guard(|| {
        let env = env.as_mut().ok_or_else(|| null("env"))?;
        if !(omega_b.is_finite() && omega_b > 0.0) {
            set_error(format!("invalid omega_b_rad_s: must be > 0, got {omega_b}"));
            return Err(Failure(DephasimStatus::InvalidParameter));
        }
        env.normalization = Normalization::Comb { omega_b };
        Ok(())
    })
}

/// # Safety
/// `env` must come from [`dephasim_environment_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn dephasim_environment_free(env: *mut DephasimEnvironment) {
    if !env.is_null() {
        drop(Box::from_raw(env));
    }
}

// ---------------------------------------------------------------------------
// sequences

/// `n` pulses of a standard family over `total_time` seconds.
///
/// # Safety
/// `out` must be valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn dephasim_sequence_family(
    family: DephasimFamily,
    total_time: f64,
    n: usize,
    out: *mut *mut DephasimSequence,
) -> DephasimStatus {
    guard(|| {
        let f = match family {
            DephasimFamily::Free => Family::Free,
            DephasimFamily::Pdd => Family::Pdd,
            DephasimFamily::Cpmg => Family::Cpmg,
            DephasimFamily::Udd => Family::Udd,
        };
        put_box(out, DephasimSequence(f.build(total_time, n)?))
    })
}

/// Arbitrary sequence from ascending pulse times in `[0, total_time]`.
///
/// # Safety
/// `times` must point to `count` doubles (or be null when `count` is 0);
/// `out` must be valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn dephasim_sequence_new(
    total_time: f64,
    times: *const f64,
    count: usize,
    out: *mut *mut DephasimSequence,
) -> DephasimStatus {
    guard(|| {
        let times = slice(times, count, "times")?.to_vec();
        put_box(out, DephasimSequence(PulseSequence::new(total_time, times, "custom")?))
    })
}

/// Number of pulses, 0 for a null handle.
///
/// # Safety
/// `seq` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn dephasim_sequence_num_pulses(seq: *const DephasimSequence) -> usize {
    seq.as_ref().map_or(0, |s| s.0.num_pulses())
}

/// Copy the pulse times into `out`, which holds `capacity` doubles.
///
/// # Safety
/// `seq` must be a live handle; `out` must hold `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn dephasim_sequence_pulse_times(
    seq: *const DephasimSequence,
    out: *mut f64,
    capacity: usize,
) -> DephasimStatus {
    guard(|| copy_out(get(seq, "seq")?.0.pulse_times(), out, capacity))
}

/// `|F(ω, t)|²` of the sequence truncated at `t`.
///
/// # Safety
/// `seq` must be a live handle; `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn dephasim_filter_power(
    seq: *const DephasimSequence,
    omega: f64,
    t: f64,
    out: *mut f64,
) -> DephasimStatus {
    guard(|| {
        let v = get(seq, "seq")?.0.filter_power(omega, t)?;
        put(out, v, "out")
    })
}

/// # Safety
/// `seq` must come from a sequence constructor and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn dephasim_sequence_free(seq: *mut DephasimSequence) {
    if !seq.is_null() {
        drop(Box::from_raw(seq));
    }
}

// ---------------------------------------------------------------------------
// traces

fn continuum_model(env: &DephasimEnvironment, method: ContinuumMethod) -> FitnessModel {
    FitnessModel::Continuum {
        environment: env.spec,
        normalization: env.normalization,
        method,
    }
}

unsafe fn trace_with<F>(
    seq: *const DephasimSequence,
    grid: *const f64,
    points: usize,
    out: *mut *mut DephasimTrace,
    build: F,
) -> DephasimStatus
where
    F: FnOnce(&PulseSequence, &[f64]) -> dephasim::Result<DecoherenceTrace>,
{
    guard(|| {
        let seq = get(seq, "seq")?;
        let grid = slice(grid, points, "grid")?;
        put_box(out, DephasimTrace(build(&seq.0, grid)?))
    })
}

/// Continuum trace on `grid` (closed form at zero temperature, quadrature
/// otherwise).
///
/// # Safety
/// Handles must be live; `grid` must hold `points` ascending times in
/// `[0, T]`; `out` must be valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn dephasim_trace_continuum(
    env: *const DephasimEnvironment,
    seq: *const DephasimSequence,
    grid: *const f64,
    points: usize,
    out: *mut *mut DephasimTrace,
) -> DephasimStatus {
    let Some(env) = env.as_ref() else {
        return guard(|| Err(null("env")));
    };
    let model = continuum_model(env, ContinuumMethod::Auto);
    trace_with(seq, grid, points, out, |s, g| model.trace(s, g))
}

/// Closed-form continuum trace; fails with `Unsupported` above zero
/// temperature.
///
/// # Safety
/// As for [`dephasim_trace_continuum`].
#[no_mangle]
pub unsafe extern "C" fn dephasim_trace_closed_form(
    env: *const DephasimEnvironment,
    seq: *const DephasimSequence,
    grid: *const f64,
    points: usize,
    out: *mut *mut DephasimTrace,
) -> DephasimStatus {
    let Some(env) = env.as_ref() else {
        return guard(|| Err(null("env")));
    };
    let model = continuum_model(env, ContinuumMethod::ClosedForm);
    trace_with(seq, grid, points, out, |s, g| model.trace(s, g))
}

/// Exact trace of the comb with `harmonics` lines spaced `omega_b` apart.
///
/// # Safety
/// As for [`dephasim_trace_continuum`].
#[no_mangle]
pub unsafe extern "C" fn dephasim_trace_comb(
    env: *const DephasimEnvironment,
    omega_b: f64,
    harmonics: usize,
    seq: *const DephasimSequence,
    grid: *const f64,
    points: usize,
    out: *mut *mut DephasimTrace,
) -> DephasimStatus {
    let Some(env) = env.as_ref() else {
        return guard(|| Err(null("env")));
    };
    trace_with(seq, grid, points, out, |s, g| {
        comb_trace(&build_noise_model(&env.spec, omega_b, harmonics, false)?, s, g)
    })
}

/// Monte Carlo estimate from `realizations` comb realizations.
///
/// # Safety
/// As for [`dephasim_trace_continuum`].
#[no_mangle]
pub unsafe extern "C" fn dephasim_trace_monte_carlo(
    env: *const DephasimEnvironment,
    omega_b: f64,
    harmonics: usize,
    seq: *const DephasimSequence,
    grid: *const f64,
    points: usize,
    realizations: usize,
    seed: u64,
    out: *mut *mut DephasimTrace,
) -> DephasimStatus {
    let Some(env) = env.as_ref() else {
        return guard(|| Err(null("env")));
    };
    trace_with(seq, grid, points, out, |s, g| {
        let model = build_noise_model(&env.spec, omega_b, harmonics, false)?;
        monte_carlo_trace(&model, s, g, &EnsembleSpec::new(realizations, seed)?)
    })
}

/// Fourier-domain smoothing with default settings; the grid must be uniform.
///
/// # Safety
/// `trace` must be a live handle; `out` must be valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn dephasim_trace_smooth(
    trace: *const DephasimTrace,
    out: *mut *mut DephasimTrace,
) -> DephasimStatus {
    guard(|| {
        let t = get(trace, "trace")?;
        put_box(out, DephasimTrace(smooth(&t.0, &SmoothingConfig::default())?))
    })
}

/// Number of samples, 0 for a null handle.
///
/// # Safety
/// `trace` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn dephasim_trace_len(trace: *const DephasimTrace) -> usize {
    trace.as_ref().map_or(0, |t| t.0.len())
}

/// Copy `Γ` values into `out`, which holds `capacity` doubles.
///
/// # Safety
/// `trace` must be a live handle; `out` must hold `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn dephasim_trace_values(
    trace: *const DephasimTrace,
    out: *mut f64,
    capacity: usize,
) -> DephasimStatus {
    guard(|| copy_out(get(trace, "trace")?.0.values(), out, capacity))
}

/// BLP measure: sum of positive increments.
///
/// # Safety
/// `trace` must be a live handle; `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn dephasim_blp(trace: *const DephasimTrace, out: *mut f64) -> DephasimStatus {
    guard(|| put(out, blp_measure(&get(trace, "trace")?.0), "out"))
}

/// Time-averaged coherence over `[0, horizon]`.
///
/// # Safety
/// `trace` must be a live handle; `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn dephasim_protection(
    trace: *const DephasimTrace,
    horizon: f64,
    out: *mut f64,
) -> DephasimStatus {
    guard(|| {
        let p = protection(&get(trace, "trace")?.0, horizon)?;
        put(out, p, "out")
    })
}

/// # Safety
/// `trace` must come from a trace constructor and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn dephasim_trace_free(trace: *mut DephasimTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}

// ---------------------------------------------------------------------------
// optimizer

/// Genetic search for the `pulses`-pulse sequence maximizing protection at
/// `total_time` under the continuum of `env`. `max_generations = 0` keeps
/// the default budget.
///
/// # Safety
/// `env` must be a live handle; `out_seq` and `out_fitness` must be valid
/// for writes.
#[no_mangle]
pub unsafe extern "C" fn dephasim_optimize_ndd(
    env: *const DephasimEnvironment,
    total_time: f64,
    pulses: usize,
    seed: u64,
    max_generations: usize,
    out_seq: *mut *mut DephasimSequence,
    out_fitness: *mut f64,
) -> DephasimStatus {
    guard(|| {
        let env = get(env, "env")?;
        if out_seq.is_null() || out_fitness.is_null() {
            return Err(null("out"));
        }
        let defaults = GaConfig::default();
        let cfg = GaConfig {
            seed,
            max_generations: if max_generations == 0 {
                defaults.max_generations
            } else {
                max_generations
            },
            ..defaults
        };
        let model = continuum_model(env, ContinuumMethod::Auto);
        let r = optimize_ndd(&model, total_time, pulses, &cfg)?;
        put(out_fitness, r.best_fitness, "out_fitness")?;
        put_box(out_seq, DephasimSequence(r.best_sequence))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ffi::CStr;

    fn message() -> String {
        unsafe { CStr::from_ptr(dephasim_last_error()) }.to_string_lossy().into_owned()
    }

    #[test]
    fn panics_become_status() {
        let st = guard(|| panic!("boom"));
        assert_eq!(st, DephasimStatus::Panic);
        assert_eq!(message(), "panic: boom");
    }

    #[test]
    fn errors_map_to_codes() {
        let e = Error::Unsupported("x".into());
        assert_eq!(DephasimStatus::from(&e), DephasimStatus::Unsupported);
        let st = guard(|| Err(e.into()));
        assert_eq!(st, DephasimStatus::Unsupported);
        assert!(!message().is_empty());
    }

    #[test]
    fn interior_nul_is_replaced() {
        set_error("a\0b".into());
        assert_eq!(message(), "a b");
    }
}
