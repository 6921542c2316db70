//! C ABI over the `tlasso` library.
//!
//! Instances and solve results cross the boundary as opaque handles that the
//! caller releases with the matching `*_free` function. Every entry point
//! returns a [`TlStatus`]; on failure a description is kept per thread and
//! can be read with [`tl_last_error`]. Panics are caught at the boundary and
//! reported as [`TlStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use tlasso::experiments::SetTemplate;
use tlasso::geometry::{gaussian_width_mc, local_gaussian_width_mc};
use tlasso::links::{link_params, mean_variance, DEFAULT_ORDER};
use tlasso::solver::error_breakdown;
use tlasso::{
    generate_instance, solve_tlasso, ConstraintSet, Error, InstanceSpec, LinkFunction,
    ProblemInstance, SolveOptions, SolveResult,
};

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TlStatus {
    Ok = 0,
    NullPointer = 1,
    /// Bad link, set, spec, shape or parameter.
    InvalidArgument = 2,
    /// Anchor outside the requested set, or another configuration problem.
    Config = 3,
    NumericalFailure = 4,
    NotSubGaussian = 5,
    Io = 6,
    /// An output buffer is shorter than the data to copy.
    BufferTooSmall = 7,
    Panic = 8,
}

/// Opaque problem instance.
pub struct TlInstance(ProblemInstance);

/// Opaque solver output.
pub struct TlSolveResult(SolveResult);

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct TlParams {
    pub mu: f64,
    pub sigma: f64,
    pub psi_hat: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct TlSolveSummary {
    pub iterations: usize,
    pub converged: bool,
    pub final_residual_norm: f64,
    pub grad_map_norm: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct TlEstimate {
    pub mean: f64,
    pub std_error: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(message: &str) {
    let text = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = text);
}

fn status_of(err: &Error) -> TlStatus {
    match err {
        Error::NumericalFailure(_) => TlStatus::NumericalFailure,
        Error::NotSubGaussian(_) => TlStatus::NotSubGaussian,
        Error::Io(_) | Error::Csv(_) => TlStatus::Io,
        Error::Config(_) | Error::InvalidAnchor(_) => TlStatus::Config,
        _ => TlStatus::InvalidArgument,
    }
}

/// Runs `body`, records any error or panic and converts it to a status.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> TlStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            set_last_error("");
            TlStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_last_error(&message);
            status
        }
        Err(_) => {
            set_last_error("panic inside tlasso");
            TlStatus::Panic
        }
    }
}

struct Failure(TlStatus, String);

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        Failure(status_of(&err), err.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(TlStatus::NullPointer, format!("{what} is null"))
}

unsafe fn text<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if ptr.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| Failure(TlStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn out<'a, T>(ptr: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    ptr.as_mut().ok_or_else(|| null(what))
}

unsafe fn copy_out(src: &[f64], dst: *mut f64, len: usize, what: &str) -> Result<(), Failure> {
    if dst.is_null() {
        return Err(null(what));
    }
    if len < src.len() {
        return Err(Failure(
            TlStatus::BufferTooSmall,
            format!("{what} holds {len} values, need {}", src.len()),
        ));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), dst, src.len());
    Ok(())
}

/// Message of the last failed call on this thread, or an empty string.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn tl_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn tl_version() -> *const c_char {
    static VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(v) => v,
        Err(_) => panic!("version has an interior NUL"),
    };
    VERSION.as_ptr()
}

/// μ, σ and ψ̂ of a link given in the text grammar (`sign`, `clip:1`, ...).
/// `order` 0 selects the default quadrature order.
///
/// # Safety
/// `link` must be a NUL-terminated string and `out_params` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tl_link_params(link: *const c_char, order: usize, out_params: *mut TlParams) -> TlStatus {
    guard(|| {
        let link: LinkFunction = text(link, "link")?.parse()?;
        let dst = out(out_params, "out_params")?;
        let order = if order == 0 { DEFAULT_ORDER } else { order };
        let p = link_params(&link, order)?;
        *dst = TlParams { mu: p.mu, sigma: p.sigma, psi_hat: p.psi_hat };
        Ok(())
    })
}

/// Draws a random instance. On success `*out_instance` owns a new handle.
///
/// # Safety
/// `link` must be a NUL-terminated string and `out_instance` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tl_instance_generate(
    n: usize,
    m: usize,
    signal_sparsity: usize,
    corruption_sparsity: usize,
    amplitude: f64,
    link: *const c_char,
    seed: u64,
    out_instance: *mut *mut TlInstance,
) -> TlStatus {
    guard(|| {
        let dst = out(out_instance, "out_instance")?;
        let spec = InstanceSpec {
            n,
            m,
            signal_sparsity,
            corruption_sparsity,
            corruption_amplitude: amplitude,
            link: text(link, "link")?.parse()?,
            seed,
        };
        let inst = generate_instance(&spec)?;
        *dst = Box::into_raw(Box::new(TlInstance(inst)));
        Ok(())
    })
}

/// # Safety
/// `path` must be a NUL-terminated string and `out_instance` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tl_instance_load(path: *const c_char, out_instance: *mut *mut TlInstance) -> TlStatus {
    guard(|| {
        let dst = out(out_instance, "out_instance")?;
        let inst = ProblemInstance::load(Path::new(text(path, "path")?))?;
        *dst = Box::into_raw(Box::new(TlInstance(inst)));
        Ok(())
    })
}

/// # Safety
/// `instance` must come from this library and `path` be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn tl_instance_save(instance: *const TlInstance, path: *const c_char) -> TlStatus {
    guard(|| {
        let inst = instance.as_ref().ok_or_else(|| null("instance"))?;
        inst.0.save(Path::new(text(path, "path")?))?;
        Ok(())
    })
}

/// Releases an instance. Null is ignored.
///
/// # Safety
/// `instance` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn tl_instance_free(instance: *mut TlInstance) {
    if !instance.is_null() {
        drop(Box::from_raw(instance));
    }
}

/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn tl_instance_dims(instance: *const TlInstance, out_n: *mut usize, out_m: *mut usize) -> TlStatus {
    guard(|| {
        let inst = instance.as_ref().ok_or_else(|| null("instance"))?;
        *out(out_n, "out_n")? = inst.0.n();
        *out(out_m, "out_m")? = inst.0.m();
        Ok(())
    })
}

/// Copies `x⋆` (length n) and `v⋆` (length m).
///
/// # Safety
/// Buffers must hold at least the given number of doubles.
#[no_mangle]
pub unsafe extern "C" fn tl_instance_copy_truth(
    instance: *const TlInstance,
    x_out: *mut f64,
    x_len: usize,
    v_out: *mut f64,
    v_len: usize,
) -> TlStatus {
    guard(|| {
        let inst = &instance.as_ref().ok_or_else(|| null("instance"))?.0;
        copy_out(inst.x_star.as_slice().expect("contiguous"), x_out, x_len, "x_out")?;
        copy_out(inst.v_star.as_slice().expect("contiguous"), v_out, v_len, "v_out")
    })
}

/// Copies the observations `y` (length m).
///
/// # Safety
/// `y_out` must hold at least `y_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn tl_instance_copy_observations(
    instance: *const TlInstance,
    y_out: *mut f64,
    y_len: usize,
) -> TlStatus {
    guard(|| {
        let inst = &instance.as_ref().ok_or_else(|| null("instance"))?.0;
        copy_out(inst.y.as_slice().expect("contiguous"), y_out, y_len, "y_out")
    })
}

/// Solves the instance over `set_x × set_v`.
///
/// Sets use the text grammar (`l1:2.5`, `l2:1`, `topk:4`, `full`, `point:0`)
/// plus `l1:anchor[*c]` and `l2:anchor[*c]`, whose radius is taken from
/// the truth `(μx⋆, v⋆)`. `max_iters` 0 and `tol` ≤ 0 select defaults.
///
/// # Safety
/// Strings must be NUL-terminated and `out_result` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tl_solve(
    instance: *const TlInstance,
    set_x: *const c_char,
    set_v: *const c_char,
    max_iters: usize,
    tol: f64,
    out_result: *mut *mut TlSolveResult,
) -> TlStatus {
    guard(|| {
        let inst = &instance.as_ref().ok_or_else(|| null("instance"))?.0;
        let dst = out(out_result, "out_result")?;
        let mu = mean_variance(&inst.link, DEFAULT_ORDER)?.0;
        let anchor_x = &inst.x_star * mu;
        let sx: ConstraintSet = SetTemplate::parse(text(set_x, "set_x")?)?.resolve(&anchor_x)?;
        let sv: ConstraintSet = SetTemplate::parse(text(set_v, "set_v")?)?.resolve(&inst.v_star)?;
        let mut opts = SolveOptions::for_measurements(inst.m());
        if max_iters > 0 {
            opts.max_iters = max_iters;
        }
        if tol > 0.0 {
            opts.grad_map_tol = tol;
        }
        let result = solve_tlasso(inst, &sx, &sv, &opts)?;
        *dst = Box::into_raw(Box::new(TlSolveResult(result)));
        Ok(())
    })
}

/// Releases a solve result. Null is ignored.
///
/// # Safety
/// `result` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn tl_result_free(result: *mut TlSolveResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// # Safety
/// Both pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn tl_result_summary(result: *const TlSolveResult, out_summary: *mut TlSolveSummary) -> TlStatus {
    guard(|| {
        let res = &result.as_ref().ok_or_else(|| null("result"))?.0;
        *out(out_summary, "out_summary")? = TlSolveSummary {
            iterations: res.iterations,
            converged: res.converged,
            final_residual_norm: res.final_residual_norm,
            grad_map_norm: res.grad_map_norm,
        };
        Ok(())
    })
}

/// Copies `x̂` (length n) and `v̂` (length m).
///
/// # Safety
/// Buffers must hold at least the given number of doubles.
#[no_mangle]
pub unsafe extern "C" fn tl_result_copy_estimate(
    result: *const TlSolveResult,
    x_out: *mut f64,
    x_len: usize,
    v_out: *mut f64,
    v_len: usize,
) -> TlStatus {
    guard(|| {
        let res = &result.as_ref().ok_or_else(|| null("result"))?.0;
        copy_out(res.x_hat.as_slice().expect("contiguous"), x_out, x_len, "x_out")?;
        copy_out(res.v_hat.as_slice().expect("contiguous"), v_out, v_len, "v_out")
    })
}

/// `√(‖x̂ − μx⋆‖² + ‖v̂ − v⋆‖²)` with μ of the instance's link.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn tl_joint_error(
    result: *const TlSolveResult,
    instance: *const TlInstance,
    out_error: *mut f64,
) -> TlStatus {
    guard(|| {
        let res = &result.as_ref().ok_or_else(|| null("result"))?.0;
        let inst = &instance.as_ref().ok_or_else(|| null("instance"))?.0;
        let dst = out(out_error, "out_error")?;
        let mu = mean_variance(&inst.link, DEFAULT_ORDER)?.0;
        *dst = error_breakdown(&res.x_hat, &res.v_hat, inst, mu)?.joint;
        Ok(())
    })
}

/// Monte Carlo Gaussian width of a set, or the local width `ω_t` when
/// `t > 0`. `dims` gives one dimension per leaf of the set expression.
///
/// # Safety
/// `set` must be NUL-terminated and `dims` hold `dims_len` values.
#[no_mangle]
pub unsafe extern "C" fn tl_gaussian_width(
    set: *const c_char,
    dims: *const usize,
    dims_len: usize,
    t: f64,
    trials: usize,
    seed: u64,
    out_estimate: *mut TlEstimate,
) -> TlStatus {
    guard(|| {
        if dims.is_null() {
            return Err(null("dims"));
        }
        let dims = std::slice::from_raw_parts(dims, dims_len);
        let parsed = ConstraintSet::parse(text(set, "set")?, dims)?;
        let dst = out(out_estimate, "out_estimate")?;
        let est = if t > 0.0 {
            local_gaussian_width_mc(&parsed, t, trials, seed)?
        } else {
            gaussian_width_mc(&parsed, trials, seed)?
        };
        *dst = TlEstimate { mean: est.mean, std_error: est.std_error };
        Ok(())
    })
}
