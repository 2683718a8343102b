//! C interface to `sarc-core`.
//!
//! Every fallible function returns a [`SarcStatus`]. On failure a message is
//! kept per thread and can be read with [`sarc_last_error_message`] until the
//! next failing call on that thread. Handles are opaque; release them with
//! the matching `_free` function (which accepts `NULL`).

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::Arc;

use sarc_core::baselines::FirstOrderConfig;
use sarc_core::bench::{initial_point, run_configured, write_trace, Algorithm};
use sarc_core::data::{parse_libsvm, synth_logistic, LabelMapping, LibsvmOptions, SynthSpec};
use sarc_core::error::Error;
use sarc_core::problem::{Dataset, LossFamily, LossModel, RidgeForm};
use sarc_core::sampling::SamplingScheme;
use sarc_core::sarc::{HessianMode, RunResult, RunStatus, SolverConfig};
use sarc_core::trace::Phase;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SarcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    /// A numerical routine failed (degenerate curvature, root bracketing).
    Numerical = 5,
    /// A Rust panic was caught at the boundary.
    Internal = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SarcAlgorithm {
    Sarc = 0,
    Saarc = 1,
    Sacr = 2,
    Cr = 3,
    Acr = 4,
    Agd = 5,
    Sgd = 6,
    Lbfgs = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SarcLoss {
    RidgeLeastSquares = 0,
    Logistic = 1,
    NonconvexSvm = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SarcRidge {
    /// `λ‖x‖²`
    Full = 0,
    /// `(λ/2)‖x‖²`
    Half = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SarcScheme {
    Uniform = 0,
    Nonuniform = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SarcRunStatus {
    Converged = 0,
    Stationary = 1,
    MaxIters = 2,
    Diverged = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SarcPhase {
    Sarc = 0,
    Phase1 = 1,
    Phase2 = 2,
    FirstOrder = 3,
}

/// Solver settings. Start from [`sarc_config_default`] and override fields.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SarcConfig {
    pub algorithm: SarcAlgorithm,
    /// Hessian sampling for SARC, SAARC and SACR (CR and ACR are exact).
    pub scheme: SarcScheme,
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma3: f64,
    pub eta: f64,
    pub sigma_min: f64,
    pub sigma0: f64,
    pub kappa_theta: f64,
    pub eps: f64,
    pub delta: f64,
    pub max_iters: usize,
    pub grad_tol: f64,
    /// SGD minibatch size.
    pub batch_size: usize,
    pub lbfgs_memory: usize,
    /// Seeds the samplers and, when no `x0` is passed, the initial point.
    pub seed: u64,
    /// Standard deviation of the Gaussian initial point drawn when `x0` is `NULL`.
    pub x0_std: f64,
}

/// One trace row. Row 0 describes the starting point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SarcRecord {
    pub iter: usize,
    pub epochs: f64,
    pub f: f64,
    pub grad_norm: f64,
    pub sigma: f64,
    pub eps_i: f64,
    pub sample_size: usize,
    pub success: bool,
    pub phase: SarcPhase,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SarcSummary {
    pub status: SarcRunStatus,
    pub iterations: usize,
    pub successes: usize,
    pub epochs: f64,
    pub f: f64,
    pub grad_norm: f64,
    pub records: usize,
    pub d: usize,
}

pub struct SarcDataset {
    inner: Arc<Dataset>,
}

pub struct SarcModel {
    inner: LossModel,
}

pub struct SarcRun {
    inner: RunResult,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure {
    status: SarcStatus,
    message: String,
}

impl Failure {
    fn new(status: SarcStatus, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Io(_) | Error::Csv(_) => SarcStatus::Io,
            Error::Parse { .. } | Error::InvalidDataset(_) => SarcStatus::Parse,
            Error::DegenerateCurvature | Error::BracketFailure { .. } => SarcStatus::Numerical,
            _ => SarcStatus::InvalidArgument,
        };
        Self::new(status, e.to_string())
    }
}

fn set_last_error(message: &str) {
    let text = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(text));
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> SarcStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => SarcStatus::Ok,
        Ok(Err(f)) => {
            set_last_error(&f.message);
            f.status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(&format!("internal error: {msg}"));
            SarcStatus::Internal
        }
    }
}

fn null(name: &str) -> Failure {
    Failure::new(SarcStatus::NullPointer, format!("`{name}` is NULL"))
}

unsafe fn borrow<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(name))
}

unsafe fn writable<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(name))
}

unsafe fn slice<'a>(p: *const f64, len: usize, name: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(name));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a>(p: *mut f64, len: usize, name: &str) -> Result<&'a mut [f64], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(name));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn path_arg<'a>(p: *const c_char) -> Result<&'a Path, Failure> {
    if p.is_null() {
        return Err(null("path"));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::new(SarcStatus::InvalidArgument, "path is not valid UTF-8"))?;
    Ok(Path::new(s))
}

fn check_len(expected: usize, got: usize) -> Result<(), Failure> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got }.into());
    }
    Ok(())
}

/// Message of the last failed call on this thread, or `NULL`. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sarc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(std::ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sarc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a LIBSVM file. `positive_label` selects the label mapped to +1;
/// pass NaN to map `{-1, +1}` or any two-valued label set automatically.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sarc_dataset_load_libsvm(
    path: *const c_char,
    positive_label: f64,
    out: *mut *mut SarcDataset,
) -> SarcStatus {
    guard(|| {
        let out = writable(out, "out")?;
        let labels = if positive_label.is_nan() {
            LabelMapping::Auto
        } else {
            LabelMapping::Positive(positive_label)
        };
        let options = LibsvmOptions {
            labels,
            dimension: None,
        };
        let ds = parse_libsvm(path_arg(path)?, &options)?;
        *out = Box::into_raw(Box::new(SarcDataset { inner: Arc::new(ds) }));
        Ok(())
    })
}

/// Seeded synthetic binary classification data; the first row is scaled by
/// `skew` and rows have expected norm `row_scale`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sarc_dataset_synthetic(
    n: usize,
    d: usize,
    seed: u64,
    skew: f64,
    row_scale: f64,
    out: *mut *mut SarcDataset,
) -> SarcStatus {
    guard(|| {
        let out = writable(out, "out")?;
        let spec = SynthSpec::new(n, d, seed, skew).with_row_scale(row_scale);
        let ds = synth_logistic(&spec)?;
        *out = Box::into_raw(Box::new(SarcDataset { inner: Arc::new(ds) }));
        Ok(())
    })
}

/// # Safety
/// `dataset` must come from this library; outputs may be `NULL`.
#[no_mangle]
pub unsafe extern "C" fn sarc_dataset_dims(
    dataset: *const SarcDataset,
    n: *mut usize,
    d: *mut usize,
) -> SarcStatus {
    guard(|| {
        let ds = borrow(dataset, "dataset")?;
        if let Some(n) = n.as_mut() {
            *n = ds.inner.n();
        }
        if let Some(d) = d.as_mut() {
            *d = ds.inner.d();
        }
        Ok(())
    })
}

/// # Safety
/// `dataset` must come from this library or be `NULL`.
#[no_mangle]
pub unsafe extern "C" fn sarc_dataset_free(dataset: *mut SarcDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Finite-sum model over `dataset`. The model keeps its own reference, so
/// the dataset handle may be freed afterwards.
///
/// # Safety
/// `dataset` must come from this library and `out` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sarc_model_new(
    dataset: *const SarcDataset,
    loss: SarcLoss,
    lambda: f64,
    ridge: SarcRidge,
    out: *mut *mut SarcModel,
) -> SarcStatus {
    guard(|| {
        let ds = borrow(dataset, "dataset")?;
        let out = writable(out, "out")?;
        let family = match loss {
            SarcLoss::RidgeLeastSquares => LossFamily::RidgeLeastSquares,
            SarcLoss::Logistic => LossFamily::RegLogistic,
            SarcLoss::NonconvexSvm => LossFamily::NonconvexSvm,
        };
        let ridge = match ridge {
            SarcRidge::Full => RidgeForm::Full,
            SarcRidge::Half => RidgeForm::Half,
        };
        let model = LossModel::new(family, Arc::clone(&ds.inner), lambda)?.with_ridge_form(ridge);
        *out = Box::into_raw(Box::new(SarcModel { inner: model }));
        Ok(())
    })
}

/// # Safety
/// `model` must come from this library; outputs may be `NULL`.
#[no_mangle]
pub unsafe extern "C" fn sarc_model_dims(model: *const SarcModel, n: *mut usize, d: *mut usize) -> SarcStatus {
    guard(|| {
        let m = borrow(model, "model")?;
        if let Some(n) = n.as_mut() {
            *n = m.inner.n();
        }
        if let Some(d) = d.as_mut() {
            *d = m.inner.d();
        }
        Ok(())
    })
}

/// `f(x)`; `len` must equal the model dimension.
///
/// # Safety
/// `x` must point to `len` doubles and `value` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sarc_model_value(
    model: *const SarcModel,
    x: *const f64,
    len: usize,
    value: *mut f64,
) -> SarcStatus {
    guard(|| {
        let m = borrow(model, "model")?;
        let x = slice(x, len, "x")?;
        let value = writable(value, "value")?;
        *value = m.inner.full_value(x)?;
        Ok(())
    })
}

/// `∇f(x)` into `grad` (both of length `len`); `value` receives `f(x)`
/// unless it is `NULL`.
///
/// # Safety
/// `x` and `grad` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn sarc_model_gradient(
    model: *const SarcModel,
    x: *const f64,
    len: usize,
    grad: *mut f64,
    value: *mut f64,
) -> SarcStatus {
    guard(|| {
        let m = borrow(model, "model")?;
        let x = slice(x, len, "x")?;
        let grad = slice_mut(grad, len, "grad")?;
        let (f, g) = m.inner.value_and_gradient(x)?;
        grad.copy_from_slice(&g);
        if let Some(v) = value.as_mut() {
            *v = f;
        }
        Ok(())
    })
}

/// # Safety
/// `model` must come from this library or be `NULL`.
#[no_mangle]
pub unsafe extern "C" fn sarc_model_free(model: *mut SarcModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Library defaults with the SARC algorithm and uniform sampling.
///
/// # Safety
/// `config` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sarc_config_default(config: *mut SarcConfig) -> SarcStatus {
    guard(|| {
        let config = writable(config, "config")?;
        let s = SolverConfig::default();
        let fo = FirstOrderConfig::default();
        *config = SarcConfig {
            algorithm: SarcAlgorithm::Sarc,
            scheme: SarcScheme::Uniform,
            gamma1: s.gamma1,
            gamma2: s.gamma2,
            gamma3: s.gamma3,
            eta: s.eta,
            sigma_min: s.sigma_min,
            sigma0: s.sigma0,
            kappa_theta: s.kappa_theta,
            eps: s.eps,
            delta: s.delta,
            max_iters: s.max_iters,
            grad_tol: s.grad_tol,
            batch_size: fo.batch_size,
            lbfgs_memory: fo.lbfgs_memory,
            seed: 0,
            x0_std: 1.0,
        };
        Ok(())
    })
}

fn algorithm(a: SarcAlgorithm) -> Algorithm {
    match a {
        SarcAlgorithm::Sarc => Algorithm::Sarc,
        SarcAlgorithm::Saarc => Algorithm::Saarc,
        SarcAlgorithm::Sacr => Algorithm::Sacr,
        SarcAlgorithm::Cr => Algorithm::Cr,
        SarcAlgorithm::Acr => Algorithm::Acr,
        SarcAlgorithm::Agd => Algorithm::Agd,
        SarcAlgorithm::Sgd => Algorithm::Sgd,
        SarcAlgorithm::Lbfgs => Algorithm::Lbfgs,
    }
}

fn configs(c: &SarcConfig) -> (SolverConfig, FirstOrderConfig) {
    let scheme = match c.scheme {
        SarcScheme::Uniform => SamplingScheme::Uniform,
        SarcScheme::Nonuniform => SamplingScheme::Nonuniform,
    };
    let solver = SolverConfig {
        gamma1: c.gamma1,
        gamma2: c.gamma2,
        gamma3: c.gamma3,
        eta: c.eta,
        sigma_min: c.sigma_min,
        sigma0: c.sigma0,
        kappa_theta: c.kappa_theta,
        eps: c.eps,
        delta: c.delta,
        hessian: HessianMode::Subsampled(scheme),
        max_iters: c.max_iters,
        grad_tol: c.grad_tol,
        seed: c.seed,
        ..SolverConfig::default()
    };
    let first_order = FirstOrderConfig {
        max_iters: c.max_iters,
        grad_tol: c.grad_tol,
        batch_size: c.batch_size,
        lbfgs_memory: c.lbfgs_memory,
        seed: c.seed,
        ..FirstOrderConfig::default()
    };
    (solver, first_order)
}

/// Runs the configured algorithm from `x0` (length `len`), or from a
/// Gaussian point drawn with `config->x0_std` and `config->seed` when `x0`
/// is `NULL`.
///
/// # Safety
/// `model`, `config` and `out` must be valid; `x0` is `NULL` or points to
/// `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn sarc_run(
    model: *const SarcModel,
    config: *const SarcConfig,
    x0: *const f64,
    len: usize,
    out: *mut *mut SarcRun,
) -> SarcStatus {
    guard(|| {
        let m = borrow(model, "model")?;
        let c = borrow(config, "config")?;
        let out = writable(out, "out")?;
        let x0 = if x0.is_null() {
            initial_point(m.inner.d(), c.x0_std, c.seed)?
        } else {
            check_len(m.inner.d(), len)?;
            slice(x0, len, "x0")?.to_vec()
        };
        let (solver, first_order) = configs(c);
        let result = run_configured(algorithm(c.algorithm), &solver, &first_order, c.seed, &m.inner, &x0)?;
        *out = Box::into_raw(Box::new(SarcRun { inner: result }));
        Ok(())
    })
}

/// # Safety
/// `run` and `summary` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn sarc_run_summary(run: *const SarcRun, summary: *mut SarcSummary) -> SarcStatus {
    guard(|| {
        let r = &borrow(run, "run")?.inner;
        let summary = writable(summary, "summary")?;
        *summary = SarcSummary {
            status: match r.status {
                RunStatus::Converged => SarcRunStatus::Converged,
                RunStatus::Stationary => SarcRunStatus::Stationary,
                RunStatus::MaxIters => SarcRunStatus::MaxIters,
                RunStatus::Diverged => SarcRunStatus::Diverged,
            },
            iterations: r.counters.iterations,
            successes: r.counters.successes,
            epochs: r.ledger.epochs(),
            f: r.f,
            grad_norm: r.grad_norm,
            records: r.trace.records.len(),
            d: r.x.len(),
        };
        Ok(())
    })
}

/// Trace row `index` (`0 ≤ index < summary.records`).
///
/// # Safety
/// `run` and `record` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn sarc_run_record(run: *const SarcRun, index: usize, record: *mut SarcRecord) -> SarcStatus {
    guard(|| {
        let r = &borrow(run, "run")?.inner;
        let record = writable(record, "record")?;
        let n = r.trace.records.len();
        let t = r
            .trace
            .records
            .get(index)
            .ok_or(Error::IndexOutOfRange { index, n })?;
        *record = SarcRecord {
            iter: t.iter,
            epochs: t.epochs,
            f: t.f,
            grad_norm: t.grad_norm,
            sigma: t.sigma,
            eps_i: t.eps_i,
            sample_size: t.sample_size,
            success: t.success,
            phase: match t.phase {
                Phase::Sarc => SarcPhase::Sarc,
                Phase::Phase1 => SarcPhase::Phase1,
                Phase::Phase2 => SarcPhase::Phase2,
                Phase::FirstOrder => SarcPhase::FirstOrder,
            },
        };
        Ok(())
    })
}

/// Final iterate into `x` (length `len`, equal to the model dimension).
///
/// # Safety
/// `x` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn sarc_run_solution(run: *const SarcRun, x: *mut f64, len: usize) -> SarcStatus {
    guard(|| {
        let r = &borrow(run, "run")?.inner;
        check_len(r.x.len(), len)?;
        slice_mut(x, len, "x")?.copy_from_slice(&r.x);
        Ok(())
    })
}

/// Writes the trace as CSV, creating parent directories.
///
/// # Safety
/// `path` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn sarc_run_write_csv(run: *const SarcRun, path: *const c_char) -> SarcStatus {
    guard(|| {
        let r = &borrow(run, "run")?.inner;
        write_trace(r, path_arg(path)?)?;
        Ok(())
    })
}

/// # Safety
/// `run` must come from this library or be `NULL`.
#[no_mangle]
pub unsafe extern "C" fn sarc_run_free(run: *mut SarcRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}
