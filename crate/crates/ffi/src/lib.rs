//! C ABI over the `peripinn` library.
//!
//! Objects cross the boundary as opaque handles created by a `*_new`,
//! `*_load` or `*_generate` function and released by the matching `*_free`.
//! Every fallible function returns a [`PeripinnStatus`]; on failure the
//! message is kept per thread and can be copied out with
//! [`peripinn_last_error_message`]. Panics never unwind into the caller.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use peripinn::autodiff::Jet2;
use peripinn::dataset::{generate, DatasetSpec, FieldDataset, InitialCondition};
use peripinn::error::Error;
use peripinn::kernels::{eval_kernel, KernelSpec};
use peripinn::nn::{Checkpoint, IPinnModel, KernelHeadKind, ModelConfig};
use peripinn::operator::{truncation_halfwidth, Grid, SignConvention};
use peripinn::training::{train, KernelMode, LrSchedule, TrainConfig};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PeripinnStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Divergence = 4,
    Io = 5,
    Parse = 6,
    Panic = 7,
}

/// Reference kernel `C(x)`.
pub struct PeripinnKernel(KernelSpec);

/// Displacement samples on a space-time grid.
pub struct PeripinnDataset(FieldDataset);

/// Two-branch network with its parameters.
pub struct PeripinnModel(IPinnModel);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> PeripinnStatus {
    match e {
        Error::Config(_) => PeripinnStatus::Config,
        Error::Divergence(_) | Error::Autodiff(_) => PeripinnStatus::Divergence,
        Error::Io { .. } => PeripinnStatus::Io,
        Error::Parse { .. } => PeripinnStatus::Parse,
    }
}

enum Failure {
    Null(&'static str),
    Invalid(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> PeripinnStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PeripinnStatus::Ok,
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer passed as {what}"));
            PeripinnStatus::NullPointer
        }
        Ok(Err(Failure::Invalid(msg))) => {
            set_error(msg);
            PeripinnStatus::InvalidArgument
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {msg}"));
            PeripinnStatus::Panic
        }
    }
}

unsafe fn as_ref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn as_mut<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or(Failure::Null(what))
}

unsafe fn write<T>(out: *mut T, value: T, what: &'static str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(Failure::Null("path"));
    }
    let s = CStr::from_ptr(p).to_str().map_err(|_| Failure::Invalid("path is not valid UTF-8".into()))?;
    Ok(PathBuf::from(s))
}

fn boxed<T>(value: T) -> *mut T {
    Box::into_raw(Box::new(value))
}

/// Copies the calling thread's most recent error message into `buf`
/// (NUL-terminated, truncated to `len - 1` bytes) and returns the full
/// message length in bytes. Pass `buf = NULL` to query the length.
///
/// # Safety
/// `buf` must be NULL or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn peripinn_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn peripinn_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Largest stencil offset `m` with `m·h < delta`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn peripinn_truncation_halfwidth(delta: f64, h: f64, out: *mut usize) -> PeripinnStatus {
    guard(|| write(out, truncation_halfwidth(delta, h)?, "out"))
}

/// Learning rate of the quadratic schedule at `epoch` of `n_epochs`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn peripinn_lr_at(alpha0: f64, n_epochs: usize, epoch: usize, out: *mut f64) -> PeripinnStatus {
    guard(|| {
        let s = LrSchedule::new(alpha0, n_epochs);
        s.validate()?;
        if epoch > n_epochs {
            return Err(Failure::Invalid(format!("epoch {epoch} exceeds {n_epochs}")));
        }
        write(out, s.lr_at(epoch), "out")
    })
}

unsafe fn new_kernel(spec: KernelSpec, out: *mut *mut PeripinnKernel) -> PeripinnStatus {
    guard(|| {
        spec.validate()?;
        write(out, boxed(PeripinnKernel(spec)), "out")
    })
}

/// `C(x) = slope·|x|` on `[−delta, delta]`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn peripinn_kernel_v_shape(slope: f64, delta: f64, out: *mut *mut PeripinnKernel) -> PeripinnStatus {
    new_kernel(KernelSpec::VShape { slope, delta }, out)
}

/// Ramps of width `delta` at the ends of `[−half_width, half_width]`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn peripinn_kernel_boundary_v(
    delta: f64,
    half_width: f64,
    out: *mut *mut PeripinnKernel,
) -> PeripinnStatus {
    new_kernel(KernelSpec::BoundaryV { delta, half_width }, out)
}

/// `C(x) = amplitude·exp(−sigma·x²)` sampled on `[−support, support]`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn peripinn_kernel_gaussian(
    amplitude: f64,
    sigma: f64,
    support: f64,
    out: *mut *mut PeripinnKernel,
) -> PeripinnStatus {
    new_kernel(KernelSpec::Gaussian { amplitude, sigma, support }, out)
}

/// # Safety
/// `kernel` must come from a `peripinn_kernel_*` constructor; `out` must be
/// valid.
#[no_mangle]
pub unsafe extern "C" fn peripinn_kernel_eval(kernel: *const PeripinnKernel, x: f64, out: *mut f64) -> PeripinnStatus {
    guard(|| {
        let k = as_ref(kernel, "kernel")?;
        write(out, eval_kernel(&k.0, x), "out")
    })
}

/// # Safety
/// `kernel` must be NULL or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn peripinn_kernel_free(kernel: *mut PeripinnKernel) {
    if !kernel.is_null() {
        drop(Box::from_raw(kernel));
    }
}

/// Solves the forward problem for `kernel` from a Gaussian pulse
/// `amplitude·exp(−(x/width)²)` at rest.
///
/// # Safety
/// `kernel` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn peripinn_dataset_generate(
    kernel: *const PeripinnKernel,
    x_min: f64,
    x_max: f64,
    n_x: usize,
    t_min: f64,
    t_max: f64,
    n_t: usize,
    amplitude: f64,
    width: f64,
    out: *mut *mut PeripinnDataset,
) -> PeripinnStatus {
    guard(|| {
        let k = as_ref(kernel, "kernel")?;
        let spec = DatasetSpec {
            kernel: k.0.clone(),
            grid: Grid::new(x_min, x_max, n_x, t_min, t_max, n_t)?,
            sign: SignConvention::Oscillatory,
            initial_condition: InitialCondition::GaussianPulse { amplitude, width, center: 0.0 },
            seed: 0,
        };
        write(out, boxed(PeripinnDataset(generate(&spec)?)), "out")
    })
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn peripinn_dataset_load(path: *const c_char, out: *mut *mut PeripinnDataset) -> PeripinnStatus {
    guard(|| {
        let p = path_arg(path)?;
        write(out, boxed(PeripinnDataset(FieldDataset::load(&p)?)), "out")
    })
}

/// # Safety
/// `dataset` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn peripinn_dataset_save(dataset: *const PeripinnDataset, path: *const c_char) -> PeripinnStatus {
    guard(|| {
        let d = as_ref(dataset, "dataset")?;
        d.0.save(&path_arg(path)?)?;
        Ok(())
    })
}

/// # Safety
/// `dataset` must be a live handle; the outputs must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn peripinn_dataset_dims(
    dataset: *const PeripinnDataset,
    n_x: *mut usize,
    n_t: *mut usize,
) -> PeripinnStatus {
    guard(|| {
        let g = as_ref(dataset, "dataset")?.0.grid();
        write(n_x, g.n_x, "n_x")?;
        write(n_t, g.n_t, "n_t")
    })
}

/// Copies the `n_x·n_t` samples, time-major, into `buf`.
///
/// # Safety
/// `dataset` must be a live handle and `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn peripinn_dataset_values(
    dataset: *const PeripinnDataset,
    buf: *mut f64,
    len: usize,
) -> PeripinnStatus {
    guard(|| {
        let v = as_ref(dataset, "dataset")?.0.values();
        if buf.is_null() {
            return Err(Failure::Null("buf"));
        }
        if len < v.len() {
            return Err(Failure::Invalid(format!("buffer holds {len} values, need {}", v.len())));
        }
        ptr::copy_nonoverlapping(v.as_ptr(), buf, v.len());
        Ok(())
    })
}

/// # Safety
/// `dataset` must be NULL or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn peripinn_dataset_free(dataset: *mut PeripinnDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Fresh model with default architecture. `parametric != 0` selects the
/// two-parameter Gaussian kernel head.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn peripinn_model_new(
    parametric: i32,
    kernel_support: f64,
    seed: u64,
    out: *mut *mut PeripinnModel,
) -> PeripinnStatus {
    guard(|| {
        let mut cfg = if parametric != 0 { ModelConfig::parametric() } else { ModelConfig::default() };
        cfg.kernel_support = kernel_support;
        write(out, boxed(PeripinnModel(IPinnModel::new(cfg, seed)?)), "out")
    })
}

/// Reads a checkpoint file written by the command-line tool.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn peripinn_model_load(path: *const c_char, out: *mut *mut PeripinnModel) -> PeripinnStatus {
    guard(|| {
        let model = Checkpoint::load(&path_arg(path)?)?.to_model()?;
        write(out, boxed(PeripinnModel(model)), "out")
    })
}

/// # Safety
/// `model` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn peripinn_model_save(model: *const PeripinnModel, path: *const c_char) -> PeripinnStatus {
    guard(|| {
        let m = as_ref(model, "model")?;
        Checkpoint::from_model(&m.0).save(&path_arg(path)?)?;
        Ok(())
    })
}

/// # Safety
/// `model` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn peripinn_model_param_count(model: *const PeripinnModel, out: *mut usize) -> PeripinnStatus {
    guard(|| write(out, as_ref(model, "model")?.0.param_count(), "out"))
}

/// Kernel value `C(x)` of the model.
///
/// # Safety
/// `model` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn peripinn_model_forward_c(model: *const PeripinnModel, x: f64, out: *mut f64) -> PeripinnStatus {
    guard(|| write(out, as_ref(model, "model")?.0.try_forward_c(x)?, "out"))
}

/// `θ(x, t)` with its first and second time derivatives.
///
/// # Safety
/// `model` must be a live handle; the outputs must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn peripinn_model_forward_theta(
    model: *const PeripinnModel,
    x: f64,
    t: f64,
    value: *mut f64,
    d_t: *mut f64,
    d_tt: *mut f64,
) -> PeripinnStatus {
    guard(|| {
        let j = as_ref(model, "model")?.0.try_forward_theta(x, Jet2::seed(t))?;
        write(value, j.v, "value")?;
        write(d_t, j.d1, "d_t")?;
        write(d_tt, j.d2, "d_tt")
    })
}

/// `(γ*, σ*)` of a parametric model; `InvalidArgument` for a network head.
///
/// # Safety
/// `model` must be a live handle; the outputs must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn peripinn_model_parametric_kernel(
    model: *const PeripinnModel,
    gamma_star: *mut f64,
    sigma_star: *mut f64,
) -> PeripinnStatus {
    guard(|| {
        let (g, s) = as_ref(model, "model")?
            .0
            .parametric_kernel()
            .ok_or_else(|| Failure::Invalid("model has a network kernel head".into()))?;
        write(gamma_star, g, "gamma_star")?;
        write(sigma_star, s, "sigma_star")
    })
}

/// Trains `model` in place on `dataset` with default loss settings and
/// writes the total loss of the last epoch to `final_loss` (NaN for zero
/// epochs). `alpha0 <= 0` picks the default rate of the model kind.
///
/// # Safety
/// `model` and `dataset` must be live handles; `final_loss` must be NULL or
/// valid.
#[no_mangle]
pub unsafe extern "C" fn peripinn_model_train(
    model: *mut PeripinnModel,
    dataset: *const PeripinnDataset,
    epochs: usize,
    alpha0: f64,
    batch_rows: usize,
    seed: u64,
    final_loss: *mut f64,
) -> PeripinnStatus {
    guard(|| {
        let m = as_mut(model, "model")?;
        let d = as_ref(dataset, "dataset")?;
        let mut cfg = match m.0.config().kernel_head {
            KernelHeadKind::Network => TrainConfig::default(),
            KernelHeadKind::Parametric => TrainConfig::parametric(),
        };
        cfg.epochs = epochs;
        if alpha0 > 0.0 {
            cfg.alpha0 = alpha0;
        }
        cfg.batch_rows = batch_rows;
        cfg.seed = seed;
        let outcome = train(m.0.clone(), &d.0, KernelMode::Model, &cfg, |_| {})?;
        let last = outcome.report.records.last().map_or(f64::NAN, |r| r.loss.total);
        m.0 = outcome.model;
        if !final_loss.is_null() {
            final_loss.write(last);
        }
        match outcome.diverged {
            Some(e) => Err(e.into()),
            None => Ok(()),
        }
    })
}

/// # Safety
/// `model` must be NULL or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn peripinn_model_free(model: *mut PeripinnModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}
