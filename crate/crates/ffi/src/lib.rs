//! C ABI for the mixture moment-matching library.
//!
//! Handles are opaque pointers owned by the library; every constructor has a
//! matching `_free`, every fallible call returns a [`MomgmmStatus`], and all
//! array arguments are column-major `f64` buffers (columns are component
//! means or observations). Panics are caught at the boundary and reported as
//! `MOMGMM_STATUS_INTERNAL_PANIC`.

use std::panic::{catch_unwind, AssertUnwindSafe};

use ndarray::{Array1, Array2};

use momgmm::augment::Variant;
use momgmm::em::{em_fit, log_likelihood, EmConfig};
use momgmm::estimator::{fit, FitConfig, FitMode};
use momgmm::moments::{objective, Covariance, GmmParams};
use momgmm::sampling::{make_benchmark, sample_gmm, SampleMatrix};
use momgmm::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomgmmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ShapeMismatch = 3,
    NumericalError = 4,
    Unsupported = 5,
    InternalPanic = 6,
}

fn status_of(err: &Error) -> MomgmmStatus {
    match err {
        Error::ShapeMismatch(_) => MomgmmStatus::ShapeMismatch,
        Error::InvalidArgument(_)
        | Error::InvalidWeights(_)
        | Error::EmptySamples
        | Error::AlreadyAugmented
        | Error::OrderOverflow(_)
        | Error::OracleScaleExceeded(_) => MomgmmStatus::InvalidArgument,
        Error::NonFiniteObjective
        | Error::AllRestartsDiverged(_)
        | Error::NotPositiveSemidefinite(_)
        | Error::DegenerateAugmentedCoordinate { .. } => MomgmmStatus::NumericalError,
        Error::Io(_) | Error::Parse(_) => MomgmmStatus::Unsupported,
    }
}

/// Static description of a status code.
#[no_mangle]
pub extern "C" fn momgmm_status_message(status: MomgmmStatus) -> *const libc::c_char {
    let msg: &'static [u8] = match status {
        MomgmmStatus::Ok => b"ok\0",
        MomgmmStatus::NullPointer => b"null pointer argument\0",
        MomgmmStatus::InvalidArgument => b"invalid argument\0",
        MomgmmStatus::ShapeMismatch => b"shape mismatch\0",
        MomgmmStatus::NumericalError => b"numerical failure\0",
        MomgmmStatus::Unsupported => b"unsupported operation\0",
        MomgmmStatus::InternalPanic => b"internal panic\0",
    };
    msg.as_ptr() as *const libc::c_char
}

/// Opaque mixture model handle.
pub struct MomgmmModel {
    inner: GmmParams,
}

/// Opaque sample matrix handle.
pub struct MomgmmSamples {
    inner: SampleMatrix,
}

fn guarded<F: FnOnce() -> MomgmmStatus>(f: F) -> MomgmmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => MomgmmStatus::InternalPanic,
    }
}

unsafe fn slice<'a>(ptr: *const f64, len: usize) -> Option<&'a [f64]> {
    if ptr.is_null() && len > 0 {
        None
    } else {
        Some(std::slice::from_raw_parts(ptr, len))
    }
}

/// Column-major buffer -> n x m array.
fn matrix_from_col_major(n: usize, m: usize, data: &[f64]) -> Array2<f64> {
    Array2::from_shape_fn((n, m), |(r, c)| data[c * n + r])
}

fn matrix_to_col_major(mat: &Array2<f64>, out: &mut [f64]) {
    let (n, m) = mat.dim();
    for c in 0..m {
        for r in 0..n {
            out[c * n + r] = mat[[r, c]];
        }
    }
}

/// Builds a diagonal-covariance mixture from `m` weights, column-major
/// `n x m` means and column-major `n x m` stddevs.
///
/// # Safety
/// Buffers must hold the stated number of elements; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn momgmm_model_new_diagonal(
    n: usize,
    m: usize,
    weights: *const f64,
    means: *const f64,
    stddevs: *const f64,
    out: *mut *mut MomgmmModel,
) -> MomgmmStatus {
    guarded(|| {
        if out.is_null() {
            return MomgmmStatus::NullPointer;
        }
        let (Some(w), Some(a), Some(s)) =
            (slice(weights, m), slice(means, n * m), slice(stddevs, n * m))
        else {
            return MomgmmStatus::NullPointer;
        };
        match GmmParams::new_diagonal(
            Array1::from_vec(w.to_vec()),
            matrix_from_col_major(n, m, a),
            matrix_from_col_major(n, m, s),
        ) {
            Ok(params) => {
                *out = Box::into_raw(Box::new(MomgmmModel { inner: params }));
                MomgmmStatus::Ok
            }
            Err(e) => status_of(&e),
        }
    })
}

/// Releases a model handle. Null is ignored.
///
/// # Safety
/// `model` must have come from this library and not already be freed.
#[no_mangle]
pub unsafe extern "C" fn momgmm_model_free(model: *mut MomgmmModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Writes the model's dimension and component count.
///
/// # Safety
/// `model`, `n` and `m` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn momgmm_model_dims(
    model: *const MomgmmModel,
    n: *mut usize,
    m: *mut usize,
) -> MomgmmStatus {
    guarded(|| {
        if model.is_null() || n.is_null() || m.is_null() {
            return MomgmmStatus::NullPointer;
        }
        let params = &(*model).inner;
        *n = params.dim();
        *m = params.num_components();
        MomgmmStatus::Ok
    })
}

/// Copies the `m` mixture weights into `out`.
///
/// # Safety
/// `out` must hold `m` doubles.
#[no_mangle]
pub unsafe extern "C" fn momgmm_model_weights(
    model: *const MomgmmModel,
    out: *mut f64,
) -> MomgmmStatus {
    guarded(|| {
        if model.is_null() || out.is_null() {
            return MomgmmStatus::NullPointer;
        }
        let params = &(*model).inner;
        let dst = std::slice::from_raw_parts_mut(out, params.num_components());
        for (d, &w) in dst.iter_mut().zip(params.weights().iter()) {
            *d = w;
        }
        MomgmmStatus::Ok
    })
}

/// Copies the column-major `n x m` mean matrix into `out`.
///
/// # Safety
/// `out` must hold `n * m` doubles.
#[no_mangle]
pub unsafe extern "C" fn momgmm_model_means(
    model: *const MomgmmModel,
    out: *mut f64,
) -> MomgmmStatus {
    guarded(|| {
        if model.is_null() || out.is_null() {
            return MomgmmStatus::NullPointer;
        }
        let params = &(*model).inner;
        let dst =
            std::slice::from_raw_parts_mut(out, params.dim() * params.num_components());
        matrix_to_col_major(params.means(), dst);
        MomgmmStatus::Ok
    })
}

/// Copies the column-major `n x m` stddev matrix into `out`. Fails with
/// `UNSUPPORTED` when the model carries full covariances.
///
/// # Safety
/// `out` must hold `n * m` doubles.
#[no_mangle]
pub unsafe extern "C" fn momgmm_model_stddevs(
    model: *const MomgmmModel,
    out: *mut f64,
) -> MomgmmStatus {
    guarded(|| {
        if model.is_null() || out.is_null() {
            return MomgmmStatus::NullPointer;
        }
        let params = &(*model).inner;
        match params.covariance() {
            Covariance::Diagonal(stddevs) => {
                let dst = std::slice::from_raw_parts_mut(
                    out,
                    params.dim() * params.num_components(),
                );
                matrix_to_col_major(stddevs, dst);
                MomgmmStatus::Ok
            }
            Covariance::Full(_) => MomgmmStatus::Unsupported,
        }
    })
}

/// Wraps a column-major `n x p` observation buffer.
///
/// # Safety
/// `data` must hold `n * p` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn momgmm_samples_new(
    n: usize,
    p: usize,
    data: *const f64,
    out: *mut *mut MomgmmSamples,
) -> MomgmmStatus {
    guarded(|| {
        if out.is_null() {
            return MomgmmStatus::NullPointer;
        }
        let Some(buf) = slice(data, n * p) else {
            return MomgmmStatus::NullPointer;
        };
        match SampleMatrix::new(matrix_from_col_major(n, p, buf)) {
            Ok(samples) => {
                *out = Box::into_raw(Box::new(MomgmmSamples { inner: samples }));
                MomgmmStatus::Ok
            }
            Err(e) => status_of(&e),
        }
    })
}

/// Releases a sample handle. Null is ignored.
///
/// # Safety
/// `samples` must have come from this library and not already be freed.
#[no_mangle]
pub unsafe extern "C" fn momgmm_samples_free(samples: *mut MomgmmSamples) {
    if !samples.is_null() {
        drop(Box::from_raw(samples));
    }
}

/// Writes the sample dimensions.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn momgmm_samples_dims(
    samples: *const MomgmmSamples,
    n: *mut usize,
    p: *mut usize,
) -> MomgmmStatus {
    guarded(|| {
        if samples.is_null() || n.is_null() || p.is_null() {
            return MomgmmStatus::NullPointer;
        }
        *n = (*samples).inner.dim();
        *p = (*samples).inner.num_samples();
        MomgmmStatus::Ok
    })
}

/// Copies the column-major `n x p` observations into `out`.
///
/// # Safety
/// `out` must hold `n * p` doubles.
#[no_mangle]
pub unsafe extern "C" fn momgmm_samples_data(
    samples: *const MomgmmSamples,
    out: *mut f64,
) -> MomgmmStatus {
    guarded(|| {
        if samples.is_null() || out.is_null() {
            return MomgmmStatus::NullPointer;
        }
        let x = &(*samples).inner;
        let dst = std::slice::from_raw_parts_mut(out, x.dim() * x.num_samples());
        matrix_to_col_major(x.data(), dst);
        MomgmmStatus::Ok
    })
}

/// Draws `p` observations from the model with the given seed.
///
/// # Safety
/// `model` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn momgmm_sample(
    model: *const MomgmmModel,
    p: usize,
    seed: u64,
    out: *mut *mut MomgmmSamples,
) -> MomgmmStatus {
    guarded(|| {
        if model.is_null() || out.is_null() {
            return MomgmmStatus::NullPointer;
        }
        match sample_gmm(&(*model).inner, p, seed) {
            Ok(samples) => {
                *out = Box::into_raw(Box::new(MomgmmSamples { inner: samples }));
                MomgmmStatus::Ok
            }
            Err(e) => status_of(&e),
        }
    })
}

/// Generates the structured benchmark problem (unit-norm means with pairwise
/// inner products 0.5, diagonal covariances with variances uniform on
/// [0, 2 sigma2]) and draws `p` observations from it.
///
/// # Safety
/// `truth` and `samples` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn momgmm_benchmark(
    n: usize,
    m: usize,
    sigma2: f64,
    p: usize,
    seed: u64,
    truth: *mut *mut MomgmmModel,
    samples: *mut *mut MomgmmSamples,
) -> MomgmmStatus {
    guarded(|| {
        if truth.is_null() || samples.is_null() {
            return MomgmmStatus::NullPointer;
        }
        match make_benchmark(n, m, sigma2, p, seed) {
            Ok((model, x)) => {
                *truth = Box::into_raw(Box::new(MomgmmModel { inner: model }));
                *samples = Box::into_raw(Box::new(MomgmmSamples { inner: x }));
                MomgmmStatus::Ok
            }
            Err(e) => status_of(&e),
        }
    })
}

/// Evaluates the order-`d` moment-matching objective of the model against
/// the samples. With `include_constant` nonzero the value is the true
/// squared moment distance.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn momgmm_objective(
    model: *const MomgmmModel,
    samples: *const MomgmmSamples,
    d: usize,
    include_constant: i32,
    value: *mut f64,
) -> MomgmmStatus {
    guarded(|| {
        if model.is_null() || samples.is_null() || value.is_null() {
            return MomgmmStatus::NullPointer;
        }
        match objective(&(*model).inner, &(*samples).inner, d, include_constant != 0) {
            Ok(eval) => {
                *value = eval.value;
                MomgmmStatus::Ok
            }
            Err(e) => status_of(&e),
        }
    })
}

/// Options for [`momgmm_fit_moments`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct MomgmmFitOptions {
    /// Moment order, 1..=18.
    pub d: usize,
    pub restarts: usize,
    pub max_iters: usize,
    pub grad_tol: f64,
    /// Augmentation constant, > 0.
    pub omega: f64,
    /// 0 = implicit augmentation, 1 = relaxed coordinates with rescaling.
    pub post_processing: i32,
    pub seed: u64,
}

/// The defaults used by the command-line fitter.
#[no_mangle]
pub extern "C" fn momgmm_fit_options_default() -> MomgmmFitOptions {
    let config = FitConfig::moments(3);
    MomgmmFitOptions {
        d: config.d,
        restarts: config.restarts,
        max_iters: config.max_iters,
        grad_tol: config.grad_tol,
        omega: config.omega,
        post_processing: 1,
        seed: config.seed,
    }
}

/// Multi-restart moment-matching fit of an `m`-component diagonal mixture.
/// On success `fitted` owns the recovered model and `best_objective` holds
/// the winning restart's final objective.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn momgmm_fit_moments(
    samples: *const MomgmmSamples,
    m: usize,
    options: *const MomgmmFitOptions,
    fitted: *mut *mut MomgmmModel,
    best_objective: *mut f64,
) -> MomgmmStatus {
    guarded(|| {
        if samples.is_null() || options.is_null() || fitted.is_null() {
            return MomgmmStatus::NullPointer;
        }
        let opts = &*options;
        let config = FitConfig {
            d: opts.d,
            restarts: opts.restarts,
            max_iters: opts.max_iters,
            grad_tol: opts.grad_tol,
            omega: opts.omega,
            variant: if opts.post_processing != 0 {
                Variant::PostProcessing
            } else {
                Variant::Implicit
            },
            mode: FitMode::Moments,
            seed: opts.seed,
        };
        match fit(&(*samples).inner, m, &config, None) {
            Ok(report) => {
                if !best_objective.is_null() {
                    *best_objective = report.best().objective;
                }
                *fitted = Box::into_raw(Box::new(MomgmmModel { inner: report.best_params }));
                MomgmmStatus::Ok
            }
            Err(e) => status_of(&e),
        }
    })
}

/// Multi-restart diagonal EM fit; `loglik` receives the winning restart's
/// final log-likelihood.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn momgmm_fit_em(
    samples: *const MomgmmSamples,
    m: usize,
    restarts: usize,
    seed: u64,
    fitted: *mut *mut MomgmmModel,
    loglik: *mut f64,
) -> MomgmmStatus {
    guarded(|| {
        if samples.is_null() || fitted.is_null() {
            return MomgmmStatus::NullPointer;
        }
        let config = EmConfig { restarts, seed, ..EmConfig::default() };
        match em_fit(&(*samples).inner, m, &config) {
            Ok(outcome) => {
                if !loglik.is_null() {
                    *loglik = outcome.best().loglik();
                }
                *fitted =
                    Box::into_raw(Box::new(MomgmmModel { inner: outcome.params().clone() }));
                MomgmmStatus::Ok
            }
            Err(e) => status_of(&e),
        }
    })
}

/// Log-likelihood of the samples under a diagonal model.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn momgmm_log_likelihood(
    model: *const MomgmmModel,
    samples: *const MomgmmSamples,
    value: *mut f64,
) -> MomgmmStatus {
    guarded(|| {
        if model.is_null() || samples.is_null() || value.is_null() {
            return MomgmmStatus::NullPointer;
        }
        match log_likelihood(&(*model).inner, &(*samples).inner) {
            Ok(ll) => {
                *value = ll;
                MomgmmStatus::Ok
            }
            Err(e) => status_of(&e),
        }
    })
}
