//! Multi-restart first-order fitting of mixture parameters by moment
//! matching (plain or debiased), with constraints handled by
//! reparameterization: weights through a softmax, diagonal covariances
//! through unconstrained stddev entries, and the augmented constant
//! coordinate either folded into the recurrences (`Implicit`) or relaxed and
//! rescaled afterwards (`PostProcessing`).

mod hungarian;
pub(crate) mod lbfgs;

use std::time::Instant;

use ndarray::{Array1, Array2, ArrayView2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::augment::{postprocess_components, postprocess_solution};
pub use crate::augment::Variant;
use crate::comb::check_order;
use crate::debias::{fdeb1_impl, fdeb2_impl, KnownCov};
use crate::error::{Error, Result};
use crate::linalg::frobenius_norm;
use crate::moments::{f1_diag_impl, f2_diag_impl, CovGrad, GmmParams};
use crate::sampling::SampleMatrix;

use lbfgs::{minimize, MinimizeOptions, SmoothObjective};

/// Restart r draws its starting point from RNG stream `RESTART_STREAM_BASE + r`
/// of the configured seed; the moment fitter and the EM baseline share this so
/// restart r of either method starts from the same observations.
pub(crate) const RESTART_STREAM_BASE: u64 = 1;

/// Which matching problem is optimized.
#[derive(Debug, Clone, PartialEq)]
pub enum FitMode {
    /// Moment matching over weights, means and diagonal covariances.
    Moments,
    /// Rank-one decomposition of the debiased moment; the common covariance
    /// is known and fixed.
    Debias(KnownCov),
}

/// Fitting configuration.
#[derive(Debug, Clone)]
pub struct FitConfig {
    pub d: usize,
    pub restarts: usize,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub omega: f64,
    pub variant: Variant,
    pub mode: FitMode,
    pub seed: u64,
}

impl FitConfig {
    pub fn moments(d: usize) -> Self {
        Self {
            d,
            restarts: 10,
            max_iters: 1000,
            grad_tol: 1e-7,
            omega: 0.5,
            variant: Variant::PostProcessing,
            mode: FitMode::Moments,
            seed: 0,
        }
    }

    pub fn debias(d: usize, sigma: KnownCov) -> Self {
        Self { mode: FitMode::Debias(sigma), ..Self::moments(d) }
    }

    fn validate(&self, x: &SampleMatrix, m: usize) -> Result<()> {
        check_order(self.d)?;
        if self.d == 0 {
            return Err(Error::InvalidArgument("moment order must be >= 1".into()));
        }
        if self.restarts == 0 {
            return Err(Error::InvalidArgument("need at least one restart".into()));
        }
        if !self.omega.is_finite() || self.omega <= 0.0 {
            return Err(Error::InvalidArgument("augmentation constant must be > 0".into()));
        }
        if m == 0 {
            return Err(Error::InvalidArgument("need at least one component".into()));
        }
        if x.num_samples() < m {
            return Err(Error::InvalidArgument(format!(
                "{} samples cannot support {m} components",
                x.num_samples()
            )));
        }
        if x.augmented().is_some() {
            return Err(Error::AlreadyAugmented);
        }
        if let FitMode::Debias(sigma) = &self.mode {
            if sigma.dim() != x.dim() {
                return Err(Error::ShapeMismatch("noise covariance dimension".into()));
            }
        }
        Ok(())
    }
}

/// Matching-based discrepancy metrics against a known generating model.
#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    /// L1 distance between matched weight vectors.
    pub proportion_error: f64,
    /// Average relative L2 error of the matched means.
    pub mean_rel_error: f64,
    /// Average relative Frobenius error of the matched covariances.
    pub cov_rel_error: f64,
    /// Average cosine of the angle between matched means.
    pub cosine_angle: f64,
    /// Set when a zero-norm true mean forced an absolute error instead of a
    /// relative one.
    pub absolute_fallback: bool,
}

/// One optimization restart.
#[derive(Debug, Clone)]
pub struct RestartRecord {
    pub restart: usize,
    /// Final value of the optimized (relaxed, augmented) objective.
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective value at every accepted iterate.
    pub trace: Vec<f64>,
    /// Recovered mixture, post-processed when applicable.
    pub params: GmmParams,
    pub matching: Option<Vec<usize>>,
    pub metrics: Option<Metrics>,
    pub runtime_seconds: f64,
}

/// Outcome of a full multi-restart fit.
#[derive(Debug, Clone)]
pub struct FitReport {
    pub best_params: GmmParams,
    /// Index into `restarts` of the winning record.
    pub best_index: usize,
    pub restarts: Vec<RestartRecord>,
    /// Restarts that produced a non-finite objective or an unusable relaxed
    /// solution, by restart id.
    pub discarded: Vec<usize>,
    pub runtime_seconds: f64,
}

impl FitReport {
    pub fn best(&self) -> &RestartRecord {
        &self.restarts[self.best_index]
    }
}

fn softmax(logits: &[f64]) -> Array1<f64> {
    let max = logits.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let mut out = Array1::from_iter(logits.iter().map(|&l| (l - max).exp()));
    let total = out.sum();
    out /= total;
    out
}

/// Chain rule through the softmax: dF/dlogit_a = lambda_a (g_a - <g, lambda>).
fn softmax_grad(lambda: &Array1<f64>, grad_lambda: &Array1<f64>, out: &mut [f64]) {
    let inner = lambda.dot(grad_lambda);
    for (o, (l, g)) in out.iter_mut().zip(lambda.iter().zip(grad_lambda.iter())) {
        *o = l * (g - inner);
    }
}

fn view2(slice: &[f64], rows: usize, cols: usize) -> ArrayView2<'_, f64> {
    ArrayView2::from_shape((rows, cols), slice).expect("layout fixed by caller")
}

pub(crate) struct MomentsImplicit<'a> {
    pub(crate) x: ArrayView2<'a, f64>,
    pub(crate) n: usize,
    pub(crate) m: usize,
    pub(crate) d: usize,
    pub(crate) omega_sq: f64,
}

impl SmoothObjective for MomentsImplicit<'_> {
    fn dim(&self) -> usize {
        self.m + 2 * self.n * self.m
    }

    fn eval(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let (n, m) = (self.n, self.m);
        let (logits, rest) = x.split_at(m);
        let (a_flat, d_flat) = rest.split_at(n * m);
        let lambda = softmax(logits);
        let a = view2(a_flat, n, m);
        let dv = view2(d_flat, n, m);
        let f1 = f1_diag_impl(&lambda.view(), &a, &dv, self.d, self.omega_sq)
            .expect("validated shapes");
        let f2 = f2_diag_impl(&lambda.view(), &a, &dv, &self.x, self.d, self.omega_sq)
            .expect("validated shapes");
        let combined = f1.combine(-2.0, &f2);
        softmax_grad(&lambda, &combined.grad_weights, &mut grad[..m]);
        grad[m..m + n * m].copy_from_slice(combined.grad_means.as_slice().unwrap());
        let CovGrad::Diagonal(gd) = &combined.grad_cov else { unreachable!() };
        grad[m + n * m..].copy_from_slice(gd.as_slice().unwrap());
        combined.value
    }
}

pub(crate) struct MomentsPostproc<'a> {
    pub(crate) x_aug: ArrayView2<'a, f64>,
    pub(crate) weights: Array1<f64>,
    pub(crate) n: usize,
    pub(crate) m: usize,
    pub(crate) d: usize,
}

impl SmoothObjective for MomentsPostproc<'_> {
    fn dim(&self) -> usize {
        (self.n + 1) * self.m + self.n * self.m
    }

    fn eval(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let (n, m) = (self.n, self.m);
        let (abar_flat, dtop_flat) = x.split_at((n + 1) * m);
        let abar = view2(abar_flat, n + 1, m);
        // The augmented stddev row is pinned at zero.
        let mut dbar = Array2::<f64>::zeros((n + 1, m));
        dbar.slice_mut(ndarray::s![..n, ..]).assign(&view2(dtop_flat, n, m));
        let f1 = f1_diag_impl(&self.weights.view(), &abar, &dbar.view(), self.d, 0.0)
            .expect("validated shapes");
        let f2 = f2_diag_impl(&self.weights.view(), &abar, &dbar.view(), &self.x_aug, self.d, 0.0)
            .expect("validated shapes");
        let combined = f1.combine(-2.0, &f2);
        grad[..(n + 1) * m].copy_from_slice(combined.grad_means.as_slice().unwrap());
        let CovGrad::Diagonal(gd) = &combined.grad_cov else { unreachable!() };
        grad[(n + 1) * m..]
            .copy_from_slice(gd.slice(ndarray::s![..n, ..]).to_owned().as_slice().unwrap());
        combined.value
    }
}

pub(crate) struct DebiasImplicit<'a> {
    pub(crate) x: ArrayView2<'a, f64>,
    pub(crate) sigma: &'a KnownCov,
    pub(crate) n: usize,
    pub(crate) m: usize,
    pub(crate) d: usize,
    pub(crate) omega_sq: f64,
}

impl SmoothObjective for DebiasImplicit<'_> {
    fn dim(&self) -> usize {
        self.m + self.n * self.m
    }

    fn eval(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let (n, m) = (self.n, self.m);
        let (logits, a_flat) = x.split_at(m);
        let lambda = softmax(logits);
        let a = view2(a_flat, n, m);
        let f1 = fdeb1_impl(&lambda.view(), &a, self.d, self.omega_sq).expect("validated shapes");
        let f2 = fdeb2_impl(&lambda.view(), &a, self.sigma, &self.x, self.d, self.omega_sq)
            .expect("validated shapes");
        let combined = f1.combine(-2.0, &f2);
        softmax_grad(&lambda, &combined.grad_weights, &mut grad[..m]);
        grad[m..].copy_from_slice(combined.grad_means.as_slice().unwrap());
        combined.value
    }
}

pub(crate) struct DebiasPostproc<'a> {
    pub(crate) x_aug: ArrayView2<'a, f64>,
    pub(crate) sigma_aug: KnownCov,
    pub(crate) weights: Array1<f64>,
    pub(crate) n: usize,
    pub(crate) m: usize,
    pub(crate) d: usize,
}

impl SmoothObjective for DebiasPostproc<'_> {
    fn dim(&self) -> usize {
        (self.n + 1) * self.m
    }

    fn eval(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let (n, m) = (self.n, self.m);
        let abar = view2(x, n + 1, m);
        let f1 = fdeb1_impl(&self.weights.view(), &abar, self.d, 0.0).expect("validated shapes");
        let f2 = fdeb2_impl(&self.weights.view(), &abar, &self.sigma_aug, &self.x_aug, self.d, 0.0)
            .expect("validated shapes");
        let combined = f1.combine(-2.0, &f2);
        grad.copy_from_slice(combined.grad_means.as_slice().unwrap());
        combined.value
    }
}

/// Sample-based initialization shared by the moment fitter and the EM
/// baseline: means are distinct observations plus jitter at 10% of the
/// per-coordinate spread, stddevs start at the per-coordinate spread.
pub(crate) fn init_from_samples(
    data: &ArrayView2<f64>,
    m: usize,
    rng: &mut ChaCha8Rng,
) -> (Array2<f64>, Array1<f64>) {
    let (n, p) = data.dim();
    let mean = data.sum_axis(ndarray::Axis(1)) / p as f64;
    let mut var = Array1::<f64>::zeros(n);
    for col in data.columns() {
        let dev = &col - &mean;
        var += &(&dev * &dev);
    }
    var /= p as f64;
    let stddev = var.mapv(f64::sqrt);

    let picks = rand::seq::index::sample(rng, p, m);
    let mut means = Array2::<f64>::zeros((n, m));
    for (j, idx) in picks.iter().enumerate() {
        let jitter = Array1::from_iter((0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let col = &data.column(idx) + &(0.1 * &stddev * &jitter);
        means.column_mut(j).assign(&col);
    }
    (means, stddev)
}

fn pad_sigma(sigma: &KnownCov) -> KnownCov {
    match sigma {
        KnownCov::Diagonal(d) => {
            let mut padded = Array1::<f64>::zeros(d.len() + 1);
            padded.slice_mut(ndarray::s![..d.len()]).assign(d);
            KnownCov::Diagonal(padded)
        }
        KnownCov::Full(s) => {
            let n = s.nrows();
            let mut padded = Array2::<f64>::zeros((n + 1, n + 1));
            padded.slice_mut(ndarray::s![..n, ..n]).assign(s);
            KnownCov::Full(padded)
        }
    }
}

fn broadcast_cols(v: &Array1<f64>, m: usize) -> Array2<f64> {
    let mut out = Array2::<f64>::zeros((v.len(), m));
    for mut col in out.columns_mut() {
        col.assign(v);
    }
    out
}

fn run_restart(
    restart: usize,
    x: &SampleMatrix,
    x_aug: &SampleMatrix,
    m: usize,
    config: &FitConfig,
    truth: Option<&GmmParams>,
) -> Result<RestartRecord> {
    let start = Instant::now();
    let n = x.dim();
    let d = config.d;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(RESTART_STREAM_BASE + restart as u64);
    let opts = MinimizeOptions {
        max_iters: config.max_iters,
        grad_tol: config.grad_tol,
        history: 10,
    };

    let (result, params) = match (&config.mode, config.variant) {
        (FitMode::Moments, Variant::Implicit) => {
            let (means, stddev) = init_from_samples(&x.data().view(), m, &mut rng);
            let mut x0 = vec![0.0; m];
            x0.extend(means.as_slice().unwrap());
            x0.extend(broadcast_cols(&stddev, m).as_slice().unwrap());
            let problem = MomentsImplicit {
                x: x.data().view(),
                n,
                m,
                d,
                omega_sq: config.omega * config.omega,
            };
            let res = minimize(&problem, &x0, &opts)?;
            let (logits, rest) = res.x.split_at(m);
            let (a_flat, d_flat) = rest.split_at(n * m);
            let params = GmmParams::new_diagonal(
                softmax(logits),
                view2(a_flat, n, m).to_owned(),
                view2(d_flat, n, m).mapv(f64::abs),
            )?;
            (res, params)
        }
        (FitMode::Moments, Variant::PostProcessing) => {
            let (means, stddev) = init_from_samples(&x_aug.data().view(), m, &mut rng);
            let mut x0 = Vec::with_capacity((2 * n + 1) * m);
            x0.extend(means.as_slice().unwrap());
            let dtop = broadcast_cols(&stddev.slice(ndarray::s![..n]).to_owned(), m);
            x0.extend(dtop.as_slice().unwrap());
            let weights = Array1::from_elem(m, 1.0 / m as f64);
            let problem = MomentsPostproc {
                x_aug: x_aug.data().view(),
                weights: weights.clone(),
                n,
                m,
                d,
            };
            let res = minimize(&problem, &x0, &opts)?;
            let (abar_flat, dtop_flat) = res.x.split_at((n + 1) * m);
            let mut dbar = Array2::<f64>::zeros((n + 1, m));
            dbar.slice_mut(ndarray::s![..n, ..])
                .assign(&view2(dtop_flat, n, m).mapv(f64::abs));
            let relaxed =
                GmmParams::new_diagonal(weights, view2(abar_flat, n + 1, m).to_owned(), dbar)?;
            let params = postprocess_solution(&relaxed, config.omega, d)?;
            (res, params)
        }
        (FitMode::Debias(sigma), Variant::Implicit) => {
            let (means, _) = init_from_samples(&x.data().view(), m, &mut rng);
            let mut x0 = vec![0.0; m];
            x0.extend(means.as_slice().unwrap());
            let problem = DebiasImplicit {
                x: x.data().view(),
                sigma,
                n,
                m,
                d,
                omega_sq: config.omega * config.omega,
            };
            let res = minimize(&problem, &x0, &opts)?;
            let (logits, a_flat) = res.x.split_at(m);
            let params =
                attach_known_cov(softmax(logits), view2(a_flat, n, m).to_owned(), sigma)?;
            (res, params)
        }
        (FitMode::Debias(sigma), Variant::PostProcessing) => {
            let (means, _) = init_from_samples(&x_aug.data().view(), m, &mut rng);
            let weights = Array1::from_elem(m, 1.0 / m as f64);
            let problem = DebiasPostproc {
                x_aug: x_aug.data().view(),
                sigma_aug: pad_sigma(sigma),
                weights: weights.clone(),
                n,
                m,
                d,
            };
            let res = minimize(&problem, means.as_slice().unwrap(), &opts)?;
            let abar = view2(&res.x, n + 1, m).to_owned();
            let (new_weights, new_means, _) =
                postprocess_components(&weights, &abar, config.omega, d)?;
            let params = attach_known_cov(new_weights, new_means, sigma)?;
            (res, params)
        }
    };

    let (matching, met) = match truth {
        Some(t) => {
            let (perm, _) = match_components(&params.means().view(), &t.means().view())?;
            let m = metrics(&params, t, &perm)?;
            (Some(perm), Some(m))
        }
        None => (None, None),
    };

    Ok(RestartRecord {
        restart,
        objective: result.value,
        iterations: result.iterations,
        converged: result.converged,
        trace: result.trace,
        params,
        matching,
        metrics: met,
        runtime_seconds: start.elapsed().as_secs_f64(),
    })
}

fn attach_known_cov(
    weights: Array1<f64>,
    means: Array2<f64>,
    sigma: &KnownCov,
) -> Result<GmmParams> {
    let m = means.ncols();
    match sigma {
        KnownCov::Diagonal(dv) => GmmParams::new_diagonal(weights, means, broadcast_cols(dv, m)),
        KnownCov::Full(s) => GmmParams::new_full(weights, means, vec![s.clone(); m]),
    }
}

/// Fits an `m`-component mixture to the samples with multiple independently
/// seeded restarts, returning every usable restart and the lowest-objective
/// solution. Restarts that diverge to a non-finite objective or cannot be
/// post-processed are discarded; if all of them are, the fit fails.
pub fn fit(
    x: &SampleMatrix,
    m: usize,
    config: &FitConfig,
    truth: Option<&GmmParams>,
) -> Result<FitReport> {
    let start = Instant::now();
    config.validate(x, m)?;
    let x_aug = x.augment(config.omega)?;

    let outcomes: Vec<Result<RestartRecord>> = (0..config.restarts)
        .into_par_iter()
        .map(|r| run_restart(r, x, &x_aug, m, config, truth))
        .collect();

    let mut records = Vec::new();
    let mut discarded = Vec::new();
    for (r, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(rec) => records.push(rec),
            Err(
                Error::NonFiniteObjective
                | Error::DegenerateAugmentedCoordinate { .. }
                | Error::InvalidWeights(_),
            ) => discarded.push(r),
            Err(e) => return Err(e),
        }
    }
    if records.is_empty() {
        return Err(Error::AllRestartsDiverged(config.restarts));
    }
    let mut best_index = 0;
    for (i, rec) in records.iter().enumerate() {
        if rec.objective < records[best_index].objective {
            best_index = i;
        }
    }
    Ok(FitReport {
        best_params: records[best_index].params.clone(),
        best_index,
        restarts: records,
        discarded,
        runtime_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Exact minimum-cost matching of estimated to true components under the
/// Euclidean mean distance. Returns `(assignment, cost)` with
/// `assignment[estimated] = true index`.
pub fn match_components(
    estimated: &ArrayView2<f64>,
    truth: &ArrayView2<f64>,
) -> Result<(Vec<usize>, f64)> {
    if estimated.dim() != truth.dim() {
        return Err(Error::ShapeMismatch("mean matrices differ in shape".into()));
    }
    let m = estimated.ncols();
    if m > 64 {
        return Err(Error::InvalidArgument("matching supports at most 64 components".into()));
    }
    let cost = Array2::from_shape_fn((m, m), |(i, j)| {
        let diff = &estimated.column(i) - &truth.column(j);
        diff.dot(&diff).sqrt()
    });
    Ok(hungarian::min_cost_assignment(&cost.view()))
}

/// Matching-based error metrics; `matching[j]` is the true component paired
/// with estimated component `j`.
pub fn metrics(estimated: &GmmParams, truth: &GmmParams, matching: &[usize]) -> Result<Metrics> {
    let m = estimated.num_components();
    if truth.num_components() != m || matching.len() != m {
        return Err(Error::ShapeMismatch("component counts differ".into()));
    }
    if estimated.dim() != truth.dim() {
        return Err(Error::ShapeMismatch("dimensions differ".into()));
    }
    let mut proportion_error = 0.0;
    let mut mean_rel = 0.0;
    let mut cov_rel = 0.0;
    let mut cosine = 0.0;
    let mut absolute_fallback = false;
    for j in 0..m {
        let t = matching[j];
        proportion_error += (estimated.weights()[j] - truth.weights()[t]).abs();
        let est_mu = estimated.means().column(j);
        let true_mu = truth.means().column(t);
        let diff = &est_mu - &true_mu;
        let err = diff.dot(&diff).sqrt();
        let true_norm = true_mu.dot(&true_mu).sqrt();
        if true_norm > 0.0 {
            mean_rel += err / true_norm;
        } else {
            mean_rel += err;
            absolute_fallback = true;
        }
        let est_norm = est_mu.dot(&est_mu).sqrt();
        if true_norm > 0.0 && est_norm > 0.0 {
            cosine += est_mu.dot(&true_mu) / (est_norm * true_norm);
        } else {
            absolute_fallback = true;
        }
        let est_cov = estimated.covariance_matrix(j);
        let true_cov = truth.covariance_matrix(t);
        let cov_err = frobenius_norm(&(&est_cov - &true_cov).view());
        let true_cov_norm = frobenius_norm(&true_cov.view());
        if true_cov_norm > 0.0 {
            cov_rel += cov_err / true_cov_norm;
        } else {
            cov_rel += cov_err;
            absolute_fallback = true;
        }
    }
    let mf = m as f64;
    Ok(Metrics {
        proportion_error,
        mean_rel_error: mean_rel / mf,
        cov_rel_error: cov_rel / mf,
        cosine_angle: cosine / mf,
        absolute_fallback,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::Covariance;
    use crate::sampling::sample_gmm;
    use ndarray::array;

    #[test]
    fn match_components_cases() {
        let means = array![[1.0, -1.0], [0.5, 2.0]];
        let (perm, cost) = match_components(&means.view(), &means.view()).unwrap();
        assert_eq!(perm, vec![0, 1]);
        assert!(cost < 1e-15);

        let swapped = array![[-1.0, 1.0], [2.0, 0.5]];
        let (perm, _) = match_components(&swapped.view(), &means.view()).unwrap();
        assert_eq!(perm, vec![1, 0]);
    }

    #[test]
    fn match_components_against_permutation_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        let m = 5;
        let est = Array2::from_shape_fn((3, m), |_| rng.gen_range(-1.0..1.0));
        let tru = Array2::from_shape_fn((3, m), |_| rng.gen_range(-1.0..1.0));
        let (_, cost) = match_components(&est.view(), &tru.view()).unwrap();
        fn heap(
            perm: &mut Vec<usize>,
            k: usize,
            est: &Array2<f64>,
            tru: &Array2<f64>,
            best: &mut f64,
        ) {
            if k == 1 {
                let total: f64 = perm
                    .iter()
                    .enumerate()
                    .map(|(i, &j)| {
                        let diff = &est.column(i) - &tru.column(j);
                        diff.dot(&diff).sqrt()
                    })
                    .sum();
                *best = best.min(total);
                return;
            }
            for i in 0..k {
                heap(perm, k - 1, est, tru, best);
                if k.is_multiple_of(2) {
                    perm.swap(i, k - 1);
                } else {
                    perm.swap(0, k - 1);
                }
            }
        }
        let mut perm = vec![0, 1, 2, 3, 4];
        let mut best = f64::INFINITY;
        heap(&mut perm, m, &est, &tru, &mut best);
        assert!((cost - best).abs() < 1e-9);
    }

    #[test]
    fn metrics_exact_match_and_examples() {
        let params = GmmParams::new_diagonal(
            array![0.6, 0.4],
            array![[1.0, 0.0], [0.0, 1.0]],
            array![[0.3, 0.2], [0.1, 0.4]],
        )
        .unwrap();
        let m = metrics(&params, &params, &[0, 1]).unwrap();
        assert_eq!(m.proportion_error, 0.0);
        assert_eq!(m.mean_rel_error, 0.0);
        assert_eq!(m.cov_rel_error, 0.0);
        assert!((m.cosine_angle - 1.0).abs() < 1e-15);

        // Orthogonal means: cosine 0; weight example: |0.6-0.5| + |0.4-0.5|.
        let truth = GmmParams::new_diagonal(
            array![0.5, 0.5],
            array![[0.0, 1.0], [1.0, 0.0]],
            array![[0.3, 0.2], [0.1, 0.4]],
        )
        .unwrap();
        let m = metrics(&params, &truth, &[0, 1]).unwrap();
        assert!((m.proportion_error - 0.2).abs() < 1e-15);
        assert!(m.cosine_angle.abs() < 1e-15);
    }

    #[test]
    fn single_gaussian_recovers_sample_mean() {
        let truth = GmmParams::new_diagonal(
            array![1.0],
            array![[0.8], [-0.3]],
            array![[0.4], [0.6]],
        )
        .unwrap();
        // The order-2 term also matches the (unrepresentable) off-diagonal
        // sample covariance, which pulls the optimum away from the sample
        // mean by O(1/sqrt(p)); the deviation must shrink with p.
        let mut errs = Vec::new();
        for p in [500usize, 8000] {
            let x = sample_gmm(&truth, p, 17).unwrap();
            let sample_mean = x.data().sum_axis(ndarray::Axis(1)) / p as f64;
            let mut config = FitConfig::moments(2);
            config.restarts = 3;
            config.seed = 1;
            let report = fit(&x, 1, &config, Some(&truth)).unwrap();
            let est_mu = report.best_params.means().column(0);
            errs.push((&est_mu - &sample_mean).mapv(f64::abs).sum());
        }
        assert!(errs[1] < errs[0], "deviation should shrink with p: {errs:?}");
        assert!(errs[1] < 0.02, "residual deviation too large: {errs:?}");
    }

    #[test]
    fn restart_objectives_never_increase_along_their_traces() {
        let truth = GmmParams::new_diagonal(
            array![0.5, 0.5],
            array![[1.5, -1.5], [0.0, 0.0]],
            array![[0.3, 0.3], [0.3, 0.3]],
        )
        .unwrap();
        let x = sample_gmm(&truth, 300, 5).unwrap();
        let mut config = FitConfig::moments(3);
        config.restarts = 4;
        for rec in fit(&x, 2, &config, None).unwrap().restarts {
            assert!(rec.trace.last().unwrap() <= rec.trace.first().unwrap());
            assert!(rec.objective.is_finite());
        }
    }

    #[test]
    fn returned_weights_live_on_the_simplex() {
        let truth = GmmParams::new_diagonal(
            array![0.3, 0.7],
            array![[2.0, -2.0], [1.0, -1.0]],
            array![[0.4, 0.2], [0.3, 0.5]],
        )
        .unwrap();
        let x = sample_gmm(&truth, 400, 23).unwrap();
        for variant in [Variant::PostProcessing, Variant::Implicit] {
            let mut config = FitConfig::moments(3);
            config.restarts = 2;
            config.variant = variant;
            let report = fit(&x, 2, &config, Some(&truth)).unwrap();
            let w = report.best_params.weights();
            assert!((w.sum() - 1.0).abs() < 1e-12);
            assert!(w.iter().all(|&v| v >= 0.0));
            let Covariance::Diagonal(s) = report.best_params.covariance() else {
                panic!("diagonal expected")
            };
            assert!(s.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn identical_seeds_give_identical_reports() {
        let truth = GmmParams::new_diagonal(
            array![0.5, 0.5],
            array![[1.0, -1.0], [1.0, -1.0]],
            array![[0.3, 0.3], [0.3, 0.3]],
        )
        .unwrap();
        let x = sample_gmm(&truth, 200, 8).unwrap();
        let mut config = FitConfig::moments(3);
        config.restarts = 3;
        config.seed = 99;
        let a = fit(&x, 2, &config, Some(&truth)).unwrap();
        let b = fit(&x, 2, &config, Some(&truth)).unwrap();
        assert_eq!(a.best_params, b.best_params);
        assert_eq!(a.best_index, b.best_index);
        for (ra, rb) in a.restarts.iter().zip(&b.restarts) {
            assert_eq!(ra.objective.to_bits(), rb.objective.to_bits());
            assert_eq!(ra.params, rb.params);
        }
    }

    #[test]
    fn fit_rejects_fewer_samples_than_components() {
        let x = SampleMatrix::new(Array2::zeros((2, 1))).unwrap();
        let config = FitConfig::moments(3);
        assert!(fit(&x, 2, &config, None).is_err());
    }

    #[test]
    fn debias_mode_recovers_separated_means() {
        let model = crate::presets::demo_debias_2d();
        let mixture = model.generating_mixture().unwrap();
        let x = sample_gmm(&mixture, 4000, 31).unwrap();
        let mut config = FitConfig::debias(3, model.sigma().clone());
        config.restarts = 5;
        config.seed = 3;
        let report = fit(&x, 3, &config, Some(&mixture)).unwrap();
        let best = report.best();
        let met = best.metrics.as_ref().unwrap();
        assert!(met.cosine_angle > 0.95, "cosine {}", met.cosine_angle);
    }
}
