//! Diagonal-covariance expectation-maximization baseline.
//!
//! Self-contained and deliberately standard: log-sum-exp stabilized E-step,
//! closed-form M-step, a variance floor against likelihood blowup, and
//! reinitialization of components that lose all responsibility. Uses the
//! same sample-based initialization as the moment fitter so comparisons
//! differ in objective, not in starting points.

use std::time::Instant;

use ndarray::{Array1, Array2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimator::{init_from_samples, RESTART_STREAM_BASE};
use crate::moments::{Covariance, GmmParams};
use crate::reduce::{block_tree_sum, SAMPLE_BLOCK};
use crate::sampling::SampleMatrix;

const LOG_TWO_PI: f64 = 1.8378770664093453;

/// EM settings. `variance_floor` is relative: the floor applied to each
/// coordinate's variance is `variance_floor` times that coordinate's sample
/// variance.
#[derive(Debug, Clone)]
pub struct EmConfig {
    pub max_iters: usize,
    pub loglik_tol: f64,
    pub variance_floor: f64,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            max_iters: 1000,
            loglik_tol: 1e-8,
            variance_floor: 1e-6,
            restarts: 10,
            seed: 0,
        }
    }
}

/// One EM restart.
#[derive(Debug, Clone)]
pub struct EmRestart {
    pub restart: usize,
    pub params: GmmParams,
    /// Log-likelihood after every iteration (non-decreasing).
    pub loglik_trace: Vec<f64>,
    pub iterations: usize,
    /// Components reinitialized after collapsing to zero responsibility.
    pub reinitialized: usize,
    pub runtime_seconds: f64,
}

impl EmRestart {
    pub fn loglik(&self) -> f64 {
        *self.loglik_trace.last().expect("at least one iteration")
    }
}

/// Multi-restart EM outcome.
#[derive(Debug, Clone)]
pub struct EmFit {
    pub best_index: usize,
    pub restarts: Vec<EmRestart>,
    pub runtime_seconds: f64,
}

impl EmFit {
    pub fn best(&self) -> &EmRestart {
        &self.restarts[self.best_index]
    }

    pub fn params(&self) -> &GmmParams {
        &self.best().params
    }
}

/// Total log density of the samples under a diagonal mixture, log-sum-exp
/// stabilized.
pub fn log_likelihood(params: &GmmParams, x: &SampleMatrix) -> Result<f64> {
    let Covariance::Diagonal(stddevs) = params.covariance() else {
        return Err(Error::InvalidArgument(
            "log-likelihood is implemented for the diagonal representation".into(),
        ));
    };
    if stddevs.iter().any(|&s| s == 0.0) {
        return Err(Error::InvalidArgument(
            "zero variance makes the likelihood unbounded".into(),
        ));
    }
    if x.dim() != params.dim() {
        return Err(Error::ShapeMismatch("sample dimension".into()));
    }
    let p = x.num_samples();
    if p == 0 {
        return Err(Error::EmptySamples);
    }
    let (n, m) = stddevs.dim();
    let mut log_norm = Array1::<f64>::zeros(m);
    for j in 0..m {
        let mut acc = params.weights()[j].max(1e-300).ln() - 0.5 * n as f64 * LOG_TWO_PI;
        for l in 0..n {
            acc -= stddevs[[l, j]].abs().ln();
        }
        log_norm[j] = acc;
    }
    let data = x.data();
    let means = params.means();
    let total = block_tree_sum(
        p,
        SAMPLE_BLOCK,
        |range| {
            let mut acc = 0.0;
            let mut logs = vec![0.0; m];
            for i in range {
                let xi = data.column(i);
                let mut best = f64::NEG_INFINITY;
                for j in 0..m {
                    let mut quad = 0.0;
                    for l in 0..n {
                        let z = (xi[l] - means[[l, j]]) / stddevs[[l, j]];
                        quad += z * z;
                    }
                    let lw = log_norm[j] - 0.5 * quad;
                    logs[j] = lw;
                    best = best.max(lw);
                }
                let sum: f64 = logs.iter().map(|&lw| (lw - best).exp()).sum();
                acc += best + sum.ln();
            }
            acc
        },
        |a, b| a + b,
    )
    .expect("p > 0");
    Ok(total)
}

struct EStepPartial {
    loglik: f64,
    /// sum_i r_ij (m).
    resp: Array1<f64>,
    /// sum_i r_ij x_i (n x m).
    wx: Array2<f64>,
    /// sum_i r_ij x_i^2 (n x m).
    wxx: Array2<f64>,
}

fn run_em_restart(
    restart: usize,
    x: &SampleMatrix,
    m: usize,
    config: &EmConfig,
    floor: &Array1<f64>,
    sample_var: &Array1<f64>,
) -> Result<EmRestart> {
    let start = Instant::now();
    let data = x.data();
    let (n, p) = data.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(RESTART_STREAM_BASE + restart as u64);

    let (mut means, init_stddev) = init_from_samples(&data.view(), m, &mut rng);
    let mut vars = Array2::<f64>::zeros((n, m));
    for j in 0..m {
        for l in 0..n {
            vars[[l, j]] = (init_stddev[l] * init_stddev[l]).max(floor[l]);
        }
    }
    let mut weights = Array1::<f64>::from_elem(m, 1.0 / m as f64);
    let mut trace: Vec<f64> = Vec::new();
    let mut reinitialized = 0usize;
    let mut iterations = 0usize;

    for iter in 0..config.max_iters {
        iterations = iter + 1;
        let mut log_norm = Array1::<f64>::zeros(m);
        for j in 0..m {
            let mut acc = weights[j].max(1e-300).ln() - 0.5 * n as f64 * LOG_TWO_PI;
            for l in 0..n {
                acc -= 0.5 * vars[[l, j]].ln();
            }
            log_norm[j] = acc;
        }
        let means_ref = &means;
        let vars_ref = &vars;
        let partial = block_tree_sum(
            p,
            SAMPLE_BLOCK,
            |range| {
                let mut out = EStepPartial {
                    loglik: 0.0,
                    resp: Array1::zeros(m),
                    wx: Array2::zeros((n, m)),
                    wxx: Array2::zeros((n, m)),
                };
                let mut logs = vec![0.0; m];
                for i in range {
                    let xi = data.column(i);
                    let mut best = f64::NEG_INFINITY;
                    for j in 0..m {
                        let mut quad = 0.0;
                        for l in 0..n {
                            let diff = xi[l] - means_ref[[l, j]];
                            quad += diff * diff / vars_ref[[l, j]];
                        }
                        logs[j] = log_norm[j] - 0.5 * quad;
                        best = best.max(logs[j]);
                    }
                    let sum: f64 = logs.iter().map(|&lw| (lw - best).exp()).sum();
                    out.loglik += best + sum.ln();
                    for j in 0..m {
                        let r = (logs[j] - best).exp() / sum;
                        out.resp[j] += r;
                        for l in 0..n {
                            out.wx[[l, j]] += r * xi[l];
                            out.wxx[[l, j]] += r * xi[l] * xi[l];
                        }
                    }
                }
                out
            },
            |mut a, b| {
                a.loglik += b.loglik;
                a.resp += &b.resp;
                a.wx += &b.wx;
                a.wxx += &b.wxx;
                a
            },
        )
        .expect("p > 0");

        if !partial.loglik.is_finite() {
            return Err(Error::NonFiniteObjective);
        }
        trace.push(partial.loglik);

        // M-step.
        let mut needs_renorm = false;
        for j in 0..m {
            let nj = partial.resp[j];
            if nj < 1e-10 * p as f64 {
                // Collapsed component: restart it from a random observation.
                reinitialized += 1;
                needs_renorm = true;
                let idx = rng.gen_range(0..p);
                means.column_mut(j).assign(&data.column(idx));
                for l in 0..n {
                    vars[[l, j]] = sample_var[l].max(floor[l]);
                }
                weights[j] = 1.0 / m as f64;
                continue;
            }
            weights[j] = nj / p as f64;
            for l in 0..n {
                let mu = partial.wx[[l, j]] / nj;
                means[[l, j]] = mu;
                vars[[l, j]] = (partial.wxx[[l, j]] / nj - mu * mu).max(floor[l]);
            }
        }
        if needs_renorm {
            let total = weights.sum();
            weights /= total;
        }

        if let [.., prev, last] = trace[..] {
            if (last - prev).abs() <= config.loglik_tol * (1.0 + last.abs()) && !needs_renorm {
                break;
            }
        }
    }

    let params = GmmParams::new_diagonal(weights, means, vars.mapv(f64::sqrt))?;
    Ok(EmRestart {
        restart,
        params,
        loglik_trace: trace,
        iterations,
        reinitialized,
        runtime_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Fits a diagonal mixture by EM with multiple restarts; the restart with
/// the highest final log-likelihood wins.
pub fn em_fit(x: &SampleMatrix, m: usize, config: &EmConfig) -> Result<EmFit> {
    let start = Instant::now();
    if m == 0 {
        return Err(Error::InvalidArgument("need at least one component".into()));
    }
    if config.restarts == 0 {
        return Err(Error::InvalidArgument("need at least one restart".into()));
    }
    if !config.variance_floor.is_finite() || config.variance_floor <= 0.0 {
        return Err(Error::InvalidArgument("variance floor must be positive".into()));
    }
    let p = x.num_samples();
    if p < m {
        return Err(Error::InvalidArgument(format!(
            "{p} samples cannot support {m} components"
        )));
    }
    let data = x.data();
    let n = x.dim();
    let mean = data.sum_axis(ndarray::Axis(1)) / p as f64;
    let mut sample_var = Array1::<f64>::zeros(n);
    for col in data.columns() {
        let dev = &col - &mean;
        sample_var += &(&dev * &dev);
    }
    sample_var /= p as f64;
    // Degenerate coordinates still need a usable floor.
    let floor = sample_var.mapv(|v| (config.variance_floor * v).max(1e-300));

    let outcomes: Vec<Result<EmRestart>> = (0..config.restarts)
        .into_par_iter()
        .map(|r| run_em_restart(r, x, m, config, &floor, &sample_var))
        .collect();
    let mut restarts = Vec::new();
    for outcome in outcomes {
        match outcome {
            Ok(rec) => restarts.push(rec),
            Err(Error::NonFiniteObjective) => {}
            Err(e) => return Err(e),
        }
    }
    if restarts.is_empty() {
        return Err(Error::AllRestartsDiverged(config.restarts));
    }
    let mut best_index = 0;
    for (i, rec) in restarts.iter().enumerate() {
        if rec.loglik() > restarts[best_index].loglik() {
            best_index = i;
        }
    }
    Ok(EmFit { best_index, restarts, runtime_seconds: start.elapsed().as_secs_f64() })
}
