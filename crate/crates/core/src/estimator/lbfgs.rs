//! Limited-memory quasi-Newton minimizer with Armijo backtracking.
//!
//! Standard two-loop recursion over a short curvature history; pairs with
//! non-positive curvature are skipped, and a plain negative-gradient step is
//! used whenever the quasi-Newton direction fails to point downhill.

use std::collections::VecDeque;

use crate::error::{Error, Result};

pub(crate) trait SmoothObjective: Sync {
    fn dim(&self) -> usize;
    /// Writes the gradient into `grad` and returns the value.
    fn eval(&self, x: &[f64], grad: &mut [f64]) -> f64;
}

#[derive(Debug, Clone)]
pub(crate) struct MinimizeOptions {
    pub max_iters: usize,
    pub grad_tol: f64,
    pub history: usize,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self { max_iters: 1000, grad_tol: 1e-7, history: 10 }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct MinimizeResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective value at every accepted iterate, starting point included.
    pub trace: Vec<f64>,
}

const ARMIJO_C1: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;
const CURVATURE_EPS: f64 = 1e-10;

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |acc, x| acc.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn minimize(
    obj: &dyn SmoothObjective,
    x0: &[f64],
    opts: &MinimizeOptions,
) -> Result<MinimizeResult> {
    let n = obj.dim();
    debug_assert_eq!(x0.len(), n);
    let mut x = x0.to_vec();
    let mut grad = vec![0.0; n];
    let mut f = obj.eval(&x, &mut grad);
    if !f.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFiniteObjective);
    }
    let mut trace = vec![f];
    let mut pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new(); // (s, y, 1/s'y)
    let mut converged = false;
    let mut iterations = 0;

    for iter in 0..opts.max_iters {
        if inf_norm(&grad) <= opts.grad_tol {
            converged = true;
            break;
        }
        iterations = iter + 1;

        // Two-loop recursion.
        let mut dir: Vec<f64> = grad.iter().map(|g| -g).collect();
        if !pairs.is_empty() {
            let mut alphas = Vec::with_capacity(pairs.len());
            for (s, y, rho) in pairs.iter().rev() {
                let alpha = rho * dot(s, &dir);
                for (d, yi) in dir.iter_mut().zip(y) {
                    *d -= alpha * yi;
                }
                alphas.push(alpha);
            }
            let (s_last, y_last, _) = pairs.back().unwrap();
            let gamma = dot(s_last, y_last) / dot(y_last, y_last);
            for d in dir.iter_mut() {
                *d *= gamma;
            }
            for ((s, y, rho), alpha) in pairs.iter().zip(alphas.into_iter().rev()) {
                let beta = rho * dot(y, &dir);
                for (d, si) in dir.iter_mut().zip(s) {
                    *d += (alpha - beta) * si;
                }
            }
        }
        let mut slope = dot(&grad, &dir);
        if slope >= 0.0 {
            // Fall back to steepest descent.
            dir = grad.iter().map(|g| -g).collect();
            slope = dot(&grad, &dir);
            pairs.clear();
        }

        let mut step = if pairs.is_empty() { 1.0 / inf_norm(&grad).max(1.0) } else { 1.0 };
        let mut new_x = vec![0.0; n];
        let mut new_grad = vec![0.0; n];
        let mut accepted = false;
        for _ in 0..MAX_BACKTRACKS {
            for ((nx, xi), di) in new_x.iter_mut().zip(&x).zip(&dir) {
                *nx = xi + step * di;
            }
            let new_f = obj.eval(&new_x, &mut new_grad);
            if new_f.is_finite() && new_f <= f + ARMIJO_C1 * step * slope {
                if new_grad.iter().any(|g| !g.is_finite()) {
                    return Err(Error::NonFiniteObjective);
                }
                let s: Vec<f64> = new_x.iter().zip(&x).map(|(a, b)| a - b).collect();
                let y: Vec<f64> = new_grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
                let sy = dot(&s, &y);
                let s_norm = s.iter().map(|v| v * v).sum::<f64>().sqrt();
                let y_norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
                if sy > CURVATURE_EPS * s_norm * y_norm {
                    if pairs.len() == opts.history {
                        pairs.pop_front();
                    }
                    pairs.push_back((s, y, 1.0 / sy));
                }
                x.copy_from_slice(&new_x);
                grad.copy_from_slice(&new_grad);
                f = new_f;
                trace.push(f);
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            // Line search stalled; the point is as good as it gets here.
            break;
        }
    }
    if !converged {
        converged = inf_norm(&grad) <= opts.grad_tol;
    }
    Ok(MinimizeResult { value: f, x, iterations, converged, trace })
}
