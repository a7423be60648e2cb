//! Small dense linear-algebra helpers on `ndarray` types: symmetric
//! eigendecomposition (cyclic Jacobi), Householder QR, PSD square roots.
//!
//! Everything here targets the modest matrix sizes of this crate (n up to a
//! few hundred); no BLAS backend is involved.

use ndarray::{Array1, Array2, ArrayView2};

use crate::error::{Error, Result};

pub fn is_symmetric(m: &ArrayView2<f64>, tol: f64) -> bool {
    let (r, c) = m.dim();
    if r != c {
        return false;
    }
    for i in 0..r {
        for j in (i + 1)..r {
            if (m[[i, j]] - m[[j, i]]).abs() > tol {
                return false;
            }
        }
    }
    true
}

/// (M + M') / 2.
pub fn symmetrize(m: &Array2<f64>) -> Array2<f64> {
    (m + &m.t()) * 0.5
}

pub fn frobenius_norm(m: &ArrayView2<f64>) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Eigendecomposition of a symmetric matrix by the cyclic Jacobi method.
/// Returns (eigenvalues, eigenvectors) with `a = v * diag(w) * v'`.
pub fn jacobi_eigh(a: &ArrayView2<f64>) -> (Array1<f64>, Array2<f64>) {
    let n = a.nrows();
    debug_assert_eq!(n, a.ncols());
    let mut m = a.to_owned();
    let mut v = Array2::<f64>::eye(n);
    let scale: f64 = m.iter().map(|x| x * x).sum::<f64>().sqrt().max(1.0);
    let tol = 1e-15 * scale;
    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                off = off.max(m[[i, j]].abs());
            }
        }
        if off <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[[p, q]];
                if apq.abs() <= tol * 1e-2 {
                    continue;
                }
                let theta = (m[[q, q]] - m[[p, p]]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[[k, p]];
                    let mkq = m[[k, q]];
                    m[[k, p]] = c * mkp - s * mkq;
                    m[[k, q]] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[[p, k]];
                    let mqk = m[[q, k]];
                    m[[p, k]] = c * mpk - s * mqk;
                    m[[q, k]] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }
    let w = Array1::from_iter((0..n).map(|i| m[[i, i]]));
    (w, v)
}

/// Symmetric PSD square root `L` with `L * L' = a`. Eigenvalues in
/// `[-psd_tol, 0)` are clamped to zero; anything below `-psd_tol` is an error.
pub fn psd_sqrt(a: &ArrayView2<f64>, psd_tol: f64) -> Result<Array2<f64>> {
    let (w, v) = jacobi_eigh(a);
    let mut sqrt_w = Array1::<f64>::zeros(w.len());
    for (i, &lam) in w.iter().enumerate() {
        if lam < -psd_tol {
            return Err(Error::NotPositiveSemidefinite(lam));
        }
        sqrt_w[i] = lam.max(0.0).sqrt();
    }
    // v * diag(sqrt_w) * v'
    let mut scaled = v.clone();
    for (j, mut col) in scaled.columns_mut().into_iter().enumerate() {
        col *= sqrt_w[j];
    }
    Ok(scaled.dot(&v.t()))
}

/// Orthogonal factor of the Householder QR of `a` (square), with the sign
/// convention diag(R) >= 0. Feeding a matrix of standard normal entries
/// produces a Haar-distributed random rotation.
pub fn householder_q(a: &Array2<f64>) -> Array2<f64> {
    let n = a.nrows();
    debug_assert_eq!(n, a.ncols());
    let mut r = a.to_owned();
    let mut q = Array2::<f64>::eye(n);
    for k in 0..n {
        // Build the reflector for column k.
        let mut alpha = 0.0;
        for i in k..n {
            alpha += r[[i, k]] * r[[i, k]];
        }
        let alpha = alpha.sqrt();
        if alpha == 0.0 {
            continue;
        }
        let alpha = if r[[k, k]] > 0.0 { -alpha } else { alpha };
        let mut v = Array1::<f64>::zeros(n);
        for i in k..n {
            v[i] = r[[i, k]];
        }
        v[k] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        // Apply (I - 2 v v' / v'v) to R from the left and accumulate into Q.
        for j in 0..n {
            let mut dot = 0.0;
            for i in k..n {
                dot += v[i] * r[[i, j]];
            }
            let f = 2.0 * dot / vnorm2;
            for i in k..n {
                r[[i, j]] -= f * v[i];
            }
        }
        for j in 0..n {
            let mut dot = 0.0;
            for i in k..n {
                dot += v[i] * q[[j, i]];
            }
            let f = 2.0 * dot / vnorm2;
            for i in k..n {
                q[[j, i]] -= f * v[i];
            }
        }
    }
    // Make diag(R) nonnegative so Q is unique given the input.
    for k in 0..n {
        if r[[k, k]] < 0.0 {
            for i in 0..n {
                q[[i, k]] = -q[[i, k]];
            }
        }
    }
    q
}
