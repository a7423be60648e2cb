//! Complete Bell polynomials, their derivatives, and the cumulants of the
//! inner product of two independent Gaussians.
//!
//! The Bell recursion turns a cumulant sequence into a moment sequence in
//! O(d^2) scalar work; the cumulant routines feed it with the trace and
//! quadratic-form scalars of a pair of Gaussian parameters. Indefinite
//! covariances are accepted everywhere, which is what lets the same machinery
//! drive the sign-flipped debiasing recursions.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::comb::{binomial, check_order, factorial, gaussian_moment_coeff_exact};
use crate::error::{Error, Result};
use crate::linalg::is_symmetric;

/// Cumulants kappa_1..kappa_d of a scalar random variable.
#[derive(Debug, Clone, PartialEq)]
pub struct CumulantVector {
    values: Vec<f64>,
}

impl CumulantVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        check_order(values.len())?;
        Ok(Self { values })
    }

    /// Highest cumulant order held.
    pub fn order(&self) -> usize {
        self.values.len()
    }

    /// kappa_k for 1 <= k <= d.
    pub fn get(&self, k: usize) -> f64 {
        self.values[k - 1]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
}

/// Bell polynomial values B_0..B_d evaluated at a cumulant sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct BellPrefix {
    values: Vec<f64>,
}

impl BellPrefix {
    /// B_k for 0 <= k <= d.
    pub fn get(&self, k: usize) -> f64 {
        self.values[k]
    }

    pub fn order(&self) -> usize {
        self.values.len() - 1
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Evaluates B_0..B_d through the recursion
/// `B_k = sum_i C(k-1, i) B_i kappa_{k-i}` with `B_0 = 1`.
pub fn bell_prefix(kappas: &CumulantVector) -> Result<BellPrefix> {
    let d = kappas.order();
    check_order(d)?;
    let mut values = vec![1.0f64; d + 1];
    for k in 1..=d {
        let mut acc = 0.0;
        for i in 0..k {
            acc += binomial(k - 1, i) * values[i] * kappas.get(k - i);
        }
        values[k] = acc;
    }
    Ok(BellPrefix { values })
}

/// Partial derivative of B_d with respect to its i-th argument:
/// `C(d, i) * B_{d-i}(kappa_1..kappa_{d-i})`.
pub fn bell_partial(kappas: &CumulantVector, i: usize) -> Result<f64> {
    let d = kappas.order();
    if i == 0 || i > d {
        return Err(Error::InvalidArgument(format!(
            "bell_partial index {i} out of range 1..={d}"
        )));
    }
    let head = CumulantVector::new(kappas.values()[..d - i].to_vec())?;
    Ok(binomial(d, i) * bell_prefix(&head)?.get(d - i))
}

fn quad(u: &ArrayView1<f64>, m: &Array2<f64>, v: &ArrayView1<f64>) -> f64 {
    u.dot(&m.dot(v))
}

/// Cumulants of `<X, X~>` for independent Gaussians `X ~ (mu, sigma)` and
/// `X~ ~ (mu~, sigma~)`. Both covariances must be symmetric; they need not be
/// positive semidefinite.
///
/// With `Z = sigma * sigma~`:
/// even k: `(k-1)! tr(Z^(k/2)) + (k!/2)(mu' sigma~ Z^((k-2)/2) mu + mu~' Z^((k-2)/2) sigma mu~)`;
/// odd k:  `k! mu~' Z^((k-1)/2) mu`.
///
/// Powers of `Z` are accumulated incrementally, one matrix multiply per new
/// power, for O(d n^3) total work.
pub fn cumulants_general(
    mu: &ArrayView1<f64>,
    sigma: &ArrayView2<f64>,
    mu_t: &ArrayView1<f64>,
    sigma_t: &ArrayView2<f64>,
    d: usize,
) -> Result<CumulantVector> {
    check_order(d)?;
    let n = mu.len();
    if mu_t.len() != n || sigma.dim() != (n, n) || sigma_t.dim() != (n, n) {
        return Err(Error::ShapeMismatch("Gaussian parameter shapes disagree".into()));
    }
    if !is_symmetric(sigma, 1e-12) || !is_symmetric(sigma_t, 1e-12) {
        return Err(Error::ShapeMismatch("covariances must be symmetric".into()));
    }
    let z = sigma.dot(sigma_t);
    // zpows[r] = Z^r for r = 0..=d/2.
    let mut zpows: Vec<Array2<f64>> = Vec::with_capacity(d / 2 + 1);
    zpows.push(Array2::eye(n));
    for r in 1..=d / 2 {
        let next = zpows[r - 1].dot(&z);
        zpows.push(next);
    }
    let sigma_mut = sigma.dot(mu_t); // sigma * mu~
    let sigmat_mu = sigma_t.dot(mu); // sigma~ * mu
    let mut values = Vec::with_capacity(d);
    for k in 1..=d {
        let v = if k % 2 == 1 {
            let r = (k - 1) / 2;
            factorial(k) * quad(mu_t, &zpows[r], mu)
        } else {
            let r = k / 2;
            let tr: f64 = zpows[r].diag().sum();
            // mu' sigma~ Z^(r-1) mu = (Z^(r-1) mu)' (sigma~ mu), using that
            // sigma~ Z^(r-1) is symmetric.
            let q1 = zpows[r - 1].dot(mu).dot(&sigmat_mu);
            let q2 = mu_t.dot(&zpows[r - 1].dot(&sigma_mut));
            factorial(k - 1) * tr + factorial(k) / 2.0 * (q1 + q2)
        };
        values.push(v);
    }
    CumulantVector::new(values)
}

/// Same cumulants as [`cumulants_general`] for diagonal covariances
/// `sigma = diag(dvec)^2`, computed with entrywise powers in O(d n).
pub fn cumulants_diag(
    mu: &ArrayView1<f64>,
    dvec: &ArrayView1<f64>,
    mu_t: &ArrayView1<f64>,
    dvec_t: &ArrayView1<f64>,
    d: usize,
) -> Result<CumulantVector> {
    check_order(d)?;
    let n = mu.len();
    if mu_t.len() != n || dvec.len() != n || dvec_t.len() != n {
        return Err(Error::ShapeMismatch("Gaussian parameter shapes disagree".into()));
    }
    // Running entrywise powers of the stddev vectors.
    let mut dp = vec![Array1::<f64>::ones(n); 3]; // d^(k-2), d^(k-1), d^k rotating
    let mut dtp = vec![Array1::<f64>::ones(n); 3];
    // Index 2 holds power k, 1 holds k-1, 0 holds k-2 after the k-th update.
    let mut values = Vec::with_capacity(d);
    for k in 1..=d {
        dp.rotate_left(1);
        dtp.rotate_left(1);
        dp[2] = &dp[1] * dvec;
        dtp[2] = &dtp[1] * dvec_t;
        let v = if k % 2 == 1 {
            // k! * sum_l d_l^(k-1) mu_l d~_l^(k-1) mu~_l
            let lhs = &dp[1] * mu;
            let rhs = &dtp[1] * mu_t;
            factorial(k) * lhs.dot(&rhs)
        } else {
            // tr(Z^(k/2)) = sum_l (d_l d~_l)^k.
            let tr: f64 = dp[2].iter().zip(dtp[2].iter()).map(|(a, b)| a * b).sum();
            let q1: f64 = (0..n).map(|l| mu[l] * mu[l] * dp[0][l] * dtp[2][l]).sum();
            let q2: f64 = (0..n).map(|l| mu_t[l] * mu_t[l] * dtp[0][l] * dp[2][l]).sum();
            factorial(k - 1) * tr + factorial(k) / 2.0 * (q1 + q2)
        };
        values.push(v);
    }
    CumulantVector::new(values)
}

/// The alternating coefficient sum `sum_k C_{d,k} (-1)^k C_{d-2k, q-k}` over
/// `k = 0..=q`, evaluated in exact integer arithmetic. It collapses to 1 when
/// `q = 0` and to 0 otherwise, which is what makes the alternating-sign
/// debiasing correction unbiased.
pub fn delta_identity_check(d: usize, q: usize) -> Result<f64> {
    check_order(d)?;
    if d < 2 * q {
        return Err(Error::InvalidArgument(format!(
            "delta identity requires d >= 2q, got d={d}, q={q}"
        )));
    }
    let mut acc: i128 = 0;
    for k in 0..=q {
        let sign = if k % 2 == 0 { 1 } else { -1 };
        acc += sign
            * gaussian_moment_coeff_exact(d, k)
            * gaussian_moment_coeff_exact(d - 2 * k, q - k);
    }
    Ok(acc as f64)
}
