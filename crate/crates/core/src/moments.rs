//! Implicit evaluation of the mixture moment-matching objective
//! `F = F1 - 2 F2` and its gradients, where `F1` is the squared norm of the
//! model moment and `F2` the averaged inner product of the model moment with
//! per-sample rank-one moments. Neither term ever materializes an order-d
//! tensor: `F1` runs through cumulant/Bell evaluations per component pair and
//! `F2` through a three-term recurrence per sample.
//!
//! Both terms exist in a general (full covariance) form and a fast diagonal
//! form; the two are tested against each other and against the dense tensors
//! of [`crate::symtensor`].

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::bell::{bell_prefix, cumulants_general, BellPrefix};
use crate::comb::{binomial, check_order, factorial};
use crate::error::{Error, Result};
use crate::linalg::{is_symmetric, symmetrize};
use crate::reduce::{block_tree_sum, SAMPLE_BLOCK};
use crate::sampling::SampleMatrix;

/// Covariance representation of a mixture: per-component stddev vectors
/// (columns of an n x m matrix, `Sigma_j = diag(col_j)^2`) or per-component
/// full symmetric matrices.
#[derive(Debug, Clone, PartialEq)]
pub enum Covariance {
    Diagonal(Array2<f64>),
    Full(Vec<Array2<f64>>),
}

/// Mixture parameters: weights on the simplex, means as columns of an
/// n x m matrix, and a covariance representation.
#[derive(Debug, Clone, PartialEq)]
pub struct GmmParams {
    weights: Array1<f64>,
    means: Array2<f64>,
    covariance: Covariance,
}

impl GmmParams {
    pub fn new(weights: Array1<f64>, means: Array2<f64>, covariance: Covariance) -> Result<Self> {
        let (n, m) = means.dim();
        if n == 0 || m == 0 {
            return Err(Error::InvalidArgument("means matrix must be nonempty".into()));
        }
        if weights.len() != m {
            return Err(Error::ShapeMismatch(format!(
                "{} weights for {m} components",
                weights.len()
            )));
        }
        if weights.iter().any(|w| *w < -1e-9 || !w.is_finite()) {
            return Err(Error::InvalidWeights("negative or non-finite weight".into()));
        }
        let total: f64 = weights.sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidWeights(format!("weights sum to {total}")));
        }
        match &covariance {
            Covariance::Diagonal(stddevs) => {
                if stddevs.dim() != (n, m) {
                    return Err(Error::ShapeMismatch("stddev matrix shape".into()));
                }
            }
            Covariance::Full(sigmas) => {
                if sigmas.len() != m {
                    return Err(Error::ShapeMismatch("one covariance per component".into()));
                }
                for s in sigmas {
                    if s.dim() != (n, n) {
                        return Err(Error::ShapeMismatch("covariance must be n x n".into()));
                    }
                    if !is_symmetric(&s.view(), 1e-12) {
                        return Err(Error::ShapeMismatch("covariance not symmetric".into()));
                    }
                }
            }
        }
        Ok(Self { weights, means, covariance })
    }

    pub fn new_diagonal(
        weights: Array1<f64>,
        means: Array2<f64>,
        stddevs: Array2<f64>,
    ) -> Result<Self> {
        Self::new(weights, means, Covariance::Diagonal(stddevs))
    }

    pub fn new_full(
        weights: Array1<f64>,
        means: Array2<f64>,
        sigmas: Vec<Array2<f64>>,
    ) -> Result<Self> {
        Self::new(weights, means, Covariance::Full(sigmas))
    }

    pub fn weights(&self) -> &Array1<f64> {
        &self.weights
    }

    pub fn means(&self) -> &Array2<f64> {
        &self.means
    }

    pub fn covariance(&self) -> &Covariance {
        &self.covariance
    }

    pub fn dim(&self) -> usize {
        self.means.nrows()
    }

    pub fn num_components(&self) -> usize {
        self.means.ncols()
    }

    pub fn is_diagonal(&self) -> bool {
        matches!(self.covariance, Covariance::Diagonal(_))
    }

    /// Full covariance matrix of component `j`, expanding a diagonal
    /// representation if needed.
    pub fn covariance_matrix(&self, j: usize) -> Array2<f64> {
        match &self.covariance {
            Covariance::Full(sigmas) => sigmas[j].clone(),
            Covariance::Diagonal(stddevs) => {
                Array2::from_diag(&stddevs.column(j).mapv(|s| s * s))
            }
        }
    }

    /// Converts a diagonal representation into the equivalent full one.
    pub fn to_full(&self) -> GmmParams {
        let sigmas = (0..self.num_components()).map(|j| self.covariance_matrix(j)).collect();
        GmmParams {
            weights: self.weights.clone(),
            means: self.means.clone(),
            covariance: Covariance::Full(sigmas),
        }
    }
}

/// Gradient with the same shape as the covariance representation it belongs
/// to. For the diagonal representation this is the gradient with respect to
/// the stddev entries themselves.
#[derive(Debug, Clone, PartialEq)]
pub enum CovGrad {
    Diagonal(Array2<f64>),
    Full(Vec<Array2<f64>>),
}

/// An objective value bundled with gradients matching [`GmmParams`] shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveEval {
    pub value: f64,
    pub grad_weights: Array1<f64>,
    pub grad_means: Array2<f64>,
    pub grad_cov: CovGrad,
}

impl ObjectiveEval {
    /// `self + c * other`, entrywise on value and gradients.
    pub fn combine(mut self, c: f64, other: &ObjectiveEval) -> ObjectiveEval {
        self.value += c * other.value;
        self.grad_weights = &self.grad_weights + &(c * &other.grad_weights);
        self.grad_means = &self.grad_means + &(c * &other.grad_means);
        self.grad_cov = match (self.grad_cov, &other.grad_cov) {
            (CovGrad::Diagonal(a), CovGrad::Diagonal(b)) => CovGrad::Diagonal(a + &(c * b)),
            (CovGrad::Full(a), CovGrad::Full(b)) => CovGrad::Full(
                a.into_iter().zip(b.iter()).map(|(x, y)| x + &(c * y)).collect(),
            ),
            _ => panic!("mismatched covariance gradient representations"),
        };
        self
    }
}

/// Inner product of the order-`d` moments of two Gaussians, computed as a
/// Bell polynomial of the pair cumulants. Covariances may be indefinite.
pub fn psi_inner(
    mu: &ArrayView1<f64>,
    sigma: &ArrayView2<f64>,
    mu_t: &ArrayView1<f64>,
    sigma_t: &ArrayView2<f64>,
    d: usize,
) -> Result<f64> {
    let kappas = cumulants_general(mu, sigma, mu_t, sigma_t, d)?;
    Ok(bell_prefix(&kappas)?.get(d))
}

fn outer(u: &Array1<f64>, v: &Array1<f64>) -> Array2<f64> {
    let n = u.len();
    let m = v.len();
    Array2::from_shape_fn((n, m), |(i, j)| u[i] * v[j])
}

/// Shared state for the gradients of [`psi_inner`] with respect to its first
/// Gaussian's parameters.
struct PsiGradState {
    bell: BellPrefix,
    d: usize,
    /// Z^r for r = 0..=d/2, Z = sigma * sigma~.
    zpows: Vec<Array2<f64>>,
    /// a_r = sigma~ Z^r mu.
    a_vecs: Vec<Array1<f64>>,
    /// c_r = (Z')^r mu~.
    c_vecs: Vec<Array1<f64>>,
}

fn psi_grad_state(
    mu: &ArrayView1<f64>,
    sigma: &ArrayView2<f64>,
    mu_t: &ArrayView1<f64>,
    sigma_t: &ArrayView2<f64>,
    d: usize,
    kappa1_shift: f64,
) -> Result<PsiGradState> {
    let mut kappas = cumulants_general(mu, sigma, mu_t, sigma_t, d)?;
    kappas.values_mut()[0] += kappa1_shift;
    let bell = bell_prefix(&kappas)?;
    let n = mu.len();
    let z = sigma.dot(sigma_t);
    let rmax = d / 2;
    let mut zpows = Vec::with_capacity(rmax + 1);
    zpows.push(Array2::<f64>::eye(n));
    for r in 1..=rmax {
        let next = zpows[r - 1].dot(&z);
        zpows.push(next);
    }
    let mut a_vecs = Vec::with_capacity(rmax + 1);
    let mut c_vecs = Vec::with_capacity(rmax + 1);
    let mut zr_mu = mu.to_owned();
    let mut ztr_mut = mu_t.to_owned();
    for r in 0..=rmax {
        if r > 0 {
            zr_mu = z.dot(&zr_mu);
            ztr_mut = z.t().dot(&ztr_mut);
        }
        a_vecs.push(sigma_t.dot(&zr_mu));
        c_vecs.push(ztr_mut.clone());
    }
    Ok(PsiGradState { bell, d, zpows, a_vecs, c_vecs })
}

impl PsiGradState {
    /// `sum_k C(d,k) B_{d-k} dkappa_k/dmu`.
    fn grad_mu(&self) -> Array1<f64> {
        let n = self.a_vecs[0].len();
        let mut g = Array1::<f64>::zeros(n);
        for k in 1..=self.d {
            let w = binomial(self.d, k) * self.bell.get(self.d - k) * factorial(k);
            if k % 2 == 0 {
                g += &(w * &self.a_vecs[(k - 2) / 2]);
            } else {
                g += &(w * &self.c_vecs[(k - 1) / 2]);
            }
        }
        g
    }

    /// `sum_k C(d,k) B_{d-k} dkappa_k/dsigma`, symmetrized.
    fn grad_sigma(&self, sigma_t: &ArrayView2<f64>) -> Array2<f64> {
        let n = self.a_vecs[0].len();
        let mut g = Array2::<f64>::zeros((n, n));
        for k in 1..=self.d {
            let w = binomial(self.d, k) * self.bell.get(self.d - k);
            if k % 2 == 0 {
                // (k!/2) [ sigma~ Z^((k-2)/2) + V + V~ ]
                let half_kf = factorial(k) / 2.0;
                let mut term = sigma_t.dot(&self.zpows[(k - 2) / 2]);
                if k >= 4 {
                    let r = (k - 4) / 2;
                    for l in 0..=r {
                        term += &outer(&self.a_vecs[l], &self.a_vecs[r - l]);
                    }
                }
                let r = (k - 2) / 2;
                for l in 0..=r {
                    term += &outer(&self.c_vecs[l], &self.c_vecs[r - l]);
                }
                g += &(w * half_kf * &term);
            } else if k >= 3 {
                let r = (k - 3) / 2;
                let mut term = Array2::<f64>::zeros((n, n));
                for l in 0..=r {
                    term += &outer(&self.c_vecs[l], &self.a_vecs[r - l]);
                }
                g += &(w * factorial(k) * &term);
            }
        }
        symmetrize(&g)
    }
}

/// Gradient of [`psi_inner`] with respect to `mu`.
pub fn psi_grad_mu(
    mu: &ArrayView1<f64>,
    sigma: &ArrayView2<f64>,
    mu_t: &ArrayView1<f64>,
    sigma_t: &ArrayView2<f64>,
    d: usize,
) -> Result<Array1<f64>> {
    Ok(psi_grad_state(mu, sigma, mu_t, sigma_t, d, 0.0)?.grad_mu())
}

/// Gradient of [`psi_inner`] with respect to `sigma`, returned symmetrized
/// (the objective's domain is symmetric matrices).
pub fn psi_grad_sigma(
    mu: &ArrayView1<f64>,
    sigma: &ArrayView2<f64>,
    mu_t: &ArrayView1<f64>,
    sigma_t: &ArrayView2<f64>,
    d: usize,
) -> Result<Array2<f64>> {
    Ok(psi_grad_state(mu, sigma, mu_t, sigma_t, d, 0.0)?.grad_sigma(sigma_t))
}

/// Prefix `alpha^(0)..alpha^(d)` of the three-term recurrence
/// `alpha^(k) = alpha^(k-1) s1 + (k-1) alpha^(k-2) s2`, which evaluates the
/// Bell polynomials of the cumulant sequence `(s1, s2, 0, 0, ...)`.
pub(crate) fn moment_dot_prefix(s1: f64, s2: f64, d: usize) -> Vec<f64> {
    let mut prefix = Vec::with_capacity(d + 1);
    prefix.push(1.0);
    if d == 0 {
        return prefix;
    }
    prefix.push(s1);
    for k in 2..=d {
        let next = prefix[k - 1] * s1 + (k - 1) as f64 * prefix[k - 2] * s2;
        prefix.push(next);
    }
    prefix
}

/// Covariance of a single Gaussian, in either representation, borrowed.
#[derive(Debug, Clone, Copy)]
pub enum GaussianCov<'a> {
    /// Stddev vector; the covariance is `diag(d)^2`.
    Diagonal(ArrayView1<'a, f64>),
    Full(ArrayView2<'a, f64>),
}

/// Inner product of an order-`d` Gaussian moment with the rank-one tensor of
/// `a`, plus the full recurrence prefix it came from.
pub fn alpha_dot(
    mu: &ArrayView1<f64>,
    cov: &GaussianCov,
    a: &ArrayView1<f64>,
    d: usize,
) -> Result<(f64, Vec<f64>)> {
    check_order(d)?;
    let s1 = a.dot(mu);
    let s2 = match cov {
        GaussianCov::Diagonal(stddev) => {
            if stddev.len() != a.len() {
                return Err(Error::ShapeMismatch("stddev length".into()));
            }
            a.iter().zip(stddev.iter()).map(|(ai, di)| ai * ai * di * di).sum()
        }
        GaussianCov::Full(sigma) => {
            if sigma.dim() != (a.len(), a.len()) {
                return Err(Error::ShapeMismatch("covariance shape".into()));
            }
            a.dot(&sigma.dot(a))
        }
    };
    let prefix = moment_dot_prefix(s1, s2, d);
    Ok((prefix[d], prefix))
}

fn elementwise_pow(m: &Array2<f64>, k: usize) -> Array2<f64> {
    m.mapv(|x| x.powi(k as i32))
}

/// Squared norm of the model moment for diagonal covariances: the full matrix
/// program over component pairs (Gram-style cumulant matrices, the Bell
/// recursion applied entrywise, then the two-factor gradient assembly).
pub(crate) fn f1_diag_impl(
    weights: &ArrayView1<f64>,
    means: &ArrayView2<f64>,
    stddevs: &ArrayView2<f64>,
    d: usize,
    omega_sq: f64,
) -> Result<ObjectiveEval> {
    check_order(d)?;
    if d == 0 {
        return Err(Error::InvalidArgument("moment order must be >= 1".into()));
    }
    let (_n, m) = means.dim();
    // Entrywise powers of the stddev matrix, reused throughout.
    let dpow: Vec<Array2<f64>> = (0..=d).map(|k| elementwise_pow(&stddevs.to_owned(), k)).collect();
    let a_mat = means.to_owned();
    let a_sq = &a_mat * &a_mat;

    // Pair cumulant matrices K_k and Bell matrices B_k.
    let mut kmats: Vec<Array2<f64>> = Vec::with_capacity(d + 1);
    kmats.push(Array2::zeros((m, m))); // K_0 placeholder
    for k in 1..=d {
        let mat = if k % 2 == 1 {
            let t = &dpow[k - 1] * &a_mat;
            factorial(k) * t.t().dot(&t)
        } else {
            let v = dpow[k].t().dot(&(&dpow[k - 2] * &a_sq));
            factorial(k - 1) * dpow[k].t().dot(&dpow[k])
                + factorial(k) / 2.0 * (&v + &v.t())
        };
        kmats.push(mat);
    }
    kmats[1] += omega_sq;

    let mut bmats: Vec<Array2<f64>> = Vec::with_capacity(d + 1);
    bmats.push(Array2::ones((m, m)));
    for k in 1..=d {
        let mut acc = Array2::<f64>::zeros((m, m));
        for r in 0..k {
            acc += &(binomial(k - 1, r) * &(&bmats[r] * &kmats[k - r]));
        }
        bmats.push(acc);
    }

    let w = weights.to_owned();
    let value = w.dot(&bmats[d].dot(&w));
    let grad_weights = 2.0 * bmats[d].dot(&w);

    let lam_outer = outer(&w, &w);
    let mut grad_means = Array2::<f64>::zeros(means.dim());
    let mut grad_stddevs = Array2::<f64>::zeros(stddevs.dim());
    for k in 1..=d {
        let btilde = &bmats[d - k] * &lam_outer;
        let c = 2.0 * binomial(d, k);
        if k % 2 == 1 {
            let t_a = factorial(k) * &(&dpow[k - 1] * &a_mat);
            let u_a = &dpow[k - 1];
            grad_means += &(c * &(&t_a.dot(&btilde) * u_a));
            if k > 1 {
                let t_d = t_a;
                let u_d = (k - 1) as f64 * &(&dpow[k - 2] * &a_mat);
                grad_stddevs += &(c * &(&t_d.dot(&btilde) * &u_d));
            }
        } else {
            let t_a = factorial(k) * &dpow[k];
            let u_a = &(&dpow[k - 2] * &a_mat);
            grad_means += &(c * &(&t_a.dot(&btilde) * u_a));

            let t_d1 =
                factorial(k) * &dpow[k] + (k as f64 * factorial(k) / 2.0) * &(&dpow[k - 2] * &a_sq);
            let u_d1 = &dpow[k - 1];
            grad_stddevs += &(c * &(&t_d1.dot(&btilde) * u_d1));
            if k > 2 {
                let t_d2 = factorial(k) / 2.0 * &dpow[k];
                let u_d2 = (k - 2) as f64 * &(&dpow[k - 3] * &a_sq);
                grad_stddevs += &(c * &(&t_d2.dot(&btilde) * &u_d2));
            }
        }
    }

    Ok(ObjectiveEval {
        value,
        grad_weights,
        grad_means,
        grad_cov: CovGrad::Diagonal(grad_stddevs),
    })
}

/// Squared norm of the model moment for full covariances, pair by pair.
pub(crate) fn f1_general_impl(
    weights: &ArrayView1<f64>,
    means: &ArrayView2<f64>,
    sigmas: &[Array2<f64>],
    d: usize,
    omega_sq: f64,
) -> Result<ObjectiveEval> {
    check_order(d)?;
    if d == 0 {
        return Err(Error::InvalidArgument("moment order must be >= 1".into()));
    }
    let (n, m) = means.dim();
    // Bell values per ordered pair; the matrix is symmetric so evaluate i <= j.
    let mut bd = Array2::<f64>::zeros((m, m));
    for i in 0..m {
        for j in i..m {
            let mut kappas = cumulants_general(
                &means.column(i),
                &sigmas[i].view(),
                &means.column(j),
                &sigmas[j].view(),
                d,
            )?;
            kappas.values_mut()[0] += omega_sq;
            let b = bell_prefix(&kappas)?.get(d);
            bd[[i, j]] = b;
            bd[[j, i]] = b;
        }
    }
    let w = weights.to_owned();
    let value = w.dot(&bd.dot(&w));
    let grad_weights = 2.0 * bd.dot(&w);

    let mut grad_means = Array2::<f64>::zeros((n, m));
    let mut grad_sigmas = vec![Array2::<f64>::zeros((n, n)); m];
    for j in 0..m {
        let mut gm = Array1::<f64>::zeros(n);
        let mut gs = Array2::<f64>::zeros((n, n));
        for i in 0..m {
            // Derivative of the pair term with respect to component j's slot.
            let state = psi_grad_state(
                &means.column(j),
                &sigmas[j].view(),
                &means.column(i),
                &sigmas[i].view(),
                d,
                omega_sq,
            )?;
            gm += &(w[i] * &state.grad_mu());
            gs += &(w[i] * &state.grad_sigma(&sigmas[i].view()));
        }
        grad_means.column_mut(j).assign(&(2.0 * w[j] * &gm));
        grad_sigmas[j] = 2.0 * w[j] * &gs;
    }

    Ok(ObjectiveEval {
        value,
        grad_weights,
        grad_means,
        grad_cov: CovGrad::Full(grad_sigmas),
    })
}

/// Per-block partials of the sample-average term.
struct F2Partial {
    /// X R1 restricted to the block.
    t: Array2<f64>,
    /// Diagonal: X^2 R2; full: per-component alpha^(d-2)-weighted sample Grams.
    second: F2Second,
    /// Column sums of `R1 * V + (d-1) R2 * Z`.
    w: Array1<f64>,
}

enum F2Second {
    Diag(Array2<f64>),
    Full(Vec<Array2<f64>>),
}

fn f2_combine(mut a: F2Partial, b: F2Partial) -> F2Partial {
    a.t += &b.t;
    a.w += &b.w;
    a.second = match (a.second, b.second) {
        (F2Second::Diag(x), F2Second::Diag(y)) => F2Second::Diag(x + &y),
        (F2Second::Full(x), F2Second::Full(y)) => {
            F2Second::Full(x.into_iter().zip(y).map(|(u, v)| u + &v).collect())
        }
        _ => unreachable!("mixed partial kinds"),
    };
    a
}

/// Runs the rolling three-term recurrence over a block of samples, returning
/// `R1 = alpha^(d-1)` and `R2 = alpha^(d-2)` (blk x m each).
fn alpha_tail(v: &Array2<f64>, z: &Array2<f64>, d: usize) -> (Array2<f64>, Array2<f64>) {
    let shape = v.dim();
    if d == 1 {
        return (Array2::ones(shape), Array2::zeros(shape));
    }
    let mut r2 = Array2::<f64>::ones(shape);
    let mut r1 = v.clone();
    for k in 2..d {
        let r3 = r2;
        r2 = r1;
        r1 = &r2 * v + (k - 1) as f64 * &(&r3 * z);
    }
    (r1, r2)
}

fn f2_impl(
    weights: &ArrayView1<f64>,
    means: &ArrayView2<f64>,
    cov: &Covariance,
    x: &ArrayView2<f64>,
    d: usize,
    omega_sq: f64,
) -> Result<ObjectiveEval> {
    check_order(d)?;
    if d == 0 {
        return Err(Error::InvalidArgument("moment order must be >= 1".into()));
    }
    let (n, m) = means.dim();
    let p = x.ncols();
    if p == 0 {
        return Err(Error::EmptySamples);
    }
    if x.nrows() != n {
        return Err(Error::ShapeMismatch("sample dimension differs from means".into()));
    }
    let dpow2: Option<Array2<f64>> = match cov {
        Covariance::Diagonal(stddevs) => Some(stddevs * stddevs),
        Covariance::Full(_) => None,
    };

    let partial = block_tree_sum(
        p,
        SAMPLE_BLOCK,
        |range| {
            let xb = x.slice(ndarray::s![.., range.clone()]);
            let xb_sq = &xb * &xb;
            let mut v = xb.t().dot(means);
            if omega_sq != 0.0 {
                v += omega_sq;
            }
            let z = match cov {
                Covariance::Diagonal(_) => xb_sq.t().dot(dpow2.as_ref().unwrap()),
                Covariance::Full(sigmas) => {
                    let blk = xb.ncols();
                    let mut z = Array2::<f64>::zeros((blk, m));
                    for j in 0..m {
                        let y = sigmas[j].dot(&xb); // n x blk
                        let qf = (&xb * &y).sum_axis(Axis(0));
                        z.column_mut(j).assign(&qf);
                    }
                    z
                }
            };
            let (r1, r2) = alpha_tail(&v, &z, d);
            let w = (&r1 * &v + (d - 1) as f64 * &(&r2 * &z)).sum_axis(Axis(0));
            let t = xb.dot(&r1);
            let second = match cov {
                Covariance::Diagonal(_) => F2Second::Diag(xb_sq.dot(&r2)),
                Covariance::Full(_) => {
                    let mut grams = Vec::with_capacity(m);
                    for j in 0..m {
                        let scaled = &xb * &r2.column(j); // broadcast row over columns
                        grams.push(scaled.dot(&xb.t()));
                    }
                    F2Second::Full(grams)
                }
            };
            F2Partial { t, second, w }
        },
        f2_combine,
    )
    .expect("p > 0");

    let pf = p as f64;
    let value = weights.dot(&partial.w) / pf;
    let grad_weights = &partial.w / pf;
    let mut grad_means = partial.t * (d as f64 / pf);
    for (j, mut col) in grad_means.columns_mut().into_iter().enumerate() {
        col *= weights[j];
    }
    let grad_cov = match (&partial.second, cov) {
        (F2Second::Diag(s), Covariance::Diagonal(stddevs)) => {
            // d (d-1) lambda_j sum_i alpha^(d-2) x^2 ∘ d_j / p
            let mut g = (d * (d - 1)) as f64 / pf * &(s * stddevs);
            for (j, mut col) in g.columns_mut().into_iter().enumerate() {
                col *= weights[j];
            }
            CovGrad::Diagonal(g)
        }
        (F2Second::Full(grams), Covariance::Full(_)) => {
            let c = binomial(d, 2) / pf;
            CovGrad::Full(
                grams
                    .iter()
                    .enumerate()
                    .map(|(j, g)| c * weights[j] * &symmetrize(g))
                    .collect(),
            )
        }
        _ => unreachable!(),
    };

    Ok(ObjectiveEval { value, grad_weights, grad_means, grad_cov })
}

pub(crate) fn f2_diag_impl(
    weights: &ArrayView1<f64>,
    means: &ArrayView2<f64>,
    stddevs: &ArrayView2<f64>,
    x: &ArrayView2<f64>,
    d: usize,
    omega_sq: f64,
) -> Result<ObjectiveEval> {
    f2_impl(
        weights,
        means,
        &Covariance::Diagonal(stddevs.to_owned()),
        x,
        d,
        omega_sq,
    )
}

fn require_diagonal(params: &GmmParams) -> Result<&Array2<f64>> {
    match params.covariance() {
        Covariance::Diagonal(s) => Ok(s),
        Covariance::Full(_) => Err(Error::InvalidArgument(
            "operation requires the diagonal covariance representation".into(),
        )),
    }
}

fn require_full(params: &GmmParams) -> Result<&Vec<Array2<f64>>> {
    match params.covariance() {
        Covariance::Full(s) => Ok(s),
        Covariance::Diagonal(_) => Err(Error::InvalidArgument(
            "operation requires the full covariance representation".into(),
        )),
    }
}

/// `||M_d||^2` and gradients for a diagonal-covariance mixture.
pub fn f1_diag(params: &GmmParams, d: usize) -> Result<ObjectiveEval> {
    let stddevs = require_diagonal(params)?;
    f1_diag_impl(
        &params.weights().view(),
        &params.means().view(),
        &stddevs.view(),
        d,
        0.0,
    )
}

/// `||M_d||^2` and gradients for a full-covariance mixture.
pub fn f1_general(params: &GmmParams, d: usize) -> Result<ObjectiveEval> {
    let sigmas = require_full(params)?;
    f1_general_impl(&params.weights().view(), &params.means().view(), sigmas, d, 0.0)
}

/// Sample-average inner product `(1/p) sum_i <M_d, x_i^(⊗d)>` and gradients,
/// diagonal covariances.
pub fn f2_diag(params: &GmmParams, x: &SampleMatrix, d: usize) -> Result<ObjectiveEval> {
    let stddevs = require_diagonal(params)?;
    f2_diag_impl(
        &params.weights().view(),
        &params.means().view(),
        &stddevs.view(),
        &x.data().view(),
        d,
        0.0,
    )
}

/// Sample-average inner product, full covariances.
pub fn f2_general(params: &GmmParams, x: &SampleMatrix, d: usize) -> Result<ObjectiveEval> {
    let sigmas = require_full(params)?;
    f2_impl(
        &params.weights().view(),
        &params.means().view(),
        &Covariance::Full(sigmas.clone()),
        &x.data().view(),
        d,
        0.0,
    )
}

pub(crate) fn f2_general_impl(
    weights: &ArrayView1<f64>,
    means: &ArrayView2<f64>,
    sigmas: &[Array2<f64>],
    x: &ArrayView2<f64>,
    d: usize,
    omega_sq: f64,
) -> Result<ObjectiveEval> {
    f2_impl(
        weights,
        means,
        &Covariance::Full(sigmas.to_vec()),
        x,
        d,
        omega_sq,
    )
}

/// The parameter-free cross term `(1/p^2) sum_{i,j} <x_i, x_j>^d`.
///
/// Adding it to `F1 - 2 F2` turns the objective into the true squared
/// distance between the model and empirical moments. Cost is O(p^2 n).
pub fn empirical_cross_term(x: &SampleMatrix, d: usize) -> Result<f64> {
    check_order(d)?;
    let data = x.data();
    let p = data.ncols();
    if p == 0 {
        return Err(Error::EmptySamples);
    }
    let total = block_tree_sum(
        p,
        256,
        |range| {
            let xb = data.slice(ndarray::s![.., range]);
            let gram = xb.t().dot(data); // blk x p
            gram.iter().map(|g| g.powi(d as i32)).sum::<f64>()
        },
        |a, b| a + b,
    )
    .expect("p > 0");
    Ok(total / (p as f64 * p as f64))
}

/// The moment-matching objective `F1 - 2 F2` (plus the empirical cross term
/// when `include_constant` is set) with gradients, dispatching on the
/// covariance representation.
pub fn objective(
    params: &GmmParams,
    x: &SampleMatrix,
    d: usize,
    include_constant: bool,
) -> Result<ObjectiveEval> {
    let (f1, f2) = match params.covariance() {
        Covariance::Diagonal(_) => (f1_diag(params, d)?, f2_diag(params, x, d)?),
        Covariance::Full(_) => (f1_general(params, d)?, f2_general(params, x, d)?),
    };
    let mut combined = f1.combine(-2.0, &f2);
    if include_constant {
        combined.value += empirical_cross_term(x, d)?;
    }
    Ok(combined)
}
