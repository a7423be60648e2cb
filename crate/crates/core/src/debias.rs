//! Debiased moment estimation under known additive Gaussian noise, and the
//! rank-one moment-matching objective `f = f1 - 2 f2` it induces.
//!
//! With observations `x = y + z`, `z ~ N(0, Sigma)` and `Sigma` known, the
//! alternating-sign corrected empirical tensor is an unbiased estimator of
//! the order-d moment of `y`. Matching `sum_j lambda_j mu_j^(⊗d)` against it
//! is a symmetric rank-m decomposition problem; everything here evaluates it
//! implicitly through the same three-term recurrence as the plain objective,
//! with the noise covariance entering with a flipped sign.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::comb::check_order;
use crate::error::{Error, Result};
use crate::linalg::is_symmetric;
use crate::moments::{CovGrad, GmmParams, ObjectiveEval};
use crate::reduce::{block_tree_sum, SAMPLE_BLOCK};
use crate::sampling::{sample_gmm, SampleMatrix};
use crate::symtensor::{explicit_debiased_moment, outer_power, DenseSymTensor};

/// A known, component-independent noise covariance.
#[derive(Debug, Clone, PartialEq)]
pub enum KnownCov {
    /// Stddev vector; the covariance is `diag(d)^2`.
    Diagonal(Array1<f64>),
    Full(Array2<f64>),
}

impl KnownCov {
    pub fn dim(&self) -> usize {
        match self {
            KnownCov::Diagonal(d) => d.len(),
            KnownCov::Full(s) => s.nrows(),
        }
    }

    /// `Sigma v`.
    pub fn matvec(&self, v: &ArrayView1<f64>) -> Array1<f64> {
        match self {
            KnownCov::Diagonal(d) => d.mapv(|x| x * x) * v,
            KnownCov::Full(s) => s.dot(v),
        }
    }

    /// `v' Sigma v`.
    pub fn quad(&self, v: &ArrayView1<f64>) -> f64 {
        match self {
            KnownCov::Diagonal(d) => {
                v.iter().zip(d.iter()).map(|(vi, di)| vi * vi * di * di).sum()
            }
            KnownCov::Full(s) => v.dot(&s.dot(v)),
        }
    }

    pub fn to_matrix(&self) -> Array2<f64> {
        match self {
            KnownCov::Diagonal(d) => Array2::from_diag(&d.mapv(|x| x * x)),
            KnownCov::Full(s) => s.clone(),
        }
    }
}

/// Parameters of the decomposition problem: weights, means and the known
/// common covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct DebiasParams {
    weights: Array1<f64>,
    means: Array2<f64>,
    sigma: KnownCov,
}

impl DebiasParams {
    pub fn new(weights: Array1<f64>, means: Array2<f64>, sigma: KnownCov) -> Result<Self> {
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
        if (weights.sum() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidWeights(format!("weights sum to {}", weights.sum())));
        }
        if sigma.dim() != n {
            return Err(Error::ShapeMismatch("noise covariance dimension".into()));
        }
        if let KnownCov::Full(s) = &sigma {
            if !is_symmetric(&s.view(), 1e-12) {
                return Err(Error::ShapeMismatch("noise covariance not symmetric".into()));
            }
        }
        Ok(Self { weights, means, sigma })
    }

    pub fn weights(&self) -> &Array1<f64> {
        &self.weights
    }

    pub fn means(&self) -> &Array2<f64> {
        &self.means
    }

    pub fn sigma(&self) -> &KnownCov {
        &self.sigma
    }

    pub fn dim(&self) -> usize {
        self.means.nrows()
    }

    pub fn num_components(&self) -> usize {
        self.means.ncols()
    }

    /// The mixture this model generates: discrete means plus common noise.
    pub fn generating_mixture(&self) -> Result<GmmParams> {
        let m = self.num_components();
        let cov = match &self.sigma {
            KnownCov::Diagonal(d) => {
                let mut stddevs = Array2::zeros((self.dim(), m));
                for j in 0..m {
                    stddevs.column_mut(j).assign(d);
                }
                crate::moments::Covariance::Diagonal(stddevs)
            }
            KnownCov::Full(s) => crate::moments::Covariance::Full(vec![s.clone(); m]),
        };
        GmmParams::new(self.weights.clone(), self.means.clone(), cov)
    }

    fn zero_cov_grad(&self) -> CovGrad {
        CovGrad::Diagonal(Array2::zeros(self.means.dim()))
    }
}

/// `||sum_j lambda_j mu_j^(⊗d)||^2` with gradients: `B = A'A`,
/// `C = B^∘(d-1)`, `u = (B ∘ C) lambda`; value `lambda' u`, weight gradient
/// `2u`, mean gradient `2 d A diag(lambda) C diag(lambda)`.
pub(crate) fn fdeb1_impl(
    weights: &ArrayView1<f64>,
    means: &ArrayView2<f64>,
    d: usize,
    omega_sq: f64,
) -> Result<ObjectiveEval> {
    check_order(d)?;
    if d == 0 {
        return Err(Error::InvalidArgument("moment order must be >= 1".into()));
    }
    let mut gram = means.t().dot(means);
    if omega_sq != 0.0 {
        gram += omega_sq;
    }
    let c = gram.mapv(|x| x.powi(d as i32 - 1));
    let u = (&gram * &c).dot(weights);
    let value = weights.dot(&u);
    let grad_weights = 2.0 * &u;
    // 2 d A diag(lambda) C diag(lambda)
    let mut scaled = c.clone();
    for ((i, j), v) in scaled.indexed_iter_mut() {
        *v *= weights[i] * weights[j];
    }
    let grad_means = 2.0 * d as f64 * means.dot(&scaled);
    Ok(ObjectiveEval {
        value,
        grad_weights,
        grad_means,
        grad_cov: CovGrad::Diagonal(Array2::zeros(means.dim())),
    })
}

pub fn fdeb1(params: &DebiasParams, d: usize) -> Result<ObjectiveEval> {
    fdeb1_impl(&params.weights().view(), &params.means().view(), d, 0.0)
}

struct Fdeb2Partial {
    /// X R1 over the block (n x m).
    xr1: Array2<f64>,
    /// Column sums of R2 (m).
    r2_sum: Array1<f64>,
    /// Column sums of beta^(d) (m).
    w: Array1<f64>,
}

/// `(1/p) sum_i <T_hat_i, sum_j lambda_j mu_j^(⊗d)>` via the recurrence
/// `beta^(k) = beta^(k-1) mu'x - (k-1) beta^(k-2) mu' Sigma mu`.
pub(crate) fn fdeb2_impl(
    weights: &ArrayView1<f64>,
    means: &ArrayView2<f64>,
    sigma: &KnownCov,
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
    if x.nrows() != n || sigma.dim() != n {
        return Err(Error::ShapeMismatch("sample or covariance dimension".into()));
    }
    // u_j = mu_j' Sigma mu_j; the recurrence's second cumulant is -u_j.
    let quads = Array1::from_iter((0..m).map(|j| sigma.quad(&means.column(j))));

    let partial = block_tree_sum(
        p,
        SAMPLE_BLOCK,
        |range| {
            let xb = x.slice(ndarray::s![.., range]);
            let mut v = xb.t().dot(means);
            if omega_sq != 0.0 {
                v += omega_sq;
            }
            let blk = xb.ncols();
            let (r1, r2) = {
                if d == 1 {
                    (Array2::ones((blk, m)), Array2::zeros((blk, m)))
                } else {
                    let mut r2 = Array2::<f64>::ones((blk, m));
                    let mut r1 = v.clone();
                    for k in 2..d {
                        let r3 = r2;
                        r2 = r1;
                        let mut scaled = r3;
                        for (j, mut col) in scaled.columns_mut().into_iter().enumerate() {
                            col *= quads[j];
                        }
                        r1 = &r2 * &v - (k - 1) as f64 * &scaled;
                    }
                    (r1, r2)
                }
            };
            // beta^(d) column sums: R1 * V - (d-1) R2 scaled by quads.
            let mut w = (&r1 * &v).sum_axis(Axis(0));
            let r2_sum = r2.sum_axis(Axis(0));
            for j in 0..m {
                w[j] -= (d - 1) as f64 * r2_sum[j] * quads[j];
            }
            Fdeb2Partial { xr1: xb.dot(&r1), r2_sum, w }
        },
        |mut a, b| {
            a.xr1 += &b.xr1;
            a.r2_sum += &b.r2_sum;
            a.w += &b.w;
            a
        },
    )
    .expect("p > 0");

    let pf = p as f64;
    // z_j = (1/p) (sum_i beta^(d-1) x_i - (d-1) (sum_i beta^(d-2)) Sigma mu_j)
    let mut z = partial.xr1 / pf;
    for j in 0..m {
        let corr = (d - 1) as f64 * partial.r2_sum[j] / pf;
        let sig_mu = sigma.matvec(&means.column(j));
        let col = &z.column(j) - &(corr * &sig_mu);
        z.column_mut(j).assign(&col);
    }
    let w = partial.w / pf;
    let value = weights.dot(&w);
    let mut grad_means = z * d as f64;
    for (j, mut col) in grad_means.columns_mut().into_iter().enumerate() {
        col *= weights[j];
    }
    Ok(ObjectiveEval {
        value,
        grad_weights: w,
        grad_means,
        grad_cov: CovGrad::Diagonal(Array2::zeros(means.dim())),
    })
}

pub fn fdeb2(params: &DebiasParams, x: &SampleMatrix, d: usize) -> Result<ObjectiveEval> {
    fdeb2_impl(
        &params.weights().view(),
        &params.means().view(),
        params.sigma(),
        &x.data().view(),
        d,
        0.0,
    )
}

/// Full objective `f1 - 2 f2` with combined gradients.
pub fn fdeb(params: &DebiasParams, x: &SampleMatrix, d: usize) -> Result<ObjectiveEval> {
    let f1 = fdeb1(params, d)?;
    let f2 = fdeb2(params, x, d)?;
    let mut out = f1.combine(-2.0, &f2);
    out.grad_cov = params.zero_cov_grad();
    Ok(out)
}

/// Rank-one sum `sum_j lambda_j mu_j^(⊗d)` as a dense tensor (reference
/// scale only).
pub fn explicit_mean_moment(
    weights: &ArrayView1<f64>,
    means: &ArrayView2<f64>,
    d: usize,
) -> Result<DenseSymTensor> {
    let mut t = DenseSymTensor::zeros(means.nrows(), d)?;
    for j in 0..means.ncols() {
        t.add_scaled(&outer_power(&means.column(j), d)?, weights[j])?;
    }
    Ok(t)
}

/// Draws increasingly many samples from the generating mixture and reports
/// the dense-tensor error `||T_d - T_d_hat||` of the debiased estimator for
/// each sample count.
pub fn unbiasedness_experiment(
    model: &DebiasParams,
    d: usize,
    p_grid: &[usize],
    seed: u64,
) -> Result<Vec<(usize, f64)>> {
    let mixture = model.generating_mixture()?;
    let target = explicit_mean_moment(&model.weights().view(), &model.means().view(), d)?;
    let sigma = model.sigma().to_matrix();
    let mut rows = Vec::with_capacity(p_grid.len());
    for (idx, &p) in p_grid.iter().enumerate() {
        let x = sample_gmm(&mixture, p, seed.wrapping_add(idx as u64))?;
        let estimate = explicit_debiased_moment(&x, &sigma.view(), d)?;
        rows.push((p, target.sub(&estimate)?.norm()));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bell::{bell_prefix, CumulantVector};
    use crate::moments::moment_dot_prefix;
    use crate::symtensor::inner;
    use ndarray::array;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_params(rng: &mut impl Rng, n: usize, m: usize, sigma: KnownCov) -> DebiasParams {
        let raw: Vec<f64> = (0..m).map(|_| rng.gen_range(0.2..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let weights = Array1::from_vec(raw.iter().map(|x| x / total).collect());
        let means = Array2::from_shape_fn((n, m), |_| rng.gen_range(-1.0..1.0));
        DebiasParams::new(weights, means, sigma).unwrap()
    }

    #[test]
    fn fdeb1_single_component_norm_power() {
        let params = DebiasParams::new(
            array![1.0],
            array![[0.6], [-0.8]],
            KnownCov::Diagonal(array![0.0, 0.0]),
        )
        .unwrap();
        for d in 1..=4 {
            let eval = fdeb1(&params, d).unwrap();
            let want = 1.0f64.powi(d as i32); // ||mu|| = 1 here
            assert!((eval.value - want).abs() < 1e-12);
        }
    }

    #[test]
    fn fdeb1_matches_dense_tensor() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let params = random_params(&mut rng, 2, 3, KnownCov::Diagonal(array![0.0, 0.0]));
        let d = 3;
        let eval = fdeb1(&params, d).unwrap();
        let t = explicit_mean_moment(&params.weights().view(), &params.means().view(), d).unwrap();
        let want = inner(&t, &t).unwrap();
        assert!((eval.value - want).abs() <= 1e-10 * (1.0 + want.abs()));
    }

    #[test]
    fn fdeb1_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let params = random_params(&mut rng, 3, 2, KnownCov::Diagonal(array![0.0, 0.0, 0.0]));
        let d = 4;
        let eval = fdeb1(&params, d).unwrap();
        let h = 1e-6;
        // Means.
        for r in 0..3 {
            for j in 0..2 {
                let mut mp = params.means().clone();
                mp[[r, j]] += h;
                let mut mm = params.means().clone();
                mm[[r, j]] -= h;
                let fp = fdeb1_impl(&params.weights().view(), &mp.view(), d, 0.0).unwrap().value;
                let fm = fdeb1_impl(&params.weights().view(), &mm.view(), d, 0.0).unwrap().value;
                let fd = (fp - fm) / (2.0 * h);
                let got = eval.grad_means[[r, j]];
                assert!((got - fd).abs() <= 1e-5 * (1.0 + fd.abs()), "mean grad {got} vs {fd}");
            }
        }
        // Weights (unconstrained directional check).
        for j in 0..2 {
            let mut wp = params.weights().clone();
            wp[j] += h;
            let mut wm = params.weights().clone();
            wm[j] -= h;
            let fp = fdeb1_impl(&wp.view(), &params.means().view(), d, 0.0).unwrap().value;
            let fm = fdeb1_impl(&wm.view(), &params.means().view(), d, 0.0).unwrap().value;
            let fd = (fp - fm) / (2.0 * h);
            let got = eval.grad_weights[j];
            assert!((got - fd).abs() <= 1e-5 * (1.0 + fd.abs()));
        }
    }

    #[test]
    fn fdeb2_zero_noise_is_plain_power_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let params = random_params(&mut rng, 2, 2, KnownCov::Diagonal(array![0.0, 0.0]));
        let x = SampleMatrix::new(Array2::from_shape_fn((2, 7), |_| rng.gen_range(-1.0..1.0)))
            .unwrap();
        let d = 4;
        let eval = fdeb2(&params, &x, d).unwrap();
        let mut want = 0.0;
        for i in 0..7 {
            for j in 0..2 {
                want += params.weights()[j]
                    * params.means().column(j).dot(&x.data().column(i)).powi(d as i32);
            }
        }
        want /= 7.0;
        assert!((eval.value - want).abs() <= 1e-12 * (1.0 + want.abs()));
    }

    #[test]
    fn fdeb2_matches_dense_debiased_tensor() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let sigma_full = array![[0.4, 0.2], [0.2, 0.3]];
        let params = random_params(&mut rng, 2, 2, KnownCov::Full(sigma_full.clone()));
        let x = SampleMatrix::new(Array2::from_shape_fn((2, 10), |_| rng.gen_range(-1.5..1.5)))
            .unwrap();
        let d = 4;
        let eval = fdeb2(&params, &x, d).unwrap();
        let dense = explicit_debiased_moment(&x, &sigma_full.view(), d).unwrap();
        let mut want = 0.0;
        for j in 0..2 {
            let rank1 = outer_power(&params.means().column(j), d).unwrap();
            want += params.weights()[j] * inner(&rank1, &dense).unwrap();
        }
        assert!(
            (eval.value - want).abs() <= 1e-9 * (1.0 + want.abs()),
            "implicit {} vs dense {want}",
            eval.value
        );
    }

    #[test]
    fn fdeb2_per_sample_value_is_a_bell_evaluation() {
        // The recurrence is exactly the Bell recursion at cumulants
        // (mu'x, -mu' Sigma mu, 0, 0, ...).
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        let sigma = array![[0.5, 0.1], [0.1, 0.2]];
        let params = random_params(&mut rng, 2, 1, KnownCov::Full(sigma.clone()));
        let xi = array![0.7, -0.4];
        let x = SampleMatrix::new(xi.clone().insert_axis(ndarray::Axis(1))).unwrap();
        let d = 5;
        let eval = fdeb2(&params, &x, d).unwrap();
        let mu = params.means().column(0);
        let s1 = mu.dot(&xi);
        let s2 = -mu.dot(&sigma.dot(&mu));
        let mut kappas = vec![0.0; d];
        kappas[0] = s1;
        kappas[1] = s2;
        let bell = bell_prefix(&CumulantVector::new(kappas).unwrap()).unwrap();
        assert!((eval.value - bell.get(d)).abs() <= 1e-12 * (1.0 + bell.get(d).abs()));
        // And the three-term prefix agrees with the Bell recursion.
        let prefix = moment_dot_prefix(s1, s2, d);
        for k in 0..=d {
            assert!((prefix[k] - bell.get(k)).abs() <= 1e-12 * (1.0 + bell.get(k).abs()));
        }
    }

    #[test]
    fn beta_is_alpha_with_flipped_noise_sign() {
        let s1 = 0.83;
        let s2 = 0.41;
        let d = 6;
        let alpha = moment_dot_prefix(s1, s2, d);
        let beta = moment_dot_prefix(s1, -s2, d);
        // Flipping the sign of the second cumulant is exactly the debiasing
        // recurrence; check it against a direct loop.
        let mut direct = vec![1.0, s1];
        for k in 2..=d {
            direct.push(direct[k - 1] * s1 - (k - 1) as f64 * direct[k - 2] * s2);
        }
        for k in 0..=d {
            assert_eq!(beta[k], direct[k]);
        }
        assert_ne!(alpha[2], beta[2]);
    }

    #[test]
    fn fdeb_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(26);
        let sigma = array![[0.4, 0.15], [0.15, 0.3]];
        let params = random_params(&mut rng, 2, 3, KnownCov::Full(sigma));
        let x = SampleMatrix::new(Array2::from_shape_fn((2, 9), |_| rng.gen_range(-1.0..1.0)))
            .unwrap();
        let d = 3;
        let eval = fdeb(&params, &x, d).unwrap();
        let h = 1e-6;
        for r in 0..2 {
            for j in 0..3 {
                let mut mp = params.means().clone();
                mp[[r, j]] += h;
                let mut mm = params.means().clone();
                mm[[r, j]] -= h;
                let pp = DebiasParams::new(params.weights().clone(), mp, params.sigma().clone())
                    .unwrap();
                let pm = DebiasParams::new(params.weights().clone(), mm, params.sigma().clone())
                    .unwrap();
                let fd = (fdeb(&pp, &x, d).unwrap().value - fdeb(&pm, &x, d).unwrap().value)
                    / (2.0 * h);
                let got = eval.grad_means[[r, j]];
                assert!(
                    (got - fd).abs() <= 1e-5 * (1.0 + fd.abs()),
                    "fdeb mean grad ({r},{j}): {got} vs {fd}"
                );
            }
        }
    }

    #[test]
    fn fdeb_with_constant_is_squared_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(27);
        let sigma = array![[0.3, 0.1], [0.1, 0.25]];
        let params = random_params(&mut rng, 2, 2, KnownCov::Full(sigma.clone()));
        let x = SampleMatrix::new(Array2::from_shape_fn((2, 8), |_| rng.gen_range(-1.0..1.0)))
            .unwrap();
        let d = 3;
        let eval = fdeb(&params, &x, d).unwrap();
        let t = explicit_mean_moment(&params.weights().view(), &params.means().view(), d).unwrap();
        let that = explicit_debiased_moment(&x, &sigma.view(), d).unwrap();
        let constant = inner(&that, &that).unwrap();
        let want = t.sub(&that).unwrap().norm().powi(2);
        assert!(
            (eval.value + constant - want).abs() <= 1e-9 * (1.0 + want.abs()),
            "f + ||T_hat||^2 = {} vs ||T - T_hat||^2 = {want}",
            eval.value + constant
        );
    }

    #[test]
    fn unbiasedness_experiment_error_shrinks() {
        let model = crate::presets::demo_debias_2d();
        let rows = unbiasedness_experiment(&model, 3, &[100, 10_000], 5).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows[1].1 < rows[0].1, "error should drop with more samples: {rows:?}");
    }

    #[test]
    fn unbiasedness_point_mass_case() {
        // Zero noise: the error is the deviation of the empirical discrete
        // moment from the exact one.
        let model = DebiasParams::new(
            array![0.5, 0.5],
            array![[1.0, -1.0], [0.5, 0.5]],
            KnownCov::Diagonal(array![0.0, 0.0]),
        )
        .unwrap();
        let rows = unbiasedness_experiment(&model, 3, &[4], 11).unwrap();
        let (p, err) = rows[0];
        assert_eq!(p, 4);
        // Manually recompute: draw the same samples and compare.
        let mixture = model.generating_mixture().unwrap();
        let x = sample_gmm(&mixture, 4, 11).unwrap();
        let emp = crate::symtensor::explicit_empirical_moment(&x, 3).unwrap();
        let t = explicit_mean_moment(&model.weights().view(), &model.means().view(), 3).unwrap();
        let want = t.sub(&emp).unwrap().norm();
        assert!((err - want).abs() < 1e-12);
    }
}
