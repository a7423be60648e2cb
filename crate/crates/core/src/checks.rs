//! Reusable validation suites: implicit-vs-dense equivalence sweeps,
//! finite-difference gradient audits, exact combinatorial identities, and
//! the sampling-convergence experiments. The `validate` CLI command runs
//! these; the acceptance tests assert on their outcomes.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::augment::{objective_implicit_augmented, rescale_mixture};
use crate::bell::{bell_prefix, delta_identity_check, CumulantVector};
use crate::comb::{binomial, factorial};
use crate::debias::{explicit_mean_moment, fdeb, fdeb1, fdeb2, DebiasParams, KnownCov};
use crate::error::Result;
use crate::estimator::lbfgs::SmoothObjective;
use crate::estimator::{DebiasImplicit, DebiasPostproc, MomentsImplicit, MomentsPostproc};
use crate::moments::{
    f1_diag, f1_general, f2_diag, f2_general, objective, psi_grad_mu, psi_grad_sigma, psi_inner,
    CovGrad, Covariance, GmmParams,
};
use crate::presets::{demo_debias_2d, demo_mixture_2d};
use crate::sampling::{sample_gmm, SampleMatrix};
use crate::symtensor::{
    explicit_debiased_moment, explicit_empirical_moment, explicit_gmm_moment, inner, outer_power,
    sym, tensor_product, DenseSymTensor,
};

/// One named check with its measured statistic and threshold.
#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: String,
    pub statistic: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl CheckOutcome {
    fn at_most(name: &str, statistic: f64, threshold: f64) -> Self {
        Self { name: name.into(), statistic, threshold, pass: statistic <= threshold }
    }
}

/// Sample counts used by the convergence experiments: half decades from
/// 10^2 to 10^5.
pub const CONVERGENCE_P_GRID: [usize; 7] = [100, 316, 1000, 3162, 10_000, 31_623, 100_000];

fn rel_err(got: f64, want: f64) -> f64 {
    (got - want).abs() / (1.0 + want.abs())
}

fn random_simplex(rng: &mut impl Rng, m: usize) -> Array1<f64> {
    let raw: Vec<f64> = (0..m).map(|_| rng.gen_range(0.2..1.0)).collect();
    let total: f64 = raw.iter().sum();
    Array1::from_vec(raw.iter().map(|x| x / total).collect())
}

fn random_psd(rng: &mut impl Rng, n: usize) -> Array2<f64> {
    let a = Array2::from_shape_fn((n, n), |_| rng.gen_range(-0.6..0.6));
    a.dot(&a.t()) + Array2::<f64>::eye(n) * 0.05
}

fn random_full_params(rng: &mut impl Rng, n: usize, m: usize) -> GmmParams {
    GmmParams::new_full(
        random_simplex(rng, m),
        Array2::from_shape_fn((n, m), |_| rng.gen_range(-1.0..1.0)),
        (0..m).map(|_| random_psd(rng, n)).collect(),
    )
    .expect("valid by construction")
}

fn random_diag_params(rng: &mut impl Rng, n: usize, m: usize) -> GmmParams {
    GmmParams::new_diagonal(
        random_simplex(rng, m),
        Array2::from_shape_fn((n, m), |_| rng.gen_range(-1.0..1.0)),
        Array2::from_shape_fn((n, m), |_| rng.gen_range(0.15..0.9)),
    )
    .expect("valid by construction")
}

fn random_samples(rng: &mut impl Rng, n: usize, p: usize) -> SampleMatrix {
    SampleMatrix::new(Array2::from_shape_fn((n, p), |_| rng.gen_range(-1.5..1.5)))
        .expect("finite by construction")
}

/// Sweeps random configurations and compares every implicit objective value
/// against its dense-tensor counterpart: the squared model-moment norm, the
/// sample-average inner product, the full objective with its constant, and
/// both terms of the debiased decomposition objective.
pub fn oracle_equivalence_suite(seed: u64) -> Vec<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst_f1 = 0.0f64;
    let mut worst_f2 = 0.0f64;
    let mut worst_obj = 0.0f64;
    let mut worst_deb1 = 0.0f64;
    let mut worst_deb2 = 0.0f64;
    let mut configs = 0usize;
    for n in [2usize, 3] {
        for m in [1usize, 2, 3] {
            for d in 1..=6usize {
                for p in [1usize, 2, 5, 9, 14, 20] {
                    configs += 1;
                    let params = random_full_params(&mut rng, n, m);
                    let x = random_samples(&mut rng, n, p);

                    let dense = explicit_gmm_moment(&params, d).expect("oracle scale");
                    let f1 = f1_general(&params, d).expect("valid");
                    worst_f1 =
                        worst_f1.max(rel_err(f1.value, inner(&dense, &dense).expect("shapes")));

                    let f2 = f2_general(&params, &x, d).expect("valid");
                    let mut dense_f2 = 0.0;
                    for i in 0..p {
                        let rank1 = outer_power(&x.data().column(i), d).expect("scale");
                        dense_f2 += inner(&dense, &rank1).expect("shapes");
                    }
                    dense_f2 /= p as f64;
                    worst_f2 = worst_f2.max(rel_err(f2.value, dense_f2));

                    let obj = objective(&params, &x, d, true).expect("valid");
                    let emp = explicit_empirical_moment(&x, d).expect("scale");
                    let dense_obj = dense.sub(&emp).expect("shapes").norm().powi(2);
                    worst_obj = worst_obj.max(rel_err(obj.value, dense_obj));

                    // Debiased objective against the dense corrected tensor.
                    let sigma = random_psd(&mut rng, n);
                    let deb = DebiasParams::new(
                        params.weights().clone(),
                        params.means().clone(),
                        KnownCov::Full(sigma.clone()),
                    )
                    .expect("valid");
                    let t = explicit_mean_moment(&deb.weights().view(), &deb.means().view(), d)
                        .expect("scale");
                    let d1 = fdeb1(&deb, d).expect("valid");
                    worst_deb1 =
                        worst_deb1.max(rel_err(d1.value, inner(&t, &t).expect("shapes")));

                    let that = explicit_debiased_moment(&x, &sigma.view(), d).expect("scale");
                    let d2 = fdeb2(&deb, &x, d).expect("valid");
                    worst_deb2 =
                        worst_deb2.max(rel_err(d2.value, inner(&t, &that).expect("shapes")));
                }
            }
        }
    }
    debug_assert!(configs >= 200, "sweep covers only {configs} configurations");
    vec![
        CheckOutcome::at_most("model moment norm vs dense tensor", worst_f1, 1e-8),
        CheckOutcome::at_most("sample average term vs dense tensor", worst_f2, 1e-8),
        CheckOutcome::at_most("full objective vs dense distance", worst_obj, 1e-8),
        CheckOutcome::at_most("debiased rank-one norm vs dense tensor", worst_deb1, 1e-8),
        CheckOutcome::at_most("debiased cross term vs dense tensor", worst_deb2, 1e-8),
    ]
}

fn fd_worst(obj: &dyn SmoothObjective, x0: &[f64]) -> f64 {
    let mut grad = vec![0.0; x0.len()];
    let value = obj.eval(x0, &mut grad);
    debug_assert!(value.is_finite());
    let mut scratch = vec![0.0; x0.len()];
    let mut worst = 0.0f64;
    for i in 0..x0.len() {
        let h = 1e-5 * (1.0 + x0[i].abs());
        let mut plus = x0.to_vec();
        plus[i] += h;
        let mut minus = x0.to_vec();
        minus[i] -= h;
        let fd = (obj.eval(&plus, &mut scratch) - obj.eval(&minus, &mut scratch)) / (2.0 * h);
        worst = worst.max((grad[i] - fd).abs() / (1.0 + fd.abs()));
    }
    worst
}

/// A value function over (weights, means, aux-matrix).
type ValueFn<'a> = dyn FnMut(&Array1<f64>, &Array2<f64>, &Array2<f64>) -> f64 + 'a;

/// Worst relative deviation of analytic gradients from central finite
/// differences.
fn objective_eval_fd_worst(
    value_of: &mut ValueFn,
    at: (&Array1<f64>, &Array2<f64>, &Array2<f64>),
    grads: (&Array1<f64>, &Array2<f64>, Option<&Array2<f64>>),
) -> f64 {
    let (w, a, s) = at;
    let (gw, ga, gs) = grads;
    let mut worst = 0.0f64;
    for j in 0..w.len() {
        let h = 1e-5 * (1.0 + w[j].abs());
        let mut p = w.clone();
        p[j] += h;
        let mut q = w.clone();
        q[j] -= h;
        let fd = (value_of(&p, a, s) - value_of(&q, a, s)) / (2.0 * h);
        worst = worst.max((gw[j] - fd).abs() / (1.0 + fd.abs()));
    }
    for ((r, j), &g) in ga.indexed_iter() {
        let h = 1e-5 * (1.0 + a[[r, j]].abs());
        let mut p = a.clone();
        p[[r, j]] += h;
        let mut q = a.clone();
        q[[r, j]] -= h;
        let fd = (value_of(w, &p, s) - value_of(w, &q, s)) / (2.0 * h);
        worst = worst.max((g - fd).abs() / (1.0 + fd.abs()));
    }
    if let Some(gs) = gs {
        for ((r, j), &g) in gs.indexed_iter() {
            let h = 1e-5 * (1.0 + s[[r, j]].abs());
            let mut p = s.clone();
            p[[r, j]] += h;
            let mut q = s.clone();
            q[[r, j]] -= h;
            let fd = (value_of(w, a, &p) - value_of(w, a, &q)) / (2.0 * h);
            worst = worst.max((g - fd).abs() / (1.0 + fd.abs()));
        }
    }
    worst
}

/// FD check over per-component symmetric covariance matrices, perturbing
/// `(r, c)` and `(c, r)` together; the analytic gradients are symmetrized so
/// the off-diagonal response is twice the stored entry.
fn fd_worst_full_sigma(
    value_of: &mut dyn FnMut(&[Array2<f64>]) -> f64,
    sigmas: &[Array2<f64>],
    grads: &[Array2<f64>],
) -> f64 {
    let mut worst = 0.0f64;
    for j in 0..sigmas.len() {
        let n = sigmas[j].nrows();
        for r in 0..n {
            for c in r..n {
                let h = 1e-5;
                let mut plus = sigmas.to_vec();
                plus[j][[r, c]] += h;
                let mut minus = sigmas.to_vec();
                minus[j][[r, c]] -= h;
                if r != c {
                    plus[j][[c, r]] += h;
                    minus[j][[c, r]] -= h;
                }
                let fd = (value_of(&plus) - value_of(&minus)) / (2.0 * h);
                let want = if r == c { grads[j][[r, r]] } else { 2.0 * grads[j][[r, c]] };
                worst = worst.max((want - fd).abs() / (1.0 + fd.abs()));
            }
        }
    }
    worst
}

/// Checks every analytic gradient in the crate against central finite
/// differences at random non-degenerate points.
pub fn gradient_suite(seed: u64) -> Vec<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = 20usize;
    let tol = 1e-5;
    let mut out = Vec::new();

    // Pair inner-product gradients, full covariances.
    let mut worst = 0.0f64;
    for _ in 0..points {
        let n = 3;
        let d = 2 + (rng.gen::<u32>() % 4) as usize;
        let mu = Array1::from_shape_fn(n, |_| rng.gen_range(-1.0..1.0));
        let mu_t = Array1::from_shape_fn(n, |_| rng.gen_range(-1.0..1.0));
        let sigma = random_psd(&mut rng, n);
        let sigma_t = random_psd(&mut rng, n);
        let gm = psi_grad_mu(&mu.view(), &sigma.view(), &mu_t.view(), &sigma_t.view(), d)
            .expect("valid");
        for i in 0..n {
            let h = 1e-5 * (1.0 + mu[i].abs());
            let mut p = mu.clone();
            p[i] += h;
            let mut q = mu.clone();
            q[i] -= h;
            let fd = (psi_inner(&p.view(), &sigma.view(), &mu_t.view(), &sigma_t.view(), d)
                .expect("valid")
                - psi_inner(&q.view(), &sigma.view(), &mu_t.view(), &sigma_t.view(), d)
                    .expect("valid"))
                / (2.0 * h);
            worst = worst.max((gm[i] - fd).abs() / (1.0 + fd.abs()));
        }
        let gs = psi_grad_sigma(&mu.view(), &sigma.view(), &mu_t.view(), &sigma_t.view(), d)
            .expect("valid");
        let mut value_of = |list: &[Array2<f64>]| {
            psi_inner(&mu.view(), &list[0].view(), &mu_t.view(), &sigma_t.view(), d)
                .expect("valid")
        };
        worst =
            worst.max(fd_worst_full_sigma(&mut value_of, std::slice::from_ref(&sigma), std::slice::from_ref(&gs)));
    }
    out.push(CheckOutcome::at_most("pair inner-product gradients", worst, tol));

    // Diagonal-path moment norm.
    let mut worst = 0.0f64;
    for _ in 0..points {
        let (n, m) = (3, 2);
        let d = 3 + (rng.gen::<u32>() % 3) as usize;
        let params = random_diag_params(&mut rng, n, m);
        let Covariance::Diagonal(stddevs) = params.covariance().clone() else { unreachable!() };
        let f1 = f1_diag(&params, d).expect("valid");
        let CovGrad::Diagonal(gd) = &f1.grad_cov else { unreachable!() };
        let mut value_of = |w: &Array1<f64>, a: &Array2<f64>, s: &Array2<f64>| {
            crate::moments::f1_diag_impl(&w.view(), &a.view(), &s.view(), d, 0.0)
                .expect("valid")
                .value
        };
        worst = worst.max(objective_eval_fd_worst(
            &mut value_of,
            (params.weights(), params.means(), &stddevs),
            (&f1.grad_weights, &f1.grad_means, Some(gd)),
        ));
    }
    out.push(CheckOutcome::at_most("moment norm gradients, diagonal path", worst, tol));

    // General-path moment norm.
    let mut worst = 0.0f64;
    for _ in 0..points {
        let (n, m, d) = (2, 2, 3);
        let params = random_full_params(&mut rng, n, m);
        let Covariance::Full(sigmas) = params.covariance().clone() else { unreachable!() };
        let f1 = f1_general(&params, d).expect("valid");
        let CovGrad::Full(gs) = &f1.grad_cov else { unreachable!() };
        let mut value_of = |w: &Array1<f64>, a: &Array2<f64>, _s: &Array2<f64>| {
            crate::moments::f1_general_impl(&w.view(), &a.view(), &sigmas, d, 0.0)
                .expect("valid")
                .value
        };
        let dummy = Array2::<f64>::zeros((1, 1));
        worst = worst.max(objective_eval_fd_worst(
            &mut value_of,
            (params.weights(), params.means(), &dummy),
            (&f1.grad_weights, &f1.grad_means, None),
        ));
        let w = params.weights().clone();
        let a = params.means().clone();
        let mut value_of = |list: &[Array2<f64>]| {
            crate::moments::f1_general_impl(&w.view(), &a.view(), list, d, 0.0)
                .expect("valid")
                .value
        };
        worst = worst.max(fd_worst_full_sigma(&mut value_of, &sigmas, gs));
    }
    out.push(CheckOutcome::at_most("moment norm gradients, general path", worst, tol));

    // Sample-average term, both paths.
    let mut worst_diag = 0.0f64;
    let mut worst_full = 0.0f64;
    for _ in 0..points {
        let (n, m, d) = (3, 2, 4);
        let x = random_samples(&mut rng, n, 8);
        let xv = x.data().view();

        let params = random_diag_params(&mut rng, n, m);
        let Covariance::Diagonal(stddevs) = params.covariance().clone() else { unreachable!() };
        let f2 = f2_diag(&params, &x, d).expect("valid");
        let CovGrad::Diagonal(gd) = &f2.grad_cov else { unreachable!() };
        let mut value_of = |w: &Array1<f64>, a: &Array2<f64>, s: &Array2<f64>| {
            crate::moments::f2_diag_impl(&w.view(), &a.view(), &s.view(), &xv, d, 0.0)
                .expect("valid")
                .value
        };
        worst_diag = worst_diag.max(objective_eval_fd_worst(
            &mut value_of,
            (params.weights(), params.means(), &stddevs),
            (&f2.grad_weights, &f2.grad_means, Some(gd)),
        ));

        let params = random_full_params(&mut rng, n, m);
        let Covariance::Full(sigmas) = params.covariance().clone() else { unreachable!() };
        let f2 = f2_general(&params, &x, d).expect("valid");
        let CovGrad::Full(gs) = &f2.grad_cov else { unreachable!() };
        let mut value_of = |w: &Array1<f64>, a: &Array2<f64>, _s: &Array2<f64>| {
            crate::moments::f2_general_impl(&w.view(), &a.view(), &sigmas, &xv, d, 0.0)
                .expect("valid")
                .value
        };
        let dummy = Array2::<f64>::zeros((1, 1));
        worst_full = worst_full.max(objective_eval_fd_worst(
            &mut value_of,
            (params.weights(), params.means(), &dummy),
            (&f2.grad_weights, &f2.grad_means, None),
        ));
        let w = params.weights().clone();
        let a = params.means().clone();
        let mut value_of = |list: &[Array2<f64>]| {
            crate::moments::f2_general_impl(&w.view(), &a.view(), list, &xv, d, 0.0)
                .expect("valid")
                .value
        };
        worst_full = worst_full.max(fd_worst_full_sigma(&mut value_of, &sigmas, gs));
    }
    out.push(CheckOutcome::at_most("sample average gradients, diagonal path", worst_diag, tol));
    out.push(CheckOutcome::at_most("sample average gradients, general path", worst_full, tol));

    // Debias objective gradients.
    let mut worst = 0.0f64;
    for _ in 0..points {
        let (n, m, d) = (3, 2, 4);
        let sigma = KnownCov::Full(random_psd(&mut rng, n));
        let params = DebiasParams::new(
            random_simplex(&mut rng, m),
            Array2::from_shape_fn((n, m), |_| rng.gen_range(-1.0..1.0)),
            sigma.clone(),
        )
        .expect("valid");
        let x = random_samples(&mut rng, n, 7);
        let xv = x.data().view();
        let eval = fdeb(&params, &x, d).expect("valid");
        let mut value_of = |w: &Array1<f64>, a: &Array2<f64>, _s: &Array2<f64>| {
            let f1 = crate::debias::fdeb1_impl(&w.view(), &a.view(), d, 0.0).expect("valid");
            let f2 = crate::debias::fdeb2_impl(&w.view(), &a.view(), &sigma, &xv, d, 0.0)
                .expect("valid");
            f1.value - 2.0 * f2.value
        };
        let dummy = Array2::<f64>::zeros((1, 1));
        worst = worst.max(objective_eval_fd_worst(
            &mut value_of,
            (params.weights(), params.means(), &dummy),
            (&eval.grad_weights, &eval.grad_means, None),
        ));
    }
    out.push(CheckOutcome::at_most("debiased objective gradients", worst, tol));

    // Augmented (implicit) objective over the original coordinates.
    let mut worst = 0.0f64;
    for _ in 0..points {
        let (n, m, d) = (2, 2, 3);
        let omega: f64 = rng.gen_range(0.3..1.0);
        let params = random_diag_params(&mut rng, n, m);
        let Covariance::Diagonal(stddevs) = params.covariance().clone() else { unreachable!() };
        let x = random_samples(&mut rng, n, 6);
        let eval = objective_implicit_augmented(&params, &x, d, omega).expect("valid");
        let CovGrad::Diagonal(gd) = &eval.grad_cov else { unreachable!() };
        let omega_sq = omega * omega;
        // Perturbed weights may leave the simplex; evaluate the raw
        // implementations directly.
        let mut value_of = |w: &Array1<f64>, a: &Array2<f64>, s: &Array2<f64>| {
            let f1 = crate::moments::f1_diag_impl(&w.view(), &a.view(), &s.view(), d, omega_sq)
                .expect("valid");
            let f2 = crate::moments::f2_diag_impl(
                &w.view(),
                &a.view(),
                &s.view(),
                &x.data().view(),
                d,
                omega_sq,
            )
            .expect("valid");
            f1.value - 2.0 * f2.value
        };
        worst = worst.max(objective_eval_fd_worst(
            &mut value_of,
            (params.weights(), params.means(), &stddevs),
            (&eval.grad_weights, &eval.grad_means, Some(gd)),
        ));
    }
    out.push(CheckOutcome::at_most("augmented objective gradients", worst, tol));

    // Reparameterized estimator objectives (softmax weights, relaxed
    // augmented coordinates) exactly as the optimizer sees them.
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let (n, m, d) = (2, 2, 3);
        let x = random_samples(&mut rng, n, 6);
        let xa = x.augment(0.5).expect("not augmented");
        let sigma = KnownCov::Full(random_psd(&mut rng, n));
        let sigma_aug = match &sigma {
            KnownCov::Full(s) => {
                let mut padded = Array2::<f64>::zeros((n + 1, n + 1));
                padded.slice_mut(ndarray::s![..n, ..n]).assign(s);
                KnownCov::Full(padded)
            }
            KnownCov::Diagonal(_) => unreachable!(),
        };
        let uniform = Array1::from_elem(m, 1.0 / m as f64);

        let p1 = MomentsImplicit { x: x.data().view(), n, m, d, omega_sq: 0.25 };
        let x0: Vec<f64> = (0..p1.dim()).map(|_| rng.gen_range(-0.8..0.8)).collect();
        worst = worst.max(fd_worst(&p1, &x0));

        let p2 =
            MomentsPostproc { x_aug: xa.data().view(), weights: uniform.clone(), n, m, d };
        let x0: Vec<f64> = (0..p2.dim()).map(|_| rng.gen_range(-0.8..0.8)).collect();
        worst = worst.max(fd_worst(&p2, &x0));

        let p3 = DebiasImplicit { x: x.data().view(), sigma: &sigma, n, m, d, omega_sq: 0.25 };
        let x0: Vec<f64> = (0..p3.dim()).map(|_| rng.gen_range(-0.8..0.8)).collect();
        worst = worst.max(fd_worst(&p3, &x0));

        let p4 = DebiasPostproc { x_aug: xa.data().view(), sigma_aug, weights: uniform, n, m, d };
        let x0: Vec<f64> = (0..p4.dim()).map(|_| rng.gen_range(-0.8..0.8)).collect();
        worst = worst.max(fd_worst(&p4, &x0));
    }
    out.push(CheckOutcome::at_most("reparameterized estimator gradients", worst, tol));

    out
}

/// Direct partition-sum evaluation of a complete Bell polynomial, kept as an
/// independent route against the recursion.
fn bell_partition_sum(x: &[f64]) -> f64 {
    let k = x.len();
    fn rec(x: &[f64], k: usize, part: usize, remaining: usize, coeff: f64, acc: &mut f64) {
        if part > k || remaining == 0 {
            if remaining == 0 {
                *acc += coeff;
            }
            return;
        }
        let mut jfact = 1.0;
        let mut term = 1.0;
        let mut used = 0;
        let mut j = 0usize;
        loop {
            rec(x, k, part + 1, remaining - used, coeff * term / jfact, acc);
            j += 1;
            used += part;
            if used > remaining {
                break;
            }
            jfact *= j as f64;
            term *= x[part - 1] / factorial(part);
        }
    }
    let mut acc = 0.0;
    rec(x, k, 1, k, 1.0, &mut acc);
    acc * factorial(k)
}

/// Exact and near-exact identities: the alternating coefficient sum, the
/// Bell recursion against the partition-sum definition, the binomial theorem
/// for tensors, the augmentation weight identity, and scale-ambiguity
/// breaking.
pub fn identity_suite(seed: u64) -> Vec<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();

    // Alternating coefficient sum collapses to the Kronecker delta, exactly.
    let mut worst = 0.0f64;
    for d in 0..=16usize {
        for q in 0..=d / 2 {
            let got = delta_identity_check(d, q).expect("d >= 2q");
            let want = if q == 0 { 1.0 } else { 0.0 };
            worst = worst.max((got - want).abs());
        }
    }
    out.push(CheckOutcome::at_most("alternating coefficient identity", worst, 0.0));

    // Bell recursion vs partition-sum definition.
    let mut worst = 0.0f64;
    for d in 1..=8usize {
        for _ in 0..5 {
            let kappas: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.5..1.5)).collect();
            let fast = bell_prefix(&CumulantVector::new(kappas.clone()).expect("order"))
                .expect("order")
                .get(d);
            let slow = bell_partition_sum(&kappas);
            worst = worst.max(rel_err(fast, slow));
        }
    }
    out.push(CheckOutcome::at_most("Bell recursion vs partition sum", worst, 1e-11));

    // Binomial theorem for tensors, entrywise.
    let mut worst = 0.0f64;
    for n in 2..=3usize {
        for d in 1..=5usize {
            let v = Array1::from_shape_fn(n, |_| rng.gen_range(-1.0..1.0));
            let u = Array1::from_shape_fn(n, |_| rng.gen_range(-1.0..1.0));
            let lhs = outer_power(&(&v + &u).view(), d).expect("scale");
            let mut rhs = DenseSymTensor::zeros(n, d).expect("scale");
            for k in 0..=d {
                let term = tensor_product(
                    &outer_power(&v.view(), k).expect("scale"),
                    &outer_power(&u.view(), d - k).expect("scale"),
                )
                .expect("dims");
                rhs.add_scaled(&sym(&term).expect("order"), binomial(d, k)).expect("shapes");
            }
            for (a, b) in lhs.entries().iter().zip(rhs.entries()) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    out.push(CheckOutcome::at_most("binomial theorem for tensors", worst, 1e-12));

    // Augmentation weight identity over orders 0..=d.
    let mut worst = 0.0f64;
    for d in 1..=5usize {
        for _ in 0..4 {
            let params = random_diag_params(&mut rng, 2, 2);
            let x = random_samples(&mut rng, 2, 6);
            let omega: f64 = rng.gen_range(0.3..1.2);
            let lhs = objective_implicit_augmented(&params, &x, d, omega).expect("valid").value;
            let mut rhs = -binomial(d, 0) * omega.powi(2 * d as i32);
            for k in 1..=d {
                let fk = objective(&params, &x, k, false).expect("valid").value;
                rhs += binomial(d, k) * omega.powi(2 * (d - k) as i32) * fk;
            }
            worst = worst.max(rel_err(lhs, rhs));
        }
    }
    out.push(CheckOutcome::at_most("augmentation weight identity", worst, 1e-8));

    // Scale ambiguity: the order-d objective cannot separate a rescaled
    // mixture, the augmented one can.
    let mut worst_equal = 0.0f64;
    let mut min_separation = f64::INFINITY;
    for _ in 0..10 {
        let d = 3;
        let params = random_diag_params(&mut rng, 2, 2);
        let gamma = [rng.gen_range(0.6..0.95), rng.gen_range(1.1..1.6)];
        let rescaled = rescale_mixture(&params, &gamma, d).expect("valid");
        let x = random_samples(&mut rng, 2, 8);
        let a = objective(&params, &x, d, false).expect("valid").value;
        let b = objective(&rescaled, &x, d, false).expect("valid").value;
        worst_equal = worst_equal.max((a - b).abs() / (1.0 + a.abs()));
        let aa = objective_implicit_augmented(&params, &x, d, 0.5).expect("valid").value;
        let ab = objective_implicit_augmented(&rescaled, &x, d, 0.5).expect("valid").value;
        min_separation = min_separation.min((aa - ab).abs() / (1.0 + aa.abs()));
    }
    out.push(CheckOutcome::at_most(
        "scale ambiguity of single-order objective",
        worst_equal,
        1e-9,
    ));
    out.push(CheckOutcome {
        name: "augmented objective separates rescalings".into(),
        statistic: min_separation,
        threshold: 1e-9,
        pass: min_separation > 1e-9,
    });

    out
}

/// Dense-tensor error between the model third moment and the empirical one
/// for the two-dimensional demonstration mixture, over the standard sample
/// grid.
pub fn moment_convergence(seed: u64) -> Result<Vec<(usize, f64)>> {
    let params = demo_mixture_2d();
    let d = 3;
    let dense = explicit_gmm_moment(&params, d)?;
    let mut rows = Vec::with_capacity(CONVERGENCE_P_GRID.len());
    for (idx, &p) in CONVERGENCE_P_GRID.iter().enumerate() {
        let x = sample_gmm(&params, p, seed.wrapping_add(idx as u64))?;
        let emp = explicit_empirical_moment(&x, d)?;
        rows.push((p, dense.sub(&emp)?.norm()));
    }
    Ok(rows)
}

/// Same experiment for the debiased estimator on the common-covariance
/// model.
pub fn debias_convergence(seed: u64) -> Result<Vec<(usize, f64)>> {
    crate::debias::unbiasedness_experiment(&demo_debias_2d(), 3, &CONVERGENCE_P_GRID, seed)
}

/// Least-squares slope of log(error) against log(p).
pub fn log_log_slope(rows: &[(usize, f64)]) -> f64 {
    let n = rows.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(p, err) in rows {
        let x = (p as f64).ln();
        let y = err.ln();
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

/// Monte Carlo check that the debiased estimator is unbiased: over many
/// independent datasets, the entrywise mean of the corrected tensor must sit
/// within a few standard errors of the target rank-one sum. The statistic is
/// the worst entrywise z-score.
pub fn debias_unbiasedness_check(datasets: usize, p: usize, seed: u64) -> CheckOutcome {
    let model = demo_debias_2d();
    let mixture = model.generating_mixture().expect("valid model");
    let sigma = model.sigma().to_matrix();
    let d = 3;
    let target =
        explicit_mean_moment(&model.weights().view(), &model.means().view(), d).expect("scale");
    let len = target.entries().len();
    let mut sums = vec![0.0f64; len];
    let mut sq_sums = vec![0.0f64; len];
    for r in 0..datasets {
        let x = sample_gmm(&mixture, p, seed.wrapping_add(r as u64)).expect("valid");
        let est = explicit_debiased_moment(&x, &sigma.view(), d).expect("scale");
        for (i, &e) in est.entries().iter().enumerate() {
            sums[i] += e;
            sq_sums[i] += e * e;
        }
    }
    let rf = datasets as f64;
    let mut worst_z = 0.0f64;
    for i in 0..len {
        let mean = sums[i] / rf;
        let var = (sq_sums[i] / rf - mean * mean).max(0.0);
        let se = (var / rf).sqrt().max(1e-300);
        worst_z = worst_z.max((mean - target.entries()[i]).abs() / se);
    }
    CheckOutcome::at_most("debiased estimator is unbiased (worst z-score)", worst_z, 4.0)
}
