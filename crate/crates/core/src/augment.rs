//! Sample augmentation: appending a constant coordinate `omega` to every
//! observation (and parameter vector) makes the order-d matching objective a
//! binomially weighted sum of the objectives of all orders 0..d, which breaks
//! the per-component scale ambiguity of single-order matching.
//!
//! Two realizations are provided. `Implicit` never forms the augmented
//! quantities: the only change is a `omega^2` shift of the first cumulant /
//! the linear recurrence term. `PostProcessing` optimizes over explicitly
//! augmented parameters without the constant-coordinate constraint and
//! rescales each component afterwards.

use ndarray::{Array1, Array2};

use crate::debias::DebiasParams;
use crate::error::{Error, Result};
use crate::moments::{
    f1_diag_impl, f1_general_impl, f2_diag_impl, f2_general_impl, Covariance, GmmParams,
    ObjectiveEval,
};
use crate::sampling::SampleMatrix;

/// How the augmented problem is solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// Fold the augmentation into the cumulant shift; parameters stay in R^n.
    Implicit,
    /// Optimize relaxed parameters in R^(n+1), then rescale.
    PostProcessing,
}

/// Augmentation settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentConfig {
    pub omega: f64,
    pub variant: Variant,
    pub order: usize,
}

impl AugmentConfig {
    pub fn new(omega: f64, variant: Variant, order: usize) -> Result<Self> {
        if !omega.is_finite() || omega <= 0.0 {
            return Err(Error::InvalidArgument("augmentation constant must be > 0".into()));
        }
        Ok(Self { omega, variant, order })
    }
}

/// Appends the constant row `omega` to the observations.
pub fn augment_samples(x: &SampleMatrix, omega: f64) -> Result<SampleMatrix> {
    x.augment(omega)
}

/// Zero-pads mixture parameters into R^(n+1): means gain the coordinate
/// `omega`, covariances gain a zero row and column.
pub fn augment_params(params: &GmmParams, omega: f64) -> Result<GmmParams> {
    let (n, m) = params.means().dim();
    let mut means = Array2::<f64>::zeros((n + 1, m));
    means.slice_mut(ndarray::s![..n, ..]).assign(params.means());
    means.row_mut(n).fill(omega);
    let covariance = match params.covariance() {
        Covariance::Diagonal(stddevs) => {
            let mut padded = Array2::<f64>::zeros((n + 1, m));
            padded.slice_mut(ndarray::s![..n, ..]).assign(stddevs);
            Covariance::Diagonal(padded)
        }
        Covariance::Full(sigmas) => Covariance::Full(
            sigmas
                .iter()
                .map(|s| {
                    let mut padded = Array2::<f64>::zeros((n + 1, n + 1));
                    padded.slice_mut(ndarray::s![..n, ..n]).assign(s);
                    padded
                })
                .collect(),
        ),
    };
    GmmParams::new(params.weights().clone(), means, covariance)
}

/// The augmented moment-matching objective `F1 - 2 F2`, evaluated over the
/// original n-dimensional parameters and unaugmented samples by shifting the
/// first cumulant and the linear recurrence term by `omega^2`. Gradients are
/// with respect to the unaugmented parameters.
pub fn objective_implicit_augmented(
    params: &GmmParams,
    x: &SampleMatrix,
    d: usize,
    omega: f64,
) -> Result<ObjectiveEval> {
    if x.augmented().is_some() {
        return Err(Error::AlreadyAugmented);
    }
    let omega_sq = omega * omega;
    let w = params.weights().view();
    let a = params.means().view();
    let (f1, f2) = match params.covariance() {
        Covariance::Diagonal(stddevs) => (
            f1_diag_impl(&w, &a, &stddevs.view(), d, omega_sq)?,
            f2_diag_impl(&w, &a, &stddevs.view(), &x.data().view(), d, omega_sq)?,
        ),
        Covariance::Full(sigmas) => (
            f1_general_impl(&w, &a, sigmas, d, omega_sq)?,
            f2_general_impl(&w, &a, sigmas, &x.data().view(), d, omega_sq)?,
        ),
    };
    Ok(f1.combine(-2.0, &f2))
}

/// Implicitly augmented decomposition objective for the debiased problem:
/// the Gram entries and the linear recurrence term shift by `omega^2`, the
/// known covariance is untouched (its augmented row is zero).
pub fn debias_implicit_augmented(
    params: &DebiasParams,
    x: &SampleMatrix,
    d: usize,
    omega: f64,
) -> Result<ObjectiveEval> {
    if x.augmented().is_some() {
        return Err(Error::AlreadyAugmented);
    }
    let omega_sq = omega * omega;
    let f1 = crate::debias::fdeb1_impl(&params.weights().view(), &params.means().view(), d, omega_sq)?;
    let f2 = crate::debias::fdeb2_impl(
        &params.weights().view(),
        &params.means().view(),
        params.sigma(),
        &x.data().view(),
        d,
        omega_sq,
    )?;
    Ok(f1.combine(-2.0, &f2))
}

/// Rescales relaxed augmented components back to the constraint surface:
/// `gamma_j = omega / mu_j[n]`, means and covariances scale by `gamma_j` and
/// `gamma_j^2`, weights by `gamma_j^(-d)`. Returns the per-component scales
/// alongside the rescaled weights/means.
pub(crate) fn postprocess_components(
    weights: &Array1<f64>,
    means: &Array2<f64>,
    omega: f64,
    d: usize,
) -> Result<(Array1<f64>, Array2<f64>, Vec<f64>)> {
    let (n_aug, m) = means.dim();
    if n_aug < 2 {
        return Err(Error::InvalidArgument("augmented means need at least 2 rows".into()));
    }
    let n = n_aug - 1;
    let threshold = 1e-8 * omega.abs();
    let mut gammas = Vec::with_capacity(m);
    for j in 0..m {
        let last = means[[n, j]];
        if last.abs() < threshold {
            return Err(Error::DegenerateAugmentedCoordinate {
                component: j,
                value: last,
                threshold,
            });
        }
        gammas.push(omega / last);
    }
    let mut new_means = Array2::<f64>::zeros((n, m));
    let mut new_weights = Array1::<f64>::zeros(m);
    for j in 0..m {
        let g = gammas[j];
        new_means
            .column_mut(j)
            .assign(&(g * &means.slice(ndarray::s![..n, j])));
        new_weights[j] = weights[j] * g.powi(-(d as i32));
    }
    // Renormalize onto the simplex; relative weights are preserved.
    let total = new_weights.sum();
    if !(total.is_finite()) || total <= 0.0 {
        return Err(Error::InvalidWeights(format!(
            "rescaled weights sum to {total}"
        )));
    }
    new_weights /= total;
    Ok((new_weights, new_means, gammas))
}

/// Maps a relaxed solution over R^(n+1) back to a valid mixture over R^n.
pub fn postprocess_solution(solution: &GmmParams, omega: f64, d: usize) -> Result<GmmParams> {
    let (weights, means, gammas) =
        postprocess_components(solution.weights(), solution.means(), omega, d)?;
    let n = means.nrows();
    let covariance = match solution.covariance() {
        Covariance::Diagonal(stddevs) => {
            let mut cropped = Array2::<f64>::zeros((n, stddevs.ncols()));
            for j in 0..stddevs.ncols() {
                cropped
                    .column_mut(j)
                    .assign(&(gammas[j].abs() * &stddevs.slice(ndarray::s![..n, j])));
            }
            Covariance::Diagonal(cropped)
        }
        Covariance::Full(sigmas) => Covariance::Full(
            sigmas
                .iter()
                .zip(&gammas)
                .map(|(s, g)| g * g * &s.slice(ndarray::s![..n, ..n]).to_owned())
                .collect(),
        ),
    };
    GmmParams::new(weights, means, covariance)
}

/// The scale-ambiguous reparameterization of a mixture: component `j` is
/// rescaled by `gamma_j` (means by `gamma_j`, covariances by `gamma_j^2`,
/// weights by `gamma_j^(-d)`), with `gamma` normalized internally so the
/// rescaled weights still sum to one. Order-d moments are invariant under
/// this map.
pub fn rescale_mixture(params: &GmmParams, gamma_raw: &[f64], d: usize) -> Result<GmmParams> {
    let m = params.num_components();
    if gamma_raw.len() != m {
        return Err(Error::ShapeMismatch("one scale per component".into()));
    }
    if gamma_raw.iter().any(|&g| g <= 0.0 || !g.is_finite()) {
        return Err(Error::InvalidArgument("scales must be positive".into()));
    }
    let weights = params.weights();
    let sum: f64 = (0..m).map(|j| weights[j] * gamma_raw[j].powi(-(d as i32))).sum();
    let t = sum.powf(1.0 / d as f64);
    let gammas: Vec<f64> = gamma_raw.iter().map(|g| g * t).collect();
    let mut new_weights = Array1::<f64>::zeros(m);
    let mut new_means = params.means().clone();
    for j in 0..m {
        new_weights[j] = weights[j] * gammas[j].powi(-(d as i32));
        let col = gammas[j] * &params.means().column(j);
        new_means.column_mut(j).assign(&col);
    }
    let covariance = match params.covariance() {
        Covariance::Diagonal(stddevs) => {
            let mut scaled = stddevs.clone();
            for (j, mut col) in scaled.columns_mut().into_iter().enumerate() {
                col *= gammas[j];
            }
            Covariance::Diagonal(scaled)
        }
        Covariance::Full(sigmas) => Covariance::Full(
            sigmas.iter().zip(&gammas).map(|(s, g)| g * g * s).collect(),
        ),
    };
    GmmParams::new(new_weights, new_means, covariance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::objective;
    use ndarray::array;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_diag_params(rng: &mut impl Rng, n: usize, m: usize) -> GmmParams {
        let raw: Vec<f64> = (0..m).map(|_| rng.gen_range(0.2..1.0)).collect();
        let total: f64 = raw.iter().sum();
        GmmParams::new_diagonal(
            Array1::from_vec(raw.iter().map(|x| x / total).collect()),
            Array2::from_shape_fn((n, m), |_| rng.gen_range(-1.0..1.0)),
            Array2::from_shape_fn((n, m), |_| rng.gen_range(0.1..0.8)),
        )
        .unwrap()
    }

    fn random_samples(rng: &mut impl Rng, n: usize, p: usize) -> SampleMatrix {
        SampleMatrix::new(Array2::from_shape_fn((n, p), |_| rng.gen_range(-1.5..1.5))).unwrap()
    }

    #[test]
    fn config_rejects_nonpositive_omega() {
        assert!(AugmentConfig::new(0.5, Variant::Implicit, 3).is_ok());
        assert!(AugmentConfig::new(0.0, Variant::Implicit, 3).is_err());
        assert!(AugmentConfig::new(-1.0, Variant::PostProcessing, 3).is_err());
    }

    #[test]
    fn implicit_equals_explicit_augmentation() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for d in 1..=4usize {
            let params = random_diag_params(&mut rng, 3, 2);
            let x = random_samples(&mut rng, 3, 12);
            let omega = 0.5;
            let implicit = objective_implicit_augmented(&params, &x, d, omega).unwrap();
            let explicit = objective(
                &augment_params(&params, omega).unwrap(),
                &augment_samples(&x, omega).unwrap(),
                d,
                false,
            )
            .unwrap();
            assert!(
                (implicit.value - explicit.value).abs()
                    <= 1e-10 * (1.0 + explicit.value.abs()),
                "d={d}: implicit {} vs explicit {}",
                implicit.value,
                explicit.value
            );
            // Gradients with respect to the shared coordinates agree too.
            for j in 0..2 {
                for r in 0..3 {
                    let gi = implicit.grad_means[[r, j]];
                    let ge = explicit.grad_means[[r, j]];
                    assert!((gi - ge).abs() <= 1e-10 * (1.0 + ge.abs()));
                }
            }
        }
    }

    #[test]
    fn implicit_equals_explicit_augmentation_full_cov() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let weights = array![0.6, 0.4];
        let means = Array2::from_shape_fn((2, 2), |_| rng.gen_range(-1.0..1.0));
        let sigmas: Vec<Array2<f64>> = (0..2)
            .map(|_| {
                let a = Array2::from_shape_fn((2, 2), |_| rng.gen_range(-0.5..0.5));
                a.dot(&a.t()) + Array2::<f64>::eye(2) * 0.1
            })
            .collect();
        let params = GmmParams::new_full(weights, means, sigmas).unwrap();
        let x = random_samples(&mut rng, 2, 8);
        let implicit = objective_implicit_augmented(&params, &x, 3, 0.7).unwrap();
        let explicit = objective(
            &augment_params(&params, 0.7).unwrap(),
            &augment_samples(&x, 0.7).unwrap(),
            3,
            false,
        )
        .unwrap();
        assert!(
            (implicit.value - explicit.value).abs() <= 1e-10 * (1.0 + explicit.value.abs())
        );
    }

    #[test]
    fn omega_zero_recovers_single_order_objective() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let params = random_diag_params(&mut rng, 2, 2);
        let x = random_samples(&mut rng, 2, 10);
        for d in 1..=4 {
            let plain = objective(&params, &x, d, false).unwrap();
            let aug = objective_implicit_augmented(&params, &x, d, 0.0).unwrap();
            assert!((plain.value - aug.value).abs() <= 1e-13 * (1.0 + plain.value.abs()));
        }
    }

    #[test]
    fn weight_identity_over_orders() {
        // F(augmented) = sum_k C(d,k) omega^(2(d-k)) F_k with F_0 = -1.
        let mut rng = ChaCha8Rng::seed_from_u64(34);
        for d in 1..=5usize {
            let params = random_diag_params(&mut rng, 2, 2);
            let x = random_samples(&mut rng, 2, 6);
            let omega: f64 = rng.gen_range(0.3..1.2);
            let lhs = objective_implicit_augmented(&params, &x, d, omega).unwrap().value;
            let mut rhs = -(crate::comb::binomial(d, 0) * omega.powi(2 * d as i32));
            for k in 1..=d {
                let fk = objective(&params, &x, k, false).unwrap().value;
                rhs += crate::comb::binomial(d, k) * omega.powi(2 * (d - k) as i32) * fk;
            }
            assert!(
                (lhs - rhs).abs() <= 1e-8 * (1.0 + lhs.abs()),
                "weight identity failed at d={d}: {lhs} vs {rhs}"
            );
        }
    }

    #[test]
    fn postprocess_identity_when_already_feasible() {
        let mut rng = ChaCha8Rng::seed_from_u64(35);
        let base = random_diag_params(&mut rng, 3, 2);
        let omega = 0.5;
        let augmented = augment_params(&base, omega).unwrap();
        let back = postprocess_solution(&augmented, omega, 3).unwrap();
        assert!((back.weights() - base.weights()).iter().all(|v| v.abs() < 1e-12));
        for (a, b) in back.means().iter().zip(base.means().iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn postprocess_rescales_by_gamma() {
        // A component whose augmented coordinate is omega/2 has gamma = 2:
        // means double, stddevs double, weight scales by 2^(-d).
        let omega = 0.5;
        let d = 3;
        let weights = array![1.0];
        let means = array![[0.3], [omega / 2.0]];
        let stddevs = array![[0.4], [0.0]];
        let solution = GmmParams::new_diagonal(weights, means, stddevs).unwrap();
        let out = postprocess_solution(&solution, omega, d).unwrap();
        assert!((out.means()[[0, 0]] - 0.6).abs() < 1e-12);
        match out.covariance() {
            Covariance::Diagonal(s) => assert!((s[[0, 0]] - 0.8).abs() < 1e-12),
            _ => unreachable!(),
        }
        // Single component renormalizes back to weight 1.
        assert!((out.weights()[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn postprocess_rejects_degenerate_coordinate() {
        let solution = GmmParams::new_diagonal(
            array![1.0],
            array![[0.3], [1e-12]],
            array![[0.4], [0.0]],
        )
        .unwrap();
        assert!(matches!(
            postprocess_solution(&solution, 0.5, 3),
            Err(Error::DegenerateAugmentedCoordinate { component: 0, .. })
        ));
    }

    #[test]
    fn scale_ambiguous_pair_postprocesses_identically() {
        // Two relaxed solutions that differ only by per-component scaling of
        // the augmented coordinates map to the same mixture.
        let omega = 0.5;
        let d = 3;
        let sol = GmmParams::new_diagonal(
            array![0.5, 0.5],
            array![[0.2, -0.4], [0.7, 0.3], [0.5, 0.25]],
            array![[0.3, 0.2], [0.1, 0.4], [0.0, 0.0]],
        )
        .unwrap();
        // Rescale each component by arbitrary positive factors.
        let g = [1.7, 0.6];
        let mut means = sol.means().clone();
        let mut stddevs = match sol.covariance() {
            Covariance::Diagonal(s) => s.clone(),
            _ => unreachable!(),
        };
        let mut weights = sol.weights().clone();
        for j in 0..2 {
            let col = g[j] * &sol.means().column(j);
            means.column_mut(j).assign(&col);
            let col = g[j] * &stddevs.column(j).to_owned();
            stddevs.column_mut(j).assign(&col);
            weights[j] *= g[j].powi(-(d as i32));
        }
        let total = weights.sum();
        weights /= total;
        let sol2 = GmmParams::new_diagonal(weights, means, stddevs).unwrap();

        let a = postprocess_solution(&sol, omega, d).unwrap();
        let b = postprocess_solution(&sol2, omega, d).unwrap();
        for (x, y) in a.weights().iter().zip(b.weights().iter()) {
            assert!((x - y).abs() < 1e-12);
        }
        for (x, y) in a.means().iter().zip(b.means().iter()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn rescaling_preserves_order_d_objective_but_not_augmented() {
        let mut rng = ChaCha8Rng::seed_from_u64(36);
        let d = 3;
        let params = random_diag_params(&mut rng, 2, 2);
        let gamma = [1.4, 0.8];
        let rescaled = rescale_mixture(&params, &gamma, d).unwrap();
        let x = random_samples(&mut rng, 2, 10);

        let f_plain = objective(&params, &x, d, false).unwrap().value;
        let f_rescaled = objective(&rescaled, &x, d, false).unwrap().value;
        assert!(
            (f_plain - f_rescaled).abs() <= 1e-9 * (1.0 + f_plain.abs()),
            "order-d objective should be scale-blind: {f_plain} vs {f_rescaled}"
        );

        let omega = 0.5;
        let a = objective_implicit_augmented(&params, &x, d, omega).unwrap().value;
        let b = objective_implicit_augmented(&rescaled, &x, d, omega).unwrap().value;
        assert!(
            (a - b).abs() > 1e-6 * (1.0 + a.abs()),
            "augmented objective should separate the pair: {a} vs {b}"
        );

        // gamma = 1 is a no-op.
        let same = rescale_mixture(&params, &[1.0, 1.0], d).unwrap();
        let c = objective_implicit_augmented(&same, &x, d, omega).unwrap().value;
        assert!((a - c).abs() <= 1e-12 * (1.0 + a.abs()));
    }

    #[test]
    fn debias_implicit_matches_explicit_augmentation() {
        use crate::debias::{fdeb, DebiasParams, KnownCov};
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let sigma = array![[0.4, 0.2], [0.2, 0.3]];
        let raw: Vec<f64> = (0..2).map(|_| rng.gen_range(0.2..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let params = DebiasParams::new(
            Array1::from_vec(raw.iter().map(|x| x / total).collect()),
            Array2::from_shape_fn((2, 2), |_| rng.gen_range(-1.0..1.0)),
            KnownCov::Full(sigma.clone()),
        )
        .unwrap();
        let x = random_samples(&mut rng, 2, 9);
        let omega = 0.5;
        let d = 3;
        let implicit = debias_implicit_augmented(&params, &x, d, omega).unwrap();

        // Explicit route: augmented samples, means with an omega coordinate,
        // zero-padded covariance.
        let mut aug_means = Array2::<f64>::zeros((3, 2));
        aug_means.slice_mut(ndarray::s![..2, ..]).assign(params.means());
        aug_means.row_mut(2).fill(omega);
        let mut aug_sigma = Array2::<f64>::zeros((3, 3));
        aug_sigma.slice_mut(ndarray::s![..2, ..2]).assign(&sigma);
        let aug_params = DebiasParams::new(
            params.weights().clone(),
            aug_means,
            KnownCov::Full(aug_sigma),
        )
        .unwrap();
        let explicit = fdeb(&aug_params, &augment_samples(&x, omega).unwrap(), d).unwrap();
        assert!(
            (implicit.value - explicit.value).abs() <= 1e-10 * (1.0 + explicit.value.abs()),
            "debias implicit {} vs explicit {}",
            implicit.value,
            explicit.value
        );
    }
}
