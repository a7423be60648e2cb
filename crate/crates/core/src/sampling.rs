//! Seedable synthetic data: mixture sampling and the structured benchmark
//! generator (unit-norm means with constant pairwise inner products).

use ndarray::{Array1, Array2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{householder_q, psd_sqrt};
use crate::moments::{Covariance, GmmParams};

/// Observations as columns of an n x p matrix, optionally carrying a constant
/// augmentation row as the last coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrix {
    data: Array2<f64>,
    augment: Option<f64>,
}

impl SampleMatrix {
    pub fn new(data: Array2<f64>) -> Result<Self> {
        if data.nrows() == 0 {
            return Err(Error::InvalidArgument("samples need at least one coordinate".into()));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite sample entry".into()));
        }
        Ok(Self { data, augment: None })
    }

    /// Number of coordinates per observation (including any augmentation row).
    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn num_samples(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    /// The augmentation constant, if the last row is one.
    pub fn augmented(&self) -> Option<f64> {
        self.augment
    }

    /// Returns a copy with a constant row `omega` appended. Augmenting an
    /// already augmented matrix is rejected.
    pub fn augment(&self, omega: f64) -> Result<SampleMatrix> {
        if self.augment.is_some() {
            return Err(Error::AlreadyAugmented);
        }
        if !omega.is_finite() {
            return Err(Error::InvalidArgument("augmentation constant must be finite".into()));
        }
        let (n, p) = self.data.dim();
        let mut out = Array2::<f64>::zeros((n + 1, p));
        out.slice_mut(ndarray::s![..n, ..]).assign(&self.data);
        out.row_mut(n).fill(omega);
        Ok(SampleMatrix { data: out, augment: Some(omega) })
    }
}

fn standard_normal_vec(rng: &mut ChaCha8Rng, n: usize) -> Array1<f64> {
    Array1::from_iter((0..n).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

/// Draws `p` independent observations from the mixture: a categorical
/// component draw followed by `mu_j + L_j g` with `g` standard normal and
/// `L_j` a symmetric PSD square root of the component covariance.
pub fn sample_gmm(params: &GmmParams, p: usize, seed: u64) -> Result<SampleMatrix> {
    if p == 0 {
        return Err(Error::EmptySamples);
    }
    let n = params.dim();
    let m = params.num_components();
    let mut cdf = Vec::with_capacity(m);
    let mut acc = 0.0;
    for &w in params.weights() {
        acc += w;
        cdf.push(acc);
    }
    let roots: Option<Vec<Array2<f64>>> = match params.covariance() {
        Covariance::Full(sigmas) => Some(
            sigmas
                .iter()
                .map(|s| psd_sqrt(&s.view(), 1e-10))
                .collect::<Result<_>>()?,
        ),
        Covariance::Diagonal(_) => None,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Array2::<f64>::zeros((n, p));
    for i in 0..p {
        let u: f64 = rng.gen();
        let j = cdf.iter().position(|&c| u < c).unwrap_or(m - 1);
        let g = standard_normal_vec(&mut rng, n);
        let x = match params.covariance() {
            Covariance::Diagonal(stddevs) => {
                &params.means().column(j) + &(&stddevs.column(j) * &g)
            }
            Covariance::Full(_) => {
                &params.means().column(j) + &roots.as_ref().unwrap()[j].dot(&g)
            }
        };
        data.column_mut(i).assign(&x);
    }
    SampleMatrix::new(data)
}

/// Generates a structured estimation problem: `m` unit-norm means in `R^n`
/// with pairwise inner products exactly 0.5 (a two-parameter frame embedded
/// in the first `m` coordinates, then randomly rotated), diagonal covariances
/// with variances uniform on `[0, 2 sigma2]`, and weights drawn uniformly on
/// the simplex rejected until `min_j lambda_j >= 0.01`. Returns the generating
/// parameters and `p` samples.
pub fn make_benchmark(
    n: usize,
    m: usize,
    sigma2: f64,
    p: usize,
    seed: u64,
) -> Result<(GmmParams, SampleMatrix)> {
    if m == 0 || n == 0 {
        return Err(Error::InvalidArgument("need n >= 1 and m >= 1".into()));
    }
    if m > n {
        return Err(Error::InvalidArgument(format!(
            "mean construction infeasible: m = {m} components exceed n = {n} dimensions"
        )));
    }
    if sigma2 < 0.0 {
        return Err(Error::InvalidArgument("sigma2 must be nonnegative".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // mu_j = a e_j + b u with u the normalized all-ones vector over the first
    // m coordinates; a, b solve <mu_i, mu_j> = 0.5 (i != j), ||mu_j|| = 1.
    let a = 0.5f64.sqrt();
    let sqrt_m = (m as f64).sqrt();
    let b = -a / sqrt_m + (a * a / m as f64 + 0.5).sqrt();
    let mut base = Array2::<f64>::zeros((n, m));
    for j in 0..m {
        for i in 0..m {
            base[[i, j]] = b / sqrt_m;
        }
        base[[j, j]] += a;
    }
    let gauss = Array2::from_shape_fn((n, n), |_| rng.sample::<f64, _>(StandardNormal));
    let q = householder_q(&gauss);
    let means = q.dot(&base);

    let stddevs =
        Array2::from_shape_fn((n, m), |_| rng.gen_range(0.0..=(2.0 * sigma2)).sqrt());

    let weights = loop {
        // Uniform on the simplex via normalized exponentials.
        let draws: Vec<f64> = (0..m).map(|_| -rng.gen::<f64>().max(1e-300).ln()).collect();
        let total: f64 = draws.iter().sum();
        let lam: Vec<f64> = draws.iter().map(|x| x / total).collect();
        if lam.iter().all(|&l| l >= 0.01) || m == 1 {
            break Array1::from_vec(lam);
        }
    };

    let truth = GmmParams::new_diagonal(weights, means, stddevs)?;
    let sample_seed = rng.gen::<u64>();
    let samples = sample_gmm(&truth, p, sample_seed)?;
    Ok((truth, samples))
}
