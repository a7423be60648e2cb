//! Small fixed models used by the validation experiments and tests.

use ndarray::array;

use crate::debias::{DebiasParams, KnownCov};
use crate::moments::GmmParams;

/// Two-dimensional, three-component mixture with distinct full covariances.
/// Used by the moment-convergence experiment.
pub fn demo_mixture_2d() -> GmmParams {
    GmmParams::new_full(
        array![0.4, 0.3, 0.3],
        array![[1.0, 1.0, -1.0], [-1.0, 1.0, 1.0]],
        vec![
            array![[0.4, 0.0], [0.0, 0.3]],
            array![[0.2, 0.1], [0.1, 0.5]],
            array![[0.4, 0.25], [0.25, 0.3]],
        ],
    )
    .expect("constant model is valid")
}

/// The same three means with one shared, known covariance. Used by the
/// debiased-moment convergence experiment.
pub fn demo_debias_2d() -> DebiasParams {
    DebiasParams::new(
        array![0.4, 0.3, 0.3],
        array![[1.0, 1.0, -1.0], [-1.0, 1.0, 1.0]],
        KnownCov::Full(array![[0.4, 0.2], [0.2, 0.3]]),
    )
    .expect("constant model is valid")
}
