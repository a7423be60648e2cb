//! Gaussian mixture estimation by moment matching with implicit moment
//! tensors.
//!
//! The crate evaluates the moment-matching objective `||M_d - M_d_hat||^2`
//! and its gradients without ever forming an order-d tensor, via cumulant /
//! Bell-polynomial identities ([`bell`], [`moments`]), supports debiased
//! moment estimation under known additive Gaussian noise ([`debias`]),
//! matches all orders up to d at once through sample augmentation
//! ([`augment`]), and wraps the whole thing in a multi-restart first-order
//! fitter ([`estimator`]) with an EM baseline ([`em`]). Everything implicit
//! is validated against the dense tensors of [`symtensor`].

// Loops over parallel arrays keep explicit indices throughout.
#![allow(clippy::needless_range_loop)]

pub mod augment;
pub mod bell;
pub mod checks;
pub mod cli;
pub mod comb;
pub mod debias;
pub mod em;
pub mod error;
pub mod estimator;
pub mod linalg;
pub mod moments;
pub mod presets;
pub mod sampling;
pub mod symtensor;

mod reduce;

pub use error::{Error, Result};
pub use moments::{Covariance, GmmParams, ObjectiveEval};
pub use sampling::SampleMatrix;
