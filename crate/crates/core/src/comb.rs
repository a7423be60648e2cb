//! Exact small-order combinatorics: factorials, binomials and the
//! Gaussian-moment coefficients, all precomputed in 64-bit integers.
//!
//! Every factorial up to `MAX_ORDER`! fits in the 53-bit f64 mantissa, so the
//! f64 accessors below are exact. Callers needing larger orders get a typed
//! [`Error::OrderOverflow`](crate::Error::OrderOverflow) instead of silent
//! rounding.

use crate::error::{Error, Result};

/// Largest moment order supported anywhere in the crate.
pub const MAX_ORDER: usize = 18;

const FACTORIALS: [i128; MAX_ORDER + 1] = {
    let mut t = [1i128; MAX_ORDER + 1];
    let mut k = 1;
    while k <= MAX_ORDER {
        t[k] = t[k - 1] * k as i128;
        k += 1;
    }
    t
};

/// Returns an error unless `d` is a usable moment order.
pub fn check_order(d: usize) -> Result<()> {
    if d > MAX_ORDER {
        Err(Error::OrderOverflow(d))
    } else {
        Ok(())
    }
}

/// k! as an exact integer, k <= 18.
pub fn factorial_exact(k: usize) -> i128 {
    FACTORIALS[k]
}

/// k! as an (exactly representable) f64.
pub fn factorial(k: usize) -> f64 {
    FACTORIALS[k] as f64
}

/// C(n, k) as an exact integer for n <= 18.
pub fn binomial_exact(n: usize, k: usize) -> i128 {
    if k > n {
        0
    } else {
        FACTORIALS[n] / (FACTORIALS[k] * FACTORIALS[n - k])
    }
}

/// C(n, k) as an f64, exact for n <= 18.
pub fn binomial(n: usize, k: usize) -> f64 {
    binomial_exact(n, k) as f64
}

/// (2k - 1)!! = 1 * 3 * ... * (2k - 1), the number of perfect matchings of 2k
/// items; (2*0 - 1)!! = 1 by convention.
pub fn odd_double_factorial_exact(k: usize) -> i128 {
    let mut acc = 1i128;
    let mut j = 1i128;
    while j < 2 * k as i128 {
        acc *= j;
        j += 2;
    }
    acc
}

/// C(d, 2k) * (2k - 1)!!, the coefficient attached to the mean^(d-2k) x
/// covariance^k term of a Gaussian moment, as an exact integer.
pub fn gaussian_moment_coeff_exact(d: usize, k: usize) -> i128 {
    binomial_exact(d, 2 * k) * odd_double_factorial_exact(k)
}

/// Same coefficient as f64 (exact for d <= 18).
pub fn gaussian_moment_coeff(d: usize, k: usize) -> f64 {
    gaussian_moment_coeff_exact(d, k) as f64
}
