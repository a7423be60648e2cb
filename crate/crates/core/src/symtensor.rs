//! Dense symmetric-tensor arithmetic.
//!
//! This module materializes order-d tensors entry by entry and serves as the
//! brute-force reference against which every implicit routine in the crate is
//! tested. It is deliberately uncompressed and unoptimized: feasible only for
//! small dimension and order, and guarded accordingly.

use std::collections::HashMap;

use ndarray::{Array2, ArrayView1, ArrayView2};

use crate::comb::{check_order, gaussian_moment_coeff};
use crate::error::{Error, Result};
use crate::linalg::is_symmetric;
use crate::moments::{Covariance, GmmParams};
use crate::sampling::SampleMatrix;

/// Hard cap on the number of entries a dense tensor may hold.
const MAX_ENTRIES: usize = 100_000_000;

/// Orders at or above this are rejected by operations that would have to
/// enumerate permutation groups of the index positions.
const MAX_SYM_ORDER: usize = 13;

/// A dense order-`d`, dimension-`n` real tensor with entries stored row-major:
/// the multi-index `(i_1, ..., i_d)` lives at offset `sum_k i_k * n^(d-k)`
/// (0-based indices).
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSymTensor {
    dim: usize,
    order: usize,
    entries: Vec<f64>,
}

fn checked_len(n: usize, d: usize) -> Result<usize> {
    let mut len = 1usize;
    for _ in 0..d {
        len = len.checked_mul(n).filter(|&l| l <= MAX_ENTRIES).ok_or_else(|| {
            Error::OracleScaleExceeded(format!(
                "n^d = {n}^{d} exceeds the {MAX_ENTRIES}-entry limit"
            ))
        })?;
    }
    Ok(len)
}

impl DenseSymTensor {
    /// All-zeros tensor of the given shape.
    pub fn zeros(dim: usize, order: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("tensor dimension must be >= 1".into()));
        }
        let len = checked_len(dim, order)?;
        Ok(Self { dim, order, entries: vec![0.0; len] })
    }

    pub fn from_entries(dim: usize, order: usize, entries: Vec<f64>) -> Result<Self> {
        let len = checked_len(dim, order)?;
        if entries.len() != len {
            return Err(Error::ShapeMismatch(format!(
                "expected {len} entries for dim {dim} order {order}, got {}",
                entries.len()
            )));
        }
        Ok(Self { dim, order, entries })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// Entry at a full multi-index (0-based).
    pub fn get(&self, index: &[usize]) -> f64 {
        self.entries[self.offset(index)]
    }

    fn offset(&self, index: &[usize]) -> usize {
        debug_assert_eq!(index.len(), self.order);
        let mut off = 0usize;
        for &i in index {
            debug_assert!(i < self.dim);
            off = off * self.dim + i;
        }
        off
    }

    fn decode(&self, mut off: usize, out: &mut [usize]) {
        for slot in out.iter_mut().rev() {
            *slot = off % self.dim;
            off /= self.dim;
        }
    }

    pub fn scale(&mut self, c: f64) {
        for e in &mut self.entries {
            *e *= c;
        }
    }

    /// `self += c * other`.
    pub fn add_scaled(&mut self, other: &DenseSymTensor, c: f64) -> Result<()> {
        if self.dim != other.dim || self.order != other.order {
            return Err(Error::ShapeMismatch("tensor shapes differ".into()));
        }
        for (a, b) in self.entries.iter_mut().zip(&other.entries) {
            *a += c * b;
        }
        Ok(())
    }

    pub fn sub(&self, other: &DenseSymTensor) -> Result<DenseSymTensor> {
        let mut out = self.clone();
        out.add_scaled(other, -1.0)?;
        Ok(out)
    }

    pub fn norm(&self) -> f64 {
        inner(self, self).expect("matching shapes").sqrt()
    }
}

/// `v ⊗ v ⊗ ... ⊗ v` (`d` copies); `d = 0` yields the scalar tensor `[1]`.
pub fn outer_power(v: &ArrayView1<f64>, d: usize) -> Result<DenseSymTensor> {
    let n = v.len();
    let mut t = DenseSymTensor::zeros(n, d)?;
    // Each step extends the previous power by one factor of v.
    let mut cur = vec![1.0f64];
    for _ in 0..d {
        let mut next = Vec::with_capacity(cur.len() * n);
        for &a in &cur {
            for &x in v.iter() {
                next.push(a * x);
            }
        }
        cur = next;
    }
    t.entries = cur;
    Ok(t)
}

/// Order-2 tensor from a square matrix.
pub fn from_matrix(m: &ArrayView2<f64>) -> Result<DenseSymTensor> {
    let (r, c) = m.dim();
    if r != c {
        return Err(Error::ShapeMismatch("matrix must be square".into()));
    }
    DenseSymTensor::from_entries(r, 2, m.iter().copied().collect())
}

/// Order-1 tensor from a vector.
pub fn from_vector(v: &ArrayView1<f64>) -> Result<DenseSymTensor> {
    DenseSymTensor::from_entries(v.len(), 1, v.to_vec())
}

/// Tensor product: `(A ⊗ B)(i, j) = A(i) * B(j)`.
pub fn tensor_product(a: &DenseSymTensor, b: &DenseSymTensor) -> Result<DenseSymTensor> {
    if a.dim != b.dim {
        return Err(Error::ShapeMismatch(format!(
            "tensor product dims differ: {} vs {}",
            a.dim, b.dim
        )));
    }
    let mut out = DenseSymTensor::zeros(a.dim, a.order + b.order)?;
    let bn = b.entries.len();
    for (ia, &ea) in a.entries.iter().enumerate() {
        let base = ia * bn;
        for (ib, &eb) in b.entries.iter().enumerate() {
            out.entries[base + ib] = ea * eb;
        }
    }
    Ok(out)
}

/// `k`-fold tensor product of `a` with itself; `k = 0` is the scalar `[1]`.
pub fn tensor_power(a: &DenseSymTensor, k: usize) -> Result<DenseSymTensor> {
    let mut out = DenseSymTensor::from_entries(a.dim, 0, vec![1.0])?;
    for _ in 0..k {
        out = tensor_product(&out, a)?;
    }
    Ok(out)
}

/// Averages a tensor over all permutations of its index positions.
///
/// Entries are grouped by the multiset of their indices: the symmetrized value
/// at any index is the mean of the original entries over all distinct
/// rearrangements of that index, which equals the average over all d!
/// position permutations.
pub fn sym(a: &DenseSymTensor) -> Result<DenseSymTensor> {
    if a.order >= MAX_SYM_ORDER {
        return Err(Error::OracleScaleExceeded(format!(
            "sym at order {} would enumerate {}! permutations",
            a.order, a.order
        )));
    }
    if a.order <= 1 {
        return Ok(a.clone());
    }
    let mut groups: HashMap<usize, (f64, u32)> = HashMap::new();
    let mut idx = vec![0usize; a.order];
    let mut sorted = vec![0usize; a.order];
    for (off, &e) in a.entries.iter().enumerate() {
        a.decode(off, &mut idx);
        sorted.copy_from_slice(&idx);
        sorted.sort_unstable();
        let canon = a.offset(&sorted);
        let g = groups.entry(canon).or_insert((0.0, 0));
        g.0 += e;
        g.1 += 1;
    }
    let mut out = DenseSymTensor::zeros(a.dim, a.order)?;
    for (off, slot) in out.entries.iter_mut().enumerate() {
        let mut idx2 = vec![0usize; a.order];
        a.decode(off, &mut idx2);
        idx2.sort_unstable();
        let (sum, count) = groups[&a.offset(&idx2)];
        *slot = sum / count as f64;
    }
    Ok(out)
}

/// Full entrywise inner product of two tensors of identical shape.
pub fn inner(a: &DenseSymTensor, b: &DenseSymTensor) -> Result<f64> {
    if a.dim != b.dim || a.order != b.order {
        return Err(Error::ShapeMismatch("inner product shapes differ".into()));
    }
    Ok(a.entries.iter().zip(&b.entries).map(|(x, y)| x * y).sum())
}

/// Evaluates the homogeneous polynomial `z -> <A, z ⊗ ... ⊗ z>` without
/// materializing the rank-one tensor.
pub fn phi_eval(a: &DenseSymTensor, z: &ArrayView1<f64>) -> Result<f64> {
    if z.len() != a.dim {
        return Err(Error::ShapeMismatch(format!(
            "phi_eval argument has length {}, tensor dim is {}",
            z.len(),
            a.dim
        )));
    }
    let mut idx = vec![0usize; a.order];
    let mut acc = 0.0;
    for (off, &e) in a.entries.iter().enumerate() {
        a.decode(off, &mut idx);
        let mut prod = e;
        for &i in &idx {
            prod *= z[i];
        }
        acc += prod;
    }
    Ok(acc)
}

/// Dense order-`d` moment of a single Gaussian: the sum over `k` of
/// `C(d,2k) (2k-1)!! sym(mu^(d-2k) ⊗ Sigma^k)`.
///
/// `sigma` only needs to be symmetric, not PSD, so the same routine evaluates
/// the sign-flipped covariances used for debiasing.
pub fn explicit_gaussian_moment(
    mu: &ArrayView1<f64>,
    sigma: &ArrayView2<f64>,
    d: usize,
) -> Result<DenseSymTensor> {
    check_order(d)?;
    if d > 12 {
        return Err(Error::OracleScaleExceeded(format!(
            "explicit Gaussian moment at order {d} (limit 12)"
        )));
    }
    let n = mu.len();
    if sigma.dim() != (n, n) {
        return Err(Error::ShapeMismatch("covariance shape does not match mean".into()));
    }
    if !is_symmetric(sigma, 1e-12) {
        return Err(Error::ShapeMismatch("covariance is not symmetric".into()));
    }
    let sigma_t = from_matrix(sigma)?;
    let mut out = DenseSymTensor::zeros(n, d)?;
    for k in 0..=d / 2 {
        let term = tensor_product(&outer_power(mu, d - 2 * k)?, &tensor_power(&sigma_t, k)?)?;
        out.add_scaled(&sym(&term)?, gaussian_moment_coeff(d, k))?;
    }
    Ok(out)
}

/// Dense order-`d` moment of a mixture: the weighted sum of per-component
/// Gaussian moments.
pub fn explicit_gmm_moment(params: &GmmParams, d: usize) -> Result<DenseSymTensor> {
    let n = params.dim();
    let mut out = DenseSymTensor::zeros(n, d)?;
    for j in 0..params.num_components() {
        let mu = params.means().column(j);
        let sigma: Array2<f64> = match params.covariance() {
            Covariance::Full(list) => list[j].clone(),
            Covariance::Diagonal(stddevs) => {
                Array2::from_diag(&stddevs.column(j).mapv(|s| s * s))
            }
        };
        let m = explicit_gaussian_moment(&mu, &sigma.view(), d)?;
        out.add_scaled(&m, params.weights()[j])?;
    }
    Ok(out)
}

/// Dense order-`d` empirical moment: the average of per-sample outer powers.
pub fn explicit_empirical_moment(x: &SampleMatrix, d: usize) -> Result<DenseSymTensor> {
    let p = x.num_samples();
    if p == 0 {
        return Err(Error::EmptySamples);
    }
    let mut out = DenseSymTensor::zeros(x.dim(), d)?;
    for i in 0..p {
        out.add_scaled(&outer_power(&x.data().column(i), d)?, 1.0)?;
    }
    out.scale(1.0 / p as f64);
    Ok(out)
}

/// Dense debiased order-`d` moment with known noise covariance: the empirical
/// average of the alternating-sign corrected per-sample tensors.
pub fn explicit_debiased_moment(
    x: &SampleMatrix,
    sigma: &ArrayView2<f64>,
    d: usize,
) -> Result<DenseSymTensor> {
    check_order(d)?;
    let p = x.num_samples();
    if p == 0 {
        return Err(Error::EmptySamples);
    }
    let n = x.dim();
    if sigma.dim() != (n, n) {
        return Err(Error::ShapeMismatch("noise covariance shape does not match samples".into()));
    }
    let sigma_t = from_matrix(sigma)?;
    let sigma_pows: Vec<DenseSymTensor> =
        (0..=d / 2).map(|k| tensor_power(&sigma_t, k)).collect::<Result<_>>()?;
    let mut out = DenseSymTensor::zeros(n, d)?;
    for i in 0..p {
        let xi = x.data().column(i);
        for k in 0..=d / 2 {
            let term = tensor_product(&outer_power(&xi, d - 2 * k)?, &sigma_pows[k])?;
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            out.add_scaled(&sym(&term)?, sign * gaussian_moment_coeff(d, k))?;
        }
    }
    out.scale(1.0 / p as f64);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array1, Array2};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_tensor(rng: &mut impl Rng, n: usize, d: usize) -> DenseSymTensor {
        let len = n.pow(d as u32);
        DenseSymTensor::from_entries(n, d, (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .unwrap()
    }

    /// Direct d!-permutation symmetrization, kept independent of `sym`.
    fn sym_brute(a: &DenseSymTensor) -> DenseSymTensor {
        fn permutations(d: usize) -> Vec<Vec<usize>> {
            let mut out = vec![vec![]];
            for k in 0..d {
                let mut next = Vec::new();
                for p in &out {
                    for pos in 0..=p.len() {
                        let mut q = p.clone();
                        q.insert(pos, k);
                        next.push(q);
                    }
                }
                out = next;
            }
            out
        }
        let perms = permutations(a.order());
        let mut out = DenseSymTensor::zeros(a.dim(), a.order()).unwrap();
        let mut idx = vec![0usize; a.order()];
        let mut permuted = vec![0usize; a.order()];
        for off in 0..a.entries().len() {
            a.decode(off, &mut idx);
            let mut acc = 0.0;
            for p in &perms {
                for (slot, &src) in permuted.iter_mut().zip(p.iter()) {
                    *slot = idx[src];
                }
                acc += a.get(&permuted);
            }
            out.entries[off] = acc / perms.len() as f64;
        }
        out
    }

    #[test]
    fn outer_power_small_cases() {
        let t = outer_power(&array![1.0, 2.0].view(), 2).unwrap();
        assert_eq!(t.entries(), &[1.0, 2.0, 2.0, 4.0]);

        let t = outer_power(&array![3.0].view(), 3).unwrap();
        assert_eq!(t.entries(), &[27.0]);

        let t = outer_power(&array![1.0, 1.0].view(), 0).unwrap();
        assert_eq!(t.entries(), &[1.0]);
    }

    #[test]
    fn outer_power_sign_parity() {
        // Entries of [1, -1]^(⊗3) alternate with the parity of the index sum.
        let t = outer_power(&array![1.0, -1.0].view(), 3).unwrap();
        let mut idx = vec![0usize; 3];
        for off in 0..8 {
            t.decode(off, &mut idx);
            let parity: usize = idx.iter().sum();
            let want = if parity.is_multiple_of(2) { 1.0 } else { -1.0 };
            assert_eq!(t.entries()[off], want);
        }
    }

    #[test]
    fn tensor_product_cases() {
        let a = from_vector(&array![1.0, 0.0].view()).unwrap();
        let b = from_vector(&array![0.0, 1.0].view()).unwrap();
        let ab = tensor_product(&a, &b).unwrap();
        assert_eq!(ab.entries(), &[0.0, 1.0, 0.0, 0.0]);

        let scalar = DenseSymTensor::from_entries(2, 0, vec![2.0]).unwrap();
        let doubled = tensor_product(&scalar, &ab).unwrap();
        assert_eq!(doubled.entries(), &[0.0, 2.0, 0.0, 0.0]);

        // Entrywise agreement with direct enumeration at order 3.
        let v = outer_power(&array![1.0, 2.0].view(), 1).unwrap();
        let m = from_matrix(&array![[1.0, 0.0], [0.0, 1.0]].view()).unwrap();
        let t = tensor_product(&v, &m).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    let want = [1.0, 2.0][i] * if j == k { 1.0 } else { 0.0 };
                    assert_eq!(t.get(&[i, j, k]), want);
                }
            }
        }
    }

    #[test]
    fn sym_matrix_case() {
        let a = from_matrix(&array![[0.0, 2.0], [0.0, 0.0]].view()).unwrap();
        let s = sym(&a).unwrap();
        assert_eq!(s.entries(), &[0.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn sym_fixed_point_and_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_tensor(&mut rng, 2, 3);
        let s1 = sym(&a).unwrap();
        let s2 = sym(&s1).unwrap();
        for (x, y) in s1.entries().iter().zip(s2.entries()) {
            assert!((x - y).abs() < 1e-15);
        }
        // A symmetric tensor is untouched (up to re-association rounding).
        let v = outer_power(&array![0.3, -0.7].view(), 3).unwrap();
        let sv = sym(&v).unwrap();
        for (x, y) in sv.entries().iter().zip(v.entries()) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn sym_entries_invariant_under_index_permutation() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for &(n, d) in &[(2usize, 3usize), (3, 4)] {
            let s = sym(&random_tensor(&mut rng, n, d)).unwrap();
            let mut idx = vec![0usize; d];
            for off in 0..s.entries().len() {
                s.decode(off, &mut idx);
                let mut rev = idx.clone();
                rev.reverse();
                assert!((s.get(&idx) - s.get(&rev)).abs() < 1e-15);
                let mut rot = idx.clone();
                rot.rotate_left(1);
                assert!((s.get(&idx) - s.get(&rot)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn sym_matches_brute_force_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for &(n, d) in &[(2usize, 2usize), (2, 4), (3, 3), (3, 4)] {
            let a = random_tensor(&mut rng, n, d);
            let fast = sym(&a).unwrap();
            let slow = sym_brute(&a);
            for (x, y) in fast.entries().iter().zip(slow.entries()) {
                assert!((x - y).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn sym_order_guard() {
        let t = DenseSymTensor::zeros(1, 13).unwrap();
        assert!(matches!(sym(&t), Err(Error::OracleScaleExceeded(_))));
    }

    #[test]
    fn size_guard() {
        assert!(matches!(
            DenseSymTensor::zeros(10, 9),
            Err(Error::OracleScaleExceeded(_))
        ));
    }

    #[test]
    fn inner_rank_one_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for d in 1..=5 {
            let v = Array1::from_iter((0..3).map(|_| rng.gen_range(-1.0..1.0f64)));
            let u = Array1::from_iter((0..3).map(|_| rng.gen_range(-1.0..1.0f64)));
            let lhs = inner(
                &outer_power(&v.view(), d).unwrap(),
                &outer_power(&u.view(), d).unwrap(),
            )
            .unwrap();
            let rhs = v.dot(&u).powi(d as i32);
            assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
        }
    }

    #[test]
    fn inner_with_zero_and_self_adjointness() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_tensor(&mut rng, 3, 3);
        let zero = DenseSymTensor::zeros(3, 3).unwrap();
        assert_eq!(inner(&a, &zero).unwrap(), 0.0);

        // sym is an orthogonal projection: <sym(A), B> = <A, sym(B)>.
        let b = random_tensor(&mut rng, 3, 3);
        let lhs = inner(&sym(&a).unwrap(), &b).unwrap();
        let rhs = inner(&a, &sym(&b).unwrap()).unwrap();
        assert!((lhs - rhs).abs() < 1e-13);

        // And <sym(U), v^(⊗d)> = <U, v^(⊗d)>.
        let v = array![0.4, -0.2, 0.9];
        let rank1 = outer_power(&v.view(), 3).unwrap();
        let lhs = inner(&sym(&a).unwrap(), &rank1).unwrap();
        let rhs = inner(&a, &rank1).unwrap();
        assert!((lhs - rhs).abs() < 1e-13);
    }

    #[test]
    fn phi_eval_cases() {
        let v = array![1.0, -2.0, 0.5];
        let z = array![0.3, 0.7, -1.1];
        let tv = from_vector(&v.view()).unwrap();
        assert!((phi_eval(&tv, &z.view()).unwrap() - v.dot(&z)).abs() < 1e-15);

        let m = array![[1.0, 0.2, 0.0], [0.2, 2.0, -0.3], [0.0, -0.3, 0.5]];
        let tm = from_matrix(&m.view()).unwrap();
        let want = z.dot(&m.dot(&z));
        assert!((phi_eval(&tm, &z.view()).unwrap() - want).abs() < 1e-14);

        // Product rule through the tensor product.
        let prod = tensor_product(&tv, &tm).unwrap();
        let lhs = phi_eval(&prod, &z.view()).unwrap();
        let rhs = phi_eval(&tv, &z.view()).unwrap() * phi_eval(&tm, &z.view()).unwrap();
        assert!((lhs - rhs).abs() < 1e-13);

        // phi is blind to symmetrization.
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let a = random_tensor(&mut rng, 3, 4);
        let lhs = phi_eval(&sym(&a).unwrap(), &z.view()).unwrap();
        let rhs = phi_eval(&a, &z.view()).unwrap();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn gaussian_moment_low_orders() {
        let mu = array![0.5, -1.0];
        let sigma = array![[0.4, 0.1], [0.1, 0.3]];
        // d = 2: mu mu' + Sigma.
        let m2 = explicit_gaussian_moment(&mu.view(), &sigma.view(), 2).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let want = mu[i] * mu[j] + sigma[[i, j]];
                assert!((m2.get(&[i, j]) - want).abs() < 1e-14);
            }
        }
        // d = 3: mu^(⊗3) + 3 sym(mu ⊗ Sigma).
        let m3 = explicit_gaussian_moment(&mu.view(), &sigma.view(), 3).unwrap();
        let mut want = outer_power(&mu.view(), 3).unwrap();
        let cross = tensor_product(
            &from_vector(&mu.view()).unwrap(),
            &from_matrix(&sigma.view()).unwrap(),
        )
        .unwrap();
        want.add_scaled(&sym(&cross).unwrap(), 3.0).unwrap();
        for (x, y) in m3.entries().iter().zip(want.entries()) {
            assert!((x - y).abs() < 1e-14);
        }
        // Zero covariance: point mass.
        let zero = Array2::zeros((2, 2));
        let m4 = explicit_gaussian_moment(&mu.view(), &zero.view(), 4).unwrap();
        let pm = outer_power(&mu.view(), 4).unwrap();
        assert_eq!(m4.entries(), pm.entries());
    }

    #[test]
    fn gaussian_moment_order_guard() {
        let mu = array![0.0];
        let sigma = array![[1.0]];
        assert!(matches!(
            explicit_gaussian_moment(&mu.view(), &sigma.view(), 13),
            Err(Error::OracleScaleExceeded(_))
        ));
    }

    #[test]
    fn empirical_moment_cases() {
        let x = SampleMatrix::new(array![[1.0, 3.0]]).unwrap();
        let m = explicit_empirical_moment(&x, 2).unwrap();
        assert_eq!(m.entries(), &[5.0]);

        let single = SampleMatrix::new(array![[2.0], [1.0]]).unwrap();
        let m = explicit_empirical_moment(&single, 3).unwrap();
        let want = outer_power(&array![2.0, 1.0].view(), 3).unwrap();
        assert_eq!(m.entries(), want.entries());
    }

    #[test]
    fn debiased_moment_zero_noise_is_empirical() {
        let x = SampleMatrix::new(array![[1.0, -0.5, 2.0], [0.0, 1.5, -1.0]]).unwrap();
        let zero = Array2::zeros((2, 2));
        let deb = explicit_debiased_moment(&x, &zero.view(), 3).unwrap();
        let emp = explicit_empirical_moment(&x, 3).unwrap();
        for (a, b) in deb.entries().iter().zip(emp.entries()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn debiased_moment_order3_formula() {
        // At order 3 the corrected tensor is x^(⊗3) - 3 sym(x ⊗ Sigma).
        let x = SampleMatrix::new(array![[1.0, -0.5], [0.0, 1.5]]).unwrap();
        let sigma = array![[0.4, 0.2], [0.2, 0.3]];
        let deb = explicit_debiased_moment(&x, &sigma.view(), 3).unwrap();
        let mut want = DenseSymTensor::zeros(2, 3).unwrap();
        for i in 0..2 {
            let xi = x.data().column(i).to_owned();
            want.add_scaled(&outer_power(&xi.view(), 3).unwrap(), 1.0).unwrap();
            let cross = tensor_product(
                &from_vector(&xi.view()).unwrap(),
                &from_matrix(&sigma.view()).unwrap(),
            )
            .unwrap();
            want.add_scaled(&sym(&cross).unwrap(), -3.0).unwrap();
        }
        want.scale(0.5);
        for (a, b) in deb.entries().iter().zip(want.entries()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn binomial_theorem_for_tensors() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in 2..=3usize {
            for d in 1..=5usize {
                let v = Array1::from_iter((0..n).map(|_| rng.gen_range(-1.0..1.0f64)));
                let u = Array1::from_iter((0..n).map(|_| rng.gen_range(-1.0..1.0f64)));
                let sum = &v + &u;
                let lhs = outer_power(&sum.view(), d).unwrap();
                let mut rhs = DenseSymTensor::zeros(n, d).unwrap();
                for k in 0..=d {
                    let term = tensor_product(
                        &outer_power(&v.view(), k).unwrap(),
                        &outer_power(&u.view(), d - k).unwrap(),
                    )
                    .unwrap();
                    rhs.add_scaled(&sym(&term).unwrap(), crate::comb::binomial(d, k)).unwrap();
                }
                for (a, b) in lhs.entries().iter().zip(rhs.entries()) {
                    assert!((a - b).abs() < 1e-12, "binomial theorem failed at n={n} d={d}");
                }
            }
        }
    }
}
