//! Independent reference implementations used by the integration tests.
//! They share no code with the library beyond `Tensor3` storage and
//! `Transform` matrices.
#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use trpca::{Tensor3, Transform};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(n1: usize, n2: usize, n3: usize, rng: &mut ChaCha8Rng) -> Tensor3 {
    let data = (0..n1 * n2 * n3).map(|_| rng.sample(StandardNormal)).collect();
    Tensor3::from_vec(n1, n2, n3, data).unwrap()
}

/// Identity, DCT, a random orthogonal matrix and, for powers of two, the
/// unnormalised Hadamard matrix.
pub fn shipped_transforms(n3: usize, seed: u64) -> Vec<Transform> {
    let mut out = vec![
        Transform::identity(n3),
        Transform::dct(n3),
        Transform::random_orthogonal(n3, seed),
    ];
    if n3.is_power_of_two() {
        out.push(Transform::hadamard(n3).unwrap());
    }
    out
}

/// Entrywise mode-3 product with the given matrix.
pub fn naive_mode3(m: &DMatrix<f64>, a: &Tensor3) -> Tensor3 {
    let (n1, n2, n3) = a.dims();
    Tensor3::from_fn(n1, n2, n3, |i, j, k| (0..n3).map(|s| m[(k, s)] * a.get(i, j, s)).sum()).unwrap()
}

fn slices_of(a: &Tensor3) -> Vec<DMatrix<f64>> {
    let (n1, n2, n3) = a.dims();
    (0..n3)
        .map(|k| DMatrix::from_fn(n1, n2, |i, j| a.get(i, j, k)))
        .collect()
}

fn from_slices(s: &[DMatrix<f64>]) -> Tensor3 {
    let (n1, n2) = s[0].shape();
    Tensor3::from_fn(n1, n2, s.len(), |i, j, k| s[k][(i, j)]).unwrap()
}

/// Matrix singular value thresholding through an eigen-decomposition of
/// the Gram matrix: for `Y = U S V'`, `Y'Y = V S^2 V'` and the thresholded
/// matrix is `Y V diag(max(s - tau, 0) / s) V'`.
pub fn matrix_svt(y: &DMatrix<f64>, tau: f64) -> DMatrix<f64> {
    let (n1, n2) = y.shape();
    if n1 < n2 {
        return matrix_svt(&y.transpose(), tau).transpose();
    }
    let eig = (y.transpose() * y).symmetric_eigen();
    let mut w = DMatrix::zeros(n2, n2);
    for c in 0..n2 {
        let s = eig.eigenvalues[c].max(0.0).sqrt();
        let f = if s > tau { (s - tau) / s } else { 0.0 };
        let v = eig.eigenvectors.column(c);
        w += v * v.transpose() * f;
    }
    y * w
}

/// Matrix SVT via nalgebra's SVD, used where the Gram route loses accuracy.
pub fn matrix_svt_svd(y: &DMatrix<f64>, tau: f64) -> DMatrix<f64> {
    let svd = y.clone().svd(true, true);
    let s = svd.singular_values.map(|v| (v - tau).max(0.0));
    svd.u.unwrap() * DMatrix::from_diagonal(&s) * svd.v_t.unwrap()
}

/// Tensor SVT computed slice by slice: naive transform, matrix SVT at `tau`
/// on every slice, naive inverse transform.
pub fn tensor_svt_oracle(y: &Tensor3, tau: f64, t: &Transform) -> Tensor3 {
    let bar = slices_of(&naive_mode3(t.matrix(), y));
    let shr: Vec<_> = bar.iter().map(|m| matrix_svt_svd(m, tau)).collect();
    let inv = t.matrix().transpose() / t.ell();
    naive_mode3(&inv, &from_slices(&shr))
}

/// `(1/ell) * sum of singular values of the transformed slices`.
pub fn nuclear_norm_oracle(a: &Tensor3, t: &Transform) -> f64 {
    let bar = slices_of(&naive_mode3(t.matrix(), a));
    bar.iter()
        .map(|m| m.clone().singular_values().sum())
        .sum::<f64>()
        / t.ell()
}

pub fn soft(m: &DMatrix<f64>, tau: f64) -> DMatrix<f64> {
    m.map(|v| v.signum() * (v.abs() - tau).max(0.0))
}

/// Matrix robust PCA by inexact augmented Lagrangian, written directly in
/// matrix terms.
pub fn matrix_rpca(
    x: &DMatrix<f64>,
    lambda: f64,
    mu0: f64,
    rho: f64,
    mu_max: f64,
    tol: f64,
    max_iters: usize,
) -> (DMatrix<f64>, DMatrix<f64>, usize) {
    let (n1, n2) = x.shape();
    let mut l = DMatrix::zeros(n1, n2);
    let mut s = DMatrix::zeros(n1, n2);
    let mut y = DMatrix::zeros(n1, n2);
    let mut mu = mu0;
    for it in 1..=max_iters {
        let l_new = matrix_svt_svd(&(x - &s + &y / mu), 1.0 / mu);
        let s_new = soft(&(x - &l_new + &y / mu), lambda / mu);
        let r = x - &l_new - &s_new;
        let change = (&l_new - &l).amax().max((&s_new - &s).amax()).max(r.amax());
        l = l_new;
        s = s_new;
        if change <= tol {
            return (l, s, it);
        }
        y += r * mu;
        mu = (rho * mu).min(mu_max);
    }
    (l, s, max_iters)
}

pub fn to_matrix(a: &Tensor3) -> DMatrix<f64> {
    assert_eq!(a.n3(), 1);
    DMatrix::from_fn(a.n1(), a.n2(), |i, j| a.get(i, j, 0))
}

pub fn rel_frob(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm()
}
