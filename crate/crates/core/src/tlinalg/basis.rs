//! Standard tensor bases and incoherence diagnostics.
//!
//! Both bases are specified by their transform-domain entries and mapped back
//! with `L^-1`, so in the spatial domain they can be dense.

use serde::Serialize;

use super::tsvd;
use crate::error::{Error, Result};
use crate::tensor3::Tensor3;
use crate::tlinalg::ttranspose;
use crate::transform::Transform;

/// Column basis `e_i` (0-based `i`): an `n x 1 x n3` tensor whose transform
/// has the tube `(i, 0, :)` equal to all ones and zeros elsewhere.
pub fn column_basis(i: usize, n: usize, t: &Transform) -> Result<Tensor3> {
    if i >= n {
        return Err(Error::IndexOutOfRange {
            what: "column basis",
            index: i + 1,
            len: n,
        });
    }
    let n3 = t.size();
    let bar = Tensor3::from_fn(n, 1, n3, |r, _, _| if r == i { 1.0 } else { 0.0 })?;
    t.apply_inverse(&bar)
}

/// Tube basis `e_k` (0-based `k`): a `1 x 1 x n3` tensor whose transform has
/// a single one at position `k`.
pub fn tube_basis(k: usize, t: &Transform) -> Result<Tensor3> {
    let n3 = t.size();
    if k >= n3 {
        return Err(Error::IndexOutOfRange {
            what: "tube basis",
            index: k + 1,
            len: n3,
        });
    }
    let bar = Tensor3::from_fn(1, 1, n3, |_, _, s| if s == k { 1.0 } else { 0.0 })?;
    t.apply_inverse(&bar)
}

/// Incoherence parameters of a tensor's skinny t-SVD `U *_L S *_L V'`.
///
/// With `r` the tubal rank:
///
/// - `mu1 = (n1/r) max_{i,k} ||U' *_L e_i *_L L(e_k)||_F^2`
/// - `mu2 = (n2/r) max_{j,k} ||V' *_L e_j *_L L(e_k)||_F^2`
/// - `mu3 = (n1 n2 ell / r) ||U *_L V'||_inf^2`
///
/// Each is the smallest `mu` satisfying the corresponding condition;
/// `mu` is their maximum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IncoherenceReport {
    pub rank: usize,
    pub mu1: f64,
    pub mu2: f64,
    pub mu3: f64,
    pub mu: f64,
}

/// `max_{i,k} ||F' *_L e_i *_L L(e_k)||_F^2` for a factor `F` (`n x r x n3`).
///
/// In the transform domain slice `s` of the product is row `i` of
/// `L(F)^(s)` scaled by `L[s, k]`, so the squared spatial norm is
/// `(1/ell) sum_s ||L(F)^(s)(i,:)||^2 L[s,k]^2`.
fn max_basis_energy(factor: &Tensor3, t: &Transform) -> Result<f64> {
    let fbar = t.apply(factor)?;
    let (n, r, n3) = fbar.dims();
    let l = t.matrix();
    let mut best = 0.0f64;
    for i in 0..n {
        let row_energy: Vec<f64> = (0..n3)
            .map(|s| (0..r).map(|c| fbar.get(i, c, s).powi(2)).sum())
            .collect();
        for k in 0..n3 {
            let e: f64 = (0..n3).map(|s| row_energy[s] * l[(s, k)].powi(2)).sum();
            best = best.max(e / t.ell());
        }
    }
    Ok(best)
}

pub fn incoherence(a: &Tensor3, t: &Transform) -> Result<IncoherenceReport> {
    if a.linf() == 0.0 {
        return Err(Error::InvalidArgument(
            "incoherence is undefined for the zero tensor".into(),
        ));
    }
    let (n1, n2, _) = a.dims();
    let f = tsvd(a, t, true)?;
    let r = f.rank as f64;
    let mu1 = n1 as f64 / r * max_basis_energy(&f.u, t)?;
    let mu2 = n2 as f64 / r * max_basis_energy(&f.v, t)?;
    let uv = super::tprod(&f.u, &ttranspose(&f.v, t)?, t)?;
    let mu3 = (n1 * n2) as f64 * t.ell() / r * uv.linf().powi(2);
    Ok(IncoherenceReport {
        rank: f.rank,
        mu1,
        mu2,
        mu3,
        mu: mu1.max(mu2).max(mu3),
    })
}
