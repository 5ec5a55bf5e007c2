//! t-linear algebra under a [`Transform`].
//!
//! Every operation follows the same pattern: move to the transform domain,
//! work frontal slice by frontal slice with ordinary matrix algebra, and map
//! back with `L^-1`. The block-diagonal matrix `bdiag(L(A))` is never formed.

mod basis;

pub use basis::{column_basis, incoherence, tube_basis, IncoherenceReport};

use nalgebra::{DMatrix, DVector, SVD};

use crate::error::{Error, Result};
use crate::par;
use crate::tensor3::Tensor3;
use crate::transform::Transform;

/// Default relative threshold used to decide which singular tubes are zero.
pub const DEFAULT_RANK_TOL: f64 = 1e-8;

/// Frontal slices of `L(a)`.
pub fn transformed_slices(a: &Tensor3, t: &Transform) -> Result<Vec<DMatrix<f64>>> {
    Ok(t.apply(a)?.slices())
}

/// `L^-1` of the tensor whose frontal slices are `slices`.
pub fn from_transformed_slices(slices: &[DMatrix<f64>], t: &Transform) -> Result<Tensor3> {
    t.apply_inverse(&Tensor3::from_slices(slices)?)
}

/// Thin SVD of one transform-domain slice, singular values nonincreasing.
///
/// Each left singular vector is flipped so its largest-magnitude entry is
/// positive (the matching right vector flips with it).
pub(crate) struct SliceSvd {
    pub u: DMatrix<f64>,
    pub sigma: DVector<f64>,
    pub v_t: DMatrix<f64>,
}

pub(crate) fn slice_svd(m: DMatrix<f64>, slice: usize) -> Result<SliceSvd> {
    let svd = SVD::try_new(m, true, true, f64::EPSILON, 0).ok_or(Error::SvdFailed { slice })?;
    let mut u = svd.u.ok_or(Error::SvdFailed { slice })?;
    let mut v_t = svd.v_t.ok_or(Error::SvdFailed { slice })?;
    let sigma = svd.singular_values;
    debug_assert!(sigma.as_slice().windows(2).all(|w| w[0] >= w[1]));
    for c in 0..u.ncols() {
        let col = u.column(c);
        let pivot = col.iter().fold(0.0f64, |best, &x| if x.abs() > best.abs() { x } else { best });
        if pivot < 0.0 {
            u.column_mut(c).neg_mut();
            v_t.row_mut(c).neg_mut();
        }
    }
    Ok(SliceSvd { u, sigma, v_t })
}

pub(crate) fn slice_singular_values(m: DMatrix<f64>, slice: usize) -> Result<DVector<f64>> {
    let svd = SVD::try_new(m, false, false, f64::EPSILON, 0).ok_or(Error::SvdFailed { slice })?;
    Ok(svd.singular_values)
}

/// Singular values of every frontal slice of `L(a)`, each nonincreasing.
pub fn transformed_singular_values(a: &Tensor3, t: &Transform) -> Result<Vec<DVector<f64>>> {
    let slices = transformed_slices(a, t)?;
    par::try_map_range(slices.len(), |k| slice_singular_values(slices[k].clone(), k))
}

/// Number of singular tubes whose norm exceeds `tol` times the largest one.
pub(crate) fn rank_from_sigmas(sigmas: &[DVector<f64>], tol: f64) -> usize {
    let p = sigmas.first().map_or(0, |s| s.len());
    let tube_norms: Vec<f64> = (0..p)
        .map(|i| sigmas.iter().map(|s| s[i] * s[i]).sum::<f64>().sqrt())
        .collect();
    match tube_norms.first() {
        Some(&largest) if largest > 0.0 => {
            tube_norms.iter().filter(|&&n| n > tol * largest).count()
        }
        _ => 0,
    }
}

/// `C = A *_L B`: `L(C)^(k) = L(A)^(k) L(B)^(k)` for every slice `k`.
pub fn tprod(a: &Tensor3, b: &Tensor3, t: &Transform) -> Result<Tensor3> {
    let (n1, n2, n3) = a.dims();
    let (m1, l, m3) = b.dims();
    if n2 != m1 || n3 != m3 {
        return Err(Error::DimensionMismatch(format!(
            "t-product of {n1}x{n2}x{n3} with {m1}x{l}x{m3}"
        )));
    }
    let abar = transformed_slices(a, t)?;
    let bbar = transformed_slices(b, t)?;
    let cbar = par::map_range(n3, |k| &abar[k] * &bbar[k]);
    from_transformed_slices(&cbar, t)
}

/// Tensor transpose under `L`: `L(A')^(k) = (L(A)^(k))'`.
pub fn ttranspose(a: &Tensor3, t: &Transform) -> Result<Tensor3> {
    let abar = transformed_slices(a, t)?;
    let tr: Vec<DMatrix<f64>> = abar.iter().map(|s| s.transpose()).collect();
    from_transformed_slices(&tr, t)
}

/// The `n x n x n3` identity tensor: every frontal slice of `L(I)` is `I_n`.
pub fn identity_tensor(n: usize, t: &Transform) -> Tensor3 {
    let slices = vec![DMatrix::<f64>::identity(n, n); t.size()];
    from_transformed_slices(&slices, t).expect("identity slices are conformable")
}

/// Factors of `A = U *_L S *_L V'`.
///
/// `u` is `n1 x k x n3`, `s` is `k x k x n3` (f-diagonal in the transform
/// domain), `v` is `n2 x k x n3`. For the full form `k = min(n1, n2)`; for the
/// skinny form `k` is the tubal rank, but at least one so the factors stay
/// non-empty (the zero tensor gets a single zero singular tube).
#[derive(Clone, Debug)]
pub struct TSvdFactors {
    pub u: Tensor3,
    pub s: Tensor3,
    pub v: Tensor3,
    pub transform: Transform,
    pub skinny: bool,
    /// Tubal rank at [`DEFAULT_RANK_TOL`].
    pub rank: usize,
    /// All `min(n1, n2)` singular values of every slice of `L(A)`.
    pub singular_values: Vec<DVector<f64>>,
}

impl TSvdFactors {
    /// `U *_L S *_L V'`.
    pub fn reconstruct(&self) -> Result<Tensor3> {
        let us = tprod(&self.u, &self.s, &self.transform)?;
        tprod(&us, &ttranspose(&self.v, &self.transform)?, &self.transform)
    }

    /// Number of columns kept in `u` and `v`.
    pub fn width(&self) -> usize {
        self.u.n2()
    }
}

/// t-SVD via per-slice SVD of `L(a)`.
pub fn tsvd(a: &Tensor3, t: &Transform, skinny: bool) -> Result<TSvdFactors> {
    let (n1, n2, n3) = a.dims();
    let abar = transformed_slices(a, t)?;
    let svds = par::try_map_range(n3, |k| slice_svd(abar[k].clone(), k))?;
    let singular_values: Vec<DVector<f64>> = svds.iter().map(|s| s.sigma.clone()).collect();
    let rank = rank_from_sigmas(&singular_values, DEFAULT_RANK_TOL);
    let p = n1.min(n2);
    let width = if skinny { rank.max(1) } else { p };

    let mut ubar = Vec::with_capacity(n3);
    let mut sbar = Vec::with_capacity(n3);
    let mut vbar = Vec::with_capacity(n3);
    for svd in &svds {
        ubar.push(svd.u.columns(0, width).into_owned());
        sbar.push(DMatrix::from_diagonal(&svd.sigma.rows(0, width).into_owned()));
        vbar.push(svd.v_t.rows(0, width).transpose());
    }
    Ok(TSvdFactors {
        u: from_transformed_slices(&ubar, t)?,
        s: from_transformed_slices(&sbar, t)?,
        v: from_transformed_slices(&vbar, t)?,
        transform: t.clone(),
        skinny,
        rank,
        singular_values,
    })
}

/// Number of singular tubes `S_bar(i,i,:)` with norm above `tol` times the
/// norm of the first one.
pub fn tubal_rank(a: &Tensor3, t: &Transform, tol: f64) -> Result<usize> {
    if !(tol >= 0.0) {
        return Err(Error::InvalidArgument(format!("rank tolerance must be >= 0, got {tol}")));
    }
    Ok(rank_from_sigmas(&transformed_singular_values(a, t)?, tol))
}

/// Tensor spectral norm: the largest singular value over all slices of `L(a)`.
pub fn spectral_norm(a: &Tensor3, t: &Transform) -> Result<f64> {
    Ok(transformed_singular_values(a, t)?
        .iter()
        .map(|s| s.iter().copied().fold(0.0, f64::max))
        .fold(0.0, f64::max))
}

/// Tensor nuclear norm `(1/ell) * sum_k ||L(a)^(k)||_*`.
pub fn nuclear_norm(a: &Tensor3, t: &Transform) -> Result<f64> {
    let total: f64 = transformed_singular_values(a, t)?
        .iter()
        .map(|s| s.sum())
        .sum();
    Ok(total / t.ell())
}
