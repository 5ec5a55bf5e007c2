//! Proximal operators for the two terms of the TRPCA objective.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::par;
use crate::tensor3::Tensor3;
use crate::tlinalg::{from_transformed_slices, nuclear_norm, slice_svd, transformed_slices};
use crate::transform::Transform;

/// Tensor singular value thresholding `D_tau(Y) = U *_L S_tau *_L V'` with
/// `S_tau = L^-1((L(S) - tau)_+)`.
///
/// Every transform-domain singular value is shrunk by the same `tau`,
/// whatever `ell` is: the `1/ell` factor scales the whole objective and
/// cancels. The result minimises `tau ||X||_* + 1/2 ||X - Y||_F^2`.
pub fn tsvt(y: &Tensor3, tau: f64, t: &Transform) -> Result<Tensor3> {
    tsvt_with_norm(y, tau, t).map(|(x, _)| x)
}

/// [`tsvt`] plus the tensor nuclear norm of its output, which falls out of
/// the shrunk singular values for free.
pub fn tsvt_with_norm(y: &Tensor3, tau: f64, t: &Transform) -> Result<(Tensor3, f64)> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "threshold must be positive and finite, got {tau}"
        )));
    }
    let (n1, n2, n3) = y.dims();
    let ybar = transformed_slices(y, t)?;
    let shrunk = par::try_map_range(n3, |k| -> Result<(DMatrix<f64>, f64)> {
        let svd = slice_svd(ybar[k].clone(), k)?;
        let keep = svd.sigma.iter().take_while(|&&s| s > tau).count();
        if keep == 0 {
            return Ok((DMatrix::zeros(n1, n2), 0.0));
        }
        let mut u = svd.u.columns(0, keep).into_owned();
        let mut norm = 0.0;
        for c in 0..keep {
            let s = svd.sigma[c] - tau;
            norm += s;
            u.column_mut(c).scale_mut(s);
        }
        Ok((u * svd.v_t.rows(0, keep), norm))
    })?;
    let norm = shrunk.iter().map(|(_, n)| n).sum::<f64>() / t.ell();
    let slices: Vec<DMatrix<f64>> = shrunk.into_iter().map(|(m, _)| m).collect();
    Ok((from_transformed_slices(&slices, t)?, norm))
}

/// Entrywise soft thresholding `sign(y) max(|y| - tau, 0)`, the proximal
/// operator of `tau ||.||_1`. Entries with `|y| == tau` map to zero.
pub fn soft_threshold(y: &Tensor3, tau: f64) -> Tensor3 {
    assert!(tau >= 0.0, "soft threshold level must be nonnegative");
    y.map(|v| shrink(v, tau))
}

#[inline]
pub(crate) fn shrink(v: f64, tau: f64) -> f64 {
    let m = v.abs() - tau;
    if m > 0.0 {
        m.copysign(v)
    } else {
        0.0
    }
}

/// `tau ||x||_* + 1/2 ||x - y||_F^2`, the objective that [`tsvt`] minimises.
pub fn tsvt_objective(x: &Tensor3, y: &Tensor3, tau: f64, t: &Transform) -> Result<f64> {
    let d = (x - y).frobenius();
    Ok(tau * nuclear_norm(x, t)? + 0.5 * d * d)
}
