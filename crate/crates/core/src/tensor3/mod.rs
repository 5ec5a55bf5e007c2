//! Dense real 3-way tensors.
//!
//! Storage is frontal-slice major: the slice index `k` varies slowest and each
//! `n1 x n2` frontal slice is stored column-major, so entry `(i, j, k)` lives
//! at `k*n1*n2 + j*n1 + i`. A frontal slice is therefore a contiguous block
//! that maps directly onto an `nalgebra` matrix view, and the whole tensor is
//! an `(n1*n2) x n3` column-major matrix whose rows are the tubes.
//!
//! All indices in this module are 0-based. The CLI documents 1-based indices.

pub mod io;

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use nalgebra::{DMatrix, DMatrixView, DMatrixViewMut};

use crate::error::{Error, Result};

/// Which entrywise norm to compute.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormKind {
    Frobenius,
    L1,
    LInf,
}

#[derive(Clone, PartialEq)]
pub struct Tensor3 {
    dims: (usize, usize, usize),
    data: Vec<f64>,
}

impl fmt::Debug for Tensor3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (n1, n2, n3) = self.dims;
        write!(f, "Tensor3({n1}x{n2}x{n3}")?;
        if self.data.len() <= 16 {
            write!(f, ", {:?}", self.data)?;
        }
        write!(f, ")")
    }
}

fn check_dims(n1: usize, n2: usize, n3: usize) -> Result<usize> {
    if n1 == 0 || n2 == 0 || n3 == 0 {
        return Err(Error::InvalidTensor(format!(
            "dimensions must be positive, got {n1}x{n2}x{n3}"
        )));
    }
    n1.checked_mul(n2)
        .and_then(|x| x.checked_mul(n3))
        .ok_or_else(|| Error::InvalidTensor("dimension product overflows".into()))
}

impl Tensor3 {
    /// All-zero tensor. Panics on a zero dimension.
    pub fn zeros(n1: usize, n2: usize, n3: usize) -> Self {
        let len = check_dims(n1, n2, n3).expect("Tensor3::zeros");
        Self {
            dims: (n1, n2, n3),
            data: vec![0.0; len],
        }
    }

    /// Builds a tensor from data already in slice-major layout.
    pub fn from_vec(n1: usize, n2: usize, n3: usize, data: Vec<f64>) -> Result<Self> {
        let len = check_dims(n1, n2, n3)?;
        if data.len() != len {
            return Err(Error::InvalidTensor(format!(
                "expected {len} values for {n1}x{n2}x{n3}, got {}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidTensor(format!(
                "non-finite entry at linear index {pos}"
            )));
        }
        Ok(Self {
            dims: (n1, n2, n3),
            data,
        })
    }

    pub fn from_fn<F>(n1: usize, n2: usize, n3: usize, mut f: F) -> Result<Self>
    where
        F: FnMut(usize, usize, usize) -> f64,
    {
        let len = check_dims(n1, n2, n3)?;
        let mut data = Vec::with_capacity(len);
        for k in 0..n3 {
            for j in 0..n2 {
                for i in 0..n1 {
                    data.push(f(i, j, k));
                }
            }
        }
        Self::from_vec(n1, n2, n3, data)
    }

    /// Stacks equally sized matrices as frontal slices.
    pub fn from_slices(slices: &[DMatrix<f64>]) -> Result<Self> {
        let first = slices
            .first()
            .ok_or_else(|| Error::InvalidTensor("no frontal slices given".into()))?;
        let (n1, n2) = first.shape();
        let mut data = Vec::with_capacity(n1 * n2 * slices.len());
        for (k, s) in slices.iter().enumerate() {
            if s.shape() != (n1, n2) {
                return Err(Error::DimensionMismatch(format!(
                    "slice {k} is {:?}, expected {:?}",
                    s.shape(),
                    (n1, n2)
                )));
            }
            data.extend_from_slice(s.as_slice());
        }
        Self::from_vec(n1, n2, slices.len(), data)
    }

    /// Unchecked constructor for internal kernels whose outputs are finite
    /// whenever their inputs are.
    pub(crate) fn from_raw(dims: (usize, usize, usize), data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), dims.0 * dims.1 * dims.2);
        Self { dims, data }
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    pub fn n1(&self) -> usize {
        self.dims.0
    }

    pub fn n2(&self) -> usize {
        self.dims.1
    }

    pub fn n3(&self) -> usize {
        self.dims.2
    }

    /// Number of entries, `n1*n2*n3`.
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Raw entries in slice-major layout.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    fn offset(&self, i: usize, j: usize, k: usize) -> usize {
        let (n1, n2, _) = self.dims;
        k * n1 * n2 + j * n1 + i
    }

    /// Entry `(i, j, k)`, 0-based. Panics when out of range.
    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        let (n1, n2, n3) = self.dims;
        assert!(i < n1 && j < n2 && k < n3, "index ({i},{j},{k}) out of range");
        self.data[self.offset(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, value: f64) {
        let (n1, n2, n3) = self.dims;
        assert!(i < n1 && j < n2 && k < n3, "index ({i},{j},{k}) out of range");
        let o = self.offset(i, j, k);
        self.data[o] = value;
    }

    fn slice_range(&self, k: usize) -> Result<std::ops::Range<usize>> {
        let (n1, n2, n3) = self.dims;
        if k >= n3 {
            return Err(Error::IndexOutOfRange {
                what: "frontal slice",
                index: k + 1,
                len: n3,
            });
        }
        let m = n1 * n2;
        Ok(k * m..(k + 1) * m)
    }

    /// View of frontal slice `k` (0-based).
    pub fn frontal_slice(&self, k: usize) -> Result<DMatrixView<'_, f64>> {
        let r = self.slice_range(k)?;
        let (n1, n2, _) = self.dims;
        Ok(DMatrixView::from_slice(&self.data[r], n1, n2))
    }

    /// Mutable view of frontal slice `k` (0-based); writes go straight into
    /// the tensor.
    pub fn frontal_slice_mut(&mut self, k: usize) -> Result<DMatrixViewMut<'_, f64>> {
        let r = self.slice_range(k)?;
        let (n1, n2, _) = self.dims;
        Ok(DMatrixViewMut::from_slice(&mut self.data[r], n1, n2))
    }

    /// Owned copies of all frontal slices.
    pub fn slices(&self) -> Vec<DMatrix<f64>> {
        let (n1, n2, _) = self.dims;
        self.data
            .chunks_exact(n1 * n2)
            .map(|c| DMatrix::from_column_slice(n1, n2, c))
            .collect()
    }

    /// The tube `(i, j, :)`.
    pub fn tube(&self, i: usize, j: usize) -> Vec<f64> {
        (0..self.n3()).map(|k| self.get(i, j, k)).collect()
    }

    fn same_dims(&self, other: &Tensor3, op: &str) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::DimensionMismatch(format!(
                "{op}: {:?} vs {:?}",
                self.dims, other.dims
            )));
        }
        Ok(())
    }

    /// `<A, B> = sum_ijk a_ijk b_ijk`.
    pub fn inner(&self, other: &Tensor3) -> Result<f64> {
        self.same_dims(other, "inner")?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }

    pub fn norm(&self, kind: NormKind) -> f64 {
        match kind {
            NormKind::Frobenius => self.frobenius(),
            NormKind::L1 => self.l1(),
            NormKind::LInf => self.linf(),
        }
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|a| a * a).sum::<f64>().sqrt()
    }

    pub fn l1(&self) -> f64 {
        self.data.iter().map(|a| a.abs()).sum()
    }

    pub fn linf(&self) -> f64 {
        self.data.iter().fold(0.0, |m, a| m.max(a.abs()))
    }

    /// Number of entries with `|a| > threshold`.
    pub fn count_above(&self, threshold: f64) -> usize {
        self.data.iter().filter(|a| a.abs() > threshold).count()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|a| a.is_finite())
    }

    pub fn map<F: FnMut(f64) -> f64>(&self, mut f: F) -> Tensor3 {
        Tensor3::from_raw(self.dims, self.data.iter().map(|&a| f(a)).collect())
    }

    pub fn zip_map<F: FnMut(f64, f64) -> f64>(&self, other: &Tensor3, mut f: F) -> Result<Tensor3> {
        self.same_dims(other, "zip_map")?;
        Ok(Tensor3::from_raw(
            self.dims,
            self.data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        ))
    }

    pub fn scale(&self, alpha: f64) -> Tensor3 {
        self.map(|a| alpha * a)
    }

    /// `max |a - b|`.
    pub fn max_abs_diff(&self, other: &Tensor3) -> Result<f64> {
        self.same_dims(other, "max_abs_diff")?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    /// `||a - b||_F / ||b||_F`, or the absolute error when `b` is zero.
    pub fn rel_error(&self, reference: &Tensor3) -> Result<f64> {
        self.same_dims(reference, "rel_error")?;
        let diff: f64 = self
            .data
            .iter()
            .zip(&reference.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let r = reference.frobenius();
        Ok(if r > 0.0 { diff / r } else { diff })
    }
}

impl Add for &Tensor3 {
    type Output = Tensor3;
    fn add(self, rhs: &Tensor3) -> Tensor3 {
        self.zip_map(rhs, |a, b| a + b).expect("tensor add")
    }
}

impl Sub for &Tensor3 {
    type Output = Tensor3;
    fn sub(self, rhs: &Tensor3) -> Tensor3 {
        self.zip_map(rhs, |a, b| a - b).expect("tensor sub")
    }
}

impl Neg for &Tensor3 {
    type Output = Tensor3;
    fn neg(self) -> Tensor3 {
        self.map(|a| -a)
    }
}

impl Mul<f64> for &Tensor3 {
    type Output = Tensor3;
    fn mul(self, rhs: f64) -> Tensor3 {
        self.scale(rhs)
    }
}

impl AddAssign<&Tensor3> for Tensor3 {
    fn add_assign(&mut self, rhs: &Tensor3) {
        assert_eq!(self.dims, rhs.dims, "tensor add_assign");
        self.data.iter_mut().zip(&rhs.data).for_each(|(a, b)| *a += b);
    }
}

impl SubAssign<&Tensor3> for Tensor3 {
    fn sub_assign(&mut self, rhs: &Tensor3) {
        assert_eq!(self.dims, rhs.dims, "tensor sub_assign");
        self.data.iter_mut().zip(&rhs.data).for_each(|(a, b)| *a -= b);
    }
}
