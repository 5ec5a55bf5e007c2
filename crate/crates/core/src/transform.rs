//! Invertible mode-3 transforms.
//!
//! A [`Transform`] acts on a tensor tube by tube: `L(A)(i,j,:) = L * A(i,j,:)`.
//! Every transform in this crate satisfies `L'L = LL' = ell*I` for some
//! `ell > 0`, which gives the inverse for free as `L' / ell` and makes the
//! spatial and transform-domain inner products agree up to the factor `ell`.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::seed;
use crate::tensor3::Tensor3;

/// Relative tolerance for `L'L = LL' = ell*I` and `L * L^-1 = I`.
pub const VALIDATION_TOL: f64 = 1e-10;

#[derive(Clone)]
pub struct Transform {
    matrix: DMatrix<f64>,
    inverse: DMatrix<f64>,
    ell: f64,
    label: String,
}

impl fmt::Debug for Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Transform")
            .field("label", &self.label)
            .field("size", &self.size())
            .field("ell", &self.ell)
            .finish()
    }
}

impl Transform {
    /// Checks `L'L = LL' = ell*I` and builds the transform.
    ///
    /// `ell` is estimated as the mean diagonal of `L'L`; the inverse is `L'/ell`.
    pub fn validate(matrix: DMatrix<f64>) -> Result<Transform> {
        Self::validate_labeled(matrix, "file".to_string(), None)
    }

    /// `known_ell` pins `ell` for constructions where it is exact by design.
    fn validate_labeled(
        matrix: DMatrix<f64>,
        label: String,
        known_ell: Option<f64>,
    ) -> Result<Transform> {
        let (rows, cols) = matrix.shape();
        if rows != cols || rows == 0 {
            return Err(Error::InvalidTransform(format!(
                "transform matrix must be square and non-empty, got {rows}x{cols}"
            )));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidTransform("non-finite matrix entry".into()));
        }
        let n = rows;
        let gram = matrix.transpose() * &matrix;
        let ell = known_ell.unwrap_or_else(|| gram.diagonal().sum() / n as f64);
        if !(ell > 0.0) {
            return Err(Error::TransformNotScaledOrthogonal {
                deviation: f64::INFINITY,
                ell,
            });
        }
        let outer = &matrix * matrix.transpose();
        let scaled_identity = DMatrix::<f64>::identity(n, n) * ell;
        let deviation = (&gram - &scaled_identity)
            .amax()
            .max((&outer - &scaled_identity).amax())
            / ell;
        if deviation > VALIDATION_TOL {
            return Err(Error::TransformNotScaledOrthogonal { deviation, ell });
        }
        let inverse = matrix.transpose() / ell;
        let round_trip = (&matrix * &inverse - DMatrix::<f64>::identity(n, n)).amax();
        if round_trip > VALIDATION_TOL {
            return Err(Error::TransformNotScaledOrthogonal {
                deviation: round_trip,
                ell,
            });
        }
        Ok(Transform {
            matrix,
            inverse,
            ell,
            label,
        })
    }

    /// The identity transform (`ell = 1`).
    pub fn identity(n3: usize) -> Transform {
        assert!(n3 >= 1, "transform size must be positive");
        Self::validate_labeled(DMatrix::identity(n3, n3), "identity".into(), Some(1.0))
            .expect("identity is orthogonal")
    }

    /// Orthonormal DCT-II matrix (`ell = 1`): row `k`, column `j` (0-based)
    /// is `c_k cos(pi k (2j+1) / (2 n3))` with `c_0 = sqrt(1/n3)` and
    /// `c_k = sqrt(2/n3)` otherwise.
    pub fn dct(n3: usize) -> Transform {
        assert!(n3 >= 1, "transform size must be positive");
        let n = n3 as f64;
        let m = DMatrix::from_fn(n3, n3, |k, j| {
            let c = if k == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
            c * (std::f64::consts::PI * k as f64 * (2 * j + 1) as f64 / (2.0 * n)).cos()
        });
        Self::validate_labeled(m, "dct".into(), Some(1.0)).expect("DCT-II is orthogonal")
    }

    /// Haar-distributed random orthogonal matrix (`ell = 1`): QR of an i.i.d.
    /// standard Gaussian matrix with `R`'s diagonal made positive.
    pub fn random_orthogonal(n3: usize, seed: u64) -> Transform {
        assert!(n3 >= 1, "transform size must be positive");
        let mut rng = seed::rng(seed, "transform/rom", &[n3 as u64]);
        let g = DMatrix::from_fn(n3, n3, |_, _| StandardNormal.sample(&mut rng));
        let qr = g.qr();
        let r = qr.r();
        let mut q = qr.q();
        for (j, mut col) in q.column_iter_mut().enumerate() {
            if r[(j, j)] < 0.0 {
                col.neg_mut();
            }
        }
        Self::validate_labeled(q, format!("rom:{seed}"), Some(1.0)).expect("QR factor is orthogonal")
    }

    /// Unnormalised Sylvester-Hadamard matrix with entries `+-1`; `ell = n3`.
    pub fn hadamard(n3: usize) -> Result<Transform> {
        if n3 == 0 || !n3.is_power_of_two() {
            return Err(Error::InvalidTransform(format!(
                "Hadamard size must be a power of two, got {n3}"
            )));
        }
        let m = DMatrix::from_fn(n3, n3, |i, j| {
            if (i & j).count_ones() % 2 == 0 {
                1.0
            } else {
                -1.0
            }
        });
        Self::validate_labeled(m, "hadamard".into(), Some(n3 as f64))
    }

    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.inverse
    }

    /// The constant in `L'L = LL' = ell*I`.
    pub fn ell(&self) -> f64 {
        self.ell
    }

    /// Short name such as `dct`, `rom:7` or `hadamard`.
    pub fn label(&self) -> &str {
        &self.label
    }

    /// `L(A) = A x_3 L`.
    pub fn apply(&self, a: &Tensor3) -> Result<Tensor3> {
        self.check(a)?;
        Ok(mode3(&self.matrix, a))
    }

    /// `L^-1(A) = A x_3 L^-1`.
    pub fn apply_inverse(&self, a: &Tensor3) -> Result<Tensor3> {
        self.check(a)?;
        Ok(mode3(&self.inverse, a))
    }

    fn check(&self, a: &Tensor3) -> Result<()> {
        if a.n3() != self.size() {
            return Err(Error::DimensionMismatch(format!(
                "tensor has n3 = {}, transform has size {}",
                a.n3(),
                self.size()
            )));
        }
        Ok(())
    }
}

/// Textual transform selector: `identity`, `dct`, `rom`, `rom:<seed>`,
/// `hadamard` or `file:<path>` (a CSV matrix checked by
/// [`Transform::validate`]).
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TransformSpec {
    Identity,
    Dct,
    /// Random orthogonal matrix; `None` derives the seed from the run seed.
    Rom(Option<u64>),
    Hadamard,
    File(PathBuf),
}

impl TransformSpec {
    /// Builds the transform for tubes of length `n3`. `run_seed` keys `rom`
    /// without an explicit seed.
    pub fn build(&self, n3: usize, run_seed: u64) -> Result<Transform> {
        if n3 == 0 {
            return Err(Error::InvalidTransform("transform size must be positive".into()));
        }
        let t = match self {
            TransformSpec::Identity => Transform::identity(n3),
            TransformSpec::Dct => Transform::dct(n3),
            TransformSpec::Rom(Some(s)) => Transform::random_orthogonal(n3, *s),
            TransformSpec::Rom(None) => {
                Transform::random_orthogonal(n3, seed::derive(run_seed, "transform", &[]))
            }
            TransformSpec::Hadamard => Transform::hadamard(n3)?,
            TransformSpec::File(p) => {
                let m = crate::tensor3::io::parse_matrix_csv(&std::fs::read_to_string(p)?)?;
                let t = Transform::validate(m)?;
                if t.size() != n3 {
                    return Err(Error::DimensionMismatch(format!(
                        "transform in {} is {}x{}, data needs n3 = {n3}",
                        p.display(),
                        t.size(),
                        t.size()
                    )));
                }
                t
            }
        };
        Ok(t)
    }
}

impl FromStr for TransformSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::InvalidArgument(format!(
            "unknown transform {s:?}; expected dct, rom[:seed], hadamard, identity or file:<path>"
        ));
        Ok(match s {
            "identity" => TransformSpec::Identity,
            "dct" => TransformSpec::Dct,
            "rom" => TransformSpec::Rom(None),
            "hadamard" => TransformSpec::Hadamard,
            _ => {
                if let Some(seed) = s.strip_prefix("rom:") {
                    TransformSpec::Rom(Some(seed.parse().map_err(|_| bad())?))
                } else if let Some(path) = s.strip_prefix("file:") {
                    if path.is_empty() {
                        return Err(bad());
                    }
                    TransformSpec::File(PathBuf::from(path))
                } else {
                    return Err(bad());
                }
            }
        })
    }
}

impl fmt::Display for TransformSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TransformSpec::Identity => write!(f, "identity"),
            TransformSpec::Dct => write!(f, "dct"),
            TransformSpec::Rom(None) => write!(f, "rom"),
            TransformSpec::Rom(Some(s)) => write!(f, "rom:{s}"),
            TransformSpec::Hadamard => write!(f, "hadamard"),
            TransformSpec::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

impl Serialize for TransformSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TransformSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Mode-3 product: output slice `k` is `sum_j m[k, j] * slice_j`.
pub(crate) fn mode3(m: &DMatrix<f64>, a: &Tensor3) -> Tensor3 {
    let (n1, n2, n3) = a.dims();
    let slice_len = n1 * n2;
    let src = a.as_slice();
    let mut out = vec![0.0; src.len()];
    par::for_each_chunk_mut(&mut out, slice_len, |k, dst| {
        for j in 0..n3 {
            let c = m[(k, j)];
            if c == 0.0 {
                continue;
            }
            let s = &src[j * slice_len..(j + 1) * slice_len];
            dst.iter_mut().zip(s).for_each(|(d, x)| *d += c * x);
        }
    });
    Tensor3::from_raw(a.dims(), out)
}
