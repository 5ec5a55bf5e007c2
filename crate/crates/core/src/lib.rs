//! Tensor robust principal component analysis under invertible linear
//! transforms.
//!
//! The crate is organised bottom-up:
//!
//! - [`tensor3`]: dense real 3-way tensors, norms, inner product and file I/O.
//! - [`transform`]: invertible mode-3 transforms `L` with `L'L = LL' = ell*I`.
//! - [`tlinalg`]: t-product, transpose, identity tensor, t-SVD, tubal rank,
//!   spectral/nuclear norms, standard bases and incoherence diagnostics.
//! - [`prox`]: tensor singular value thresholding and soft thresholding.
//! - [`solver`]: the ADMM solver for `min ||L||_* + lambda ||S||_1  s.t. X = L + S`.
//! - [`synth`]: synthetic data, recovery trials and phase-transition grids.
//! - [`imaging`]: PPM images, corruption, PSNR and denoising.
//! - [`cli`]: the `trpca` command-line front end.
//!
//! Per-slice work (SVDs, slice products, grid cells) runs on rayon when the
//! `parallel` feature is enabled (the default) and sequentially otherwise.
//! Both modes produce bit-identical results.

// `!(x > 0.0)` style checks are used on purpose so that NaN is rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod imaging;
mod par;
pub mod prox;
pub mod seed;
pub mod solver;
pub mod synth;
pub mod tensor3;
pub mod tlinalg;
pub mod transform;

pub use error::{Error, Result};
pub use par::current_num_threads;
pub use prox::{soft_threshold, tsvt};
pub use solver::{default_lambda, solve, Lambda, SolverConfig, TrpcaSolution};
pub use tensor3::{NormKind, Tensor3};
pub use tlinalg::{
    identity_tensor, incoherence, nuclear_norm, spectral_norm, tprod, tsvd, ttranspose,
    tubal_rank, IncoherenceReport, TSvdFactors,
};
pub use transform::Transform;

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
