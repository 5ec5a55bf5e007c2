//! Synthetic low-rank plus sparse data, recovery trials and phase grids.
//!
//! Low-rank parts are `P *_L Q'` with Gaussian factors of variance
//! `1/max(n1, n2)`; sparse parts have a support of exactly `m` positions
//! drawn uniformly without replacement. A trial succeeds when the recovered
//! low-rank part has relative Frobenius error at most [`SUCCESS_THRESHOLD`].

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::seed;
use crate::solver::{solve, SolverConfig};
use crate::tensor3::Tensor3;
use crate::tlinalg::{tprod, ttranspose, tubal_rank, DEFAULT_RANK_TOL};
use crate::transform::{Transform, TransformSpec};

pub const SUCCESS_THRESHOLD: f64 = 1e-3;

/// Entries of the recovered sparse part count as nonzero above this fraction
/// of its largest magnitude.
pub const SPARSE_SUPPORT_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignModel {
    /// Fair `+-1` coin flips.
    RandomSigns,
    /// Signs of the low-rank part on the support.
    CoherentSigns,
}

impl FromStr for SignModel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" | "random_signs" => Ok(SignModel::RandomSigns),
            "coherent" | "coherent_signs" => Ok(SignModel::CoherentSigns),
            _ => Err(Error::InvalidArgument(format!(
                "unknown sign model {s:?}; expected random or coherent"
            ))),
        }
    }
}

impl fmt::Display for SignModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SignModel::RandomSigns => "random",
            SignModel::CoherentSigns => "coherent",
        })
    }
}

/// `P *_L Q'` with `P: n1 x r x n3`, `Q: n2 x r x n3`, entries
/// `N(0, 1/max(n1, n2))`. `r = 0` gives the zero tensor.
pub fn gen_low_rank(
    n1: usize,
    n2: usize,
    n3: usize,
    r: usize,
    t: &Transform,
    seed: u64,
) -> Result<Tensor3> {
    if r > n1.min(n2) {
        return Err(Error::InvalidArgument(format!(
            "rank {r} exceeds min(n1, n2) = {}",
            n1.min(n2)
        )));
    }
    if r == 0 {
        return Ok(Tensor3::zeros(n1, n2, n3));
    }
    let normal = Normal::new(0.0, 1.0 / (n1.max(n2) as f64).sqrt()).expect("valid std");
    let mut rng = seed::rng(seed, "synth/low_rank", &[]);
    let p = Tensor3::from_fn(n1, r, n3, |_, _, _| normal.sample(&mut rng))?;
    let q = Tensor3::from_fn(n2, r, n3, |_, _, _| normal.sample(&mut rng))?;
    tprod(&p, &ttranspose(&q, t)?, t)
}

/// Sparse tensor with exactly `m` support positions.
pub fn gen_sparse(
    n1: usize,
    n2: usize,
    n3: usize,
    m: usize,
    sign_model: SignModel,
    low_rank_ref: Option<&Tensor3>,
    seed: u64,
) -> Result<Tensor3> {
    let len = n1 * n2 * n3;
    if m > len {
        return Err(Error::InvalidArgument(format!(
            "support size {m} exceeds {len} entries"
        )));
    }
    let reference = match (sign_model, low_rank_ref) {
        (SignModel::CoherentSigns, None) => {
            return Err(Error::InvalidArgument(
                "coherent signs need the low-rank reference tensor".into(),
            ))
        }
        (SignModel::CoherentSigns, Some(r)) if r.dims() != (n1, n2, n3) => {
            return Err(Error::DimensionMismatch(format!(
                "reference is {:?}, expected {:?}",
                r.dims(),
                (n1, n2, n3)
            )))
        }
        (_, r) => r,
    };
    let mut rng = seed::rng(seed, "synth/sparse", &[]);
    let support = index::sample(&mut rng, len, m);
    let mut out = Tensor3::zeros(n1, n2, n3);
    let data = out.data_mut();
    for pos in support.iter() {
        data[pos] = match sign_model {
            SignModel::RandomSigns => {
                if rng.random_bool(0.5) {
                    1.0
                } else {
                    -1.0
                }
            }
            SignModel::CoherentSigns => {
                let v = reference.expect("checked above").as_slice()[pos];
                if v > 0.0 {
                    1.0
                } else if v < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
        };
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryTrialConfig {
    pub n1: usize,
    pub n2: usize,
    pub n3: usize,
    pub r: usize,
    pub m: usize,
    pub sign_model: SignModel,
    pub transform: TransformSpec,
    pub seed: u64,
}

impl RecoveryTrialConfig {
    /// Cubic `n x n x n` problem with rank `0.1 n` and sparsity `frac * n^3`.
    pub fn table_protocol(n: usize, sparsity: f64, transform: TransformSpec, seed: u64) -> Self {
        Self {
            n1: n,
            n2: n,
            n3: n,
            r: ((0.1 * n as f64).round() as usize).max(1),
            m: (sparsity * (n * n * n) as f64).round() as usize,
            sign_model: SignModel::RandomSigns,
            transform,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n1 == 0 || self.n2 == 0 || self.n3 == 0 {
            return Err(Error::InvalidArgument("sizes must be positive".into()));
        }
        if self.r > self.n1.min(self.n2) {
            return Err(Error::InvalidArgument(format!(
                "rank {} exceeds min(n1, n2)",
                self.r
            )));
        }
        if self.m > self.n1 * self.n2 * self.n3 {
            return Err(Error::InvalidArgument(format!(
                "support size {} exceeds the number of entries",
                self.m
            )));
        }
        Ok(())
    }
}

/// One row in the style of the exact-recovery tables.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialReport {
    pub n1: usize,
    pub n2: usize,
    pub n3: usize,
    pub r: usize,
    pub m: usize,
    pub transform: String,
    pub rank_hat: usize,
    pub sparse_nnz_hat: usize,
    pub rel_err_low_rank: f64,
    pub rel_err_sparse: f64,
    pub success: bool,
    pub iterations: usize,
    pub converged: bool,
}

impl TrialReport {
    pub const CSV_HEADER: &'static str = "n1,n2,n3,r,m,transform,rank_t_hat,sparse_l0_hat,rel_err_L,rel_err_S,success,iterations,converged";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{:.16e},{:.16e},{},{},{}",
            self.n1,
            self.n2,
            self.n3,
            self.r,
            self.m,
            self.transform,
            self.rank_hat,
            self.sparse_nnz_hat,
            self.rel_err_low_rank,
            self.rel_err_sparse,
            self.success,
            self.iterations,
            self.converged
        )
    }
}

/// Generates `X = L0 + S0`, solves, and scores the recovery.
pub fn run_recovery_trial(cfg: &RecoveryTrialConfig, solver_cfg: &SolverConfig) -> Result<TrialReport> {
    cfg.validate()?;
    let t = cfg.transform.build(cfg.n3, cfg.seed)?;
    run_trial_with(cfg, &t, solver_cfg)
}

fn run_trial_with(
    cfg: &RecoveryTrialConfig,
    t: &Transform,
    solver_cfg: &SolverConfig,
) -> Result<TrialReport> {
    let (n1, n2, n3) = (cfg.n1, cfg.n2, cfg.n3);
    let l0 = gen_low_rank(n1, n2, n3, cfg.r, t, cfg.seed)?;
    let s0 = gen_sparse(n1, n2, n3, cfg.m, cfg.sign_model, Some(&l0), cfg.seed)?;
    let x = &l0 + &s0;
    let sol = solve(&x, t, solver_cfg)?;
    let rel_err_low_rank = sol.low_rank.rel_error(&l0)?;
    let rel_err_sparse = sol.sparse.rel_error(&s0)?;
    Ok(TrialReport {
        n1,
        n2,
        n3,
        r: cfg.r,
        m: cfg.m,
        transform: t.label().to_string(),
        rank_hat: tubal_rank(&sol.low_rank, t, DEFAULT_RANK_TOL)?,
        sparse_nnz_hat: sol.sparse.count_above(SPARSE_SUPPORT_TOL * sol.sparse.linf()),
        rel_err_low_rank,
        rel_err_sparse,
        success: rel_err_low_rank <= SUCCESS_THRESHOLD,
        iterations: sol.iterations,
        converged: sol.converged,
    })
}

/// Success fractions over a grid of `(rank ratio, sparsity ratio)` cells.
/// `success[a][b]` belongs to `rank_ratios[a]` and `sparsity_ratios[b]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhaseGrid {
    pub rank_ratios: Vec<f64>,
    pub sparsity_ratios: Vec<f64>,
    pub trials_per_cell: usize,
    pub success: Vec<Vec<f64>>,
}

impl PhaseGrid {
    /// Cells whose success fraction exceeds that of the neighbour with the
    /// next smaller rank ratio or the next smaller sparsity ratio. A perfect
    /// phase diagram has none.
    pub fn monotonicity_violations(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for a in 0..self.rank_ratios.len() {
            for b in 0..self.sparsity_ratios.len() {
                let v = self.success[a][b];
                let up = a > 0 && v > self.success[a - 1][b] + 1e-12;
                let left = b > 0 && v > self.success[a][b - 1] + 1e-12;
                if up || left {
                    out.push((a, b));
                }
            }
        }
        out
    }

    /// Cells whose fractions differ from `other`'s.
    pub fn differing_cells(&self, other: &PhaseGrid) -> usize {
        self.success
            .iter()
            .flatten()
            .zip(other.success.iter().flatten())
            .filter(|(a, b)| (*a - *b).abs() > 1e-12)
            .count()
    }

    /// CSV matrix: header `rank_ratio\sparsity_ratio,<rho_1>,...`, then one row
    /// per rank ratio.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("rank_ratio\\sparsity_ratio");
        for s in &self.sparsity_ratios {
            out.push_str(&format!(",{s}"));
        }
        out.push('\n');
        for (r, row) in self.rank_ratios.iter().zip(&self.success) {
            out.push_str(&r.to_string());
            for v in row {
                out.push_str(&format!(",{:.16e}", v));
            }
            out.push('\n');
        }
        out
    }
}

/// `start:step:end` inclusive, computed by index to avoid drift.
pub fn ratio_range(start: f64, step: f64, end: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(end >= start) || !start.is_finite() || !end.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "bad range {start}:{step}:{end}"
        )));
    }
    let count = ((end - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count)
        .map(|i| {
            let v = start + i as f64 * step;
            (v * 1e12).round() / 1e12
        })
        .collect())
}

/// Runs `trials` independent trials per cell. For each cell
/// `r = max(1, round(ratio * min(n1, n2)))` and `m = round(rho * n1 n2 n3)`;
/// the base config's `r` and `m` are ignored. Trial seeds are derived from the
/// base seed and the cell and trial indices, so they do not depend on the
/// transform or on scheduling.
pub fn run_phase_grid(
    base: &RecoveryTrialConfig,
    rank_ratios: &[f64],
    sparsity_ratios: &[f64],
    trials: usize,
    solver_cfg: &SolverConfig,
) -> Result<PhaseGrid> {
    if rank_ratios.is_empty() || sparsity_ratios.is_empty() || trials == 0 {
        return Err(Error::InvalidArgument(
            "phase grid needs nonempty ratio lists and at least one trial".into(),
        ));
    }
    if let Some(v) = rank_ratios
        .iter()
        .chain(sparsity_ratios)
        .find(|v| !(**v > 0.0 && **v < 1.0))
    {
        return Err(Error::InvalidArgument(format!(
            "ratios must lie in (0, 1), got {v}"
        )));
    }
    let t = base.transform.build(base.n3, base.seed)?;
    let n = base.n1.min(base.n2);
    let total = base.n1 * base.n2 * base.n3;
    let (na, nb) = (rank_ratios.len(), sparsity_ratios.len());
    let jobs = na * nb * trials;
    let outcomes = par::try_map_range(jobs, |job| -> Result<bool> {
        let a = job / (nb * trials);
        let b = (job / trials) % nb;
        let k = job % trials;
        let cfg = RecoveryTrialConfig {
            r: ((rank_ratios[a] * n as f64).round() as usize).clamp(1, n),
            m: (sparsity_ratios[b] * total as f64).round() as usize,
            seed: seed::derive(base.seed, "phase/trial", &[a as u64, b as u64, k as u64]),
            ..base.clone()
        };
        Ok(run_trial_with(&cfg, &t, solver_cfg)?.success)
    })?;
    let success = (0..na)
        .map(|a| {
            (0..nb)
                .map(|b| {
                    let start = (a * nb + b) * trials;
                    let hits = outcomes[start..start + trials].iter().filter(|&&s| s).count();
                    hits as f64 / trials as f64
                })
                .collect()
        })
        .collect();
    Ok(PhaseGrid {
        rank_ratios: rank_ratios.to_vec(),
        sparsity_ratios: sparsity_ratios.to_vec(),
        trials_per_cell: trials,
        success,
    })
}
