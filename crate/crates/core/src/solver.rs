//! ADMM for `min ||L||_* + lambda ||S||_1  s.t.  X = L + S`.
//!
//! With the augmented Lagrangian
//! `||L||_* + lambda ||S||_1 + <Y, X - L - S> + mu/2 ||X - L - S||_F^2`
//! each iteration performs
//!
//! ```text
//! L <- tsvt(X - S + Y/mu, 1/mu)
//! S <- soft_threshold(X - L + Y/mu, lambda/mu)
//! Y <- Y + mu (X - L - S)
//! mu <- min(rho mu, mu_max)
//! ```
//!
//! starting from `L = S = Y = 0`, and stops once the largest entrywise change
//! of `L` and `S` and the largest constraint violation all drop to `tol`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prox::{shrink, tsvt_with_norm};
use crate::tensor3::Tensor3;
use crate::transform::Transform;

/// `1 / sqrt(max(n1, n2) * ell)`.
pub fn default_lambda(n1: usize, n2: usize, t: &Transform) -> f64 {
    1.0 / ((n1.max(n2) as f64) * t.ell()).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Lambda {
    /// Use [`default_lambda`].
    Auto,
    Value(f64),
}

impl Lambda {
    pub fn resolve(self, n1: usize, n2: usize, t: &Transform) -> f64 {
        match self {
            Lambda::Auto => default_lambda(n1, n2, t),
            Lambda::Value(v) => v,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub lambda: Lambda,
    /// Initial penalty parameter.
    pub mu0: f64,
    /// Penalty growth factor per iteration.
    pub rho: f64,
    pub mu_max: f64,
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            lambda: Lambda::Auto,
            mu0: 1e-3,
            rho: 1.1,
            mu_max: 1e10,
            tol: 1e-8,
            max_iters: 500,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if let Lambda::Value(v) = self.lambda {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("lambda must be positive, got {v}"));
            }
        }
        if !(self.mu0 > 0.0 && self.mu0.is_finite()) {
            return bad(format!("mu0 must be positive, got {}", self.mu0));
        }
        if !(self.rho >= 1.0 && self.rho.is_finite()) {
            return bad(format!("rho must be >= 1, got {}", self.rho));
        }
        if !(self.mu_max >= self.mu0 && self.mu_max.is_finite()) {
            return bad(format!(
                "mu_max ({}) must be finite and >= mu0 ({})",
                self.mu_max, self.mu0
            ));
        }
        if !(self.tol > 0.0) {
            return bad(format!("tol must be positive, got {}", self.tol));
        }
        if self.max_iters == 0 {
            return bad("max_iters must be positive".into());
        }
        Ok(())
    }
}

/// One row of the convergence trace.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iter: usize,
    /// `||L + S - X||_inf`
    pub primal_inf_norm: f64,
    pub d_l_inf: f64,
    pub d_s_inf: f64,
    /// Penalty used during this iteration.
    pub mu: f64,
    /// `||L||_* + lambda ||S||_1`
    pub objective: f64,
}

#[derive(Clone, Debug)]
pub struct TrpcaSolution {
    pub low_rank: Tensor3,
    pub sparse: Tensor3,
    pub lambda: f64,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<IterationRecord>,
}

impl TrpcaSolution {
    /// Trace as CSV with columns
    /// `iter,primal_inf_norm,dL_inf,dS_inf,mu,objective`.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("iter,primal_inf_norm,dL_inf,dS_inf,mu,objective\n");
        for r in &self.trace {
            out.push_str(&format!(
                "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                r.iter, r.primal_inf_norm, r.d_l_inf, r.d_s_inf, r.mu, r.objective
            ));
        }
        out
    }
}

pub fn solve(x: &Tensor3, t: &Transform, cfg: &SolverConfig) -> Result<TrpcaSolution> {
    cfg.validate()?;
    if x.n3() != t.size() {
        return Err(Error::DimensionMismatch(format!(
            "tensor has n3 = {}, transform has size {}",
            x.n3(),
            t.size()
        )));
    }
    if !x.is_finite() {
        return Err(Error::InvalidTensor("input has non-finite entries".into()));
    }
    let (n1, n2, n3) = x.dims();
    let lambda = cfg.lambda.resolve(n1, n2, t);
    let xs = x.as_slice();

    let mut low = Tensor3::zeros(n1, n2, n3);
    let mut sparse = Tensor3::zeros(n1, n2, n3);
    let mut dual = Tensor3::zeros(n1, n2, n3);
    let mut work = Tensor3::zeros(n1, n2, n3);
    let mut mu = cfg.mu0;
    let mut trace = Vec::new();
    let mut converged = false;

    for iter in 1..=cfg.max_iters {
        let inv_mu = 1.0 / mu;

        // L step
        for (((w, &xv), &sv), &yv) in work
            .data_mut()
            .iter_mut()
            .zip(xs)
            .zip(sparse.as_slice())
            .zip(dual.as_slice())
        {
            *w = xv - sv + yv * inv_mu;
        }
        let (new_low, low_nuclear) = tsvt_with_norm(&work, inv_mu, t)?;

        // S step, dual ascent and stopping quantities in one pass
        let s_tau = lambda * inv_mu;
        let (mut d_l, mut d_s, mut primal, mut l1) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
        {
            let ld = new_low.as_slice();
            let old_low = low.as_slice();
            let sd = sparse.data_mut();
            let yd = dual.data_mut();
            for idx in 0..xs.len() {
                let s_new = shrink(xs[idx] - ld[idx] + yd[idx] * inv_mu, s_tau);
                let resid = xs[idx] - ld[idx] - s_new;
                yd[idx] += mu * resid;
                d_l = d_l.max((ld[idx] - old_low[idx]).abs());
                d_s = d_s.max((s_new - sd[idx]).abs());
                primal = primal.max(resid.abs());
                l1 += s_new.abs();
                sd[idx] = s_new;
            }
        }
        low = new_low;

        let rec = IterationRecord {
            iter,
            primal_inf_norm: primal,
            d_l_inf: d_l,
            d_s_inf: d_s,
            mu,
            objective: low_nuclear + lambda * l1,
        };
        trace.push(rec);
        if !(rec.objective.is_finite() && primal.is_finite() && d_l.is_finite() && d_s.is_finite())
        {
            return Err(Error::NonFiniteIterate { iteration: iter });
        }
        if d_l.max(d_s).max(primal) <= cfg.tol {
            converged = true;
            break;
        }
        mu = (cfg.rho * mu).min(cfg.mu_max);
    }

    Ok(TrpcaSolution {
        iterations: trace.len(),
        low_rank: low,
        sparse,
        lambda,
        converged,
        trace,
    })
}
