//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Criterion 2 (full-size spot check) only runs with
//! `--slow` or `TRPCA_SLOW=1`:
//!
//! ```text
//! cargo test -p trpca --test acceptance -- --slow
//! ```

mod common;

use std::time::{Duration, Instant};

use common::{gaussian, matrix_rpca, nuclear_norm_oracle, rel_frob, rng, shipped_transforms, tensor_svt_oracle, to_matrix};
use rand::seq::index;
use rand::Rng;
use trpca::imaging::{corrupt, denoise, psnr, synthetic_image};
use trpca::prox::tsvt_objective;
use trpca::synth::{run_phase_grid, run_recovery_trial, ratio_range, RecoveryTrialConfig, SignModel};
use trpca::transform::TransformSpec;
use trpca::{
    default_lambda, identity_tensor, nuclear_norm, solve, spectral_norm, tprod, tsvd, tsvt, ttranspose,
    SolverConfig, Tensor3, Transform,
};

struct Verdict {
    pass: bool,
    detail: String,
}

type Criterion = (u32, &'static str, fn() -> Verdict, bool);

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn single_threaded<R: Send>(f: impl FnOnce() -> R + Send) -> R {
    rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(f)
}

fn exact_recovery() -> Verdict {
    let blocks = [
        ("DCT m=0.1n^3", 0.1, TransformSpec::Dct),
        ("DCT m=0.2n^3", 0.2, TransformSpec::Dct),
        ("ROM m=0.1n^3", 0.1, TransformSpec::Rom(None)),
    ];
    let start = Instant::now();
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, sparsity, spec) in blocks {
        let block_start = Instant::now();
        let mut ok = 0;
        let mut worst: f64 = 0.0;
        for seed in 0..10 {
            let cfg = RecoveryTrialConfig::table_protocol(40, sparsity, spec.clone(), seed);
            assert_eq!((cfg.r, cfg.m), (4, (sparsity * 64000.0) as usize));
            let t = spec.build(40, seed).unwrap();
            assert!((default_lambda(40, 40, &t) - 1.0 / 40f64.sqrt()).abs() < 1e-15);
            let rep = single_threaded(|| run_recovery_trial(&cfg, &SolverConfig::default()).unwrap());
            worst = worst.max(rep.rel_err_low_rank);
            if rep.success && rep.rank_hat == 4 {
                ok += 1;
            }
        }
        let secs = block_start.elapsed().as_secs_f64();
        pass &= ok >= 9;
        parts.push(format!("{name}: {ok}/10 ok, worst rel err {worst:.1e}, {secs:.1}s"));
    }
    let total = start.elapsed();
    pass &= total < Duration::from_secs(120);
    parts.push(format!("total {:.1}s single-threaded (limit 120s)", total.as_secs_f64()));
    verdict(pass, parts.join("; "))
}

fn full_size() -> Verdict {
    let cfg = RecoveryTrialConfig {
        n1: 100,
        n2: 100,
        n3: 100,
        r: 10,
        m: 100_000,
        sign_model: SignModel::RandomSigns,
        transform: TransformSpec::Dct,
        seed: 1,
    };
    let start = Instant::now();
    let rep = run_recovery_trial(&cfg, &SolverConfig::default()).unwrap();
    verdict(
        rep.success,
        format!(
            "rank {} rel err L {:.1e} S {:.1e}, {} iterations, {:.1}s",
            rep.rank_hat,
            rep.rel_err_low_rank,
            rep.rel_err_sparse,
            rep.iterations,
            start.elapsed().as_secs_f64()
        ),
    )
}

fn tsvt_correctness() -> Verdict {
    let mut worst_oracle: f64 = 0.0;
    let mut violations = 0;
    let mut checks = 0;
    for (ti, t) in [Transform::dct(4), Transform::hadamard(4).unwrap()].iter().enumerate() {
        for case in 0..20u64 {
            let mut r = rng(1000 * ti as u64 + case);
            let y = gaussian(6, 6, 4, &mut r);
            let spec = spectral_norm(&y, t).unwrap();
            for tau in [0.1, 0.5, 2.0 * spec] {
                let x = tsvt(&y, tau, t).unwrap();
                let oracle = tensor_svt_oracle(&y, tau, t);
                let diff = (&x - &oracle).frobenius();
                let rel = if diff == 0.0 { 0.0 } else { diff / oracle.frobenius() };
                worst_oracle = worst_oracle.max(rel);
                let best = tsvt_objective(&x, &y, tau, t).unwrap();
                for scale in [1e-2, 1e-4] {
                    for _ in 0..1000 {
                        let e = gaussian(6, 6, 4, &mut r);
                        let other = tsvt_objective(&(&x + &(&e * scale)), &y, tau, t).unwrap();
                        checks += 1;
                        if best > other + 1e-12 * other.abs().max(1.0) {
                            violations += 1;
                        }
                    }
                }
            }
        }
    }
    verdict(
        worst_oracle <= 1e-10 && violations == 0,
        format!("worst oracle rel diff {worst_oracle:.1e} (limit 1e-10); {violations}/{checks} perturbations beat the prox"),
    )
}

fn norm_identities() -> Verdict {
    let mut worst_inner: f64 = 0.0;
    let mut worst_norm: f64 = 0.0;
    let transforms = shipped_transforms(8, 77);
    for (ti, t) in transforms.iter().enumerate() {
        let mut r = rng(500 + ti as u64);
        for _ in 0..100 {
            let a = gaussian(5, 4, 8, &mut r);
            let b = gaussian(5, 4, 8, &mut r);
            let (la, lb) = (t.apply(&a).unwrap(), t.apply(&b).unwrap());
            // relative to the Cauchy-Schwarz bound, since <a, b> itself may be near 0
            let inner = (a.inner(&b).unwrap() * t.ell() - la.inner(&lb).unwrap()).abs()
                / (t.ell() * a.frobenius() * b.frobenius());
            let norm = (a.frobenius() * t.ell().sqrt() - la.frobenius()).abs() / la.frobenius();
            worst_inner = worst_inner.max(inner);
            worst_norm = worst_norm.max(norm);
        }
    }
    let labels: Vec<String> = transforms.iter().map(|t| format!("{} (ell={})", t.label(), t.ell())).collect();
    verdict(
        worst_inner <= 1e-10 && worst_norm <= 1e-10,
        format!(
            "inner {worst_inner:.1e}, frobenius {worst_norm:.1e} (limit 1e-10) over {}",
            labels.join(", ")
        ),
    )
}

fn nuclear_duality() -> Verdict {
    let mut worst_eq: f64 = 0.0;
    let mut worst_excess = f64::NEG_INFINITY;
    let mut worst_tight: f64 = 0.0;
    for (ti, t) in shipped_transforms(4, 5).iter().enumerate() {
        let mut r = rng(900 + ti as u64);
        for _ in 0..20 {
            let a = gaussian(6, 6, 4, &mut r);
            let slicewise = nuclear_norm_oracle(&a, t);
            let f = tsvd(&a, t, true).unwrap();
            let dual = f.s.inner(&identity_tensor(f.s.n1(), t)).unwrap();
            let lib = nuclear_norm(&a, t).unwrap();
            worst_eq = worst_eq.max((slicewise - dual).abs() / slicewise).max((slicewise - lib).abs() / slicewise);
            // U * V' has unit spectral norm and attains the bound
            let y_star = tprod(&f.u, &ttranspose(&f.v, t).unwrap(), t).unwrap();
            let attained = a.inner(&y_star).unwrap();
            worst_tight = worst_tight
                .max((attained - slicewise).abs() / slicewise)
                .max((spectral_norm(&y_star, t).unwrap() - 1.0).abs());
            for _ in 0..500 {
                let y = gaussian(6, 6, 4, &mut r);
                let y = y.scale(1.0 / spectral_norm(&y, t).unwrap());
                worst_excess = worst_excess.max(a.inner(&y).unwrap() - slicewise);
            }
        }
    }
    verdict(
        worst_eq <= 1e-10 && worst_excess <= 1e-8 && worst_tight <= 1e-10,
        format!(
            "slice-wise vs <S, I> rel diff {worst_eq:.1e} (limit 1e-10); max <A, Y> - ||A||_* over random probes {worst_excess:.2e} (limit 1e-8); U*V' attains it to {worst_tight:.1e}"
        ),
    )
}

fn matrix_reduction() -> Verdict {
    let cfg = SolverConfig::default();
    let t = Transform::identity(1);
    let mut worst: f64 = 0.0;
    for seed in 0..10 {
        let mut r = rng(300 + seed);
        let p = gaussian(30, 3, 1, &mut r);
        let q = gaussian(3, 30, 1, &mut r);
        let mut x = tprod(&p, &q, &t).unwrap().scale(1.0 / 30.0);
        for idx in index::sample(&mut r, 900, 90).iter() {
            let v = if r.random_bool(0.5) { 1.0 } else { -1.0 };
            x.set(idx % 30, idx / 30, 0, x.get(idx % 30, idx / 30, 0) + v);
        }
        let sol = solve(&x, &t, &cfg).unwrap();
        let (l, s, _) = matrix_rpca(&to_matrix(&x), default_lambda(30, 30, &t), cfg.mu0, cfg.rho, cfg.mu_max, cfg.tol, cfg.max_iters);
        worst = worst.max(rel_frob(&to_matrix(&sol.low_rank), &l)).max(rel_frob(&to_matrix(&sol.sparse), &s));
    }
    verdict(worst <= 1e-6, format!("worst rel diff {worst:.1e} over 10 instances (limit 1e-6)"))
}

fn phase_transition() -> Verdict {
    let start = Instant::now();
    let ratios = ratio_range(0.05, 0.1, 0.45).unwrap();
    let grid = |spec: TransformSpec| {
        let base = RecoveryTrialConfig {
            n1: 30,
            n2: 30,
            n3: 15,
            r: 1,
            m: 0,
            sign_model: SignModel::RandomSigns,
            transform: spec,
            seed: 2024,
        };
        run_phase_grid(&base, &ratios, &ratios, 3, &SolverConfig::default()).unwrap()
    };
    let dct = grid(TransformSpec::Dct);
    let rom = grid(TransformSpec::Rom(None));
    let (vd, vr) = (dct.monotonicity_violations().len(), rom.monotonicity_violations().len());
    let differ = dct.differing_cells(&rom);
    let secs = start.elapsed().as_secs_f64();
    let show = |g: &trpca::synth::PhaseGrid| {
        g.success
            .iter()
            .map(|row| row.iter().map(|v| format!("{v:.2}")).collect::<Vec<_>>().join(" "))
            .collect::<Vec<_>>()
            .join(" | ")
    };
    verdict(
        vd <= 1 && vr <= 1 && differ <= 1 && secs < 900.0,
        format!(
            "violations dct {vd} rom {vr}; differing cells {differ}/25; {secs:.1}s; dct [{}] rom [{}]",
            show(&dct),
            show(&rom)
        ),
    )
}

fn two_pass_psnr(est: &Tensor3, reference: &Tensor3) -> f64 {
    let mut mse = 0.0;
    for (a, b) in est.as_slice().iter().zip(reference.as_slice()) {
        mse += (a - b) * (a - b);
    }
    mse /= reference.len() as f64;
    let peak = reference.as_slice().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    10.0 * (peak * peak).log10() - 10.0 * mse.log10()
}

fn image_pipeline() -> Verdict {
    let img = synthetic_image(64, 64, 3, 0).unwrap();
    let (bad, _) = corrupt(&img, 0.1, 0).unwrap();
    let (rec, _) = denoise(&bad, &Transform::dct(3), &SolverConfig::default()).unwrap();
    let before = psnr(bad.tensor(), img.tensor()).unwrap();
    let after = psnr(rec.tensor(), img.tensor()).unwrap();
    let oracle_gap = (before - two_pass_psnr(bad.tensor(), img.tensor()))
        .abs()
        .max((after - two_pass_psnr(rec.tensor(), img.tensor())).abs());
    verdict(
        after - before >= 5.0 && oracle_gap <= 1e-9,
        format!("PSNR {before:.2} dB -> {after:.2} dB (gain {:.2}, need 5); oracle gap {oracle_gap:.1e} dB", after - before),
    )
}

fn algebra_suite() -> Verdict {
    let start = Instant::now();
    let (mut assoc, mut ident, mut transp, mut recon, mut orth) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut r = rng(4242);
    let mut cases = 0;
    for _ in 0..60 {
        let (n1, n2, n4, n3) = (r.random_range(1..8), r.random_range(1..8), r.random_range(1..8), r.random_range(1..9));
        for t in shipped_transforms(n3, r.random()) {
            cases += 1;
            let a = gaussian(n1, n2, n3, &mut r);
            let b = gaussian(n2, n4, n3, &mut r);
            let c = gaussian(n4, n1, n3, &mut r);
            let scale = |x: &Tensor3| x.frobenius().max(1.0);
            let ab_c = tprod(&tprod(&a, &b, &t).unwrap(), &c, &t).unwrap();
            let a_bc = tprod(&a, &tprod(&b, &c, &t).unwrap(), &t).unwrap();
            assoc = assoc.max(ab_c.max_abs_diff(&a_bc).unwrap() / scale(&ab_c));
            let ia = tprod(&identity_tensor(n1, &t), &a, &t).unwrap();
            let ai = tprod(&a, &identity_tensor(n2, &t), &t).unwrap();
            ident = ident.max(ia.max_abs_diff(&a).unwrap().max(ai.max_abs_diff(&a).unwrap()) / scale(&a));
            let lhs = ttranspose(&tprod(&a, &b, &t).unwrap(), &t).unwrap();
            let rhs = tprod(&ttranspose(&b, &t).unwrap(), &ttranspose(&a, &t).unwrap(), &t).unwrap();
            transp = transp.max(lhs.max_abs_diff(&rhs).unwrap() / scale(&lhs));
            let f = tsvd(&a, &t, false).unwrap();
            recon = recon.max(f.reconstruct().unwrap().max_abs_diff(&a).unwrap() / scale(&a));
            for q in [&f.u, &f.v] {
                let g = tprod(&ttranspose(q, &t).unwrap(), q, &t).unwrap();
                orth = orth.max(g.max_abs_diff(&identity_tensor(q.n2(), &t)).unwrap());
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        assoc <= 1e-9 && ident <= 1e-10 && transp <= 1e-10 && recon <= 1e-8 && orth <= 1e-8 && secs < 30.0,
        format!(
            "{cases} cases in {secs:.1}s: assoc {assoc:.1e}, identity {ident:.1e}, transpose {transp:.1e}, reconstruction {recon:.1e}, orthogonality {orth:.1e}"
        ),
    )
}

fn main() {
    let slow = std::env::args().any(|a| a == "--slow") || std::env::var("TRPCA_SLOW").is_ok_and(|v| v == "1");
    let criteria: [Criterion; 9] = [
        (1, "exact recovery at desk scale", exact_recovery, true),
        (2, "full-size spot check", full_size, slow),
        (3, "T-SVT correctness", tsvt_correctness, true),
        (4, "norm identities", norm_identities, true),
        (5, "nuclear-norm duality", nuclear_duality, true),
        (6, "matrix reduction", matrix_reduction, true),
        (7, "phase-transition trend", phase_transition, true),
        (8, "image pipeline", image_pipeline, true),
        (9, "algebra property suite", algebra_suite, true),
    ];
    let mut failed = 0;
    for (id, name, run, enabled) in criteria {
        if !enabled {
            println!("SKIP criterion {id}: {name} (run with --slow)");
            continue;
        }
        let v = run();
        println!("{} criterion {id}: {name}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        if !v.pass {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
