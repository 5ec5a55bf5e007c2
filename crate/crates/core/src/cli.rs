//! `trpca` command-line interface.
//!
//! Every flag can also be supplied through an environment variable named
//! `TRPCA_<FLAG>` (upper case, dashes as underscores); explicit flags win.
//! Each command that writes a file also writes `<file>.manifest.json` holding
//! the fully resolved configuration, which `trpca rerun --manifest` replays.
//!
//! Exit codes: 0 success, 1 usage error, 2 runtime error.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging;
use crate::solver::{solve, Lambda, SolverConfig};
use crate::synth::{self, RecoveryTrialConfig, SignModel, TrialReport};
use crate::tensor3::{io, Tensor3};
use crate::tlinalg::{self, DEFAULT_RANK_TOL};
use crate::transform::TransformSpec;

pub const LONG_VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), " (tensor format v1)");

#[derive(Parser, Debug)]
#[command(name = "trpca", version = LONG_VERSION, about = "Tensor robust PCA under invertible linear transforms")]
struct Cli {
    /// Worker threads for data-parallel kernels (1 = sequential reference mode)
    #[arg(long, global = true, env = "TRPCA_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Split a tensor file into low-rank and sparse parts
    Solve(SolveArgs),
    /// Run one synthetic exact-recovery trial and print its report row
    SynthRecover(SynthArgs),
    /// Success fractions over a (rank ratio, sparsity ratio) grid
    PhaseGrid(PhaseArgs),
    /// Corrupt a PPM colour image and recover it
    DenoiseImage(DenoiseArgs),
    /// Tubal rank, norms and incoherence of a tensor file
    Diagnose(DiagnoseArgs),
    /// Replay a run from its manifest
    Rerun(RerunArgs),
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct SolverFlags {
    /// Sparsity weight; defaults to 1/sqrt(max(n1, n2) * ell)
    #[arg(long, env = "TRPCA_LAMBDA")]
    lambda: Option<f64>,
    #[arg(long, default_value_t = 1e-8, env = "TRPCA_TOL")]
    tol: f64,
    #[arg(long, default_value_t = 500, env = "TRPCA_MAX_ITERS")]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-3, env = "TRPCA_MU0")]
    mu0: f64,
    #[arg(long, default_value_t = 1.1, env = "TRPCA_RHO")]
    rho: f64,
    #[arg(long, default_value_t = 1e10, env = "TRPCA_MU_MAX")]
    mu_max: f64,
}

impl SolverFlags {
    fn config(&self) -> SolverConfig {
        SolverConfig {
            lambda: self.lambda.map_or(Lambda::Auto, Lambda::Value),
            mu0: self.mu0,
            rho: self.rho,
            mu_max: self.mu_max,
            tol: self.tol,
            max_iters: self.max_iters,
        }
    }
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct SolveArgs {
    /// Tensor file (binary container, or CSV when the name ends in .csv)
    #[arg(long, env = "TRPCA_INPUT")]
    input: PathBuf,
    /// dct | rom[:seed] | hadamard | identity | file:<csv>
    #[arg(long, env = "TRPCA_TRANSFORM")]
    transform: TransformSpec,
    #[arg(long, default_value_t = 0, env = "TRPCA_SEED")]
    seed: u64,
    #[command(flatten)]
    solver: SolverFlags,
    #[arg(long, env = "TRPCA_OUT_LOWRANK")]
    out_lowrank: PathBuf,
    #[arg(long, env = "TRPCA_OUT_SPARSE")]
    out_sparse: PathBuf,
    /// Per-iteration convergence trace (CSV)
    #[arg(long, env = "TRPCA_TRACE")]
    trace: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct SynthArgs {
    /// Frontal slice size (n x n)
    #[arg(long, env = "TRPCA_N")]
    n: usize,
    #[arg(long, env = "TRPCA_N3")]
    n3: usize,
    /// Tubal rank of the low-rank part
    #[arg(long, env = "TRPCA_R")]
    r: usize,
    /// Number of corrupted entries
    #[arg(long, env = "TRPCA_M")]
    m: usize,
    #[arg(long, env = "TRPCA_TRANSFORM")]
    transform: TransformSpec,
    #[arg(long, env = "TRPCA_SEED")]
    seed: u64,
    /// random | coherent
    #[arg(long, default_value = "random", env = "TRPCA_SIGN_MODEL")]
    sign_model: SignModel,
    #[command(flatten)]
    solver: SolverFlags,
    /// Also write the report as CSV
    #[arg(long, env = "TRPCA_OUT")]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct PhaseArgs {
    /// start:step:end [default: 0.05:0.1:0.45, paper scale 0.01:0.01:0.5]
    #[arg(long, env = "TRPCA_RANK_RATIOS")]
    rank_ratios: Option<String>,
    /// start:step:end [default: 0.05:0.1:0.45, paper scale 0.01:0.01:0.5]
    #[arg(long, env = "TRPCA_SPARSITY_RATIOS")]
    sparsity_ratios: Option<String>,
    /// Trials per cell [default: 3, paper scale 10]
    #[arg(long, env = "TRPCA_TRIALS")]
    trials: Option<usize>,
    /// Frontal slice size [default: 30, paper scale 100]
    #[arg(long, env = "TRPCA_N")]
    n: Option<usize>,
    /// [default: 15, paper scale 100]
    #[arg(long, env = "TRPCA_N3")]
    n3: Option<usize>,
    /// Use the full-size grid defaults instead of the desk-scale ones
    #[arg(long, env = "TRPCA_PAPER_SCALE")]
    paper_scale: bool,
    #[arg(long, default_value = "dct", env = "TRPCA_TRANSFORM")]
    transform: TransformSpec,
    #[arg(long, default_value = "random", env = "TRPCA_SIGN_MODEL")]
    sign_model: SignModel,
    #[arg(long, default_value_t = 0, env = "TRPCA_SEED")]
    seed: u64,
    #[command(flatten)]
    solver: SolverFlags,
    #[arg(long, env = "TRPCA_OUT")]
    out: PathBuf,
}

impl PhaseArgs {
    fn resolve(&mut self) {
        let (ratios, trials, n, n3) = if self.paper_scale {
            ("0.01:0.01:0.5", 10, 100, 100)
        } else {
            ("0.05:0.1:0.45", 3, 30, 15)
        };
        self.rank_ratios.get_or_insert_with(|| ratios.into());
        self.sparsity_ratios.get_or_insert_with(|| ratios.into());
        self.trials.get_or_insert(trials);
        self.n.get_or_insert(n);
        self.n3.get_or_insert(n3);
    }
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct DenoiseArgs {
    /// Binary PPM (P6) colour image
    #[arg(long, env = "TRPCA_INPUT")]
    input: PathBuf,
    /// Fraction of pixels replaced by random values
    #[arg(long, default_value_t = 0.1, env = "TRPCA_FRACTION")]
    fraction: f64,
    #[arg(long, env = "TRPCA_SEED")]
    seed: u64,
    #[arg(long, default_value = "dct", env = "TRPCA_TRANSFORM")]
    transform: TransformSpec,
    #[command(flatten)]
    solver: SolverFlags,
    /// Recovered image (PPM)
    #[arg(long, env = "TRPCA_OUT")]
    out: PathBuf,
    /// Corrupted image (PPM)
    #[arg(long, env = "TRPCA_OUT_CORRUPTED")]
    out_corrupted: Option<PathBuf>,
    /// Report CSV: image, psnr_corrupted_db, psnr_recovered_db, iterations, wall_seconds
    #[arg(long, env = "TRPCA_REPORT")]
    report: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct DiagnoseArgs {
    #[arg(long, env = "TRPCA_INPUT")]
    input: PathBuf,
    #[arg(long, default_value = "dct", env = "TRPCA_TRANSFORM")]
    transform: TransformSpec,
    #[arg(long, default_value_t = 0, env = "TRPCA_SEED")]
    seed: u64,
    /// Write the diagnostics as JSON
    #[arg(long, env = "TRPCA_OUT")]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct RerunArgs {
    #[arg(long, env = "TRPCA_MANIFEST")]
    manifest: PathBuf,
}

/// Provenance record written next to every output file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Resolved flags, defaults included.
    pub config: serde_json::Value,
    /// Values derived from the inputs, such as the lambda actually used.
    pub resolved: serde_json::Value,
    pub seed: u64,
    pub version: String,
    pub tensor_format_version: u8,
    pub threads: usize,
    pub wall_seconds: f64,
}

impl RunManifest {
    pub fn path_for(output: &Path) -> PathBuf {
        let mut s = output.as_os_str().to_os_string();
        s.push(".manifest.json");
        PathBuf::from(s)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        serde_json::from_str(&fs::read_to_string(path)?)
            .map_err(|e| Error::Format(format!("manifest: {e}")))
    }
}

struct Ctx {
    started: Instant,
}

impl Ctx {
    fn write_manifest<C: Serialize>(
        &self,
        output: &Path,
        command: &str,
        config: &C,
        resolved: serde_json::Value,
        seed: u64,
    ) -> Result<()> {
        let m = RunManifest {
            command: command.into(),
            config: serde_json::to_value(config).map_err(|e| Error::Format(e.to_string()))?,
            resolved,
            seed,
            version: crate::VERSION.into(),
            tensor_format_version: io::FORMAT_VERSION,
            threads: crate::current_num_threads(),
            wall_seconds: self.started.elapsed().as_secs_f64(),
        };
        let text = serde_json::to_string_pretty(&m).map_err(|e| Error::Format(e.to_string()))?;
        fs::write(RunManifest::path_for(output), text + "\n")?;
        Ok(())
    }
}

fn write_tensor(t: &Tensor3, path: &Path) -> Result<()> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        fs::write(path, io::to_csv(t))?;
        Ok(())
    } else {
        io::save(t, path)
    }
}

fn parse_range(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    let num = |p: &str| {
        p.trim()
            .parse::<f64>()
            .map_err(|_| Error::InvalidArgument(format!("bad ratio range {s:?}")))
    };
    match parts.as_slice() {
        [v] => Ok(vec![num(v)?]),
        [a, b, c] => synth::ratio_range(num(a)?, num(b)?, num(c)?),
        _ => Err(Error::InvalidArgument(format!(
            "ratio range {s:?} must be start:step:end"
        ))),
    }
}

fn run_solve(ctx: &Ctx, a: &SolveArgs) -> Result<()> {
    let x = io::load_any(&a.input)?;
    let t = a.transform.build(x.n3(), a.seed)?;
    let cfg = a.solver.config();
    let sol = solve(&x, &t, &cfg)?;
    write_tensor(&sol.low_rank, &a.out_lowrank)?;
    write_tensor(&sol.sparse, &a.out_sparse)?;
    if let Some(p) = &a.trace {
        fs::write(p, sol.trace_csv())?;
    }
    let rank = tlinalg::tubal_rank(&sol.low_rank, &t, DEFAULT_RANK_TOL)?;
    println!(
        "iterations={} converged={} lambda={:.16e} tubal_rank={} sparse_l0={}",
        sol.iterations,
        sol.converged,
        sol.lambda,
        rank,
        sol.sparse.count_above(synth::SPARSE_SUPPORT_TOL * sol.sparse.linf())
    );
    let resolved = serde_json::json!({
        "dims": x.dims(),
        "transform": t.label(),
        "ell": t.ell(),
        "lambda": sol.lambda,
        "solver": cfg,
        "iterations": sol.iterations,
        "converged": sol.converged,
    });
    ctx.write_manifest(&a.out_lowrank, "solve", a, resolved, a.seed)
}

fn run_synth(ctx: &Ctx, a: &SynthArgs) -> Result<()> {
    let cfg = RecoveryTrialConfig {
        n1: a.n,
        n2: a.n,
        n3: a.n3,
        r: a.r,
        m: a.m,
        sign_model: a.sign_model,
        transform: a.transform.clone(),
        seed: a.seed,
    };
    let report = synth::run_recovery_trial(&cfg, &a.solver.config())?;
    let text = format!("{}\n{}\n", TrialReport::CSV_HEADER, report.csv_row());
    print!("{text}");
    if let Some(p) = &a.out {
        fs::write(p, &text)?;
        let resolved = serde_json::json!({ "trial": cfg, "solver": a.solver.config(), "report": report });
        ctx.write_manifest(p, "synth-recover", a, resolved, a.seed)?;
    }
    Ok(())
}

fn run_phase(ctx: &Ctx, a: &PhaseArgs) -> Result<()> {
    let mut a = a.clone();
    a.resolve();
    let rank_ratios = parse_range(a.rank_ratios.as_deref().unwrap_or_default())?;
    let sparsity_ratios = parse_range(a.sparsity_ratios.as_deref().unwrap_or_default())?;
    let (n, n3, trials) = (a.n.unwrap_or(30), a.n3.unwrap_or(15), a.trials.unwrap_or(3));
    let base = RecoveryTrialConfig {
        n1: n,
        n2: n,
        n3,
        r: 1,
        m: 0,
        sign_model: a.sign_model,
        transform: a.transform.clone(),
        seed: a.seed,
    };
    let grid = synth::run_phase_grid(&base, &rank_ratios, &sparsity_ratios, trials, &a.solver.config())?;
    fs::write(&a.out, grid.to_csv())?;
    eprintln!(
        "wrote {} ({}x{} cells, {} trials each)",
        a.out.display(),
        rank_ratios.len(),
        sparsity_ratios.len(),
        trials
    );
    let resolved = serde_json::json!({
        "rank_ratios": rank_ratios,
        "sparsity_ratios": sparsity_ratios,
        "solver": a.solver.config(),
    });
    ctx.write_manifest(&a.out, "phase-grid", &a, resolved, a.seed)
}

fn run_denoise(ctx: &Ctx, a: &DenoiseArgs) -> Result<()> {
    let img = imaging::load_image(&a.input)?;
    let t = a.transform.build(3, a.seed)?;
    let (bad, _mask) = imaging::corrupt(&img, a.fraction, a.seed)?;
    let start = Instant::now();
    let (rec, sol) = imaging::denoise(&bad, &t, &a.solver.config())?;
    let wall = start.elapsed().as_secs_f64();
    imaging::save_image(&rec, &a.out)?;
    if let Some(p) = &a.out_corrupted {
        imaging::save_image(&bad, p)?;
    }
    let p_bad = imaging::psnr_image(&bad, &img)?;
    let p_rec = imaging::psnr_image(&rec, &img)?;
    let row = format!(
        "image,psnr_corrupted_db,psnr_recovered_db,iterations,wall_seconds\n{},{:.16e},{:.16e},{},{:.6}\n",
        a.input.display(),
        p_bad,
        p_rec,
        sol.iterations,
        wall
    );
    print!("{row}");
    if let Some(p) = &a.report {
        fs::write(p, &row)?;
    }
    let resolved = serde_json::json!({
        "height": img.height(),
        "width": img.width(),
        "transform": t.label(),
        "lambda": sol.lambda,
        "solver": a.solver.config(),
    });
    ctx.write_manifest(&a.out, "denoise-image", a, resolved, a.seed)
}

fn run_diagnose(ctx: &Ctx, a: &DiagnoseArgs) -> Result<()> {
    let x = io::load_any(&a.input)?;
    let t = a.transform.build(x.n3(), a.seed)?;
    let report = serde_json::json!({
        "dims": x.dims(),
        "transform": t.label(),
        "ell": t.ell(),
        "tubal_rank": tlinalg::tubal_rank(&x, &t, DEFAULT_RANK_TOL)?,
        "spectral_norm": tlinalg::spectral_norm(&x, &t)?,
        "nuclear_norm": tlinalg::nuclear_norm(&x, &t)?,
        "incoherence": tlinalg::incoherence(&x, &t)?,
    });
    let text = serde_json::to_string_pretty(&report).map_err(|e| Error::Format(e.to_string()))?;
    println!("{text}");
    if let Some(p) = &a.out {
        fs::write(p, text + "\n")?;
        ctx.write_manifest(p, "diagnose", a, serde_json::Value::Null, a.seed)?;
    }
    Ok(())
}

fn replay<T: for<'de> Deserialize<'de>>(m: &RunManifest) -> Result<T> {
    serde_json::from_value(m.config.clone()).map_err(|e| Error::Format(format!("manifest config: {e}")))
}

fn run_rerun(ctx: &Ctx, a: &RerunArgs) -> Result<()> {
    let m = RunManifest::load(&a.manifest)?;
    match m.command.as_str() {
        "solve" => run_solve(ctx, &replay(&m)?),
        "synth-recover" => run_synth(ctx, &replay(&m)?),
        "phase-grid" => run_phase(ctx, &replay(&m)?),
        "denoise-image" => run_denoise(ctx, &replay(&m)?),
        "diagnose" => run_diagnose(ctx, &replay(&m)?),
        other => Err(Error::Format(format!("manifest names unknown command {other:?}"))),
    }
}

fn set_threads(k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidArgument("--threads must be positive".into()));
    }
    #[cfg(feature = "parallel")]
    {
        // only the first call in a process can size the global pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(k).build_global();
    }
    Ok(())
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit code.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let ctx = Ctx {
        started: Instant::now(),
    };
    let result = cli.threads.map_or(Ok(()), set_threads).and_then(|_| match &cli.command {
        Command::Solve(a) => run_solve(&ctx, a),
        Command::SynthRecover(a) => run_synth(&ctx, a),
        Command::PhaseGrid(a) => run_phase(&ctx, a),
        Command::DenoiseImage(a) => run_denoise(&ctx, a),
        Command::Diagnose(a) => run_diagnose(&ctx, a),
        Command::Rerun(a) => run_rerun(&ctx, a),
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn version_names_the_format() {
        assert!(LONG_VERSION.contains(&format!("format v{}", io::FORMAT_VERSION)));
    }

    #[test]
    fn ranges() {
        assert_eq!(parse_range("0.05:0.1:0.45").unwrap(), vec![0.05, 0.15, 0.25, 0.35, 0.45]);
        assert_eq!(parse_range("0.3").unwrap(), vec![0.3]);
        assert!(parse_range("0.1:0.2").is_err());
        assert!(parse_range("a:b:c").is_err());
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(dispatch(["trpca", "solve"]), 1);
        assert_eq!(dispatch(["trpca", "bogus"]), 1);
        assert_eq!(dispatch(["trpca", "synth-recover", "--n", "4", "--n3", "2", "--r", "1", "--m", "0", "--transform", "nope", "--seed", "1"]), 1);
        assert_eq!(dispatch(["trpca", "--version"]), 0);
        assert_eq!(dispatch(["trpca", "--help"]), 0);
    }

    #[test]
    fn manifest_path() {
        assert_eq!(
            RunManifest::path_for(Path::new("out/low.t3")),
            PathBuf::from("out/low.t3.manifest.json")
        );
    }
}
