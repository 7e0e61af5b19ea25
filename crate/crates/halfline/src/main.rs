//! Command-line driver: excursion sampling, path synthesis, Laplace
//! exponent estimation, convergence ladders, the exact scaling identity
//! self-test, and tail-index estimation.
//!
//! Exit codes: 0 when the run completes and its gates pass, 2 when a
//! statistical gate fails, 1 on usage, model, or I/O errors.

use std::fs;
use std::io::{self, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use halfline::harness::{
    scaling_identity_check, verify_convergent, verify_divergent, write_results_csv,
    LadderRow, RegimeKind, VerifyReport,
};
use halfline::model::{load_experiment, load_model, FORMAT_VERSION};
use halfline::stats::tail_index;
use halfline::synthesis::{
    laplace_profile, sample_eta_jump_sizes, synthesize, write_eta_csv, write_path_csv,
    SynthConfig,
};
use halfline::time_change::sample_nm_above;
use halfline::{sample_excursion_above, Error, Result, RngStream};

#[derive(Parser)]
#[command(
    name = "halfline",
    version,
    about = "Builds Markov processes on the half-line from excursion point \
             processes and verifies their scaling limits"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Sample one excursion conditioned to exceed a level, as CSV
    SampleExcursion(SampleExcursionArgs),
    /// Synthesize one path of the process over a time horizon
    Synthesize(SynthesizeArgs),
    /// Estimate the Laplace exponent of the boundary clock
    Laplace(LaplaceArgs),
    /// Run the convergence ladder described by an experiment file
    Verify(VerifyArgs),
    /// Check the exact space-time scaling identity at one or more scales
    IdentityCheck(IdentityCheckArgs),
    /// Estimate the tail index of the inverse-local-time jump sizes
    StableIndex(StableIndexArgs),
}

#[derive(Args)]
struct SampleExcursionArgs {
    /// Conditioning level; the sampled excursion maximum exceeds it
    #[arg(long)]
    eps: f64,
    /// Time step at the conditioning level
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    /// Model file whose speed measure time-changes the excursion
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV file (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthesizeArgs {
    /// Model file
    #[arg(long)]
    model: PathBuf,
    /// Time horizon of the synthesized path
    #[arg(long = "t-horizon", alias = "T")]
    t_horizon: f64,
    /// Truncation level: only excursions with maximum above it are kept
    #[arg(long)]
    eps: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory for path.csv, eta.csv and manifest.json
    #[arg(long = "out-dir", default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct LaplaceArgs {
    /// Model file
    #[arg(long)]
    model: PathBuf,
    /// Laplace arguments (repeat or comma-separate)
    #[arg(long = "xi", value_delimiter = ',', default_values_t = vec![1.0])]
    xis: Vec<f64>,
    /// Truncation ladder, coarse to fine; two or more rungs enable the
    /// linear-in-eps extrapolation
    #[arg(long = "eps", value_delimiter = ',', default_values_t = vec![0.1, 0.05])]
    eps: Vec<f64>,
    /// Lifetimes sampled per truncation rung
    #[arg(long, default_value_t = 4000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory for laplace.csv and manifest.json (stdout report only
    /// when omitted)
    #[arg(long = "out-dir")]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Which limit family to verify against; must match the experiment file
    regime: RegimeArg,
    /// Experiment file
    #[arg(long)]
    spec: PathBuf,
    /// Override the experiment's output directory
    #[arg(long = "out-dir")]
    out_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RegimeArg {
    Convergent,
    Divergent,
}

impl RegimeArg {
    fn kind(self) -> RegimeKind {
        match self {
            RegimeArg::Convergent => RegimeKind::Convergent,
            RegimeArg::Divergent => RegimeKind::Divergent,
        }
    }
}

#[derive(Args)]
struct IdentityCheckArgs {
    /// Model file; must declare a regime block
    #[arg(long)]
    model: PathBuf,
    /// Scale factors to test
    #[arg(long = "lambda", value_delimiter = ',', default_values_t = vec![4.0, 16.0])]
    lambdas: Vec<f64>,
    /// Observation time of the rescaled process
    #[arg(long = "t-star", default_value_t = 1.0)]
    t_star: f64,
    /// Truncation of the rescaled side; the native side uses lambda times it
    #[arg(long, default_value_t = 0.05)]
    eps: f64,
    /// Marginals per side
    #[arg(long, default_value_t = 400)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory for results.csv and manifest.json (stdout report only
    /// when omitted)
    #[arg(long = "out-dir")]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct StableIndexArgs {
    /// Model file
    #[arg(long)]
    model: PathBuf,
    /// Truncation level of the jump sample
    #[arg(long, default_value_t = 0.05)]
    eps: f64,
    /// Number of jump sizes to sample
    #[arg(long, default_value_t = 10000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Gate: required tail index
    #[arg(long)]
    expect: Option<f64>,
    /// Gate half-width around --expect
    #[arg(long, default_value_t = 0.05)]
    tol: f64,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let is_usage_error = e.use_stderr();
            let _ = e.print();
            return if is_usage_error {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.cmd {
        Cmd::SampleExcursion(a) => cmd_sample_excursion(a),
        Cmd::Synthesize(a) => cmd_synthesize(a),
        Cmd::Laplace(a) => cmd_laplace(a),
        Cmd::Verify(a) => cmd_verify(a),
        Cmd::IdentityCheck(a) => cmd_identity_check(a),
        Cmd::StableIndex(a) => cmd_stable_index(a),
    }
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let text =
        serde_json::to_string_pretty(value).map_err(|e| Error::Parse(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

fn cmd_sample_excursion(a: SampleExcursionArgs) -> Result<bool> {
    let mut rng = RngStream::new(a.seed, 0);
    let e = match &a.model {
        None => sample_excursion_above(a.eps, a.dt, &mut rng)?,
        Some(path) => {
            let model = load_model(path)?;
            let cfg = SynthConfig::default();
            let x_cut = if model.triple.m.m_zero_finite() {
                0.0
            } else {
                cfg.x_cut_frac * a.eps
            };
            sample_nm_above(a.eps, &model.triple.m, x_cut, a.dt, &mut rng)?
        }
    };
    match &a.out {
        Some(path) => {
            e.write_csv(BufWriter::new(fs::File::create(path)?))?;
            println!(
                "wrote {} ({} points, lifetime {})",
                path.display(),
                e.len(),
                e.lifetime()
            );
        }
        None => e.write_csv(io::stdout().lock())?,
    }
    Ok(true)
}

fn cmd_synthesize(a: SynthesizeArgs) -> Result<bool> {
    let model = load_model(&a.model)?;
    let cfg = SynthConfig::default();
    let rng = RngStream::new(a.seed, 0);
    let run = synthesize(&model.triple, a.t_horizon, a.eps, None, &cfg, &rng)?;
    fs::create_dir_all(&a.out_dir)?;
    write_path_csv(
        &run.path,
        BufWriter::new(fs::File::create(a.out_dir.join("path.csv"))?),
    )?;
    write_eta_csv(
        &run.path.eta,
        run.path.s_horizon,
        BufWriter::new(fs::File::create(a.out_dir.join("eta.csv"))?),
    )?;
    let manifest = json!({
        "version": FORMAT_VERSION,
        "command": "synthesize",
        "model": model.name,
        "model_hash": model.hash,
        "seed": a.seed,
        "eps": a.eps,
        "t_horizon": a.t_horizon,
        "s_used": run.s_used,
        "doublings": run.doublings,
        "excursions": run.path.points.len(),
        "intensity": run.path.intensity.total,
        "tail_cut": run.path.intensity.tail_cut,
    });
    write_json(&a.out_dir.join("manifest.json"), &manifest)?;
    println!(
        "synthesized {} excursions over local time {} (t horizon {}); wrote {}",
        run.path.points.len(),
        run.s_used,
        a.t_horizon,
        a.out_dir.display()
    );
    Ok(true)
}

fn decreasing_ladder(eps: &[f64]) -> Result<()> {
    if eps.is_empty()
        || eps.windows(2).any(|w| w[1] >= w[0])
        || eps.iter().any(|&e| !e.is_finite() || e <= 0.0)
    {
        return Err(Error::Param(format!(
            "truncation ladder must be positive and decreasing, got {eps:?}"
        )));
    }
    Ok(())
}

fn cmd_laplace(a: LaplaceArgs) -> Result<bool> {
    decreasing_ladder(&a.eps)?;
    let model = load_model(&a.model)?;
    let cfg = SynthConfig::default();
    let rng = RngStream::new(a.seed, 0);
    let mut per_rung = Vec::with_capacity(a.eps.len());
    for (r, &eps) in a.eps.iter().enumerate() {
        let psi = laplace_profile(
            &model.triple,
            &a.xis,
            eps,
            a.n,
            &cfg,
            &rng.child(r as u64),
        )?;
        per_rung.push(psi);
    }
    // Linear-in-eps extrapolation over the two finest rungs.
    let extrapolated = if a.eps.len() >= 2 {
        let k = a.eps.len() - 1;
        let (e_coarse, e_fine) = (a.eps[k - 1], a.eps[k]);
        Some(
            (0..a.xis.len())
                .map(|i| {
                    (e_coarse * per_rung[k][i] - e_fine * per_rung[k - 1][i])
                        / (e_coarse - e_fine)
                })
                .collect::<Vec<f64>>(),
        )
    } else {
        None
    };
    for (i, &xi) in a.xis.iter().enumerate() {
        for (r, &eps) in a.eps.iter().enumerate() {
            println!("xi={xi} eps={eps} psi={}", per_rung[r][i]);
        }
        if let Some(ext) = &extrapolated {
            println!("xi={xi} eps=0 psi={} (extrapolated)", ext[i]);
        }
    }
    if let Some(dir) = &a.out_dir {
        fs::create_dir_all(dir)?;
        let mut csv = String::from("xi,eps,psi\n");
        for (i, &xi) in a.xis.iter().enumerate() {
            for (r, &eps) in a.eps.iter().enumerate() {
                csv.push_str(&format!("{xi},{eps},{}\n", per_rung[r][i]));
            }
            if let Some(ext) = &extrapolated {
                csv.push_str(&format!("{xi},0,{}\n", ext[i]));
            }
        }
        fs::write(dir.join("laplace.csv"), csv)?;
        let manifest = json!({
            "version": FORMAT_VERSION,
            "command": "laplace",
            "model": model.name,
            "model_hash": model.hash,
            "seed": a.seed,
            "eps": a.eps,
            "xi": a.xis,
            "n": a.n,
        });
        write_json(&dir.join("manifest.json"), &manifest)?;
    }
    Ok(true)
}

fn print_rows(rows: &[LadderRow]) {
    for row in rows {
        println!(
            "lambda={} stat={:.4} p={:.4} n={}",
            row.lambda, row.stat, row.pvalue, row.n
        );
    }
}

fn cmd_verify(a: VerifyArgs) -> Result<bool> {
    let exp = load_experiment(&a.spec)?;
    let kind = a.regime.kind();
    if kind != exp.spec.regime {
        return Err(Error::Param(format!(
            "regime argument '{}' does not match the experiment file's '{}'",
            kind.as_str(),
            exp.spec.regime.as_str()
        )));
    }
    let regime = exp.model.regime.clone().ok_or_else(|| {
        Error::Model("the model file declares no regime block".into())
    })?;
    let cfg = SynthConfig::default();
    let report: VerifyReport = match kind {
        RegimeKind::Convergent => {
            verify_convergent(&exp.model.triple, &regime, &exp.spec, &cfg)?
        }
        RegimeKind::Divergent => {
            verify_divergent(&exp.model.triple, &regime, &exp.spec, &cfg)?
        }
    };
    let out_dir = a.out_dir.unwrap_or(exp.out_dir);
    fs::create_dir_all(&out_dir)?;
    write_results_csv(
        &report.rows,
        BufWriter::new(fs::File::create(out_dir.join("results.csv"))?),
    )?;
    let manifest = json!({
        "version": FORMAT_VERSION,
        "command": "verify",
        "regime": kind.as_str(),
        "model": exp.model.name,
        "model_hash": exp.model.hash,
        "seed": exp.spec.seed,
        "lambdas": exp.spec.lambdas,
        "t_star": exp.spec.t_star,
        "n": exp.spec.n,
        "eps": exp.spec.eps_ladder,
        "trend_ok": report.trend_ok,
        "level": report.level,
        "pass": report.pass,
        "j1_distances": report.j1_distances,
    });
    write_json(&out_dir.join("manifest.json"), &manifest)?;
    print_rows(&report.rows);
    if !report.j1_distances.is_empty() {
        let list = report
            .j1_distances
            .iter()
            .map(|d| format!("{d:.4}"))
            .collect::<Vec<_>>()
            .join(" ");
        println!("path-distance diagnostic at largest lambda: {list}");
    }
    println!(
        "trend {}; verdict {} (level {}); wrote {}",
        if report.trend_ok { "ok" } else { "not decreasing" },
        if report.pass { "PASS" } else { "FAIL" },
        report.level,
        out_dir.display()
    );
    Ok(report.pass)
}

fn cmd_identity_check(a: IdentityCheckArgs) -> Result<bool> {
    if a.lambdas.is_empty() || a.lambdas.iter().any(|&l| !l.is_finite() || l <= 0.0) {
        return Err(Error::Param(format!(
            "scale factors must be positive, got {:?}",
            a.lambdas
        )));
    }
    let model = load_model(&a.model)?;
    let regime = model.regime.clone().ok_or_else(|| {
        Error::Model("the model file declares no regime block".into())
    })?;
    let cfg = SynthConfig::default();
    let rng = RngStream::new(a.seed, 0);
    let level = 0.01 / a.lambdas.len() as f64;
    let mut rows = Vec::with_capacity(a.lambdas.len());
    for (i, &lambda) in a.lambdas.iter().enumerate() {
        let ks = scaling_identity_check(
            &model.triple,
            &regime,
            lambda,
            a.t_star,
            a.eps,
            a.n,
            &cfg,
            &rng.child(i as u64),
        )?;
        rows.push(LadderRow {
            lambda,
            stat: ks.stat,
            pvalue: ks.p_value,
            n: a.n,
        });
    }
    let pass = rows.iter().all(|r| r.pvalue > level);
    print_rows(&rows);
    println!(
        "identity {} (every p must exceed {level})",
        if pass { "PASS" } else { "FAIL" }
    );
    if let Some(dir) = &a.out_dir {
        fs::create_dir_all(dir)?;
        write_results_csv(
            &rows,
            BufWriter::new(fs::File::create(dir.join("results.csv"))?),
        )?;
        let manifest = json!({
            "version": FORMAT_VERSION,
            "command": "identity-check",
            "model": model.name,
            "model_hash": model.hash,
            "seed": a.seed,
            "lambdas": a.lambdas,
            "t_star": a.t_star,
            "eps": a.eps,
            "n": a.n,
            "level": level,
            "pass": pass,
        });
        write_json(&dir.join("manifest.json"), &manifest)?;
    }
    Ok(pass)
}

fn cmd_stable_index(a: StableIndexArgs) -> Result<bool> {
    let model = load_model(&a.model)?;
    let cfg = SynthConfig::default();
    let rng = RngStream::new(a.seed, 0);
    let jumps = sample_eta_jump_sizes(&model.triple, a.eps, a.n, &cfg, &rng)?;
    let fit = tail_index(&jumps)?;
    println!(
        "tail index {:.4} +- {:.4} (r^2 {:.4}, {} tail points, {} jumps)",
        fit.index,
        fit.std_err,
        fit.r_squared,
        fit.n_tail,
        jumps.len()
    );
    match a.expect {
        None => Ok(true),
        Some(want) => {
            let ok = (fit.index - want).abs() <= a.tol;
            println!(
                "gate |{:.4} - {want}| <= {}: {}",
                fit.index,
                a.tol,
                if ok { "PASS" } else { "FAIL" }
            );
            Ok(ok)
        }
    }
}
