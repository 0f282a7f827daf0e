//! Batch experiment runner for the GMWB pricing engine.
//!
//! `gmwb run` executes one pricing experiment (preset, config file, or
//! both plus flag overrides) and appends machine-readable result rows.
//! `gmwb verify` runs a named verification battery and exits nonzero if any
//! check fails.

mod config;
mod output;

use anyhow::Context;
use clap::{Parser, Subcommand};
use config::ExperimentConfig;
use gmwb::estimators::{multi_run, EvalMode};
use gmwb::lsmc::Algorithm;
use gmwb::market::RateMode;
use gmwb::regression::RegressorKind;
use std::path::PathBuf;
use std::time::Instant;

#[derive(Parser)]
#[command(name = "gmwb", about = "GMWB variable annuity pricing engine", version)]
struct Cli {
    /// Worker thread cap (defaults to the logical CPU count).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a pricing experiment and append result rows.
    Run(Box<RunArgs>),
    /// Run a verification battery (moments, closed_form, oracles, tables_desk).
    Verify {
        /// Suite name; `all` runs every suite.
        suite: String,
    },
}

#[derive(clap::Args)]
struct RunArgs {
    /// Preset parameter grid: table1, table2, table3 or custom.
    #[arg(long, default_value = "table1")]
    preset: String,

    /// TOML config file; overrides the preset, flags override both.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Number of simulated trajectories per run.
    #[arg(long)]
    paths: Option<usize>,

    /// Independent solver runs to average over.
    #[arg(long)]
    runs: Option<usize>,

    /// Master seed; per-run seeds derive from it.
    #[arg(long)]
    seed: Option<u64>,

    /// Asset volatility.
    #[arg(long, allow_negative_numbers = true)]
    sigma: Option<f64>,

    /// Annual guarantee fee.
    #[arg(long, allow_negative_numbers = true)]
    alpha: Option<f64>,

    /// Backward solver: realized_now, surface_now, realized_later, surface_later.
    #[arg(long)]
    algo: Option<String>,

    /// Continuation-value regressor: ols or mlp.
    #[arg(long)]
    regressor: Option<String>,

    /// Rate regime: constant or vasicek.
    #[arg(long)]
    rate_mode: Option<String>,

    /// Fresh-path count for the out-of-sample lower estimate (0 = skip).
    #[arg(long)]
    eval_paths: Option<usize>,

    /// Output directory (default: $GMWB_OUT_DIR or ./results).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .expect("rayon pool is built once at startup");
    }
    let code = match cli.command {
        Command::Run(args) => run(*args),
        Command::Verify { suite } => verify(&suite),
    };
    match code {
        Ok(code) => std::process::exit(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            std::process::exit(1);
        }
    }
}

fn apply_overrides(cfg: &mut ExperimentConfig, args: &RunArgs) -> anyhow::Result<()> {
    if let Some(paths) = args.paths {
        cfg.solver.paths = paths;
    }
    if let Some(runs) = args.runs {
        cfg.runs = runs;
    }
    if let Some(seed) = args.seed {
        cfg.solver.seed = seed;
    }
    if let Some(sigma) = args.sigma {
        cfg.model.sigma_s = sigma;
    }
    if let Some(alpha) = args.alpha {
        cfg.contract.fee = alpha;
    }
    if let Some(eval_paths) = args.eval_paths {
        cfg.eval_paths = eval_paths;
    }
    if let Some(algo) = &args.algo {
        cfg.solver.algorithm = match algo.as_str() {
            "realized_now" => Algorithm::RealizedNow,
            "surface_now" => Algorithm::SurfaceNow,
            "realized_later" => Algorithm::RealizedLater,
            "surface_later" => Algorithm::SurfaceLater,
            other => anyhow::bail!("unknown algorithm `{other}`"),
        };
    }
    if let Some(regressor) = &args.regressor {
        cfg.solver.regressor = match regressor.as_str() {
            "ols" => RegressorKind::Ols,
            "mlp" => RegressorKind::Mlp,
            other => anyhow::bail!("unknown regressor `{other}`"),
        };
    }
    if let Some(mode) = &args.rate_mode {
        cfg.model.rate_mode = match mode.as_str() {
            "constant" => RateMode::Constant,
            "vasicek" => RateMode::Vasicek,
            other => anyhow::bail!("unknown rate mode `{other}`"),
        };
    }
    Ok(())
}

fn run(args: RunArgs) -> anyhow::Result<i32> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::preset(&args.preset)?,
    };
    apply_overrides(&mut cfg, &args)?;
    cfg.validate()?;

    let out_dir = args
        .out
        .or_else(|| std::env::var_os("GMWB_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("results"));
    std::fs::create_dir_all(&out_dir)
        .with_context(|| format!("creating output directory {}", out_dir.display()))?;

    let contract = cfg.contract.build();
    let solver_cfg = cfg.solver_config();
    let eval = if cfg.eval_paths > 0 {
        EvalMode::FreshPaths(cfg.eval_paths)
    } else {
        EvalMode::InSample
    };

    eprintln!("running {}", cfg.fingerprint());
    let started = Instant::now();
    let report = multi_run(&cfg.model, &contract, &solver_cfg, cfg.runs, eval)
        .map_err(|e| anyhow::anyhow!("{e}"))?;
    let runtime = started.elapsed().as_secs_f64();

    let written = output::write_results(&out_dir, &cfg, &report, runtime)?;
    for line in &written.summary {
        println!("{line}");
    }
    eprintln!(
        "results appended to {} (config sidecar {})",
        written.csv_path.display(),
        written.sidecar_path.display()
    );
    Ok(0)
}

fn verify(suite: &str) -> anyhow::Result<i32> {
    let suites: Vec<&str> = if suite == "all" {
        gmwb::verify::SUITES.to_vec()
    } else {
        vec![suite]
    };
    let mut all_passed = true;
    for name in suites {
        println!("suite {name}:");
        let reports = gmwb::verify::run_suite(name).map_err(|e| anyhow::anyhow!("{e}"))?;
        for report in &reports {
            println!("  {report}");
            all_passed &= report.passed;
        }
    }
    Ok(if all_passed { 0 } else { 2 })
}
