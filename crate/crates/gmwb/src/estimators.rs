//! Price estimators and multi-run statistics.
//!
//! A realized-value solve already carries its in-sample lower estimate; the
//! out-of-sample variant replays the frozen policy on fresh paths, which
//! removes foresight bias at the cost of a second simulation and is the
//! default for reported lower bounds. Surface solves average their fitted
//! time-0 values, an *approximate* upper estimator (Jensen through the sup),
//! not a guaranteed bound. `standard error` below always means the standard
//! error of the mean across independent runs; the sample standard deviation
//! is reported alongside because both readings exist in the wild.

use serde::{Deserialize, Serialize};

use crate::lsmc::{replay_policy, solve, Algorithm, Policy, SolveResult, SolverConfig, ValueKind};
use crate::market::{simulate_paths, ModelParams};
use crate::rng::{derive_seed, StreamTag};
use crate::{contract::ContractParams, GmwbError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateKind {
    Lower,
    Upper,
}

impl std::fmt::Display for EstimateKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EstimateKind::Lower => write!(f, "lower"),
            EstimateKind::Upper => write!(f, "upper"),
        }
    }
}

/// A price estimate with its dispersion statistics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PriceEstimate {
    pub kind: EstimateKind,
    /// One value per independent run.
    pub run_values: Vec<f64>,
    /// Mean of the run values.
    pub mean: f64,
    /// Standard error of the mean across runs; absent for a single run.
    pub std_error: Option<f64>,
    /// Sample standard deviation across runs; absent for a single run.
    pub sample_std: Option<f64>,
    /// Monte Carlo standard error of the path average (within one run).
    pub mc_se: Option<f64>,
}

impl PriceEstimate {
    /// Estimate from one run's per-path values.
    pub fn single_run(kind: EstimateKind, path_values: &[f64]) -> Self {
        let n = path_values.len() as f64;
        let mean = path_values.iter().sum::<f64>() / n;
        let var = path_values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        PriceEstimate {
            kind,
            run_values: vec![mean],
            mean,
            std_error: None,
            sample_std: None,
            mc_se: Some((var / n).sqrt()),
        }
    }

    /// Aggregates per-run values into a multi-run estimate.
    pub fn from_runs(kind: EstimateKind, run_values: Vec<f64>) -> Self {
        let k = run_values.len();
        let mean = run_values.iter().sum::<f64>() / k as f64;
        let (std_error, sample_std) = if k >= 2 {
            let var = run_values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
            (Some((var / k as f64).sqrt()), Some(var.sqrt()))
        } else {
            (None, None)
        };
        PriceEstimate {
            kind,
            run_values,
            mean,
            std_error,
            sample_std,
            mc_se: None,
        }
    }
}

/// Out-of-sample lower estimator: replays a frozen policy on `n_paths`
/// freshly simulated trajectories and averages the discounted payoff. Pass a
/// seed unrelated to the training seed for an unbiased estimate of the
/// policy value; passing the training seed reproduces the in-sample paths
/// (that mode exists for the foresight-bias diagnostics).
pub fn lower_estimate(
    policy: &Policy,
    model: &ModelParams,
    n_paths: usize,
    seed: u64,
) -> Result<PriceEstimate> {
    let market = simulate_paths(model, &policy.contract.grid(), n_paths, seed)?;
    let values = replay_policy(policy, &market)?;
    Ok(PriceEstimate::single_run(EstimateKind::Lower, &values))
}

/// Approximate upper estimator from a surface solve: the average of the
/// fitted time-0 values.
pub fn upper_estimate(result: &SolveResult) -> Result<PriceEstimate> {
    if result.kind != ValueKind::ApproxUpper {
        return Err(GmwbError::Solver(
            "upper estimates come from regression-surface solves only".into(),
        ));
    }
    Ok(PriceEstimate::single_run(EstimateKind::Upper, &result.path_values))
}

/// One run's worth of estimates inside a multi-run experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunOutcome {
    pub seed: u64,
    /// The solver's own time-0 value: in-sample lower for realized solvers,
    /// approximate upper for surface solvers.
    pub solver_value: f64,
    /// Out-of-sample policy replay, when requested.
    pub fresh_lower: Option<f64>,
}

/// Multi-run experiment report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MultiRunReport {
    /// The solver's primary estimate across runs (lower for realized
    /// algorithms, upper for surface algorithms).
    pub primary: PriceEstimate,
    /// Out-of-sample lower estimates across runs, when evaluated.
    pub fresh_lower: Option<PriceEstimate>,
    pub runs: Vec<RunOutcome>,
}

/// Out-of-sample evaluation policy for [`multi_run`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EvalMode {
    /// Keep only the solver's in-sample value.
    InSample,
    /// Additionally replay each run's policy on this many fresh paths.
    FreshPaths(usize),
}

/// Executes `runs` independent solve cycles with seeds derived from
/// `cfg.seed` and aggregates the estimates. Identical seed lists produce
/// identical reports.
pub fn multi_run(
    model: &ModelParams,
    contract: &ContractParams,
    cfg: &SolverConfig,
    runs: usize,
    eval: EvalMode,
) -> Result<MultiRunReport> {
    if runs == 0 {
        return Err(crate::invalid("runs", "at least one run required"));
    }
    let mut outcomes = Vec::with_capacity(runs);
    for run in 0..runs {
        let mut run_cfg = cfg.clone();
        run_cfg.seed = derive_seed(cfg.seed, StreamTag::Run, run as u64);
        let result = solve(model, contract, &run_cfg)?;
        let fresh_lower = match eval {
            EvalMode::InSample => None,
            EvalMode::FreshPaths(n_eval) => {
                let eval_seed = derive_seed(run_cfg.seed, StreamTag::Evaluation, 0);
                Some(lower_estimate(&result.policy, model, n_eval, eval_seed)?.mean)
            }
        };
        outcomes.push(RunOutcome {
            seed: run_cfg.seed,
            solver_value: result.value,
            fresh_lower,
        });
    }

    let primary_kind = match cfg.algorithm {
        Algorithm::RealizedNow | Algorithm::RealizedLater => EstimateKind::Lower,
        Algorithm::SurfaceNow | Algorithm::SurfaceLater => EstimateKind::Upper,
    };
    let primary = PriceEstimate::from_runs(
        primary_kind,
        outcomes.iter().map(|o| o.solver_value).collect(),
    );
    let fresh_lower = if matches!(eval, EvalMode::FreshPaths(_)) {
        Some(PriceEstimate::from_runs(
            EstimateKind::Lower,
            outcomes.iter().map(|o| o.fresh_lower.unwrap()).collect(),
        ))
    } else {
        None
    };

    Ok(MultiRunReport {
        primary,
        fresh_lower,
        runs: outcomes,
    })
}

/// Result of the fair-fee root solve.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeeSolveResult {
    pub alpha_star: f64,
    /// `|V_0(alpha_star) - w0|` at termination.
    pub achieved_residual: f64,
    pub iterations: usize,
    /// Final bisection bracket.
    pub bracket: (f64, f64),
}

/// Solves `V_0(alpha) = w0` for the guarantee fee by bisection with common
/// random numbers: every evaluation reuses the same seed, so the map
/// `alpha -> V_0(alpha)` is smooth and strictly decreasing and the root is
/// well defined despite Monte Carlo noise.
pub fn fair_fee_solve(
    model: &ModelParams,
    contract: &ContractParams,
    cfg: &SolverConfig,
    bracket: (f64, f64),
    tolerance: f64,
    max_iterations: usize,
) -> Result<FeeSolveResult> {
    let (mut lo, mut hi) = bracket;
    if !(lo < hi) {
        return Err(GmwbError::Bracket(format!("empty bracket [{lo}, {hi}]")));
    }
    let target = contract.w0;
    let price_at = |alpha: f64| -> Result<f64> {
        let mut c = contract.clone();
        c.fee = alpha;
        Ok(solve(model, &c, cfg)?.value)
    };

    let v_lo = price_at(lo)?;
    let v_hi = price_at(hi)?;
    if !(v_lo > target && target > v_hi) {
        return Err(GmwbError::Bracket(format!(
            "price does not straddle the premium: V({lo}) = {v_lo:.5}, V({hi}) = {v_hi:.5}, target {target}"
        )));
    }

    let mut iterations = 0usize;
    let mut residual = f64::INFINITY;
    while iterations < max_iterations {
        iterations += 1;
        let alpha = 0.5 * (lo + hi);
        let value = price_at(alpha)?;
        residual = (value - target).abs();
        if residual < tolerance {
            return Ok(FeeSolveResult {
                alpha_star: alpha,
                achieved_residual: residual,
                iterations,
                bracket: (lo, hi),
            });
        }
        if value > target {
            lo = alpha;
        } else {
            hi = alpha;
        }
    }
    Err(GmwbError::NoConvergence {
        iterations,
        residual,
    })
}
