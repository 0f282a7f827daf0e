//! Verification batteries: every check pins its configuration, seed and
//! tolerance in code and reports one pass/fail line.
//!
//! The batteries are grouped into named suites (`moments`, `closed_form`,
//! `oracles`, `tables_desk`) so the CLI can run them selectively; the
//! integration test suite runs all of them. Reference prices for the desk
//! scale checks come from independent benchmark solutions of the same
//! contract (a fine finite-difference mesh for the constant-rate case, a
//! Gauss-Hermite cubic-spline pricer for the stochastic-rate case) and from
//! multi-run regression Monte Carlo values for the reduced path counts.

use rand::Rng;

use crate::closed_form::{build_terminal_query, conditional_moment, terminal_expectation, MomentQuery};
use crate::contract::ContractParams;
use crate::estimators::{fair_fee_solve, lower_estimate, multi_run, EvalMode};
use crate::lsmc::{
    forward_simulate, solve_realized_regress_now, solve_regress_later, solve_surface_regress_now,
    Algorithm, ControlSet, SolverConfig, ValueUpdate,
};
use crate::market::{simulate_paths, step_moments, ModelParams, RateMode};
use crate::oracle::{dp_quadrature_price, mc_conditional_moment, mc_terminal_expectation, static_price, DpGrid};
use crate::regression::{mlp_fit, ols_fit, MlpModel, RegressorKind, TrainConfig};
use crate::rng::path_rng;
use crate::Result;

/// Fixed seed for every verification battery.
pub const VERIFY_SEED: u64 = 42;

/// Outcome of one check.
#[derive(Debug, Clone)]
pub struct CheckReport {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl std::fmt::Display for CheckReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "[{tag}] {}: {}", self.name, self.detail)
    }
}

impl CheckReport {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        CheckReport { name, passed, detail }
    }
}

pub const SUITES: &[&str] = &["moments", "closed_form", "oracles", "tables_desk"];

/// Runs a named suite and returns its reports.
pub fn run_suite(suite: &str) -> Result<Vec<CheckReport>> {
    match suite {
        "moments" => Ok(vec![exact_simulation_moments()?]),
        "closed_form" => Ok(vec![
            discounted_moments_vs_brute_force()?,
            terminal_expectation_vs_brute_force()?,
        ]),
        "oracles" => Ok(vec![
            singleton_solvers_match_static_oracle()?,
            dp_oracle_matches_reference_prices()?,
            regression_properties()?,
        ]),
        "tables_desk" => Ok(vec![
            table2_small_sample_reproduction()?,
            table2_mid_sample_reproduction()?,
            table1_volatility_ladder()?,
            table3_stochastic_rate_spot_check()?,
            estimator_ordering()?,
            fair_fee_bracketing()?,
        ]),
        other => Err(crate::invalid("suite", format!("unknown suite `{other}`; expected one of {SUITES:?}"))),
    }
}

// ---------------------------------------------------------------------
// Shared configurations
// ---------------------------------------------------------------------

fn constant_model(sigma: f64) -> ModelParams {
    ModelParams::constant_rate(1.0, 0.05, sigma)
}

fn vasicek_model(sigma: f64) -> ModelParams {
    ModelParams {
        s0: 1.0,
        r0: 0.05,
        kappa: 0.0349,
        theta: 0.05,
        sigma_r: 0.02,
        sigma_s: sigma,
        rho: 0.3,
        rate_mode: RateMode::Vasicek,
    }
}

fn constant_contract() -> ContractParams {
    ContractParams::with_uniform_dates(1.0, 10.0, 1, 0.1, 0.0135)
}

fn vasicek_contract() -> ContractParams {
    ContractParams::with_uniform_dates(1.0, 10.0, 1, 0.1, 0.01)
}

/// Reference prices for the constant-rate volatility ladder (fine-mesh
/// finite-difference benchmark of this contract).
pub const FD_REFERENCE: [(f64, f64); 4] = [
    (0.05, 0.92660),
    (0.10, 0.94463),
    (0.15, 0.96991),
    (0.20, 0.99763),
];

/// Benchmark price for the stochastic-rate contract at sigma = 5%
/// (Gauss-Hermite cubic-spline pricer).
pub const GHQC_REFERENCE_SIGMA5: f64 = 0.95325;

// ---------------------------------------------------------------------
// moments
// ---------------------------------------------------------------------

/// Simulated long-horizon rate moments against the closed forms, and the
/// constant-rate discounted-asset martingale property.
pub fn exact_simulation_moments() -> Result<CheckReport> {
    let mut failures = Vec::new();
    let n_paths = 100_000usize;

    // Vasicek r(10): mean and variance.
    let model = vasicek_model(0.05);
    let dates: Vec<f64> = (0..=10).map(|i| i as f64).collect();
    let paths = simulate_paths(&model, &dates, n_paths, VERIFY_SEED)?;
    let finals: Vec<f64> = (0..n_paths).map(|m| paths.r[m * 11 + 10]).collect();
    let mean = finals.iter().sum::<f64>() / n_paths as f64;
    let var = finals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n_paths - 1) as f64;
    let expected_mean = model.theta + (model.r0 - model.theta) * (-model.kappa * 10.0).exp();
    let expected_var =
        model.sigma_r * model.sigma_r * (1.0 - (-2.0 * model.kappa * 10.0).exp()) / (2.0 * model.kappa);
    let se_mean = (var / n_paths as f64).sqrt();
    let se_var = var * (2.0 / (n_paths as f64 - 1.0)).sqrt();
    if (mean - expected_mean).abs() >= 3.0 * se_mean {
        failures.push(format!("r(10) mean {mean:.6} vs {expected_mean:.6} (3se {:.1e})", 3.0 * se_mean));
    }
    if (var - expected_var).abs() >= 3.0 * se_var {
        failures.push(format!("r(10) var {var:.3e} vs {expected_var:.3e} (3se {:.1e})", 3.0 * se_var));
    }

    // Constant rate: discounted terminal asset is a martingale.
    let model = constant_model(0.2);
    let paths = simulate_paths(&model, &dates, n_paths, VERIFY_SEED + 1)?;
    let discounted: Vec<f64> = (0..n_paths)
        .map(|m| {
            let disc: f64 = (0..10).map(|n| paths.step_discount[m * 10 + n]).product();
            disc * paths.s[m * 11 + 10]
        })
        .collect();
    let mean = discounted.iter().sum::<f64>() / n_paths as f64;
    let var = discounted.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n_paths - 1) as f64;
    let se = (var / n_paths as f64).sqrt();
    if (mean - 1.0).abs() >= 3.0 * se {
        failures.push(format!("martingale mean {mean:.5} vs 1 (3se {:.1e})", 3.0 * se));
    }

    Ok(CheckReport::new(
        "exact simulation moments",
        failures.is_empty(),
        if failures.is_empty() {
            format!("r(10) and discounted-asset moments match closed forms within 3 SE (M={n_paths})")
        } else {
            failures.join("; ")
        },
    ))
}

// ---------------------------------------------------------------------
// closed_form
// ---------------------------------------------------------------------

/// Every discounted conditional moment `B_{l,p,q}` with `l in {0,1}` and
/// `p + q <= 3` against brute-force Monte Carlo on both parameter sets.
pub fn discounted_moments_vs_brute_force() -> Result<CheckReport> {
    let n_draws = 1_000_000usize;
    let mut failures = Vec::new();
    let mut checked = 0usize;
    for (label, model) in [("constant", constant_model(0.2)), ("stochastic", vasicek_model(0.05))] {
        let moments = step_moments(&model, 1.0)?;
        let (s_cond, r_cond) = (1.1, 0.04);
        for l in [0.0f64, 1.0] {
            for p in 0..=3u32 {
                for q in 0..=(3 - p) {
                    let exact = conditional_moment(&MomentQuery {
                        l,
                        p,
                        q,
                        s: s_cond,
                        r: r_cond,
                        moments,
                    })?;
                    let (est, se) = mc_conditional_moment(
                        &model,
                        s_cond,
                        r_cond,
                        l,
                        p,
                        q,
                        1.0,
                        n_draws,
                        VERIFY_SEED + (p * 4 + q) as u64,
                    )?;
                    checked += 1;
                    let tol = if se > 0.0 { 3.0 * se } else { 1e-12 };
                    if (est - exact).abs() > tol {
                        failures.push(format!("{label} l={l} p={p} q={q}: mc {est:.6} vs {exact:.6} (tol {tol:.1e})"));
                    }
                }
            }
        }
    }
    Ok(CheckReport::new(
        "discounted conditional moments vs brute force",
        failures.is_empty(),
        if failures.is_empty() {
            format!("{checked} moment combinations within 3 SE at M={n_draws}")
        } else {
            failures.join("; ")
        },
    ))
}

/// The exact terminal-step expectation against Monte Carlo for randomized
/// conditioning states.
pub fn terminal_expectation_vs_brute_force() -> Result<CheckReport> {
    let model = vasicek_model(0.05);
    let contract = vasicek_contract();
    let moments = step_moments(&model, 1.0)?;
    let n_draws = 1_000_000usize;
    let mut rng = path_rng(VERIFY_SEED, 99);
    let mut failures = Vec::new();
    for i in 0..20 {
        let w: f64 = rng.random::<f64>() * 2.0;
        let a: f64 = 0.05 + rng.random::<f64>() * 0.95;
        let pi: f64 = rng.random::<f64>() * a * 0.9;
        let r: f64 = 0.01 + rng.random::<f64>() * 0.08;
        let query = build_terminal_query(&contract, w, a, r, pi, &moments, 1.0)?;
        let exact = terminal_expectation(&query)?;
        let (est, se) = mc_terminal_expectation(&model, &contract, w, a, r, pi, n_draws, VERIFY_SEED + 100 + i)?;
        let tol = if se > 0.0 { 3.0 * se } else { 1e-12 };
        if (est - exact).abs() > tol {
            failures.push(format!(
                "state {i} (w={w:.3}, a={a:.3}, pi={pi:.3}, r={r:.3}): mc {est:.6} vs exact {exact:.6} (tol {tol:.1e})"
            ));
        }
    }
    Ok(CheckReport::new(
        "terminal expectation vs brute force",
        failures.is_empty(),
        if failures.is_empty() {
            format!("20 randomized states within 3 SE at M={n_draws}")
        } else {
            failures.join("; ")
        },
    ))
}

// ---------------------------------------------------------------------
// oracles
// ---------------------------------------------------------------------

/// All four solvers restricted to the contractual singleton control set
/// reproduce the static-strategy Monte Carlo price.
pub fn singleton_solvers_match_static_oracle() -> Result<CheckReport> {
    let model = constant_model(0.2);
    let contract = constant_contract();
    let n_paths = 20_000usize;
    let oracle = static_price(&model, &contract, n_paths, VERIFY_SEED)?;
    let oracle_se = oracle.mc_se.unwrap();

    let mut failures = Vec::new();
    for algorithm in [
        Algorithm::RealizedNow,
        Algorithm::SurfaceNow,
        Algorithm::RealizedLater,
        Algorithm::SurfaceLater,
    ] {
        let mut cfg = SolverConfig::new(algorithm, RegressorKind::Ols, n_paths, VERIFY_SEED);
        cfg.control_set = ControlSet::Contractual;
        let paths = forward_simulate(&model, &contract, &cfg)?;
        let result = match algorithm {
            Algorithm::RealizedNow => solve_realized_regress_now(&paths, &contract, &cfg)?,
            Algorithm::SurfaceNow => solve_surface_regress_now(&paths, &contract, &cfg)?,
            Algorithm::RealizedLater => {
                solve_regress_later(&paths, &contract, &model, &cfg, ValueUpdate::Realized)?
            }
            Algorithm::SurfaceLater => {
                solve_regress_later(&paths, &contract, &model, &cfg, ValueUpdate::Surface)?
            }
        };
        let combined_se = (oracle_se.powi(2) + result.path_std_error().powi(2)).sqrt();
        let diff = (result.value - oracle.mean).abs();
        if diff >= 3.0 * combined_se {
            failures.push(format!(
                "{algorithm}: {:.5} vs static {:.5} (diff {diff:.5}, 3se {:.5})",
                result.value,
                oracle.mean,
                3.0 * combined_se
            ));
        }
    }
    Ok(CheckReport::new(
        "singleton control set matches the static oracle",
        failures.is_empty(),
        if failures.is_empty() {
            format!("four solvers within 3 SE of {:.5} (M={n_paths})", oracle.mean)
        } else {
            failures.join("; ")
        },
    ))
}

/// The quadrature DP oracle against the fine-mesh reference prices.
pub fn dp_oracle_matches_reference_prices() -> Result<CheckReport> {
    const TOLERANCE: f64 = 0.01;
    let contract = constant_contract();
    let mut failures = Vec::new();
    let mut details = Vec::new();
    for (sigma, reference) in FD_REFERENCE {
        let price = dp_quadrature_price(&constant_model(sigma), &contract, &DpGrid::default())?;
        let diff = (price - reference).abs();
        details.push(format!("sigma {sigma:.2}: {price:.5} (ref {reference:.5})"));
        if diff > TOLERANCE {
            failures.push(format!("sigma {sigma}: {price:.5} vs {reference:.5}"));
        }
    }
    Ok(CheckReport::new(
        "quadrature DP matches reference prices",
        failures.is_empty(),
        if failures.is_empty() {
            format!("{} (tol {TOLERANCE})", details.join(", "))
        } else {
            failures.join("; ")
        },
    ))
}

/// Residual orthogonality, backprop-vs-finite-difference agreement, and the
/// production network parameter counts.
pub fn regression_properties() -> Result<CheckReport> {
    let mut failures = Vec::new();

    // OLS residual orthogonality against every design column.
    let spec = crate::regression::BasisSpec::new(crate::regression::BasisKind::ConstantRateCubic);
    let k = spec.len();
    let n = 5_000usize;
    let mut rng = path_rng(VERIFY_SEED, 7);
    let mut design = vec![0.0; n * k];
    let mut targets = vec![0.0; n];
    let mut row = vec![0.0; k];
    for i in 0..n {
        let w: f64 = rng.random::<f64>() * 3.0;
        let a: f64 = rng.random::<f64>();
        let pi: f64 = rng.random::<f64>() * a;
        spec.eval_into(&mut row, w, a, pi, 0.0);
        design[i * k..(i + 1) * k].copy_from_slice(&row);
        targets[i] = (w - pi).max(0.0) + 0.5 * a + rng.random::<f64>();
    }
    let fit = ols_fit(&design, n, k, &targets)?;
    let y_scale = targets.iter().map(|y| y * y).sum::<f64>().sqrt();
    for j in 0..k {
        let mut inner = 0.0;
        let mut col_sq = 0.0;
        for i in 0..n {
            let pred: f64 = fit
                .coef
                .iter()
                .zip(&design[i * k..(i + 1) * k])
                .map(|(c, x)| c * x)
                .sum();
            inner += (targets[i] - pred) * design[i * k + j];
            col_sq += design[i * k + j] * design[i * k + j];
        }
        if inner.abs() >= 1e-8 * y_scale * col_sq.sqrt() {
            failures.push(format!("column {j}: residual inner product {inner:.2e}"));
        }
    }

    // Backprop against central finite differences on the production
    // architecture: every parameter of a narrow net, a deterministic sample
    // of 500 parameters of the 128-wide net.
    for (width, sampled) in [(8usize, None), (128, Some(500usize))] {
        let worst = gradient_check(width, sampled)?;
        if worst >= 1e-4 {
            failures.push(format!("width {width}: max relative gradient error {worst:.2e}"));
        }
    }

    // Parameter counts.
    let m2 = MlpModel::with_architecture(2, 128, 3, 0);
    let m3 = MlpModel::with_architecture(3, 128, 3, 0);
    if m2.param_count() != 33_537 || m3.param_count() != 33_665 {
        failures.push(format!("parameter counts {} / {}", m2.param_count(), m3.param_count()));
    }

    Ok(CheckReport::new(
        "regression properties",
        failures.is_empty(),
        if failures.is_empty() {
            "residual orthogonality < 1e-8, gradient check < 1e-4, parameter counts 33537/33665".into()
        } else {
            failures.join("; ")
        },
    ))
}

/// Max relative error between analytic and central finite-difference
/// gradients of the batch MSE on a 10-sample batch. `sampled` caps the
/// number of parameters probed (evenly strided); `None` checks all.
fn gradient_check(width: usize, sampled: Option<usize>) -> Result<f64> {
    let cfg = TrainConfig {
        hidden_width: width,
        epochs: 1,
        seed: VERIFY_SEED,
        ..TrainConfig::default()
    };
    let n = 10usize;
    let mut rng = path_rng(VERIFY_SEED, 17);
    let xs: Vec<f64> = (0..n * 2).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
    let ys: Vec<f64> = (0..n).map(|i| xs[i * 2] - 0.3 * xs[i * 2 + 1]).collect();

    // One training epoch lands at a generic (non-symmetric) point.
    let model = mlp_fit(&xs, 2, &ys, &cfg)?.model;

    let loss_of = |m: &MlpModel| -> f64 {
        let mut preds = vec![0.0; n];
        m.predict_batch(&xs, &mut preds);
        preds.iter().zip(&ys).map(|(p, y)| (p - y).powi(2)).sum::<f64>() / n as f64
    };

    let (grad_w, grad_b) = crate::regression::mlp::loss_gradient_for_check(&model, &xs, &ys)?;

    // Flat index space over (layer, weight-or-bias, position).
    let mut coords: Vec<(usize, usize, usize)> = Vec::new();
    for l in 0..model.weights.len() {
        for idx in 0..model.weights[l].len() {
            coords.push((l, 0, idx));
        }
        for idx in 0..model.biases[l].len() {
            coords.push((l, 1, idx));
        }
    }
    let stride = match sampled {
        Some(budget) if coords.len() > budget => coords.len() / budget,
        _ => 1,
    };

    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for (l, kind, idx) in coords.into_iter().step_by(stride) {
        let mut plus = model.clone();
        let mut minus = model.clone();
        if kind == 0 {
            plus.weights[l][idx] += h;
            minus.weights[l][idx] -= h;
        } else {
            plus.biases[l][idx] += h;
            minus.biases[l][idx] -= h;
        }
        let fd = (loss_of(&plus) - loss_of(&minus)) / (2.0 * h);
        let an = if kind == 0 { grad_w[l][idx] } else { grad_b[l][idx] };
        let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-6);
        worst = worst.max(rel);
    }
    Ok(worst)
}

// ---------------------------------------------------------------------
// tables_desk
// ---------------------------------------------------------------------

/// Small-sample reproduction: M = 10^4, 20 runs, sigma = 0.2. The realized
/// lower estimate must land near the benchmark multi-run mean and the
/// surface estimate must show the documented small-sample upward bias.
pub fn table2_small_sample_reproduction() -> Result<CheckReport> {
    const LOWER_REFERENCE: f64 = 0.97372;
    const LOWER_TOLERANCE: f64 = 0.005;
    const UPPER_FLOOR: f64 = 1.1;
    let model = constant_model(0.2);
    let contract = constant_contract();

    let cfg = SolverConfig::new(Algorithm::RealizedNow, RegressorKind::Ols, 10_000, VERIFY_SEED);
    let lower = multi_run(&model, &contract, &cfg, 20, EvalMode::InSample)?;
    let cfg = SolverConfig::new(Algorithm::SurfaceNow, RegressorKind::Ols, 10_000, VERIFY_SEED);
    let upper = multi_run(&model, &contract, &cfg, 20, EvalMode::InSample)?;

    let lower_diff = (lower.primary.mean - LOWER_REFERENCE).abs();
    let passed = lower_diff <= LOWER_TOLERANCE && upper.primary.mean > UPPER_FLOOR;
    Ok(CheckReport::new(
        "small-sample reproduction (M=1e4, 20 runs)",
        passed,
        format!(
            "lower {:.5} (ref {LOWER_REFERENCE}, diff {lower_diff:.5}, tol {LOWER_TOLERANCE}); upper {:.5} (floor {UPPER_FLOOR})",
            lower.primary.mean, upper.primary.mean
        ),
    ))
}

/// Mid-sample reproduction: M = 10^5, 20 runs, sigma = 0.2.
pub fn table2_mid_sample_reproduction() -> Result<CheckReport> {
    const REFERENCE: f64 = 0.98721;
    const TOLERANCE: f64 = 0.005;
    const REFERENCE_SE: f64 = 0.00057;
    let model = constant_model(0.2);
    let contract = constant_contract();
    let cfg = SolverConfig::new(Algorithm::RealizedNow, RegressorKind::Ols, 100_000, VERIFY_SEED);
    let report = multi_run(&model, &contract, &cfg, 20, EvalMode::InSample)?;
    let diff = (report.primary.mean - REFERENCE).abs();
    let se = report.primary.std_error.unwrap();
    let se_ok = (REFERENCE_SE / 2.0..=2.0 * REFERENCE_SE).contains(&se);
    Ok(CheckReport::new(
        "mid-sample reproduction (M=1e5, 20 runs)",
        diff <= TOLERANCE && se_ok,
        format!(
            "lower {:.5} (ref {REFERENCE}, diff {diff:.5}, tol {TOLERANCE}); se {se:.5} (ref {REFERENCE_SE}, factor-2 band)",
            report.primary.mean
        ),
    ))
}

/// Volatility ladder at M = 10^5: prices strictly increasing in sigma and
/// each within 0.01 of the reference.
pub fn table1_volatility_ladder() -> Result<CheckReport> {
    const TOLERANCE: f64 = 0.01;
    const RUNS: usize = 5;
    let contract = constant_contract();
    let mut prices = Vec::new();
    let mut failures = Vec::new();
    for (sigma, reference) in FD_REFERENCE {
        let model = constant_model(sigma);
        let cfg = SolverConfig::new(Algorithm::RealizedNow, RegressorKind::Ols, 100_000, VERIFY_SEED);
        let report = multi_run(&model, &contract, &cfg, RUNS, EvalMode::InSample)?;
        let mean = report.primary.mean;
        let diff = (mean - reference).abs();
        if diff > TOLERANCE {
            failures.push(format!("sigma {sigma:.2}: {mean:.5} vs {reference:.5} (diff {diff:.5})"));
        }
        prices.push((sigma, mean));
    }
    if !prices.windows(2).all(|w| w[1].1 > w[0].1) {
        failures.push(format!("prices not strictly increasing: {prices:?}"));
    }
    let detail = prices
        .iter()
        .map(|(s, p)| format!("{s:.2}:{p:.5}"))
        .collect::<Vec<_>>()
        .join(" ");
    Ok(CheckReport::new(
        "volatility ladder (M=1e5)",
        failures.is_empty(),
        if failures.is_empty() {
            format!("{detail} — increasing, all within {TOLERANCE} of reference")
        } else {
            failures.join("; ")
        },
    ))
}

/// Stochastic-rate spot check at sigma = 5%, M = 10^5, 20 runs.
pub fn table3_stochastic_rate_spot_check() -> Result<CheckReport> {
    const TOLERANCE: f64 = 0.015;
    let model = vasicek_model(0.05);
    let contract = vasicek_contract();
    let cfg = SolverConfig::new(Algorithm::RealizedNow, RegressorKind::Ols, 100_000, VERIFY_SEED);
    let report = multi_run(&model, &contract, &cfg, 20, EvalMode::InSample)?;
    let diff = (report.primary.mean - GHQC_REFERENCE_SIGMA5).abs();
    Ok(CheckReport::new(
        "stochastic-rate spot check (M=1e5, 20 runs)",
        diff <= TOLERANCE,
        format!(
            "lower {:.5} (ref {GHQC_REFERENCE_SIGMA5}, diff {diff:.5}, tol {TOLERANCE}, se {:.5})",
            report.primary.mean,
            report.primary.std_error.unwrap()
        ),
    ))
}

/// Lower/upper ordering and the dynamic-vs-static floor at M = 10^5.
pub fn estimator_ordering() -> Result<CheckReport> {
    const RUNS: usize = 5;
    let model = constant_model(0.2);
    let contract = constant_contract();

    let cfg = SolverConfig::new(Algorithm::RealizedNow, RegressorKind::Ols, 100_000, VERIFY_SEED);
    let lower = multi_run(&model, &contract, &cfg, RUNS, EvalMode::InSample)?;
    let cfg = SolverConfig::new(Algorithm::SurfaceNow, RegressorKind::Ols, 100_000, VERIFY_SEED);
    let upper = multi_run(&model, &contract, &cfg, RUNS, EvalMode::InSample)?;
    let static_est = static_price(&model, &contract, 100_000, VERIFY_SEED)?;

    let se_l = lower.primary.std_error.unwrap();
    let se_u = upper.primary.std_error.unwrap();
    let combined_lu = (se_l * se_l + se_u * se_u).sqrt();
    let ordering_ok = lower.primary.mean <= upper.primary.mean + 3.0 * combined_lu;

    let se_s = static_est.mc_se.unwrap();
    let combined_ls = (se_l * se_l + se_s * se_s).sqrt();
    let floor_ok = lower.primary.mean >= static_est.mean - 3.0 * combined_ls;

    Ok(CheckReport::new(
        "estimator ordering (M=1e5)",
        ordering_ok && floor_ok,
        format!(
            "lower {:.5} <= upper {:.5} (+3se {:.5}); lower >= static {:.5} (-3se {:.5})",
            lower.primary.mean,
            upper.primary.mean,
            3.0 * combined_lu,
            static_est.mean,
            3.0 * combined_ls
        ),
    ))
}

/// Fair-fee root solve: converges below 1e-3 with the root inside the
/// plausible band for the sigma = 20% constant-rate contract.
pub fn fair_fee_bracketing() -> Result<CheckReport> {
    const TOLERANCE: f64 = 1e-3;
    const BAND: (f64, f64) = (0.005, 0.02);
    let model = constant_model(0.2);
    let contract = constant_contract();
    let cfg = SolverConfig::new(Algorithm::RealizedNow, RegressorKind::Ols, 50_000, VERIFY_SEED);
    let result = fair_fee_solve(&model, &contract, &cfg, (0.0, 0.05), TOLERANCE, 60)?;
    let in_band = result.alpha_star > BAND.0 && result.alpha_star < BAND.1;
    Ok(CheckReport::new(
        "fair-fee solve",
        result.achieved_residual < TOLERANCE && in_band,
        format!(
            "alpha* {:.5} in ({}, {}), residual {:.2e} after {} iterations",
            result.alpha_star, BAND.0, BAND.1, result.achieved_residual, result.iterations
        ),
    ))
}

/// In-sample versus fresh-seed policy evaluation: the two values must agree
/// to a few multiples of the run-to-run noise (foresight bias sanity band).
pub fn foresight_bias_band(n_paths: usize, runs: usize) -> Result<CheckReport> {
    let model = constant_model(0.2);
    let contract = constant_contract();
    let cfg = SolverConfig::new(Algorithm::RealizedNow, RegressorKind::Ols, n_paths, VERIFY_SEED);
    let report = multi_run(&model, &contract, &cfg, runs, EvalMode::FreshPaths(n_paths))?;
    let in_sample = report.primary.mean;
    let fresh = report.fresh_lower.as_ref().unwrap().mean;
    let se_in = report.primary.std_error.unwrap_or(0.0);
    let se_fresh = report.fresh_lower.as_ref().unwrap().std_error.unwrap_or(0.0);
    let se_diff = (se_in * se_in + se_fresh * se_fresh).sqrt();
    let diff = in_sample - fresh;
    // Foresight pushes the in-sample value up; a large negative gap or a
    // runaway positive one both indicate trouble. At desk scale the
    // path-sampling noise of both estimates dominates the bias itself.
    let passed = diff > -3.0 * se_diff && diff < 5.0 * se_diff.max(1e-4);
    Ok(CheckReport::new(
        "foresight bias sanity band",
        passed,
        format!(
            "in-sample {in_sample:.5} vs fresh {fresh:.5} (diff {diff:+.5}, se of diff {se_diff:.5})"
        ),
    ))
}

/// Policy value of the out-of-sample replay against a converged reference:
/// the replay may not beat a much larger run by more than noise.
pub fn lower_bound_sanity(n_paths: usize) -> Result<CheckReport> {
    let model = constant_model(0.2);
    let contract = constant_contract();
    let cfg = SolverConfig::new(Algorithm::RealizedNow, RegressorKind::Ols, n_paths, VERIFY_SEED);
    let result = crate::lsmc::solve(&model, &contract, &cfg)?;
    let fresh = lower_estimate(&result.policy, &model, n_paths, VERIFY_SEED ^ 0xABCD)?;
    // Reference: the quadrature DP optimum dominates every policy value.
    let dp = dp_quadrature_price(&model, &contract, &DpGrid::default())?;
    let margin = 3.0 * fresh.mc_se.unwrap();
    let passed = fresh.mean <= dp + margin;
    Ok(CheckReport::new(
        "policy replay below the optimum",
        passed,
        format!("fresh lower {:.5} <= dp optimum {dp:.5} + {margin:.5}", fresh.mean),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_suite_is_rejected() {
        assert!(matches!(
            run_suite("bogus"),
            Err(crate::GmwbError::InvalidParameter { .. })
        ));
    }
}
