//! Backward solvers: realized-value and regression-surface value updates,
//! in regress-now and regress-later timing.

use rayon::prelude::*;

use crate::contract::{cashflow_with, ContractParams, ContractState};
use crate::market::{step_moments, ModelParams, RateMode, StepMoments};
use crate::regression::{mlp_fit, ols_fit, BasisKind, BasisSpec, OlsModel, RegressorKind};
use crate::rng::{derive_seed, StreamTag};
use crate::{GmwbError, Result};

use super::policy::{optimal_control_inner, DateRule, PhiAtState, Policy, PolicyRules, ValueClamp};
use super::{ControlSet, PathSet, SolverConfig};

/// How the per-path value is propagated backward.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueUpdate {
    /// Re-simulate each path forward under the estimated optimal controls
    /// and accumulate realized cashflows.
    Realized,
    /// Evaluate the fitted surface at the chosen control.
    Surface,
}

/// What the solver's time-0 value estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueKind {
    /// Realized-value solvers: the in-sample policy value, biased low by
    /// policy suboptimality (and up by in-sample foresight).
    InSampleLower,
    /// Surface solvers: biased high through the sup by Jensen's inequality.
    ApproxUpper,
}

/// Output of one backward solve.
#[derive(Debug, Clone)]
pub struct SolveResult {
    pub policy: Policy,
    pub kind: ValueKind,
    /// Per-path time-0 value.
    pub path_values: Vec<f64>,
    /// Mean of `path_values`.
    pub value: f64,
    /// Number of per-date regressions that needed the ridge fallback.
    pub ridge_fallbacks: usize,
}

impl SolveResult {
    /// Standard error of the time-0 value over paths.
    pub fn path_std_error(&self) -> f64 {
        let n = self.path_values.len() as f64;
        let var = self
            .path_values
            .iter()
            .map(|v| (v - self.value).powi(2))
            .sum::<f64>()
            / (n - 1.0);
        (var / n).sqrt()
    }
}

/// Forward-simulates and runs the configured backward solver.
pub fn solve(model: &ModelParams, contract: &ContractParams, cfg: &SolverConfig) -> Result<SolveResult> {
    let paths = super::forward_simulate(model, contract, cfg)?;
    match cfg.algorithm {
        super::Algorithm::RealizedNow => solve_realized_regress_now(&paths, contract, cfg),
        super::Algorithm::SurfaceNow => solve_surface_regress_now(&paths, contract, cfg),
        super::Algorithm::RealizedLater => {
            solve_regress_later(&paths, contract, model, cfg, ValueUpdate::Realized)
        }
        super::Algorithm::SurfaceLater => {
            solve_regress_later(&paths, contract, model, cfg, ValueUpdate::Surface)
        }
    }
}

/// Realized-value, regress-now backward solve. The value trace re-simulates
/// every path from each date to maturity under the controls extracted so
/// far, which costs O(N^2 M) but keeps regression errors from compounding.
/// The time-0 average is the in-sample lower estimate.
pub fn solve_realized_regress_now(
    paths: &PathSet,
    contract: &ContractParams,
    cfg: &SolverConfig,
) -> Result<SolveResult> {
    backward(paths, contract, cfg, RegressTiming::Now, ValueUpdate::Realized, None)
}

/// Regression-surface, regress-now backward solve. The time-0 average is
/// the approximate upper estimate.
pub fn solve_surface_regress_now(
    paths: &PathSet,
    contract: &ContractParams,
    cfg: &SolverConfig,
) -> Result<SolveResult> {
    backward(paths, contract, cfg, RegressTiming::Now, ValueUpdate::Surface, None)
}

/// Regress-later backward solve: the regression sees only end-of-step
/// covariates and the continuation value is recovered in closed form from
/// the transition moments (discount handled exactly inside the moments with
/// `l = 1`, so the fit targets the date-(n+1) value itself). Polynomial
/// regressors only; the final decision date needs no regression at all
/// thanks to the exact terminal-step expectation.
pub fn solve_regress_later(
    paths: &PathSet,
    contract: &ContractParams,
    model: &ModelParams,
    cfg: &SolverConfig,
    variant: ValueUpdate,
) -> Result<SolveResult> {
    if cfg.regressor != RegressorKind::Ols {
        return Err(GmwbError::Solver(
            "regress-later requires closed-form conditional expectations; \
             polynomial regression only (the network has none)"
                .into(),
        ));
    }
    backward(paths, contract, cfg, RegressTiming::Later, variant, Some(model))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RegressTiming {
    Now,
    Later,
}

fn backward(
    paths: &PathSet,
    contract: &ContractParams,
    cfg: &SolverConfig,
    timing: RegressTiming,
    update: ValueUpdate,
    model: Option<&ModelParams>,
) -> Result<SolveResult> {
    cfg.validate()?;
    contract.validate()?;
    let n = contract.n_dates();
    if paths.n_withdrawal_dates() != n {
        return Err(GmwbError::Solver(format!(
            "path set has {} withdrawal dates, contract has {n}",
            paths.n_withdrawal_dates()
        )));
    }
    let m_paths = paths.n_paths;
    let n_dec = n - 1;

    let g_amounts: Vec<f64> = (1..=n)
        .map(|i| contract.guaranteed_withdrawal(i))
        .collect::<Result<_>>()?;

    // Step moments are only needed for regress-later rules.
    let moments: Option<Vec<StepMoments>> = match timing {
        RegressTiming::Now => None,
        RegressTiming::Later => {
            let model = model.ok_or_else(|| {
                GmwbError::Solver("regress-later needs the market model for its transition moments".into())
            })?;
            Some(
                paths
                    .dates
                    .windows(2)
                    .map(|w| step_moments(model, w[1] - w[0]))
                    .collect::<Result<_>>()?,
            )
        }
    };

    // Terminal values at t_N.
    let mut v_hat: Vec<f64> = (0..m_paths)
        .into_par_iter()
        .map(|m| {
            let idx = paths.date_idx(m, n);
            contract.terminal_payoff(&ContractState {
                w: paths.wealth[idx],
                a: paths.guarantee[idx],
            })
        })
        .collect();

    let mut rules: Vec<Option<DateRule>> = vec![None; n_dec];
    let mut ridge_fallbacks = 0usize;

    for date in (1..n).rev() {
        let rule = match timing {
            RegressTiming::Now => fit_regress_now(paths, cfg, date, &v_hat, &mut ridge_fallbacks)?,
            RegressTiming::Later => {
                let moments = moments.as_ref().unwrap();
                if date == n - 1 {
                    DateRule::Terminal { moments: moments[date] }
                } else {
                    fit_regress_later(paths, date, &v_hat, &moments[date], &mut ridge_fallbacks)?
                }
            }
        };
        rules[date - 1] = Some(rule);

        match update {
            ValueUpdate::Realized => {
                let new_values: Result<Vec<f64>> = (0..m_paths)
                    .into_par_iter()
                    .map(|m| resimulate_from(paths, contract, cfg, &g_amounts, &rules, m, date))
                    .collect();
                v_hat = new_values?;
            }
            ValueUpdate::Surface => {
                let rule_ref = rules[date - 1].as_ref().unwrap();
                let new_values: Result<Vec<f64>> = (0..m_paths)
                    .into_par_iter()
                    .map(|m| {
                        let idx = paths.date_idx(m, date);
                        let (_, obj) = choose_control(
                            rule_ref,
                            contract,
                            date,
                            g_amounts[date - 1],
                            paths.wealth[idx],
                            paths.guarantee[idx],
                            paths.rate[idx],
                            cfg.grid_size,
                            cfg.control_set,
                        )?;
                        Ok(obj)
                    })
                    .collect();
                v_hat = new_values?;
            }
        }
    }

    // No decision at t_0: discount the date-1 values over the first step.
    let path_values: Vec<f64> = (0..m_paths)
        .map(|m| paths.discount[paths.step_idx(m, 0)] * v_hat[m])
        .collect();
    let value = path_values.iter().sum::<f64>() / m_paths as f64;

    Ok(SolveResult {
        policy: Policy {
            contract: contract.clone(),
            grid_size: cfg.grid_size,
            control_set: cfg.control_set,
            clamp: ValueClamp::Envelope,
            rules: PolicyRules::Fitted(rules.into_iter().map(Option::unwrap).collect()),
        },
        kind: match update {
            ValueUpdate::Realized => ValueKind::InSampleLower,
            ValueUpdate::Surface => ValueKind::ApproxUpper,
        },
        path_values,
        value,
        ridge_fallbacks,
    })
}

/// Fits the date-`date` regressor on pre-decision covariates plus the
/// randomized control, against the discounted next-date value.
fn fit_regress_now(
    paths: &PathSet,
    cfg: &SolverConfig,
    date: usize,
    v_next: &[f64],
    ridge_fallbacks: &mut usize,
) -> Result<DateRule> {
    let m_paths = paths.n_paths;
    let n_dec = paths.n_decisions();
    let rate_mode = paths.rate_mode;

    let targets: Vec<f64> = (0..m_paths)
        .into_par_iter()
        .map(|m| paths.discount[paths.step_idx(m, date)] * v_next[m])
        .collect();

    match cfg.regressor {
        RegressorKind::Ols => {
            let basis = BasisSpec::new(cfg.regress_now_basis(rate_mode));
            let k = basis.len();
            let mut design = vec![0.0f64; m_paths * k];
            design.par_chunks_mut(k).enumerate().for_each(|(m, row)| {
                let idx = paths.date_idx(m, date);
                basis.eval_into(
                    row,
                    paths.wealth[idx],
                    paths.guarantee[idx],
                    paths.control[m * n_dec + date - 1],
                    paths.rate[idx],
                );
            });
            let fit = ols_fit(&design, m_paths, k, &targets)?;
            if fit.ridge.is_some() {
                *ridge_fallbacks += 1;
            }
            Ok(DateRule::OlsNow(OlsModel {
                basis,
                coef: fit.coef,
                ridge: fit.ridge,
            }))
        }
        RegressorKind::Mlp => {
            let in_dim = match rate_mode {
                RateMode::Constant => 2,
                RateMode::Vasicek => 3,
            };
            let mut inputs = vec![0.0f64; m_paths * in_dim];
            inputs.par_chunks_mut(in_dim).enumerate().for_each(|(m, row)| {
                let idx = paths.date_idx(m, date);
                let pi = paths.control[m * n_dec + date - 1];
                row[0] = (paths.wealth[idx] - pi).max(0.0);
                row[1] = (paths.guarantee[idx] - pi).max(0.0);
                if in_dim == 3 {
                    row[2] = paths.rate[idx];
                }
            });
            let mut train = cfg.train.clone();
            train.seed = derive_seed(cfg.seed, StreamTag::Gradient, date as u64);
            let fit = mlp_fit(&inputs, in_dim, &targets, &train)?;
            Ok(DateRule::MlpPost(fit.model))
        }
    }
}

/// Fits the regress-later polynomial on the end-of-step state against the
/// *undiscounted* next-date value; discounting is exact inside the `l = 1`
/// transition moments at prediction time.
fn fit_regress_later(
    paths: &PathSet,
    date: usize,
    v_next: &[f64],
    moments: &StepMoments,
    ridge_fallbacks: &mut usize,
) -> Result<DateRule> {
    let m_paths = paths.n_paths;
    let basis = BasisSpec::new(match paths.rate_mode {
        RateMode::Constant => BasisKind::LaterConstantCubic,
        RateMode::Vasicek => BasisKind::LaterStochasticCubic,
    });
    let k = basis.len();
    let mut design = vec![0.0f64; m_paths * k];
    design.par_chunks_mut(k).enumerate().for_each(|(m, row)| {
        let idx = paths.date_idx(m, date + 1);
        basis.eval_into(row, paths.wealth[idx], paths.guarantee[idx], 0.0, paths.rate[idx]);
    });
    let fit = ols_fit(&design, m_paths, k, v_next)?;
    if fit.ridge.is_some() {
        *ridge_fallbacks += 1;
    }
    Ok(DateRule::OlsLater {
        model: OlsModel {
            basis,
            coef: fit.coef,
            ridge: fit.ridge,
        },
        moments: *moments,
    })
}

/// Control choice honoring the configured admissible set. Solvers always
/// run with the envelope projection (see [`super::policy::ValueClamp`]).
#[allow(clippy::too_many_arguments)]
fn choose_control(
    rule: &DateRule,
    contract: &ContractParams,
    date: usize,
    g: f64,
    w: f64,
    a: f64,
    r: f64,
    grid_size: usize,
    control_set: ControlSet,
) -> Result<(f64, f64)> {
    let floor = super::policy::wealth_floor_factor(contract, date, ValueClamp::Envelope);
    if control_set == ControlSet::Contractual {
        let pi = g.min(a);
        let phi = PhiAtState::build(rule, contract, w, a, r)?;
        let cont = phi.eval(pi).max((w - pi).max(0.0) * floor.unwrap()).max(0.0);
        return Ok((pi, cashflow_with(g, contract.penalty, pi) + cont));
    }
    optimal_control_inner(rule, contract, g, w, a, r, grid_size, floor)
}

/// Realized value from the forward state at `from`: walk the remaining
/// decision dates under the fitted rules, reusing the path's stored market
/// (growth factors and discounts are exogenous to the control).
fn resimulate_from(
    paths: &PathSet,
    contract: &ContractParams,
    cfg: &SolverConfig,
    g_amounts: &[f64],
    rules: &[Option<DateRule>],
    m: usize,
    from: usize,
) -> Result<f64> {
    let n = paths.n_withdrawal_dates();
    let idx = paths.date_idx(m, from);
    let mut w = paths.wealth[idx];
    let mut a = paths.guarantee[idx];
    let mut value = 0.0;
    let mut df = 1.0;

    for date in from..n {
        let rule = rules[date - 1]
            .as_ref()
            .expect("backward pass fits rules before they are used");
        let (pi, _) = choose_control(
            rule,
            contract,
            date,
            g_amounts[date - 1],
            w,
            a,
            paths.rate[paths.date_idx(m, date)],
            cfg.grid_size,
            cfg.control_set,
        )?;
        value += df * cashflow_with(g_amounts[date - 1], contract.penalty, pi);
        w = (w - pi).max(0.0) * paths.growth[paths.step_idx(m, date)];
        a = (a - pi).max(0.0);
        df *= paths.discount[paths.step_idx(m, date)];
    }
    let terminal = contract.terminal_payoff(&ContractState { w, a });
    Ok(value + df * terminal)
}
