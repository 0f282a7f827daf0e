//! Fitted withdrawal policies: per-date continuation-value rules, the grid
//! argmax that turns them into decisions, and policy replay on fresh paths.

use serde::{Deserialize, Serialize};

use crate::closed_form::{build_terminal_query, conditional_moment, terminal_expectation, MomentQuery};
use crate::contract::{cashflow_with, ContractParams};
use crate::market::{MarketPaths, StepMoments};
use crate::regression::{MlpModel, OlsModel};
use crate::{invalid, GmwbError, Result};

use super::ControlSet;

/// Continuation-value rule for one decision date.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum DateRule {
    /// Regress-now polynomial on `(W, A, pi[, r])`.
    OlsNow(OlsModel),
    /// Network on the post-decision state `((W - pi)^+, A - pi[, r])`.
    MlpPost(MlpModel),
    /// Regress-later polynomial on the end-of-step state, integrated against
    /// the exact transition moments (discount included, `l = 1`).
    OlsLater { model: OlsModel, moments: StepMoments },
    /// Exact closed form of the discounted terminal payoff (the last
    /// decision date of the regress-later solvers).
    Terminal { moments: StepMoments },
}

impl DateRule {
    fn uses_rate(&self) -> bool {
        match self {
            DateRule::OlsNow(m) | DateRule::OlsLater { model: m, .. } => m.basis.uses_rate(),
            DateRule::MlpPost(m) => m.in_dim() == 3,
            DateRule::Terminal { .. } => true,
        }
    }
}

/// Decision machinery of a policy.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum PolicyRules {
    /// One fitted rule per decision date `t_1 ... t_{N-1}`.
    Fitted(Vec<DateRule>),
    /// Always withdraw the contractual amount (the static strategy).
    Contractual,
}

/// A frozen, replayable withdrawal policy.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Policy {
    pub contract: ContractParams,
    pub grid_size: usize,
    pub control_set: ControlSet,
    pub clamp: ValueClamp,
    pub rules: PolicyRules,
}

impl Policy {
    pub fn contractual(contract: ContractParams) -> Self {
        Policy {
            contract,
            grid_size: 2,
            control_set: ControlSet::Contractual,
            clamp: ValueClamp::Envelope,
            rules: PolicyRules::Contractual,
        }
    }

    /// Optimal withdrawal at decision date `n` (1-based) in state
    /// `(w, a, r)`.
    pub fn decide(&self, n: usize, w: f64, a: f64, r: f64) -> Result<f64> {
        let g = self.contract.guaranteed_withdrawal(n)?;
        match &self.rules {
            PolicyRules::Contractual => Ok(g.min(a)),
            PolicyRules::Fitted(rules) => {
                let rule = rules.get(n - 1).ok_or_else(|| {
                    GmwbError::Solver(format!("policy has no rule for decision date {n}"))
                })?;
                if self.control_set == ControlSet::Contractual {
                    return Ok(g.min(a));
                }
                let floor = wealth_floor_factor(&self.contract, n, self.clamp);
                let (pi, _) = optimal_control_inner(
                    rule,
                    &self.contract,
                    g,
                    w,
                    a,
                    r,
                    self.grid_size,
                    floor,
                )?;
                Ok(pi)
            }
        }
    }
}

/// `B_{1,p,q}` table on the unit asset for `p, q <= 3`: everything a cubic
/// regress-later basis needs, computed once per `(path, date)`.
pub(crate) fn later_moment_table(moments: &StepMoments, r: f64) -> Result<[[f64; 4]; 4]> {
    let mut table = [[0.0f64; 4]; 4];
    for (p, row) in table.iter_mut().enumerate() {
        for (q, slot) in row.iter_mut().enumerate() {
            *slot = conditional_moment(&MomentQuery {
                l: 1.0,
                p: p as u32,
                q: q as u32,
                s: 1.0,
                r,
                moments: *moments,
            })?;
        }
    }
    Ok(table)
}

/// Continuation value estimate `Phi(x, pi)` for a fixed state, evaluable
/// across the control grid. Constructed once per state so the per-candidate
/// cost stays at a handful of flops for the polynomial rules.
pub(crate) enum PhiAtState<'a> {
    /// Polynomial in `pi`, coefficients in increasing power.
    Cubic([f64; crate::regression::basis::MAX_POWER + 1]),
    Later {
        model: &'a OlsModel,
        b1: [[f64; 4]; 4],
        fee_factor: f64,
        w: f64,
        a: f64,
    },
    Terminal {
        contract: &'a ContractParams,
        moments: &'a StepMoments,
        w: f64,
        a: f64,
        r: f64,
    },
    Mlp {
        model: &'a MlpModel,
        w: f64,
        a: f64,
        r: f64,
    },
}

impl<'a> PhiAtState<'a> {
    pub(crate) fn build(
        rule: &'a DateRule,
        contract: &'a ContractParams,
        w: f64,
        a: f64,
        r: f64,
    ) -> Result<PhiAtState<'a>> {
        Ok(match rule {
            DateRule::OlsNow(model) => PhiAtState::Cubic(model.basis.collapse_pi(&model.coef, w, a, r)),
            DateRule::OlsLater { model, moments } => PhiAtState::Later {
                model,
                b1: later_moment_table(moments, r)?,
                fee_factor: (-contract.fee * moments.dt).exp(),
                w,
                a,
            },
            DateRule::Terminal { moments } => PhiAtState::Terminal {
                contract,
                moments,
                w,
                a,
                r,
            },
            DateRule::MlpPost(model) => PhiAtState::Mlp { model, w, a, r },
        })
    }

    #[inline]
    pub(crate) fn eval(&self, pi: f64) -> f64 {
        match self {
            PhiAtState::Cubic(c) => c.iter().rev().fold(0.0, |acc, k| acc * pi + k),
            PhiAtState::Later {
                model,
                b1,
                fee_factor,
                w,
                a,
            } => {
                let w_post = (w - pi).max(0.0) * fee_factor;
                let a_post = (a - pi).max(0.0);
                let wp = [1.0, w_post, w_post * w_post, w_post * w_post * w_post];
                let ap = [1.0, a_post, a_post * a_post, a_post * a_post * a_post];
                let mut acc = 0.0;
                for (coef, t) in model.coef.iter().zip(&model.basis.terms) {
                    acc += coef * ap[t.a as usize] * wp[t.w as usize] * b1[t.w as usize][t.r as usize];
                }
                acc
            }
            PhiAtState::Terminal {
                contract,
                moments,
                w,
                a,
                r,
            } => {
                let query = build_terminal_query(contract, *w, *a, *r, pi, moments, 1.0)
                    .expect("grid candidates are admissible");
                if query.b == 0.0 && query.c == 0.0 {
                    0.0
                } else {
                    terminal_expectation(&query).expect("non-degenerate terminal query")
                }
            }
            PhiAtState::Mlp { model, w, a, r } => {
                let w_post = (w - pi).max(0.0);
                let a_post = (a - pi).max(0.0);
                let out = if model.in_dim() == 3 {
                    model.predict(&[w_post, a_post, *r])
                } else {
                    model.predict(&[w_post, a_post])
                };
                out.expect("covariate dimension checked at fit time")
            }
        }
    }
}

/// How fitted continuation values enter the decision objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueClamp {
    /// The fitted surface as-is: objective `C_n(pi) + Phi_hat(x, pi)`.
    Raw,
    /// The fitted surface projected onto two exact properties of the true
    /// continuation value before the comparison: it is nonnegative, and it
    /// dominates the fee-discounted post-decision wealth
    /// `(w - pi)^+ e^{-fee (T - t_n)}` (the discounted wealth account net of
    /// fees is a martingale and the terminal payoff dominates wealth).
    /// Production solvers use this mode: a polynomial surface extrapolates
    /// badly in the surrender corner and the deep-wealth tail, and the
    /// projection repairs exactly those regions.
    Envelope,
}

/// Grid argmax of the decision objective over the admissible set `[0, a]`.
///
/// The grid is `grid_size` uniform points on `[0, a]` augmented with the
/// exact candidates `{0, G_n, a}` so bang controls are representable. Ties
/// break toward the smaller withdrawal, independent of evaluation order.
#[allow(clippy::too_many_arguments)]
pub fn optimal_control(
    rule: &DateRule,
    contract: &ContractParams,
    date: usize,
    w: f64,
    a: f64,
    r: f64,
    grid_size: usize,
    control_set: ControlSet,
    clamp: ValueClamp,
) -> Result<(f64, f64)> {
    let g = contract.guaranteed_withdrawal(date)?;
    let floor = wealth_floor_factor(contract, date, clamp);
    if control_set == ControlSet::Contractual {
        let pi = g.min(a);
        let phi = PhiAtState::build(rule, contract, w, a, r)?;
        let cont = clamp_phi(phi.eval(pi), w, pi, floor);
        return Ok((pi, cashflow_with(g, contract.penalty, pi) + cont));
    }
    optimal_control_inner(rule, contract, g, w, a, r, grid_size, floor)
}

/// `e^{-fee (T - t_n)}` for the envelope's wealth floor; `None` disables
/// the projection.
pub(crate) fn wealth_floor_factor(contract: &ContractParams, date: usize, clamp: ValueClamp) -> Option<f64> {
    match clamp {
        ValueClamp::Raw => None,
        ValueClamp::Envelope => {
            let remaining = contract.maturity_years - contract.dates[date - 1];
            Some((-contract.fee * remaining).exp())
        }
    }
}

#[inline]
fn clamp_phi(raw: f64, w: f64, pi: f64, floor: Option<f64>) -> f64 {
    match floor {
        None => raw,
        Some(factor) => raw.max((w - pi).max(0.0) * factor).max(0.0),
    }
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn optimal_control_inner(
    rule: &DateRule,
    contract: &ContractParams,
    g: f64,
    w: f64,
    a: f64,
    r: f64,
    grid_size: usize,
    floor: Option<f64>,
) -> Result<(f64, f64)> {
    let phi = PhiAtState::build(rule, contract, w, a, r)?;
    Ok(scan_grid(&phi, g, contract.penalty, w, a, grid_size, floor))
}

pub(crate) fn scan_grid(
    phi: &PhiAtState<'_>,
    g: f64,
    penalty: f64,
    w: f64,
    a: f64,
    grid_size: usize,
    floor: Option<f64>,
) -> (f64, f64) {
    if a <= 0.0 {
        return (0.0, clamp_phi(phi.eval(0.0), w, 0.0, floor));
    }
    let mut best_pi = f64::INFINITY;
    let mut best_val = f64::NEG_INFINITY;
    let mut consider = |pi: f64, val: f64| {
        if val > best_val || (val == best_val && pi < best_pi) {
            best_val = val;
            best_pi = pi;
        }
    };
    let step = a / (grid_size - 1) as f64;
    for i in 0..grid_size {
        let pi = if i + 1 == grid_size { a } else { i as f64 * step };
        consider(pi, cashflow_with(g, penalty, pi) + clamp_phi(phi.eval(pi), w, pi, floor));
    }
    if g > 0.0 && g < a {
        consider(g, cashflow_with(g, penalty, g) + clamp_phi(phi.eval(g), w, g, floor));
    }
    (best_pi, best_val)
}

/// Replays a frozen policy on fresh market paths: per-path discounted total
/// payoff of the contract under the policy's decisions.
pub fn replay_policy(policy: &Policy, market: &MarketPaths) -> Result<Vec<f64>> {
    let contract = &policy.contract;
    contract.validate()?;
    let n = contract.n_dates();
    if market.n_dates() != n + 1 {
        return Err(invalid(
            "market",
            format!(
                "market grid has {} dates but the contract needs {}",
                market.n_dates(),
                n + 1
            ),
        ));
    }
    if let PolicyRules::Fitted(rules) = &policy.rules {
        if rules.len() != n - 1 {
            return Err(GmwbError::Solver(format!(
                "policy carries {} rules for {} decision dates",
                rules.len(),
                n - 1
            )));
        }
        // Stochastic-rate rules replayed on constant-rate paths still see a
        // rate covariate; nothing to check here. A constant-rate rule on
        // stochastic paths silently ignores r, which is the caller's choice.
        let _ = rules.iter().map(DateRule::uses_rate);
    }

    let deltas: Vec<f64> = market.dates.windows(2).map(|d| d[1] - d[0]).collect();
    let fee_factors: Vec<f64> = deltas.iter().map(|dt| (-contract.fee * dt).exp()).collect();
    let n_dates = market.n_dates();
    let n_steps = n_dates - 1;

    use rayon::prelude::*;
    (0..market.n_paths)
        .into_par_iter()
        .map(|m| {
            let base = m * n_dates;
            let step_base = m * n_steps;
            let mut w = contract.w0;
            let mut a = contract.w0;
            let mut value = 0.0;
            let mut df = 1.0;

            w *= market.s[base + 1] / market.s[base] * fee_factors[0];
            df *= market.step_discount[step_base];

            #[allow(clippy::needless_range_loop)]
            for date in 1..n {
                let r = market.r[base + date];
                let pi = policy.decide(date, w, a, r)?;
                let g = contract.guaranteed_withdrawal(date)?;
                value += df * cashflow_with(g, contract.penalty, pi);
                w = (w - pi).max(0.0) * market.s[base + date + 1] / market.s[base + date]
                    * fee_factors[date];
                a = (a - pi).max(0.0);
                df *= market.step_discount[step_base + date];
            }
            let terminal = contract.terminal_payoff(&crate::contract::ContractState { w, a });
            Ok(value + df * terminal)
        })
        .collect()
}
