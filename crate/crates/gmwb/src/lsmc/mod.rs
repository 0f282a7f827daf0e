//! Least-squares Monte Carlo solvers for the GMWB control problem.
//!
//! The pipeline has two halves. [`forward_simulate`] produces full
//! trajectories of the market and both contract accounts under *randomized*
//! withdrawals — the control randomization is what lets a regression see
//! states that only suboptimal play would reach. The backward solvers in
//! [`solvers`] then walk the date grid from maturity to inception, at each
//! decision date fitting a continuation-value regressor and extracting the
//! optimal withdrawal by grid search.
//!
//! Four solver variants ship, the cross product of two axes:
//!
//! * value propagation — *realized value* re-simulates every path forward
//!   under the estimated optimal controls and accumulates actual cashflows
//!   (O(N^2 M), but regression errors do not compound), versus *regression
//!   surface* which propagates the fitted surface itself (O(N M), upward
//!   biased through the sup by Jensen's inequality);
//! * regression timing — *regress now* fits on date-n covariates plus the
//!   randomized control, versus *regress later* which fits on date-(n+1)
//!   covariates only and integrates the fitted polynomial against the exact
//!   transition moments of [`crate::closed_form`].

pub mod policy;
pub mod solvers;

pub use policy::{optimal_control, replay_policy, DateRule, Policy, PolicyRules, ValueClamp};
pub use solvers::{
    solve, solve_realized_regress_now, solve_regress_later, solve_surface_regress_now,
    SolveResult, ValueKind, ValueUpdate,
};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contract::{ContractParams, ContractState};
use crate::market::{simulate_paths, MarketPaths, ModelParams, RateMode};
use crate::regression::{BasisKind, RegressorKind, TrainConfig};
use crate::rng::{derive_seed, path_rng, StreamTag};
use crate::{invalid, Result};

/// Backward solver selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    RealizedNow,
    SurfaceNow,
    RealizedLater,
    SurfaceLater,
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Algorithm::RealizedNow => "realized_now",
            Algorithm::SurfaceNow => "surface_now",
            Algorithm::RealizedLater => "realized_later",
            Algorithm::SurfaceLater => "surface_later",
        };
        write!(f, "{s}")
    }
}

/// Admissible control set used by both the forward randomization and the
/// argmax. `Contractual` collapses it to the singleton `{min(G_n, a)}`,
/// which turns every solver into the static strategy — the oracle
/// equivalence tests live on that degeneration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlSet {
    Full,
    Contractual,
}

/// Mixture for the randomized withdrawal draw: an atom at zero, an atom at
/// the contractual amount, and a uniform spread over the admissible range.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MixtureWeights {
    pub zero: f64,
    pub contractual: f64,
    pub uniform: f64,
}

impl Default for MixtureWeights {
    fn default() -> Self {
        MixtureWeights {
            zero: 0.25,
            contractual: 0.25,
            uniform: 0.50,
        }
    }
}

impl MixtureWeights {
    pub fn validate(&self) -> Result<()> {
        let parts = [self.zero, self.contractual, self.uniform];
        if parts.iter().any(|&w| !(w >= 0.0)) {
            return Err(invalid("mixture", "weights must be nonnegative"));
        }
        let total: f64 = parts.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(invalid("mixture", format!("weights must sum to 1, got {total}")));
        }
        Ok(())
    }
}

/// Full solver configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverConfig {
    pub algorithm: Algorithm,
    pub regressor: RegressorKind,
    /// Number of uniform grid points for the control search; the exact
    /// points `{0, G_n, a}` are always added on top.
    pub grid_size: usize,
    pub mixture: MixtureWeights,
    pub n_paths: usize,
    pub seed: u64,
    pub control_set: ControlSet,
    /// Replaces the default regress-now basis (constant-rate 17-term cubic
    /// or stochastic 15-term quadratic). Used by the basis-robustness checks.
    pub basis_override: Option<BasisKind>,
    /// Neural-network training schedule (MLP regressor only).
    pub train: TrainConfig,
}

impl SolverConfig {
    pub fn new(algorithm: Algorithm, regressor: RegressorKind, n_paths: usize, seed: u64) -> Self {
        SolverConfig {
            algorithm,
            regressor,
            grid_size: 1000,
            mixture: MixtureWeights::default(),
            n_paths,
            seed,
            control_set: ControlSet::Full,
            basis_override: None,
            train: TrainConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.mixture.validate()?;
        if self.grid_size < 2 {
            return Err(invalid("grid_size", "needs at least 2 points"));
        }
        if self.n_paths == 0 {
            return Err(invalid("n_paths", "must be >= 1"));
        }
        Ok(())
    }

    /// Regress-now basis for the given rate mode, honoring the override.
    pub fn regress_now_basis(&self, rate_mode: RateMode) -> BasisKind {
        self.basis_override.unwrap_or(match rate_mode {
            RateMode::Constant => BasisKind::ConstantRateCubic,
            RateMode::Vasicek => BasisKind::StochasticQuadratic,
        })
    }
}

/// Forward-simulated trajectories: market, accounts and randomized controls,
/// path-major. For path `m`, dates live at `m * (N + 1) + n` and steps at
/// `m * N + n`.
#[derive(Debug, Clone)]
pub struct PathSet {
    /// `t_0 = 0, t_1, ..., t_N`.
    pub dates: Vec<f64>,
    pub n_paths: usize,
    /// Rate regime of the generating model; decides the covariate set.
    pub rate_mode: RateMode,
    /// Pre-decision wealth account per date.
    pub wealth: Vec<f64>,
    /// Pre-decision guarantee account per date.
    pub guarantee: Vec<f64>,
    /// Short rate per date.
    pub rate: Vec<f64>,
    /// Randomized control at decision date `n` (1-based), stored at
    /// `m * (N - 1) + (n - 1)`.
    pub control: Vec<f64>,
    /// Wealth growth factor over step `n`: `(S_{n+1}/S_n) e^{-fee dt}`.
    pub growth: Vec<f64>,
    /// Exact discount factor over step `n`.
    pub discount: Vec<f64>,
}

impl PathSet {
    pub fn n_dates(&self) -> usize {
        self.dates.len()
    }

    /// Number of withdrawal dates `N` (decision dates plus maturity).
    pub fn n_withdrawal_dates(&self) -> usize {
        self.dates.len() - 1
    }

    pub fn n_decisions(&self) -> usize {
        self.dates.len().saturating_sub(2)
    }

    #[inline]
    pub(crate) fn date_idx(&self, path: usize, date: usize) -> usize {
        path * self.n_dates() + date
    }

    #[inline]
    pub(crate) fn step_idx(&self, path: usize, step: usize) -> usize {
        path * (self.n_dates() - 1) + step
    }
}

/// Runs the forward pass: simulates the market, draws randomized controls at
/// every decision date and evolves both accounts to maturity.
///
/// No withdrawal happens at `t_0`; the decision dates are `t_1 ... t_{N-1}`
/// and the contract pays its terminal value at `t_N`. The randomized control
/// at a date with guarantee balance `a` is 0 with probability `zero`,
/// `min(G_n, a)` with probability `contractual`, and uniform on `(0, a)`
/// otherwise — always admissible by construction.
pub fn forward_simulate(
    model: &ModelParams,
    contract: &ContractParams,
    cfg: &SolverConfig,
) -> Result<PathSet> {
    cfg.validate()?;
    contract.validate()?;
    let grid = contract.grid();
    let market = simulate_paths(model, &grid, cfg.n_paths, cfg.seed)?;
    forward_accounts(&market, model.rate_mode, contract, cfg)
}

/// Account evolution over already-simulated market paths.
pub fn forward_accounts(
    market: &MarketPaths,
    rate_mode: RateMode,
    contract: &ContractParams,
    cfg: &SolverConfig,
) -> Result<PathSet> {
    cfg.validate()?;
    let n_dates = market.n_dates();
    let n_steps = n_dates - 1;
    let n = contract.n_dates();
    if n_steps != n {
        return Err(invalid(
            "market",
            format!("market grid has {n_steps} steps but the contract has {n} dates"),
        ));
    }
    let m_paths = market.n_paths;
    let n_decisions = n.saturating_sub(1);

    let g_amounts: Vec<f64> = (1..=n)
        .map(|i| contract.guaranteed_withdrawal(i))
        .collect::<Result<_>>()?;
    let fee = contract.fee;
    let deltas: Vec<f64> = market.dates.windows(2).map(|w| w[1] - w[0]).collect();
    let fee_factors: Vec<f64> = deltas.iter().map(|dt| (-fee * dt).exp()).collect();

    let control_seed = derive_seed(cfg.seed, StreamTag::Control, 0);

    let mut wealth = vec![0.0; m_paths * n_dates];
    let mut guarantee = vec![0.0; m_paths * n_dates];
    let mut rate = vec![0.0; m_paths * n_dates];
    // One slot per path even for a decision-free contract, so the chunked
    // zip below still yields one chunk per path.
    let mut control = vec![0.0; m_paths * n_decisions.max(1)];
    let mut growth = vec![0.0; m_paths * n_steps];
    let mut discount = vec![0.0; m_paths * n_steps];

    wealth
        .par_chunks_mut(n_dates)
        .zip(guarantee.par_chunks_mut(n_dates))
        .zip(rate.par_chunks_mut(n_dates))
        .zip(control.par_chunks_mut(n_decisions.max(1)))
        .zip(growth.par_chunks_mut(n_steps))
        .zip(discount.par_chunks_mut(n_steps))
        .enumerate()
        .for_each(|(m, (((((w_row, a_row), r_row), c_row), g_row), d_row))| {
            let mut rng = path_rng(control_seed, m as u64);
            let base = m * n_dates;
            let step_base = m * n_steps;
            for i in 0..n_steps {
                g_row[i] = market.s[base + i + 1] / market.s[base + i] * fee_factors[i];
                d_row[i] = market.step_discount[step_base + i];
            }
            r_row.copy_from_slice(&market.r[base..base + n_dates]);

            let mut state = ContractState::initial(contract);
            w_row[0] = state.w;
            a_row[0] = state.a;
            // Step t_0 -> t_1 carries no withdrawal.
            state.w *= g_row[0];
            w_row[1] = state.w;
            a_row[1] = state.a;

            for date in 1..n {
                // Two uniforms per decision keep the draw layout fixed
                // across mixture branches.
                let u1: f64 = rng.random();
                let u2: f64 = rng.random();
                let a = state.a;
                let pi = if cfg.control_set == ControlSet::Contractual {
                    g_amounts[date - 1].min(a)
                } else if u1 < cfg.mixture.zero {
                    0.0
                } else if u1 < cfg.mixture.zero + cfg.mixture.contractual {
                    g_amounts[date - 1].min(a)
                } else {
                    u2 * a
                };
                c_row[date - 1] = pi;
                state = crate::contract::post_decision(&state, pi);
                state.w *= g_row[date];
                w_row[date + 1] = state.w;
                a_row[date + 1] = state.a;
            }
        });

    Ok(PathSet {
        dates: market.dates.clone(),
        n_paths: m_paths,
        rate_mode,
        wealth,
        guarantee,
        rate,
        control,
        growth,
        discount,
    })
}
