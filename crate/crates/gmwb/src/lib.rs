//! Pricing engine for variable annuities with a Guaranteed Minimum Withdrawal
//! Benefit (GMWB) under optimal dynamic withdrawals.
//!
//! The contract value is the solution of a discrete-time stochastic control
//! problem: at each withdrawal date the policyholder chooses how much to take
//! out of the guarantee, trading immediate (possibly penalized) cash against
//! the continuation value of the contract. The engine solves the backward
//! recursion by least-squares Monte Carlo with control randomization, so the
//! regression sees the full (state, control) domain even though the wealth
//! dynamics are endogenous.
//!
//! Module map:
//!
//! * [`market`] — joint equity / Vasicek short-rate dynamics with an exact
//!   one-step simulation scheme, including the integrated rate needed for
//!   per-step discount factors.
//! * [`contract`] — GMWB account mechanics: wealth and guarantee accounts,
//!   penalized cashflows, terminal payoff.
//! * [`regression`] — interchangeable continuation-value regressors:
//!   polynomial OLS (Householder QR with ridge fallback) and a small
//!   feed-forward network trained by hand-rolled AdamW.
//! * [`closed_form`] — discounted conditional moments of the joint asset/rate
//!   transition and the exact final-step expectation, used by the
//!   regress-later solvers.
//! * [`lsmc`] — the forward control-randomized simulation and the four
//!   backward solvers (realized value / regression surface, regress now /
//!   regress later).
//! * [`estimators`] — lower/upper price estimators, multi-run statistics and
//!   the fair-fee root solver.
//! * [`oracle`] — independent verification machinery: static-strategy Monte
//!   Carlo, a quadrature dynamic-programming pricer for the constant-rate
//!   case, and brute-force conditional-moment estimators.
//! * [`verify`] — the acceptance batteries run by the CLI and the test suite.

// Negated comparisons (`!(x >= 0.0)`) are load-bearing in validation:
// they reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod closed_form;
pub mod contract;
pub mod estimators;
pub mod lsmc;
pub mod market;
pub mod oracle;
pub mod regression;
pub mod rng;
pub mod verify;

use thiserror::Error;

/// Error type shared across the engine.
#[derive(Debug, Error)]
pub enum GmwbError {
    /// A model, contract or solver parameter fails its invariant.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// A regression fit could not be performed.
    #[error("regression failure: {0}")]
    Regression(String),

    /// A solver-level contract violation (mismatched policy, unsupported
    /// regressor for the requested algorithm, ...).
    #[error("solver failure: {0}")]
    Solver(String),

    /// Root solvers: the supplied bracket does not straddle the target.
    #[error("bracket failure: {0}")]
    Bracket(String),

    /// Root solvers: tolerance not reached within the iteration budget.
    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },
}

pub type Result<T> = std::result::Result<T, GmwbError>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> GmwbError {
    GmwbError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
