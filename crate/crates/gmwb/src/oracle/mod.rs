//! Independent verification machinery.
//!
//! Everything in this module deliberately avoids the solver code paths it
//! checks: [`static_price`] walks the contractual strategy by plain Monte
//! Carlo, [`dp_quadrature_price`] solves the Bellman recursion on a grid,
//! and the brute-force moment estimators average raw one-step draws against
//! the closed forms of [`crate::closed_form`].

pub mod dp;

pub use dp::{dp_quadrature_price, DpGrid};

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::contract::{cashflow_with, ContractParams};
use crate::estimators::{EstimateKind, PriceEstimate};
use crate::lsmc::{replay_policy, Policy};
use crate::market::{simulate_paths, simulate_step, step_moments, MarketState, ModelParams};
use crate::rng::path_rng;
use crate::Result;

/// Price of the static strategy (withdraw exactly the contractual amount at
/// every date) by plain Monte Carlo.
pub fn static_price(
    model: &ModelParams,
    contract: &ContractParams,
    n_paths: usize,
    seed: u64,
) -> Result<PriceEstimate> {
    let market = simulate_paths(model, &contract.grid(), n_paths, seed)?;
    let values = replay_policy(&Policy::contractual(contract.clone()), &market)?;
    Ok(PriceEstimate::single_run(EstimateKind::Lower, &values))
}

/// Brute-force estimate of the discounted conditional moment
/// `E[exp(-l int r) S'^p r'^q | s, r]` over `n_draws` one-step draws of the
/// exact scheme. Returns `(estimate, standard error)`.
#[allow(clippy::too_many_arguments)]
pub fn mc_conditional_moment(
    model: &ModelParams,
    s: f64,
    r: f64,
    l: f64,
    p: u32,
    q: u32,
    dt: f64,
    n_draws: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let moments = step_moments(model, dt)?;
    let state = MarketState { s, r, step_discount: 1.0 };
    mc_step_average(n_draws, seed, move |next| {
        next.step_discount.powf(l) * next.s.powi(p as i32) * next.r.powi(q as i32)
    }, &moments, &state)
}

/// Brute-force estimate of the discounted terminal payoff expectation
/// `E[exp(-int r) max(W_N, C_N(A_N)) | w, a, r, pi]` for the final step.
#[allow(clippy::too_many_arguments)]
pub fn mc_terminal_expectation(
    model: &ModelParams,
    contract: &ContractParams,
    w: f64,
    a: f64,
    r: f64,
    pi: f64,
    n_draws: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let n = contract.n_dates();
    let dt = contract.dates[n - 1] - if n == 1 { 0.0 } else { contract.dates[n - 2] };
    let moments = step_moments(model, dt)?;
    let g_final = contract.guaranteed_withdrawal(n)?;
    let penalty = contract.penalty;
    let fee_factor = (-contract.fee * dt).exp();
    let w_post = (w - pi).max(0.0);
    let a_post = (a - pi).max(0.0);
    let state = MarketState { s: 1.0, r, step_discount: 1.0 };
    mc_step_average(n_draws, seed, move |next| {
        let w_next = w_post * next.s * fee_factor;
        let c_next = cashflow_with(g_final, penalty, a_post);
        next.step_discount * w_next.max(c_next)
    }, &moments, &state)
}

/// Chunked deterministic Monte Carlo average of `f(next_state)` over
/// one-step draws. Chunks own their RNG streams, so the estimate does not
/// depend on thread count.
fn mc_step_average<F>(
    n_draws: usize,
    seed: u64,
    f: F,
    moments: &crate::market::StepMoments,
    state: &MarketState,
) -> Result<(f64, f64)>
where
    F: Fn(&MarketState) -> f64 + Sync,
{
    const CHUNK: usize = 65_536;
    let n_chunks = n_draws.div_ceil(CHUNK);
    let partials: Vec<(f64, f64)> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = path_rng(seed, c as u64);
            let count = CHUNK.min(n_draws - c * CHUNK);
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for _ in 0..count {
                let g = [
                    rng.sample(StandardNormal),
                    rng.sample(StandardNormal),
                    rng.sample(StandardNormal),
                ];
                let next = simulate_step(state, moments, g);
                let v = f(&next);
                sum += v;
                sum_sq += v * v;
            }
            (sum, sum_sq)
        })
        .collect();
    let (sum, sum_sq) = partials
        .iter()
        .fold((0.0, 0.0), |(a, b), (c, d)| (a + c, b + d));
    let mean = sum / n_draws as f64;
    let var = (sum_sq / n_draws as f64 - mean * mean).max(0.0);
    Ok((mean, (var / n_draws as f64).sqrt()))
}
