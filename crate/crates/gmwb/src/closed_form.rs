//! Closed-form conditional expectations of the joint asset/rate transition.
//!
//! Three layers of machinery, each exact under the one-step scheme of
//! [`crate::market`]:
//!
//! * [`gaussian_exp_moment`] — `E[N^n exp(c N)]` for a standard normal `N`,
//!   with the polynomial factor [`poly_factor`] `P(c, n) = e^{-c^2/2} E(c, n)`.
//! * [`conditional_moment`] — the discounted conditional moments
//!   `B_{l,p,q} = E[exp(-l ∫ r) S'^p r'^q | S, r]`, assembled from an
//!   exponential prefactor and the tilted rate-endpoint moments `D_{l,p,q}`.
//!   These turn a polynomial regression on end-of-step covariates into an
//!   exact continuation-value formula (the regress-later route).
//! * [`terminal_expectation`] — the exact discounted expectation of the
//!   final payoff `max(W_N, C_N(A_N))`, reduced to the moment generating
//!   function of the maximum of two correlated Gaussians.

use serde::{Deserialize, Serialize};

use crate::contract::{cashflow_with, ContractParams};
use crate::market::StepMoments;
use crate::{invalid, GmwbError, Result};

/// Standard normal CDF via `erfc`; absolute error below 1e-15 across the
/// real line (the underlying `erfc` is correctly rounded to ~1 ulp).
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// `P(c, n) = e^{-c^2/2} E[N^n exp(cN)]`, a polynomial in `c`.
///
/// `P(c,0) = 1`, `P(c,1) = c`, `P(c,2) = c^2 + 1`, `P(c,3) = c^3 + 3c`, and
/// `P(c, n) = (n-1) P(c, n-2) + c P(c, n-1)` beyond that. The recursion is
/// in the moment order `n` (Stein's identity applied to `N^{n-1} e^{cN}`).
pub fn poly_factor(c: f64, n: u32) -> f64 {
    match n {
        0 => 1.0,
        1 => c,
        2 => c * c + 1.0,
        3 => c * c * c + 3.0 * c,
        _ => {
            let (mut prev2, mut prev1) = (c * c + 1.0, c * c * c + 3.0 * c);
            for k in 4..=n {
                let next = (k as f64 - 1.0) * prev2 + c * prev1;
                prev2 = prev1;
                prev1 = next;
            }
            prev1
        }
    }
}

/// `E(c, n) = E[N^n exp(c N)] = P(c, n) e^{c^2 / 2}`.
pub fn gaussian_exp_moment(c: f64, n: u32) -> f64 {
    poly_factor(c, n) * (0.5 * c * c).exp()
}

/// Query for a discounted conditional moment `B_{l,p,q}`.
#[derive(Debug, Clone, Copy)]
pub struct MomentQuery {
    /// Discount exponent (0 or 1 in practice; any nonnegative real accepted).
    pub l: f64,
    /// Asset power.
    pub p: u32,
    /// Rate power.
    pub q: u32,
    /// Conditioning asset level `S(t_i)`.
    pub s: f64,
    /// Conditioning short rate `r(t_i)`.
    pub r: f64,
    /// Transition moments for the step.
    pub moments: StepMoments,
}

const MAX_POWER: u32 = 16;

/// Double factorial of odd numbers: `(j-1)!!` for even `j` (the central
/// moments of a standard normal).
fn odd_double_factorial(j: u32) -> f64 {
    let mut acc = 1.0;
    let mut k = 1;
    while k < j {
        acc *= (j - k) as f64;
        k += 2;
    }
    acc
}

fn binomial(n: u32, k: u32) -> f64 {
    let mut acc = 1.0;
    for i in 0..k {
        acc *= (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// `E[(mean + sd N)^q]` for standard normal `N`.
fn gaussian_power_moment(mean: f64, sd: f64, q: u32) -> f64 {
    let mut acc = 0.0;
    let mut j = 0;
    while j <= q {
        acc += binomial(q, j) * odd_double_factorial(j) * mean.powi((q - j) as i32) * sd.powi(j as i32);
        j += 2;
    }
    acc
}

/// Discounted conditional moment
/// `B_{l,p,q} = E[exp(-l ∫ r dtau) S(t_{i+1})^p r(t_{i+1})^q | S(t_i), r(t_i)]`.
///
/// The exponential prefactor collects the deterministic drift and the
/// variance of `(p - l) Y + p E`; the rate endpoint enters through its
/// exponentially tilted mean, so `D_{l,p,q}` is a plain Gaussian power
/// moment around that shifted mean.
pub fn conditional_moment(query: &MomentQuery) -> Result<f64> {
    let m = &query.moments;
    if query.p > MAX_POWER || query.q > MAX_POWER {
        return Err(invalid("p/q", format!("powers capped at {MAX_POWER}")));
    }
    if !query.s.is_finite() || !query.r.is_finite() || !query.l.is_finite() {
        return Err(invalid("query", "non-finite conditioning values"));
    }

    let p = query.p as f64;
    let pl = p - query.l;
    let (sy, se, sr) = (m.sd_y(), m.sd_e(), m.sd_r());

    let var_ye = pl * pl * m.var_y + p * p * m.var_e + 2.0 * p * pl * sy * se * m.rho_ye;
    let prefactor = query.s.powi(query.p as i32)
        * (pl * (m.mu_y + m.duration * query.r) + p * m.mu_e + 0.5 * var_ye).exp();

    // Tilt of the rate-endpoint mean induced by exp((p-l) Y + p E).
    let tilt = pl * sy * m.rho_ry + p * se * m.rho_re;
    let shifted_mean = m.decay * query.r + m.mu_r + sr * tilt;

    Ok(prefactor * gaussian_power_moment(shifted_mean, sr, query.q))
}

/// Parameters of the exact final-step expectation
/// `a E[exp(-l Y) max(b exp(Y + E), c)]`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TerminalQuery {
    /// Deterministic discount prefactor `exp(-l duration r)`.
    pub a: f64,
    /// Post-decision wealth carried into the final step, fee-adjusted and
    /// compounded by the deterministic rate drift.
    pub b: f64,
    /// Guaranteed terminal cashflow `C_N(A(t_N))`.
    pub c: f64,
    /// Mean of `X_1 = log b + (1 - l) Y + E`.
    pub m1: f64,
    /// Standard deviation of `X_1`.
    pub sigma1: f64,
    /// Mean of `X_2 = log c - l Y`.
    pub m2: f64,
    /// Standard deviation of `X_2`.
    pub sigma2: f64,
    /// Correlation of `X_1` and `X_2`.
    pub rho12: f64,
}

/// Builds the [`TerminalQuery`] for the step into maturity: conditioning
/// state `(w, a)` before the final withdrawal `pi`, rate `r`, and the final
/// step's transition moments. `l` is the discount exponent.
pub fn build_terminal_query(
    contract: &ContractParams,
    w: f64,
    a: f64,
    r: f64,
    pi: f64,
    moments: &StepMoments,
    l: f64,
) -> Result<TerminalQuery> {
    if !(pi >= 0.0) || pi > a + 1e-12 {
        return Err(invalid("pi", format!("withdrawal {pi} not admissible for guarantee {a}")));
    }
    if !(l >= 0.0) {
        return Err(invalid("l", "discount exponent must be >= 0"));
    }
    let g_final = contract.guaranteed_withdrawal(contract.n_dates())?;
    let dt = moments.dt;

    let a_coef = (-l * moments.duration * r).exp();
    let b = (w - pi).max(0.0) * (-contract.fee * dt).exp() * (moments.duration * r).exp();
    let c = cashflow_with(g_final, contract.penalty, (a - pi).max(0.0));

    let (sy, se) = (moments.sd_y(), moments.sd_e());
    let one_l = 1.0 - l;
    let var1 = one_l * one_l * moments.var_y + moments.var_e + 2.0 * one_l * moments.rho_ye * sy * se;
    let sigma1 = var1.max(0.0).sqrt();
    let sigma2 = l * sy;
    let rho12 = if sigma1 > 0.0 {
        ((-one_l * sy - se * moments.rho_ye) / sigma1).clamp(-1.0, 1.0)
    } else {
        0.0
    };

    Ok(TerminalQuery {
        a: a_coef,
        b,
        c,
        m1: if b > 0.0 { b.ln() + one_l * moments.mu_y + moments.mu_e } else { f64::NEG_INFINITY },
        sigma1,
        m2: if c > 0.0 { c.ln() - l * moments.mu_y } else { f64::NEG_INFINITY },
        sigma2,
        rho12,
    })
}

/// Exact discounted expectation of the terminal payoff.
///
/// Branches: `b = 0` keeps only the guaranteed leg, `c = 0` only the wealth
/// leg; otherwise the moment generating function of `max(X_1, X_2)` for two
/// correlated Gaussians applies. A degenerate spread (`Var[X_1 - X_2] = 0`)
/// falls back to whichever leg has the larger mean.
pub fn terminal_expectation(query: &TerminalQuery) -> Result<f64> {
    if query.b == 0.0 && query.c == 0.0 {
        return Err(GmwbError::Solver(
            "terminal expectation degenerates to zero: both wealth and guarantee legs vanish".into(),
        ));
    }
    if query.b == 0.0 {
        return Ok(query.a * (query.m2 + 0.5 * query.sigma2 * query.sigma2).exp());
    }
    if query.c == 0.0 {
        return Ok(query.a * (query.m1 + 0.5 * query.sigma1 * query.sigma1).exp());
    }

    let (m1, s1, m2, s2, rho) = (query.m1, query.sigma1, query.m2, query.sigma2, query.rho12);
    let spread_var = s1 * s1 + s2 * s2 - 2.0 * rho * s1 * s2;
    if spread_var <= 1e-24 {
        // X_1 - X_2 is a.s. constant; the max is whichever leg dominates.
        return Ok(if m1 >= m2 {
            query.a * (m1 + 0.5 * s1 * s1).exp()
        } else {
            query.a * (m2 + 0.5 * s2 * s2).exp()
        });
    }
    let spread = spread_var.sqrt();
    let term1 = (m1 + 0.5 * s1 * s1).exp() * normal_cdf((m1 - m2 + s1 * s1 - rho * s1 * s2) / spread);
    let term2 = (m2 + 0.5 * s2 * s2).exp() * normal_cdf((m2 - m1 + s2 * s2 - rho * s1 * s2) / spread);
    Ok(query.a * (term1 + term2))
}
