//! Quadrature dynamic-programming pricer for the constant-rate contract.
//!
//! Between withdrawal dates the asset ratio is exactly lognormal, so one
//! Gauss-Hermite quadrature per step evaluates the conditional expectation
//! with no sub-stepping. The value function lives on a wealth x guarantee
//! grid: log-spaced wealth nodes (plus the absorbing zero node) with cubic
//! interpolation in log-wealth, uniform guarantee nodes with linear
//! interpolation. Deliberately coarse next to a production finite-difference
//! mesh; it exists to cross-check the Monte Carlo solvers, not to replace
//! them.

use crate::contract::{cashflow_with, ContractParams, ContractState};
use crate::market::{ModelParams, RateMode};
use crate::{invalid, Result};

/// Discretization of the DP state space.
#[derive(Debug, Clone, Copy)]
pub struct DpGrid {
    /// Log-spaced positive wealth nodes (a zero node is always added).
    pub wealth_nodes: usize,
    /// Uniform guarantee nodes on `[0, w0]`.
    pub guarantee_nodes: usize,
    /// Gauss-Hermite points per step.
    pub quad_points: usize,
    /// Uniform withdrawal candidates per node (exact points are added).
    pub control_points: usize,
}

impl Default for DpGrid {
    fn default() -> Self {
        DpGrid {
            wealth_nodes: 200,
            guarantee_nodes: 50,
            quad_points: 16,
            control_points: 201,
        }
    }
}

impl DpGrid {
    /// Doubles every dimension; used by the self-convergence check.
    pub fn refined(&self, factor: usize) -> DpGrid {
        DpGrid {
            wealth_nodes: self.wealth_nodes * factor,
            guarantee_nodes: self.guarantee_nodes * factor,
            quad_points: self.quad_points * factor,
            control_points: self.control_points * factor,
        }
    }
}

/// Gauss-Hermite nodes and weights for `integral f(x) e^{-x^2} dx`
/// (physicists' convention), by Newton iteration on the recurrence.
pub(crate) fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    let mut z = 0.0f64;
    for i in 0..m {
        // Initial guesses from standard asymptotics.
        z = match i {
            0 => (2.0 * n as f64 + 1.0).sqrt() - 1.85575 * (2.0 * n as f64 + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * (n as f64).powf(0.426) / z,
            2 => 1.86 * z - 0.86 * nodes[0],
            3 => 1.91 * z - 0.91 * nodes[1],
            _ => 2.0 * z - nodes[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            // H recurrence in the orthonormal scaling.
            let mut p1 = std::f64::consts::PI.powf(-0.25);
            let mut p2 = 0.0f64;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = z * (2.0 / (j as f64 + 1.0)).sqrt() * p2
                    - (j as f64 / (j as f64 + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * n as f64).sqrt() * p2;
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = z;
        nodes[n - 1 - i] = -z;
        weights[i] = 2.0 / (pp * pp);
        weights[n - 1 - i] = weights[i];
    }
    (nodes, weights)
}

/// Cubic Lagrange interpolation on a uniform grid, clamped at the ends.
#[inline]
fn cubic_uniform(values: &[f64], x0: f64, dx: f64, x: f64) -> f64 {
    let n = values.len();
    let t = (x - x0) / dx;
    let i = (t.floor() as isize).clamp(0, n as isize - 2) as usize;
    let lo = i.saturating_sub(1).min(n - 4);
    let s = t - lo as f64;
    // Lagrange weights for nodes at offsets 0, 1, 2, 3.
    let (s0, s1, s2, s3) = (s, s - 1.0, s - 2.0, s - 3.0);
    let w0 = -s1 * s2 * s3 / 6.0;
    let w1 = s0 * s2 * s3 / 2.0;
    let w2 = -s0 * s1 * s3 / 2.0;
    let w3 = s0 * s1 * s2 / 6.0;
    w0 * values[lo] + w1 * values[lo + 1] + w2 * values[lo + 2] + w3 * values[lo + 3]
}

struct WealthAxis {
    /// Positive node values; `log_nodes[i] = ln(nodes[i])`, uniform.
    nodes: Vec<f64>,
    log_x0: f64,
    log_dx: f64,
}

impl WealthAxis {
    fn new(w0: f64, r: f64, sigma: f64, horizon: f64, count: usize) -> Self {
        // Covers +-4 sigma of terminal log-wealth plus the fee-free drift.
        let w_max = w0 * ((r + 4.0 * sigma) * horizon).exp();
        let w_min = (w0 * 1e-4).min(0.01);
        let log_x0 = w_min.ln();
        let log_dx = (w_max.ln() - log_x0) / (count - 1) as f64;
        let nodes = (0..count).map(|i| (log_x0 + i as f64 * log_dx).exp()).collect();
        WealthAxis {
            nodes,
            log_x0,
            log_dx,
        }
    }
}

/// Value surface at one date: `values[j]` is the wealth-profile for
/// guarantee node `j`, with entry 0 the absorbed `w = 0` value and entries
/// `1..` the positive wealth nodes.
struct Surface {
    values: Vec<Vec<f64>>,
}

impl Surface {
    /// Interpolates at `(w, a)`: cubic in log-wealth, linear in guarantee,
    /// linear between 0 and the first positive node, linear extrapolation
    /// beyond the last node.
    fn eval(&self, axis: &WealthAxis, a_dx: f64, w: f64, a: f64) -> f64 {
        let j = ((a / a_dx).floor() as isize).clamp(0, self.values.len() as isize - 2) as usize;
        let ta = ((a - j as f64 * a_dx) / a_dx).clamp(0.0, 1.0);
        let lo = self.eval_w(axis, &self.values[j], w);
        let hi = self.eval_w(axis, &self.values[j + 1], w);
        lo + ta * (hi - lo)
    }

    fn eval_w(&self, axis: &WealthAxis, profile: &[f64], w: f64) -> f64 {
        let first = axis.nodes[0];
        let last = *axis.nodes.last().unwrap();
        if w <= 0.0 {
            profile[0]
        } else if w < first {
            profile[0] + (profile[1] - profile[0]) * w / first
        } else if w > last {
            // Asymptotically the value is linear in wealth.
            profile[profile.len() - 1] * w / last
        } else {
            cubic_uniform(&profile[1..], axis.log_x0, axis.log_dx, w.ln())
        }
    }
}

/// Solves the Bellman recursion on the `(W, A)` grid and returns
/// `V_0(w0, w0)`. Constant-rate models only.
pub fn dp_quadrature_price(model: &ModelParams, contract: &ContractParams, grid: &DpGrid) -> Result<f64> {
    model.validate()?;
    contract.validate()?;
    if model.rate_mode != RateMode::Constant {
        return Err(invalid("rate_mode", "the quadrature DP oracle covers the constant-rate case only"));
    }
    if grid.wealth_nodes < 8 || grid.guarantee_nodes < 3 || grid.quad_points < 2 || grid.control_points < 2 {
        return Err(invalid("grid", "too coarse to bracket the state space"));
    }
    let n = contract.n_dates();
    let dates = contract.grid();
    let (r, sigma, alpha, w0) = (model.r0, model.sigma_s, contract.fee, contract.w0);

    let axis = WealthAxis::new(w0, r, sigma, contract.maturity_years, grid.wealth_nodes);
    let a_count = grid.guarantee_nodes;
    let a_dx = w0 / (a_count - 1) as f64;
    let a_nodes: Vec<f64> = (0..a_count).map(|j| j as f64 * a_dx).collect();

    let (gh_x, gh_w) = gauss_hermite(grid.quad_points);
    let sqrt_pi = std::f64::consts::PI.sqrt();

    let g_final = contract.guaranteed_withdrawal(n)?;

    // Terminal surface.
    let mut value = Surface {
        values: a_nodes
            .iter()
            .map(|&a| {
                let mut profile = Vec::with_capacity(axis.nodes.len() + 1);
                profile.push(contract.terminal_payoff(&ContractState { w: 0.0, a }));
                profile.extend(
                    axis.nodes
                        .iter()
                        .map(|&w| contract.terminal_payoff(&ContractState { w, a })),
                );
                profile
            })
            .collect(),
    };
    let _ = g_final;

    use rayon::prelude::*;

    for date in (1..n).rev() {
        let dt = dates[date + 1] - dates[date];
        let df = (-r * dt).exp();
        // Lognormal growth factors at the quadrature nodes, fee included.
        let growth: Vec<(f64, f64)> = gh_x
            .iter()
            .zip(&gh_w)
            .map(|(&x, &w)| {
                (
                    ((r - alpha - 0.5 * sigma * sigma) * dt + sigma * (2.0 * dt).sqrt() * x).exp(),
                    w / sqrt_pi,
                )
            })
            .collect();

        // Continuation on the post-decision grid.
        let continuation = Surface {
            values: a_nodes
                .par_iter()
                .map(|&a| {
                    let mut profile = Vec::with_capacity(axis.nodes.len() + 1);
                    profile.push(df * value.eval(&axis, a_dx, 0.0, a));
                    for &w in &axis.nodes {
                        let mut acc = 0.0;
                        for &(g, wt) in &growth {
                            acc += wt * value.eval(&axis, a_dx, w * g, a);
                        }
                        profile.push(df * acc);
                    }
                    profile
                })
                .collect(),
        };

        let g_n = contract.guaranteed_withdrawal(date)?;
        let penalty = contract.penalty;

        value = Surface {
            values: a_nodes
                .par_iter()
                .map(|&a| {
                    let mut profile = Vec::with_capacity(axis.nodes.len() + 1);
                    for node in 0..=axis.nodes.len() {
                        let w = if node == 0 { 0.0 } else { axis.nodes[node - 1] };
                        let mut best = f64::NEG_INFINITY;
                        let steps = grid.control_points - 1;
                        for i in 0..grid.control_points {
                            let pi = a * i as f64 / steps as f64;
                            let v = cashflow_with(g_n, penalty, pi)
                                + continuation.eval(&axis, a_dx, (w - pi).max(0.0), a - pi);
                            if v > best {
                                best = v;
                            }
                        }
                        if g_n < a {
                            let v = cashflow_with(g_n, penalty, g_n)
                                + continuation.eval(&axis, a_dx, (w - g_n).max(0.0), a - g_n);
                            if v > best {
                                best = v;
                            }
                        }
                        profile.push(best);
                    }
                    profile
                })
                .collect(),
        };
    }

    // No decision at t_0: discount the expected date-1 value.
    let dt = dates[1];
    let df = (-r * dt).exp();
    let mut acc = 0.0;
    for (&x, &wt) in gh_x.iter().zip(&gh_w) {
        let g = ((r - alpha - 0.5 * sigma * sigma) * dt + sigma * (2.0 * dt).sqrt() * x).exp();
        acc += wt / sqrt_pi * value.eval(&axis, a_dx, w0 * g, w0);
    }
    Ok(df * acc)
}
