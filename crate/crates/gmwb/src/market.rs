//! Joint equity / short-rate dynamics with an exact one-step simulation
//! scheme.
//!
//! Under the risk-neutral measure the reference portfolio `S` and the short
//! rate `r` follow
//!
//! ```text
//! dS/S = r dt + sigma_s (rho dB1 + sqrt(1 - rho^2) dB2)
//! dr   = kappa (theta - r) dt + sigma_r dB1
//! ```
//!
//! Over a step of length `dt` the transition is driven by three jointly
//! Gaussian variables:
//!
//! * `R` — the shock to the rate endpoint: `r' = e^{-kappa dt} r + R`,
//! * `Y` — the stochastic part of the integrated rate:
//!   `int r dtau = r (1 - e^{-kappa dt}) / kappa + Y`,
//! * `E` — the asset's own log-return shock including the -sigma_s^2/2 drift.
//!
//! so that `s' = s exp(int r dtau + E)` and the per-step discount factor
//! `exp(-int r dtau)` is available exactly, with no discretization error.
//! All means, variances and pairwise correlations of `(R, Y, E)` are in
//! closed form; sampling goes through the Cholesky factor of the 3x3
//! correlation matrix.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::rng::{path_rng, StreamTag};
use crate::{invalid, Result};

/// Short-rate regime. Constant mode pins the rate path at `r0` exactly; it is
/// an explicit switch rather than a `sigma_r -> 0` limit so the correlation
/// formulas never hit 0/0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateMode {
    Constant,
    Vasicek,
}

impl std::fmt::Display for RateMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RateMode::Constant => write!(f, "constant"),
            RateMode::Vasicek => write!(f, "vasicek"),
        }
    }
}

/// Market dynamics parameters.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ModelParams {
    /// Initial asset level (conventionally normalized to 1.0).
    pub s0: f64,
    /// Initial short rate (per year).
    pub r0: f64,
    /// Mean-reversion speed (per year); required > 0 in Vasicek mode.
    pub kappa: f64,
    /// Long-run rate level (per year).
    pub theta: f64,
    /// Rate volatility (per year^{1/2}).
    pub sigma_r: f64,
    /// Asset volatility (per year^{1/2}).
    pub sigma_s: f64,
    /// Instantaneous correlation between the asset and rate drivers.
    pub rho: f64,
    pub rate_mode: RateMode,
}

impl ModelParams {
    /// Constant-rate market.
    pub fn constant_rate(s0: f64, r: f64, sigma_s: f64) -> Self {
        ModelParams {
            s0,
            r0: r,
            kappa: 0.0,
            theta: r,
            sigma_r: 0.0,
            sigma_s,
            rho: 0.0,
            rate_mode: RateMode::Constant,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.s0 > 0.0) {
            return Err(invalid("s0", format!("must be > 0, got {}", self.s0)));
        }
        if !(self.sigma_s >= 0.0) {
            return Err(invalid("sigma_s", format!("must be >= 0, got {}", self.sigma_s)));
        }
        if !(self.sigma_r >= 0.0) {
            return Err(invalid("sigma_r", format!("must be >= 0, got {}", self.sigma_r)));
        }
        if !(self.rho.abs() <= 1.0) {
            return Err(invalid("rho", format!("must lie in [-1, 1], got {}", self.rho)));
        }
        if self.rate_mode == RateMode::Vasicek && !(self.kappa > 0.0) {
            return Err(invalid("kappa", format!("must be > 0 in Vasicek mode, got {}", self.kappa)));
        }
        if !self.r0.is_finite() || !self.theta.is_finite() {
            return Err(invalid("r0/theta", "must be finite"));
        }
        Ok(())
    }
}

/// Closed-form moments of the one-step transition variables `(R, Y, E)` and
/// the Cholesky factor of their correlation matrix.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StepMoments {
    pub dt: f64,
    /// `e^{-kappa dt}` (1 in constant mode).
    pub decay: f64,
    /// `(1 - e^{-kappa dt}) / kappa` (dt in constant mode): the coefficient
    /// of the current rate in the integrated short rate over the step.
    pub duration: f64,
    pub mu_r: f64,
    pub var_r: f64,
    pub mu_y: f64,
    pub var_y: f64,
    pub mu_e: f64,
    pub var_e: f64,
    pub rho_ry: f64,
    pub rho_re: f64,
    pub rho_ye: f64,
    /// Lower-triangular Cholesky factor of the correlation matrix of
    /// `(N_R, N_Y, N_E)`, row-major.
    pub chol: [[f64; 3]; 3],
}

impl StepMoments {
    pub fn sd_r(&self) -> f64 {
        self.var_r.sqrt()
    }
    pub fn sd_y(&self) -> f64 {
        self.var_y.sqrt()
    }
    pub fn sd_e(&self) -> f64 {
        self.var_e.sqrt()
    }

    /// Correlation of the rate shock with the combined asset log-return shock
    /// `Y + E` (the bivariate reduction of the trivariate scheme).
    pub fn rho_rs(&self) -> f64 {
        let (sy, se) = (self.sd_y(), self.sd_e());
        let combined = (self.var_y + self.var_e + 2.0 * sy * se * self.rho_ye).sqrt();
        if combined == 0.0 {
            0.0
        } else {
            (sy * self.rho_ry + se * self.rho_re) / combined
        }
    }
}

/// Per-date market state along a path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketState {
    /// Asset level.
    pub s: f64,
    /// Short rate.
    pub r: f64,
    /// `exp(-int r dtau)` over the step that produced this state; 1 at time 0.
    /// May exceed 1 when the simulated rate goes negative (Vasicek permits
    /// this; no flooring is applied).
    pub step_discount: f64,
}

impl MarketState {
    pub fn initial(params: &ModelParams) -> Self {
        MarketState {
            s: params.s0,
            r: params.r0,
            step_discount: 1.0,
        }
    }
}

/// Lower-triangular Cholesky factorization for a 3x3 correlation matrix.
/// Semi-definite pivots (exact zero variance directions) are handled by
/// zeroing the corresponding row; genuinely negative pivots are an error.
fn cholesky3(c: &[[f64; 3]; 3]) -> Result<[[f64; 3]; 3]> {
    const TOL: f64 = 1e-12;
    let mut l = [[0.0f64; 3]; 3];
    for i in 0..3 {
        for j in 0..=i {
            let mut sum = c[i][j];
            #[allow(clippy::needless_range_loop)]
            for k in 0..j {
                sum -= l[i][k] * l[j][k];
            }
            if i == j {
                if sum < -TOL {
                    return Err(invalid(
                        "correlation",
                        format!("matrix is not positive semi-definite (pivot {} = {:.3e})", i, sum),
                    ));
                }
                l[i][j] = if sum > TOL { sum.sqrt() } else { 0.0 };
            } else if l[j][j] > 0.0 {
                l[i][j] = sum / l[j][j];
            } else {
                l[i][j] = 0.0;
            }
        }
    }
    Ok(l)
}

/// Closed-form one-step transition moments for step length `dt`.
///
/// Constant mode returns the degenerate moments: the rate transition is the
/// identity, `Y` vanishes, and all correlations are 0 by convention.
pub fn step_moments(params: &ModelParams, dt: f64) -> Result<StepMoments> {
    params.validate()?;
    if !(dt > 0.0) {
        return Err(invalid("dt", format!("must be > 0, got {dt}")));
    }

    let var_e = params.sigma_s * params.sigma_s * dt;
    let mu_e = -0.5 * var_e;

    if params.rate_mode == RateMode::Constant {
        return Ok(StepMoments {
            dt,
            decay: 1.0,
            duration: dt,
            mu_r: 0.0,
            var_r: 0.0,
            mu_y: 0.0,
            var_y: 0.0,
            mu_e,
            var_e,
            rho_ry: 0.0,
            rho_re: 0.0,
            rho_ye: 0.0,
            chol: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        });
    }

    let kappa = params.kappa;
    let decay = (-kappa * dt).exp();
    let duration = (1.0 - decay) / kappa;

    let mu_r = params.theta * (1.0 - decay);
    let var_r = params.sigma_r * params.sigma_r * (1.0 - decay * decay) / (2.0 * kappa);

    let mu_y = params.theta * (dt - duration);
    let var_y = params.sigma_r * params.sigma_r / (kappa * kappa)
        * (dt - 2.0 * duration + (1.0 - decay * decay) / (2.0 * kappa));

    let (sd_r, sd_y, sd_e) = (var_r.sqrt(), var_y.sqrt(), var_e.sqrt());

    let cov_ry = params.sigma_r * params.sigma_r * (1.0 - decay) * (1.0 - decay) / (2.0 * kappa * kappa);
    let cov_re = params.rho * params.sigma_r * params.sigma_s * duration;
    let cov_ye = params.rho * params.sigma_r * params.sigma_s * (dt - duration) / kappa;

    let corr = |cov: f64, a: f64, b: f64| if a * b > 0.0 { cov / (a * b) } else { 0.0 };
    let rho_ry = corr(cov_ry, sd_r, sd_y);
    let rho_re = corr(cov_re, sd_r, sd_e);
    let rho_ye = corr(cov_ye, sd_y, sd_e);

    let chol = cholesky3(&[
        [1.0, rho_ry, rho_re],
        [rho_ry, 1.0, rho_ye],
        [rho_re, rho_ye, 1.0],
    ])?;

    Ok(StepMoments {
        dt,
        decay,
        duration,
        mu_r,
        var_r,
        mu_y,
        var_y,
        mu_e,
        var_e,
        rho_ry,
        rho_re,
        rho_ye,
        chol,
    })
}

/// Advances one step given three iid standard normal draws.
///
/// The draws are mapped to the correlated triple `(N_R, N_Y, N_E)` through
/// the Cholesky factor; the new state carries the exact discount factor over
/// the step, `exp(-(duration * r + Y))`, by construction equal to the
/// exponent that drives the asset (up to the `E` shock).
pub fn simulate_step(state: &MarketState, m: &StepMoments, gaussians: [f64; 3]) -> MarketState {
    let l = &m.chol;
    let n_r = l[0][0] * gaussians[0];
    let n_y = l[1][0] * gaussians[0] + l[1][1] * gaussians[1];
    let n_e = l[2][0] * gaussians[0] + l[2][1] * gaussians[1] + l[2][2] * gaussians[2];

    let y = m.mu_y + m.sd_y() * n_y;
    let e = m.mu_e + m.sd_e() * n_e;
    let integrated_rate = m.duration * state.r + y;

    MarketState {
        s: state.s * (integrated_rate + e).exp(),
        r: m.decay * state.r + m.mu_r + m.sd_r() * n_r,
        step_discount: (-integrated_rate).exp(),
    }
}

/// Simulated market paths, path-major: entry `(m, n)` lives at
/// `m * (dates.len()) + n`.
#[derive(Debug, Clone)]
pub struct MarketPaths {
    pub dates: Vec<f64>,
    pub n_paths: usize,
    pub s: Vec<f64>,
    pub r: Vec<f64>,
    /// `step_discount[m * n_steps + n]` discounts from `dates[n]` to
    /// `dates[n + 1]`.
    pub step_discount: Vec<f64>,
}

impl MarketPaths {
    pub fn n_dates(&self) -> usize {
        self.dates.len()
    }

    pub fn n_steps(&self) -> usize {
        self.dates.len() - 1
    }

    pub fn state(&self, path: usize, date: usize) -> MarketState {
        let idx = path * self.n_dates() + date;
        MarketState {
            s: self.s[idx],
            r: self.r[idx],
            step_discount: if date == 0 {
                1.0
            } else {
                self.step_discount[path * self.n_steps() + date - 1]
            },
        }
    }
}

/// Simulates `n_paths` independent trajectories on the given time grid.
///
/// Deterministic for a fixed seed: path `m` draws from its own ChaCha stream,
/// so the output does not depend on thread count or scheduling order. Each
/// step consumes exactly three standard normal draws per path.
pub fn simulate_paths(
    params: &ModelParams,
    dates: &[f64],
    n_paths: usize,
    seed: u64,
) -> Result<MarketPaths> {
    params.validate()?;
    if n_paths == 0 {
        return Err(invalid("n_paths", "must be >= 1"));
    }
    if dates.len() < 2 {
        return Err(invalid("dates", "grid needs at least two points"));
    }
    if dates[0] != 0.0 {
        return Err(invalid("dates", "grid must start at 0"));
    }
    if dates.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("dates", "grid must be strictly increasing"));
    }

    let n_dates = dates.len();
    let n_steps = n_dates - 1;
    let moments: Vec<StepMoments> = dates
        .windows(2)
        .map(|w| step_moments(params, w[1] - w[0]))
        .collect::<Result<_>>()?;

    let market_seed = crate::rng::derive_seed(seed, StreamTag::Market, 0);

    let mut s = vec![0.0; n_paths * n_dates];
    let mut r = vec![0.0; n_paths * n_dates];
    let mut disc = vec![0.0; n_paths * n_steps];

    s.par_chunks_mut(n_dates)
        .zip(r.par_chunks_mut(n_dates))
        .zip(disc.par_chunks_mut(n_steps))
        .enumerate()
        .for_each(|(m, ((s_row, r_row), d_row))| {
            let mut rng = path_rng(market_seed, m as u64);
            let mut state = MarketState::initial(params);
            s_row[0] = state.s;
            r_row[0] = state.r;
            for (n, mom) in moments.iter().enumerate() {
                let g = [
                    rng.sample(StandardNormal),
                    rng.sample(StandardNormal),
                    rng.sample(StandardNormal),
                ];
                state = simulate_step(&state, mom, g);
                s_row[n + 1] = state.s;
                r_row[n + 1] = state.r;
                d_row[n] = state.step_discount;
            }
        });

    Ok(MarketPaths {
        dates: dates.to_vec(),
        n_paths,
        s,
        r,
        step_discount: disc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn table3_params() -> ModelParams {
        ModelParams {
            s0: 1.0,
            r0: 0.05,
            kappa: 0.0349,
            theta: 0.05,
            sigma_r: 0.02,
            sigma_s: 0.05,
            rho: 0.3,
            rate_mode: RateMode::Vasicek,
        }
    }

    fn mean_and_var(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, var)
    }

    // -----------------------------------------------------------------
    // Quadrature oracle for the integral definitions of R and Y.
    //
    // R's deterministic part is int_0^dt e^{-kappa(dt - tau)} kappa theta
    // dtau; its stochastic kernel is k_R(tau) = sigma_r e^{-kappa(dt-tau)}.
    // Y is the double integral int_0^dt e^{-kappa u} (int_0^u e^{kappa tau}
    // (...) dtau) du, whose variance is the double integral of
    // e^{-kappa(u+v)} Cov(I(u), I(v)) with
    // Cov(I(u), I(v)) = sigma_r^2 (e^{2 kappa min(u,v)} - 1) / (2 kappa).
    // -----------------------------------------------------------------

    /// 64-node Gauss-Legendre on [a, b] via Newton iteration on P_n.
    fn gauss_legendre(a: f64, b: f64) -> Vec<(f64, f64)> {
        let n = 64usize;
        let mut nodes = Vec::with_capacity(n);
        for i in 0..n {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0f64, 0.0f64);
                for j in 0..n {
                    let p2 = p1;
                    p1 = p0;
                    p0 = ((2.0 * j as f64 + 1.0) * x * p1 - j as f64 * p2) / (j as f64 + 1.0);
                }
                let dp = n as f64 * (x * p0 - p1) / (x * x - 1.0);
                let dx = p0 / dp;
                x -= dx;
                if dx.abs() < 1e-15 {
                    break;
                }
            }
            let (mut p0, mut p1) = (1.0f64, 0.0f64);
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j as f64 + 1.0) * x * p1 - j as f64 * p2) / (j as f64 + 1.0);
            }
            let dp = n as f64 * (x * p0 - p1) / (x * x - 1.0);
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes.push((0.5 * (b - a) * x + 0.5 * (a + b), 0.5 * (b - a) * w));
        }
        nodes
    }

    fn quad<F: Fn(f64) -> f64>(a: f64, b: f64, f: F) -> f64 {
        gauss_legendre(a, b).iter().map(|&(x, w)| w * f(x)).sum()
    }

    #[test]
    fn moments_match_quadrature_of_integral_definitions() {
        let p = table3_params();
        let dt = 1.0;
        let m = step_moments(&p, dt).unwrap();

        let kappa = p.kappa;
        let theta = p.theta;
        let sr = p.sigma_r;

        let mu_r_quad = quad(0.0, dt, |tau| (-kappa * (dt - tau)).exp() * kappa * theta);
        let var_r_quad = quad(0.0, dt, |tau| (sr * (-kappa * (dt - tau)).exp()).powi(2));
        // mu_Y: nested quadrature of the double-integral definition.
        let mu_y_quad = quad(0.0, dt, |u| {
            (-kappa * u).exp() * quad(0.0, u, |tau| (kappa * tau).exp() * kappa * theta)
        });
        // Var(Y): double integral of e^{-kappa(u+v)} Cov(I(u), I(v)) with
        // Cov(I(u), I(v)) = sigma_r^2 (e^{2 kappa min(u,v)} - 1) / (2 kappa).
        // Split at the diagonal so each panel is smooth: twice the u < v
        // triangle, where min(u, v) = u.
        let cov_i = |u: f64| sr * sr * ((2.0 * kappa * u).exp() - 1.0) / (2.0 * kappa);
        let var_y_quad = 2.0
            * quad(0.0, dt, |v| {
                (-kappa * v).exp() * quad(0.0, v, |u| (-kappa * u).exp() * cov_i(u))
            });

        assert!((m.mu_r - mu_r_quad).abs() / mu_r_quad.abs() < 1e-8, "mu_r {} vs {}", m.mu_r, mu_r_quad);
        assert!((m.var_r - var_r_quad).abs() / var_r_quad.abs() < 1e-8, "var_r {} vs {}", m.var_r, var_r_quad);
        assert!((m.mu_y - mu_y_quad).abs() / mu_y_quad.abs() < 1e-8, "mu_y {} vs {}", m.mu_y, mu_y_quad);
        assert!((m.var_y - var_y_quad).abs() / var_y_quad.abs() < 1e-8, "var_y {} vs {}", m.var_y, var_y_quad);
    }

    #[test]
    fn integrated_rate_mean_matches_quadrature() {
        // E[int_0^dt r dtau] = int (theta + (r0 - theta) e^{-kappa tau}) dtau
        // must equal duration * r0 + mu_y; this pins the coefficient of the
        // current rate in the integrated-rate decomposition.
        let p = table3_params();
        for &dt in &[0.25, 1.0, 3.0] {
            let m = step_moments(&p, dt).unwrap();
            let expected = quad(0.0, dt, |tau| p.theta + (p.r0 - p.theta) * (-p.kappa * tau).exp());
            let got = m.duration * p.r0 + m.mu_y;
            assert!(
                (got - expected).abs() / expected.abs() < 1e-12,
                "dt={dt}: {got} vs {expected}"
            );
        }
    }

    #[test]
    fn zero_rate_vol_degenerates() {
        let p = ModelParams {
            sigma_r: 0.0,
            ..table3_params()
        };
        let m = step_moments(&p, 2.0).unwrap();
        assert_eq!(m.var_r, 0.0);
        assert_eq!(m.var_y, 0.0);
        assert!((m.mu_r - p.theta * (1.0 - (-p.kappa * 2.0).exp())).abs() < 1e-15);
        let expected_mu_y = p.theta * (2.0 - (1.0 - (-p.kappa * 2.0).exp()) / p.kappa);
        assert!((m.mu_y - expected_mu_y).abs() < 1e-15);
        assert_eq!(m.rho_ry, 0.0);
        assert_eq!(m.rho_re, 0.0);
        assert_eq!(m.rho_ye, 0.0);
    }

    #[test]
    fn vanishing_step_moments_vanish() {
        let p = table3_params();
        for &dt in &[1e-3, 1e-6, 1e-9] {
            let m = step_moments(&p, dt).unwrap();
            for v in [m.mu_r, m.var_r, m.mu_y, m.var_y, m.mu_e, m.var_e] {
                assert!(v.abs() < 10.0 * dt, "dt={dt}: moment {v} does not vanish");
            }
        }
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn cholesky_reproduces_correlation_matrix() {
        let m = step_moments(&table3_params(), 1.0).unwrap();
        let c = [
            [1.0, m.rho_ry, m.rho_re],
            [m.rho_ry, 1.0, m.rho_ye],
            [m.rho_re, m.rho_ye, 1.0],
        ];
        let l = m.chol;
        for i in 0..3 {
            for j in 0..3 {
                let mut llt = 0.0;
                for k in 0..3 {
                    llt += l[i][k] * l[j][k];
                }
                assert!((llt - c[i][j]).abs() < 1e-12, "({i},{j}): {llt} vs {}", c[i][j]);
            }
        }
    }

    #[test]
    fn non_positive_dt_rejected() {
        assert!(step_moments(&table3_params(), 0.0).is_err());
        assert!(step_moments(&table3_params(), -1.0).is_err());
    }

    #[test]
    fn degenerate_rate_step_is_exact() {
        // sigma_r = 0 with r0 = theta: the rate never moves.
        let p = ModelParams {
            sigma_r: 0.0,
            ..table3_params()
        };
        let m = step_moments(&p, 1.0).unwrap();
        let state = MarketState::initial(&p);
        let mut rng = path_rng(1, 0);
        for _ in 0..100 {
            let g = [
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
            ];
            let next = simulate_step(&state, &m, g);
            assert!((next.r - p.r0).abs() < 1e-15);
        }
    }

    #[test]
    fn constant_rate_asset_ratio_is_martingale() {
        // E[s'/s] = e^{r dt} for the discounted-asset martingale property.
        let p = ModelParams::constant_rate(1.0, 0.05, 0.2);
        let m = step_moments(&p, 1.0).unwrap();
        let state = MarketState::initial(&p);
        let n = 1_000_000usize;
        let mut rng = path_rng(2, 0);
        let ratios: Vec<f64> = (0..n)
            .map(|_| {
                let g = [
                    rng.sample(StandardNormal),
                    rng.sample(StandardNormal),
                    rng.sample(StandardNormal),
                ];
                simulate_step(&state, &m, g).s
            })
            .collect();
        let (mean, var) = mean_and_var(&ratios);
        let se = (var / n as f64).sqrt();
        let expected = (0.05f64).exp();
        assert!(
            (mean - expected).abs() < 3.0 * se,
            "mean {mean} vs {expected} (se {se})"
        );
    }

    #[test]
    fn vasicek_rate_step_matches_closed_form_moments() {
        let p = table3_params();
        let m = step_moments(&p, 1.0).unwrap();
        let state = MarketState::initial(&p);
        let n = 500_000usize;
        let mut rng = path_rng(3, 0);
        let rates: Vec<f64> = (0..n)
            .map(|_| {
                let g = [
                    rng.sample(StandardNormal),
                    rng.sample(StandardNormal),
                    rng.sample(StandardNormal),
                ];
                simulate_step(&state, &m, g).r
            })
            .collect();
        let (mean, var) = mean_and_var(&rates);
        let se_mean = (var / n as f64).sqrt();
        let expected_mean = m.decay * p.r0 + m.mu_r;
        assert!((mean - expected_mean).abs() < 3.0 * se_mean);
        // SE of the sample variance of a Gaussian: var * sqrt(2/(n-1)).
        let se_var = var * (2.0 / (n as f64 - 1.0)).sqrt();
        assert!((var - m.var_r).abs() < 3.0 * se_var, "var {var} vs {}", m.var_r);
    }

    #[test]
    fn step_discount_matches_vasicek_bond_price() {
        // E[exp(-int r)] = exp(-duration r0 - mu_y + var_y / 2): the one-step
        // zero-coupon bond in closed form. An end-to-end check that the
        // simulated discount factor has the right distribution.
        let p = table3_params();
        let m = step_moments(&p, 1.0).unwrap();
        let state = MarketState::initial(&p);
        let n = 500_000usize;
        let mut rng = path_rng(4, 0);
        let discs: Vec<f64> = (0..n)
            .map(|_| {
                let g = [
                    rng.sample(StandardNormal),
                    rng.sample(StandardNormal),
                    rng.sample(StandardNormal),
                ];
                simulate_step(&state, &m, g).step_discount
            })
            .collect();
        let (mean, var) = mean_and_var(&discs);
        let se = (var / n as f64).sqrt();
        let bond = (-m.duration * p.r0 - m.mu_y + 0.5 * m.var_y).exp();
        assert!((mean - bond).abs() < 3.0 * se, "mean {mean} vs bond {bond} (se {se})");
    }

    #[test]
    fn recovered_shock_correlations_match_closed_forms() {
        let p = table3_params();
        let m = step_moments(&p, 1.0).unwrap();
        let n = 1_000_000usize;
        let mut rng = path_rng(5, 0);
        let mut sums = [0.0f64; 3]; // RY, RE, YE products
        let mut rs_terms: Vec<(f64, f64)> = Vec::with_capacity(n);
        for _ in 0..n {
            let g: [f64; 3] = [
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
            ];
            let l = &m.chol;
            let n_r = l[0][0] * g[0];
            let n_y = l[1][0] * g[0] + l[1][1] * g[1];
            let n_e = l[2][0] * g[0] + l[2][1] * g[1] + l[2][2] * g[2];
            sums[0] += n_r * n_y;
            sums[1] += n_r * n_e;
            sums[2] += n_y * n_e;
            let combined = m.sd_y() * n_y + m.sd_e() * n_e;
            rs_terms.push((n_r, combined));
        }
        let inv_n = 1.0 / n as f64;
        // SE of a correlation estimate is about (1 - rho^2) / sqrt(n).
        let se = 1.0 / (n as f64).sqrt();
        assert!((sums[0] * inv_n - m.rho_ry).abs() < 3.0 * se);
        assert!((sums[1] * inv_n - m.rho_re).abs() < 3.0 * se);
        assert!((sums[2] * inv_n - m.rho_ye).abs() < 3.0 * se);

        // Bivariate reduction: corr(N_R, combined asset shock) = rho_rs.
        let mean_r: f64 = rs_terms.iter().map(|t| t.0).sum::<f64>() * inv_n;
        let mean_c: f64 = rs_terms.iter().map(|t| t.1).sum::<f64>() * inv_n;
        let mut cov = 0.0;
        let mut var_r = 0.0;
        let mut var_c = 0.0;
        for (a, b) in &rs_terms {
            cov += (a - mean_r) * (b - mean_c);
            var_r += (a - mean_r).powi(2);
            var_c += (b - mean_c).powi(2);
        }
        let sample_rho_rs = cov / (var_r.sqrt() * var_c.sqrt());
        assert!(
            (sample_rho_rs - m.rho_rs()).abs() < 3.0 * se,
            "rho_rs sample {sample_rho_rs} vs {}",
            m.rho_rs()
        );
    }

    #[test]
    fn discount_and_asset_drift_share_the_integrated_rate() {
        // With sigma_s = 0 the asset factor is exp(+integrated rate) and the
        // discount is exp(-integrated rate); their product stays at 1 to
        // within a couple of ulps for every draw.
        let p = ModelParams {
            sigma_s: 0.0,
            ..table3_params()
        };
        let m = step_moments(&p, 1.0).unwrap();
        let state = MarketState::initial(&p);
        let mut rng = path_rng(6, 0);
        for _ in 0..1000 {
            let g = [
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
            ];
            let next = simulate_step(&state, &m, g);
            assert!((next.s / state.s * next.step_discount - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn paths_are_seed_deterministic() {
        let p = table3_params();
        let dates: Vec<f64> = (0..=10).map(|i| i as f64).collect();
        let a = simulate_paths(&p, &dates, 64, 99).unwrap();
        let b = simulate_paths(&p, &dates, 64, 99).unwrap();
        assert_eq!(a.s, b.s);
        assert_eq!(a.r, b.r);
        assert_eq!(a.step_discount, b.step_discount);
        let c = simulate_paths(&p, &dates, 64, 100).unwrap();
        assert_ne!(a.s, c.s);
    }

    #[test]
    fn constant_rate_cumulative_discount_is_exact() {
        let p = ModelParams::constant_rate(1.0, 0.05, 0.2);
        let dates: Vec<f64> = (0..=10).map(|i| i as f64).collect();
        let paths = simulate_paths(&p, &dates, 1000, 7).unwrap();
        for m in 0..paths.n_paths {
            let total: f64 = (0..paths.n_steps())
                .map(|n| paths.step_discount[m * paths.n_steps() + n])
                .product();
            assert!((total - (-0.5f64).exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn vasicek_long_horizon_rate_variance() {
        // Var[r(10)] = sigma_r^2 (1 - e^{-2 kappa 10}) / (2 kappa).
        let p = table3_params();
        let dates: Vec<f64> = (0..=10).map(|i| i as f64).collect();
        let n = 100_000usize;
        let paths = simulate_paths(&p, &dates, n, 11).unwrap();
        let finals: Vec<f64> = (0..n).map(|m| paths.r[m * paths.n_dates() + 10]).collect();
        let (mean, var) = mean_and_var(&finals);
        let expected_mean = p.theta + (p.r0 - p.theta) * (-p.kappa * 10.0).exp();
        let expected_var = p.sigma_r * p.sigma_r * (1.0 - (-2.0 * p.kappa * 10.0).exp()) / (2.0 * p.kappa);
        let se_mean = (var / n as f64).sqrt();
        let se_var = var * (2.0 / (n as f64 - 1.0)).sqrt();
        assert!((mean - expected_mean).abs() < 3.0 * se_mean);
        assert!((var - expected_var).abs() < 3.0 * se_var);
    }

    #[test]
    fn constant_and_zero_vol_vasicek_agree_pathwise() {
        // With sigma_r = 0 and theta = r0 the Vasicek engine must produce the
        // exact constant-mode asset paths for identical seeds.
        let pc = ModelParams::constant_rate(1.0, 0.05, 0.2);
        let pv = ModelParams {
            s0: 1.0,
            r0: 0.05,
            kappa: 0.0349,
            theta: 0.05,
            sigma_r: 0.0,
            sigma_s: 0.2,
            rho: 0.3,
            rate_mode: RateMode::Vasicek,
        };
        let dates: Vec<f64> = (0..=10).map(|i| i as f64).collect();
        let a = simulate_paths(&pc, &dates, 256, 13).unwrap();
        let b = simulate_paths(&pv, &dates, 256, 13).unwrap();
        for (x, y) in a.s.iter().zip(b.s.iter()) {
            assert!((x - y).abs() < 1e-12, "{x} vs {y}");
        }
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        let p = table3_params();
        assert!(simulate_paths(&p, &[0.0], 10, 0).is_err());
        assert!(simulate_paths(&p, &[0.0, 1.0], 0, 0).is_err());
        assert!(simulate_paths(&p, &[0.0, 1.0, 0.5], 10, 0).is_err());
        assert!(simulate_paths(&p, &[0.5, 1.0], 10, 0).is_err());
        let bad = ModelParams { rho: 1.5, ..p };
        assert!(bad.validate().is_err());
        let bad = ModelParams { kappa: 0.0, ..p };
        assert!(bad.validate().is_err());
    }
}
