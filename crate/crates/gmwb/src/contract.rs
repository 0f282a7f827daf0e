//! GMWB contract mechanics: account evolution, penalized cashflows and the
//! terminal payoff.
//!
//! Two accounts track the contract. The wealth account `W` is the premium
//! invested in the reference portfolio, reduced by withdrawals and the
//! continuously charged fee, and absorbed at zero. The guarantee account `A`
//! starts at the premium and is reduced one-for-one by withdrawals; it is
//! what the policyholder may still take out regardless of fund performance.
//! A withdrawal above the contractual amount `G_n` is penalized on the
//! excess only.
//!
//! Naming note: the per-step discount factor lives in [`crate::market`] as
//! `step_discount`, and the surrender penalty here is `penalty`; the two
//! concepts are distinct even though the literature tends to reuse one
//! symbol for both.

use serde::{Deserialize, Serialize};

use crate::{invalid, Result};

/// GMWB contract terms.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContractParams {
    /// Upfront premium, also the initial value of both accounts.
    pub w0: f64,
    /// Contract maturity in years.
    pub maturity_years: f64,
    /// Withdrawal dates `t_1 < ... < t_N` with `t_N = T`. Decisions are made
    /// at `t_1 ... t_{N-1}`; the final date pays the terminal payoff only.
    pub dates: Vec<f64>,
    /// Penalty coefficient applied to the portion of a withdrawal above the
    /// contractual amount, in [0, 1].
    pub penalty: f64,
    /// Annual guarantee fee, charged continuously against the wealth account.
    pub fee: f64,
}

impl ContractParams {
    /// A contract with equally spaced withdrawal dates and the canonical
    /// annual contractual rate `g = 1/T`.
    pub fn with_uniform_dates(w0: f64, maturity_years: f64, dates_per_year: usize, penalty: f64, fee: f64) -> Self {
        let n = (maturity_years * dates_per_year as f64).round() as usize;
        let dates = (1..=n)
            .map(|i| i as f64 * maturity_years / n as f64)
            .collect();
        ContractParams {
            w0,
            maturity_years,
            dates,
            penalty,
            fee,
        }
    }

    /// Number of withdrawal dates `N`.
    pub fn n_dates(&self) -> usize {
        self.dates.len()
    }

    /// Number of decision dates (`t_1 ... t_{N-1}`).
    pub fn n_decision_dates(&self) -> usize {
        self.dates.len().saturating_sub(1)
    }

    /// Annual contractual rate `g = 1/T`.
    pub fn contractual_rate(&self) -> f64 {
        1.0 / self.maturity_years
    }

    /// The full time grid including `t_0 = 0`.
    pub fn grid(&self) -> Vec<f64> {
        let mut grid = Vec::with_capacity(self.dates.len() + 1);
        grid.push(0.0);
        grid.extend_from_slice(&self.dates);
        grid
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.w0 > 0.0) {
            return Err(invalid("w0", format!("must be > 0, got {}", self.w0)));
        }
        if !(self.maturity_years > 0.0) {
            return Err(invalid("maturity_years", "must be > 0"));
        }
        if self.dates.is_empty() {
            return Err(invalid("dates", "at least one withdrawal date required"));
        }
        if self.dates[0] <= 0.0 || self.dates.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("dates", "must be strictly increasing and positive"));
        }
        let last = *self.dates.last().unwrap();
        if (last - self.maturity_years).abs() > 1e-12 {
            return Err(invalid(
                "dates",
                format!("last date {last} must equal maturity {}", self.maturity_years),
            ));
        }
        if !(0.0..=1.0).contains(&self.penalty) {
            return Err(invalid("penalty", format!("must lie in [0, 1], got {}", self.penalty)));
        }
        if !(self.fee >= 0.0) {
            return Err(invalid("fee", format!("must be >= 0, got {}", self.fee)));
        }
        Ok(())
    }

    /// Contractual (penalty-free) withdrawal at date `n` (1-based):
    /// `G_n = w0 (t_n - t_{n-1}) / T`. The `G_n` telescope back to the
    /// premium over the life of the contract.
    pub fn guaranteed_withdrawal(&self, n: usize) -> Result<f64> {
        if n == 0 || n > self.dates.len() {
            return Err(invalid("n", format!("date index {n} out of 1..={}", self.dates.len())));
        }
        let prev = if n == 1 { 0.0 } else { self.dates[n - 2] };
        Ok(self.w0 * (self.dates[n - 1] - prev) / self.maturity_years)
    }

    /// Cashflow received for withdrawing `pi` at date `n`: the withdrawal
    /// itself up to `G_n`, the excess shaved by the penalty.
    pub fn cashflow(&self, n: usize, pi: f64) -> Result<f64> {
        if !(pi >= 0.0) {
            return Err(invalid("pi", format!("withdrawal must be >= 0, got {pi}")));
        }
        let g = self.guaranteed_withdrawal(n)?;
        Ok(cashflow_with(g, self.penalty, pi))
    }

    /// Terminal payoff `max(W, C_N(A))`: the larger of the remaining fund
    /// and the remaining guarantee net of the penalty on its excess.
    pub fn terminal_payoff(&self, state: &ContractState) -> f64 {
        let g_final = self
            .guaranteed_withdrawal(self.dates.len())
            .expect("contract has at least one date");
        state.w.max(cashflow_with(g_final, self.penalty, state.a))
    }
}

/// Penalized cashflow for contractual amount `g` and penalty `penalty`.
#[inline]
pub(crate) fn cashflow_with(g: f64, penalty: f64, pi: f64) -> f64 {
    if pi <= g {
        pi
    } else {
        g + (1.0 - penalty) * (pi - g)
    }
}

/// Account pair at a date.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContractState {
    /// Wealth account; floored at zero and absorbed there.
    pub w: f64,
    /// Guarantee account, in `[0, w0]`.
    pub a: f64,
}

impl ContractState {
    pub fn initial(params: &ContractParams) -> Self {
        ContractState {
            w: params.w0,
            a: params.w0,
        }
    }
}

/// Deterministic transition to the post-decision state: wealth drops by the
/// withdrawal (floored at zero), the guarantee drops one-for-one. This is the
/// state the market shock acts on, and the natural regression covariate pair.
pub fn apply_withdrawal(state: &ContractState, pi: f64) -> Result<ContractState> {
    if !(pi >= 0.0) {
        return Err(invalid("pi", format!("withdrawal must be >= 0, got {pi}")));
    }
    if pi > state.a + 1e-12 {
        return Err(invalid(
            "pi",
            format!("withdrawal {pi} exceeds guarantee account {}", state.a),
        ));
    }
    Ok(post_decision(state, pi))
}

#[inline]
pub(crate) fn post_decision(state: &ContractState, pi: f64) -> ContractState {
    ContractState {
        w: (state.w - pi).max(0.0),
        a: (state.a - pi).max(0.0),
    }
}

/// Grows the post-decision wealth over one step: the asset ratio applies
/// multiplicatively and the fee drains `e^{-fee dt}`. The guarantee account
/// is not market-linked.
pub fn grow_wealth(post: &ContractState, asset_ratio: f64, fee: f64, dt: f64) -> Result<ContractState> {
    if !(asset_ratio > 0.0) {
        return Err(invalid("asset_ratio", format!("must be > 0, got {asset_ratio}")));
    }
    if !(dt > 0.0) {
        return Err(invalid("dt", format!("must be > 0, got {dt}")));
    }
    Ok(ContractState {
        w: post.w * asset_ratio * (-fee * dt).exp(),
        a: post.a,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn annual_contract() -> ContractParams {
        ContractParams::with_uniform_dates(1.0, 10.0, 1, 0.1, 0.0135)
    }

    #[test]
    fn guaranteed_withdrawals_telescope_to_premium() {
        let c = annual_contract();
        let mut total = 0.0;
        for n in 1..=c.n_dates() {
            let g = c.guaranteed_withdrawal(n).unwrap();
            assert!((g - 0.1).abs() < 1e-15);
            total += g;
        }
        assert!((total - c.w0).abs() < 1e-12);
        assert!(c.guaranteed_withdrawal(0).is_err());
        assert!(c.guaranteed_withdrawal(11).is_err());
    }

    #[test]
    fn single_date_contract_guarantees_full_premium() {
        let c = ContractParams::with_uniform_dates(1.0, 10.0, 1, 0.1, 0.0);
        let single = ContractParams {
            dates: vec![10.0],
            ..c
        };
        assert!((single.guaranteed_withdrawal(1).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn semiannual_dates_halve_the_contractual_amount() {
        let c = ContractParams::with_uniform_dates(1.0, 10.0, 2, 0.1, 0.0);
        assert_eq!(c.n_dates(), 20);
        for n in 1..=20 {
            assert!((c.guaranteed_withdrawal(n).unwrap() - 0.05).abs() < 1e-15);
        }
    }

    #[test]
    fn cashflow_cases() {
        let c = annual_contract();
        assert!((c.cashflow(1, 0.05).unwrap() - 0.05).abs() < 1e-15);
        assert!((c.cashflow(1, 0.15).unwrap() - 0.145).abs() < 1e-15);
        assert!((c.cashflow(1, 0.1).unwrap() - 0.1).abs() < 1e-15);
        assert!(c.cashflow(1, -0.01).is_err());
    }

    #[test]
    fn cashflow_is_dominated_and_monotone() {
        let c = annual_contract();
        let mut prev = -1.0;
        for i in 0..=100 {
            let pi = i as f64 * 0.01;
            let cf = c.cashflow(3, pi).unwrap();
            assert!(cf <= pi + 1e-15);
            if pi <= 0.1 {
                assert!((cf - pi).abs() < 1e-15);
            } else {
                assert!(cf < pi);
            }
            assert!(cf >= prev);
            prev = cf;
        }
    }

    #[test]
    fn apply_withdrawal_cases() {
        let s = ContractState { w: 0.8, a: 0.5 };
        let post = apply_withdrawal(&s, 0.5).unwrap();
        assert!((post.w - 0.3).abs() < 1e-15);
        assert_eq!(post.a, 0.0);

        let s = ContractState { w: 0.05, a: 0.5 };
        let post = apply_withdrawal(&s, 0.1).unwrap();
        assert_eq!(post.w, 0.0);
        assert!((post.a - 0.4).abs() < 1e-15);

        let s = ContractState { w: 0.7, a: 0.3 };
        assert_eq!(apply_withdrawal(&s, 0.0).unwrap(), s);

        assert!(apply_withdrawal(&s, 0.4).is_err());
        assert!(apply_withdrawal(&s, -0.1).is_err());
    }

    #[test]
    fn wealth_absorbs_at_zero() {
        let post = ContractState { w: 0.0, a: 0.4 };
        for ratio in [0.5, 1.0, 2.0, 10.0] {
            let next = grow_wealth(&post, ratio, 0.0135, 1.0).unwrap();
            assert_eq!(next.w, 0.0);
            assert_eq!(next.a, 0.4);
        }
    }

    #[test]
    fn fee_offset_and_direct_growth() {
        let post = ContractState { w: 0.6, a: 0.4 };
        let alpha = 0.0135;
        let next = grow_wealth(&post, (alpha * 1.0f64).exp(), alpha, 1.0).unwrap();
        assert!((next.w - 0.6).abs() < 1e-15);

        let post = ContractState { w: 1.0, a: 0.4 };
        let next = grow_wealth(&post, 1.1, alpha, 1.0).unwrap();
        assert!((next.w - 1.1 * (-alpha_f()).exp()).abs() < 1e-15);

        fn alpha_f() -> f64 {
            0.0135
        }
    }

    #[test]
    fn terminal_payoff_cases() {
        let c = annual_contract();
        let v = c.terminal_payoff(&ContractState { w: 1.2, a: 0.5 });
        assert!((v - 1.2).abs() < 1e-15); // C_N(0.5) = 0.46 < 1.2

        let v = c.terminal_payoff(&ContractState { w: 0.0, a: 0.1 });
        assert!((v - 0.1).abs() < 1e-15); // exactly contractual, no penalty

        let v = c.terminal_payoff(&ContractState { w: 0.0, a: 0.0 });
        assert_eq!(v, 0.0);
    }

    #[test]
    fn terminal_payoff_dominates_both_arguments() {
        let c = annual_contract();
        for &(w, a) in &[(0.0, 0.0), (0.3, 0.7), (1.5, 0.2), (0.05, 1.0)] {
            let s = ContractState { w, a };
            let v = c.terminal_payoff(&s);
            assert!(v >= w);
            assert!(v >= c.cashflow(c.n_dates(), a).unwrap() - 1e-15);
        }
    }

    #[test]
    fn telescoping_guarantee_along_admissible_controls() {
        // Withdraw arbitrary admissible amounts; the guarantee account stays
        // in [0, w0] and ends at w0 minus the total withdrawn.
        let c = annual_contract();
        let mut state = ContractState::initial(&c);
        let mut total = 0.0;
        let plan = [0.0, 0.2, 0.05, 0.0, 0.3, 0.1, 0.0, 0.05, 0.0];
        for &pi in &plan {
            state = apply_withdrawal(&state, pi).unwrap();
            state = grow_wealth(&state, 1.02, c.fee, 1.0).unwrap();
            total += pi;
            assert!(state.a >= -1e-15 && state.a <= c.w0 + 1e-15);
        }
        assert!((state.a - (c.w0 - total)).abs() < 1e-12);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            // Cashflow dominance: C_n(pi) <= pi with equality iff pi <= G.
            #[test]
            fn cashflow_dominated_by_withdrawal(
                g in 0.01f64..1.0,
                penalty in 0.0f64..=1.0,
                pi in 0.0f64..2.0,
            ) {
                let cf = cashflow_with(g, penalty, pi);
                prop_assert!(cf <= pi + 1e-15);
                if pi <= g {
                    prop_assert!((cf - pi).abs() < 1e-15);
                } else if penalty > 0.0 {
                    prop_assert!(cf < pi);
                }
            }

            // Monotone and continuous in pi: nearby withdrawals yield
            // nearby cashflows, in order.
            #[test]
            fn cashflow_monotone_and_continuous(
                g in 0.01f64..1.0,
                penalty in 0.0f64..=1.0,
                pi in 0.0f64..2.0,
                eps in 1e-9f64..1e-3,
            ) {
                let lo = cashflow_with(g, penalty, pi);
                let hi = cashflow_with(g, penalty, pi + eps);
                prop_assert!(hi >= lo - 1e-15);
                prop_assert!(hi - lo <= eps + 1e-15);
            }

            // Telescoping: admissible withdrawals drain the guarantee
            // one-for-one and can never overdraw it.
            #[test]
            fn guarantee_telescopes_under_admissible_controls(
                fractions in proptest::collection::vec(0.0f64..=1.0, 9),
                ratio in 0.5f64..1.5,
            ) {
                let c = ContractParams::with_uniform_dates(1.0, 10.0, 1, 0.1, 0.0135);
                let mut state = ContractState::initial(&c);
                let mut total = 0.0;
                for f in fractions {
                    let pi = f * state.a;
                    state = apply_withdrawal(&state, pi).unwrap();
                    state = grow_wealth(&state, ratio, c.fee, 1.0).unwrap();
                    total += pi;
                    prop_assert!(state.a >= -1e-12 && state.a <= c.w0 + 1e-12);
                    prop_assert!(state.w >= 0.0);
                }
                prop_assert!((state.a - (c.w0 - total)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn validation_rejects_malformed_contracts() {
        let mut c = annual_contract();
        assert!(c.validate().is_ok());
        c.penalty = 1.5;
        assert!(c.validate().is_err());

        let mut c = annual_contract();
        c.dates[9] = 9.5; // last date no longer equals maturity
        assert!(c.validate().is_err());

        let mut c = annual_contract();
        c.w0 = 0.0;
        assert!(c.validate().is_err());
    }
}
