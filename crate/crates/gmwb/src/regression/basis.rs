//! Polynomial basis sets over the contract covariates.
//!
//! Regress-now bases span `(W, A, pi)` or `(W, A, pi, r)`; regress-later
//! bases span the end-of-step covariates `(W, A)` or `(W, A, r)` and carry
//! no control power. The two production sets:
//!
//! * constant rate: all monomials `W^jw A^ja pi^jp` with total degree <= 3,
//!   minus `W^2 pi`, `A^2 pi` and `pi^3` (17 terms) — the pruned terms buy
//!   no accuracy and destabilize the control optimization;
//! * stochastic rate: all monomials `W^jw A^ja pi^jp r^jr` with total
//!   degree <= 2 (15 terms including the constant).
//!
//! The extended stochastic sets augment the constant-rate set with rate
//! terms of total degree <= 2, respectively <= 3; they exist to demonstrate
//! that enlarging the basis does not move prices beyond run-to-run noise.

use serde::{Deserialize, Serialize};

/// One monomial `W^w A^a pi^pi r^r`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasisTerm {
    pub w: u8,
    pub a: u8,
    pub pi: u8,
    pub r: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisKind {
    /// 17-term cubic in `(W, A, pi)` with the three pruned terms removed.
    ConstantRateCubic,
    /// 15-term complete quadratic in `(W, A, pi, r)`.
    StochasticQuadratic,
    /// Constant-rate cubic plus the quadratic rate terms `r, rW, rA, rpi, r^2`.
    ExtendedRateQuadratic,
    /// `ExtendedRateQuadratic` plus every cubic monomial containing `r`.
    ExtendedRateCubic,
    /// Regress-later basis: complete cubic in `(W, A)`.
    LaterConstantCubic,
    /// Regress-later basis: complete cubic in `(W, A, r)`.
    LaterStochasticCubic,
}

/// A concrete ordered term list for one [`BasisKind`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasisSpec {
    pub kind: BasisKind,
    pub terms: Vec<BasisTerm>,
}

impl BasisSpec {
    pub fn new(kind: BasisKind) -> Self {
        let mut terms = Vec::new();
        let push_all = |terms: &mut Vec<BasisTerm>, max_deg: u8, use_pi: bool, use_r: bool| {
            for w in 0..=max_deg {
                for a in 0..=max_deg - w {
                    for pi in 0..=(max_deg - w - a) * use_pi as u8 {
                        for r in 0..=(max_deg - w - a - pi) * use_r as u8 {
                            terms.push(BasisTerm { w, a, pi, r });
                        }
                    }
                }
            }
        };
        match kind {
            BasisKind::ConstantRateCubic => {
                push_all(&mut terms, 3, true, false);
                terms.retain(|t| {
                    !matches!(
                        (t.w, t.a, t.pi),
                        (2, 0, 1) | (0, 2, 1) | (0, 0, 3)
                    )
                });
            }
            BasisKind::StochasticQuadratic => push_all(&mut terms, 2, true, true),
            BasisKind::ExtendedRateQuadratic => {
                push_all(&mut terms, 3, true, false);
                terms.retain(|t| !matches!((t.w, t.a, t.pi), (2, 0, 1) | (0, 2, 1) | (0, 0, 3)));
                // r-terms of total degree <= 2 with at least one power of r.
                terms.push(BasisTerm { w: 0, a: 0, pi: 0, r: 1 });
                terms.push(BasisTerm { w: 1, a: 0, pi: 0, r: 1 });
                terms.push(BasisTerm { w: 0, a: 1, pi: 0, r: 1 });
                terms.push(BasisTerm { w: 0, a: 0, pi: 1, r: 1 });
                terms.push(BasisTerm { w: 0, a: 0, pi: 0, r: 2 });
            }
            BasisKind::ExtendedRateCubic => {
                let base = BasisSpec::new(BasisKind::ExtendedRateQuadratic);
                terms = base.terms;
                // Every cubic monomial containing r.
                for w in 0..=3u8 {
                    for a in 0..=3 - w {
                        for pi in 0..=3 - w - a {
                            let r = 3 - w - a - pi;
                            if r >= 1 {
                                terms.push(BasisTerm { w, a, pi, r });
                            }
                        }
                    }
                }
            }
            BasisKind::LaterConstantCubic => push_all(&mut terms, 3, false, false),
            BasisKind::LaterStochasticCubic => push_all(&mut terms, 3, false, true),
        }
        BasisSpec { kind, terms }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn uses_rate(&self) -> bool {
        self.terms.iter().any(|t| t.r > 0)
    }

    pub fn max_pi_power(&self) -> u8 {
        self.terms.iter().map(|t| t.pi).max().unwrap_or(0)
    }

    /// Evaluates every term at `(w, a, pi, r)` into `out`.
    pub fn eval_into(&self, out: &mut [f64], w: f64, a: f64, pi: f64, r: f64) {
        debug_assert_eq!(out.len(), self.terms.len());
        let wp = powers(w);
        let ap = powers(a);
        let pp = powers(pi);
        let rp = powers(r);
        for (slot, t) in out.iter_mut().zip(&self.terms) {
            *slot = wp[t.w as usize] * ap[t.a as usize] * pp[t.pi as usize] * rp[t.r as usize];
        }
    }

    /// Collapses `coef . basis(w, a, pi, r)` into a polynomial in `pi`
    /// (coefficients in increasing power). This is the fast path of the
    /// control grid search.
    pub fn collapse_pi(&self, coef: &[f64], w: f64, a: f64, r: f64) -> [f64; MAX_POWER + 1] {
        debug_assert_eq!(coef.len(), self.terms.len());
        let wp = powers(w);
        let ap = powers(a);
        let rp = powers(r);
        let mut c = [0.0f64; MAX_POWER + 1];
        for (&k, t) in coef.iter().zip(&self.terms) {
            c[t.pi as usize] += k * wp[t.w as usize] * ap[t.a as usize] * rp[t.r as usize];
        }
        c
    }
}

/// Largest single-variable power any shipped basis uses.
pub const MAX_POWER: usize = 3;

#[inline]
fn powers(x: f64) -> [f64; MAX_POWER + 1] {
    let x2 = x * x;
    [1.0, x, x2, x2 * x]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn production_basis_sizes() {
        assert_eq!(BasisSpec::new(BasisKind::ConstantRateCubic).len(), 17);
        assert_eq!(BasisSpec::new(BasisKind::StochasticQuadratic).len(), 15);
        assert_eq!(BasisSpec::new(BasisKind::LaterConstantCubic).len(), 10);
        assert_eq!(BasisSpec::new(BasisKind::LaterStochasticCubic).len(), 20);
    }

    #[test]
    fn extended_sets_contain_the_production_terms() {
        let quad = BasisSpec::new(BasisKind::ExtendedRateQuadratic);
        let cubic = BasisSpec::new(BasisKind::ExtendedRateCubic);
        let base = BasisSpec::new(BasisKind::ConstantRateCubic);
        for t in &base.terms {
            assert!(quad.terms.contains(t));
        }
        for t in &quad.terms {
            assert!(cubic.terms.contains(t));
        }
        assert_eq!(quad.len(), 22);
        assert_eq!(cubic.len(), 32);
        // No duplicates.
        for spec in [&quad, &cubic] {
            let mut seen = spec.terms.clone();
            seen.sort_by_key(|t| (t.w, t.a, t.pi, t.r));
            seen.dedup();
            assert_eq!(seen.len(), spec.len());
        }
    }

    #[test]
    fn pruned_terms_are_absent() {
        let spec = BasisSpec::new(BasisKind::ConstantRateCubic);
        for t in &spec.terms {
            assert!(!matches!((t.w, t.a, t.pi), (2, 0, 1) | (0, 2, 1) | (0, 0, 3)));
            assert_eq!(t.r, 0);
            assert!(t.w + t.a + t.pi <= 3);
        }
    }

    #[test]
    fn later_bases_carry_no_control_power() {
        for kind in [BasisKind::LaterConstantCubic, BasisKind::LaterStochasticCubic] {
            let spec = BasisSpec::new(kind);
            assert!(spec.terms.iter().all(|t| t.pi == 0));
        }
    }

    #[test]
    fn collapse_matches_direct_evaluation() {
        for kind in [
            BasisKind::ConstantRateCubic,
            BasisKind::StochasticQuadratic,
            BasisKind::ExtendedRateCubic,
        ] {
            let spec = BasisSpec::new(kind);
            let coef: Vec<f64> = (0..spec.len()).map(|i| 0.1 * i as f64 - 0.4).collect();
            let (w, a, r) = (0.83, 0.41, 0.037);
            let c = spec.collapse_pi(&coef, w, a, r);
            let mut row = vec![0.0; spec.len()];
            for &pi in &[0.0, 0.123, 0.3, 0.41] {
                spec.eval_into(&mut row, w, a, pi, r);
                let direct: f64 = coef.iter().zip(&row).map(|(k, x)| k * x).sum();
                let collapsed = c[0] + pi * (c[1] + pi * (c[2] + pi * c[3]));
                assert!((direct - collapsed).abs() < 1e-12, "{kind:?}: {direct} vs {collapsed}");
            }
        }
    }
}
