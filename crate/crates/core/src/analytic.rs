//! Closed-form reference results: the second-price limit law, the two-slot
//! position-auction Nash equilibrium, the nearly-diagonal prediction model,
//! and the meta-game equilibrium of declared values.
//!
//! Numeric cross-checks integrate with the trapezoid rule on 1e-4-step
//! grids (target accuracy 1e-6 on these smooth integrands).

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::grid::{BidGrid, Marginal};

pub const ONE_MINUS_LN2: f64 = 1.0 - std::f64::consts::LN_2;

const INTEGRATION_STEP: f64 = 1e-4;

fn trapezoid<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    let steps = ((b - a) / INTEGRATION_STEP).ceil().max(1.0) as usize;
    let h = (b - a) / steps as f64;
    let mut acc = 0.5 * (f(a) + f(b));
    for k in 1..steps {
        acc += f(a + h * k as f64);
    }
    acc * h
}

/// Mixed Nash equilibrium of the two-slot (1, 1/2) first-price auction for
/// per-click values `v >= w`: both players mix on `[0, w/2]` with
/// `F(x) = x/(w-x)` for the high player and `G(y) = (2v/w - 1) y/(v-y)` for
/// the low player; payoffs `u1 = v/2 + (v-w)(1 - ln 2)`, `u2 = w/2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GfpNash {
    /// High value (internally canonicalized so that `v >= w`).
    pub v: f64,
    pub w: f64,
    /// True when the caller's player order was (low, high).
    pub swapped: bool,
    /// Expected payoff of the high player.
    pub u1: f64,
    /// Expected payoff of the low player.
    pub u2: f64,
}

impl GfpNash {
    /// Top of the common bid support.
    pub fn support_top(&self) -> f64 {
        self.w / 2.0
    }

    /// High player's CDF on the support.
    pub fn cdf_high(&self, x: f64) -> f64 {
        (x / (self.w - x)).clamp(0.0, 1.0)
    }

    pub fn density_high(&self, x: f64) -> f64 {
        self.w / ((self.w - x) * (self.w - x))
    }

    /// Low player's CDF on the support.
    pub fn cdf_low(&self, y: f64) -> f64 {
        ((2.0 * self.v / self.w - 1.0) * y / (self.v - y)).clamp(0.0, 1.0)
    }

    pub fn density_low(&self, y: f64) -> f64 {
        (2.0 * self.v / self.w - 1.0) * self.v / ((self.v - y) * (self.v - y))
    }

    /// High payoff recomputed from the equilibrium integral
    /// `int f(x) (1/2)(v-x)(G(x)+1) dx`.
    pub fn u1_numeric(&self) -> f64 {
        trapezoid(
            |x| self.density_high(x) * 0.5 * (self.v - x) * (self.cdf_low(x) + 1.0),
            0.0,
            self.support_top(),
        )
    }

    /// Low payoff recomputed from `int g(y) (1/2)(w-y)(F(y)+1) dy`.
    pub fn u2_numeric(&self) -> f64 {
        trapezoid(
            |y| self.density_low(y) * 0.5 * (self.w - y) * (self.cdf_high(y) + 1.0),
            0.0,
            self.support_top(),
        )
    }

    /// Residual of the high player's stationarity condition
    /// `(v-x) g(x) - G(x) - 1` at `x`. Identically zero in the symmetric
    /// case; for `v > w` the stated `G` leaves the constant residual
    /// `2(v-w)/w`.
    pub fn foc_high_residual(&self, x: f64) -> f64 {
        (self.v - x) * self.density_low(x) - self.cdf_low(x) - 1.0
    }

    /// Residual of the low player's stationarity condition
    /// `(w-y) f(y) - F(y) - 1` at `y`; zero for every `(v, w)`.
    pub fn foc_low_residual(&self, y: f64) -> f64 {
        (self.w - y) * self.density_high(y) - self.cdf_high(y) - 1.0
    }
}

/// Closed-form Nash equilibrium of the two-slot auction. With
/// `swap_if_needed`, inputs with `v < w` are canonicalized by exchanging
/// roles (flagged in the result); otherwise they are rejected.
pub fn gfp_nash(v: f64, w: f64, swap_if_needed: bool) -> Result<GfpNash> {
    if !(v > 0.0 && w > 0.0) || !v.is_finite() || !w.is_finite() {
        return Err(CoreError::InvalidConfig(format!(
            "values must be positive and finite, got ({v}, {w})"
        )));
    }
    let (hi, lo, swapped) = if v >= w {
        (v, w, false)
    } else if swap_if_needed {
        (w, v, true)
    } else {
        return Err(CoreError::InvalidConfig(format!(
            "need v >= w, got ({v}, {w}); pass swap_if_needed to canonicalize"
        )));
    };
    Ok(GfpNash {
        v: hi,
        w: lo,
        swapped,
        u1: hi / 2.0 + (hi - lo) * ONE_MINUS_LN2,
        u2: lo / 2.0,
    })
}

/// Limit law of second-price dynamics for values `v > w`: the high player's
/// marginal is uniform on `{w+eps, ..., v}`; the low player's marginal is
/// constrained to `0 < Pr[0] <= Pr[eps] <= ... <= Pr[w]` (a predicate, not
/// a unique distribution).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpLimitLaw {
    pub grid: BidGrid,
    pub v_index: usize,
    pub w_index: usize,
}

impl SpLimitLaw {
    /// The uniform high-player marginal: mass `eps/(v-w)` on each of
    /// `{w+eps, ..., v}`.
    pub fn high_marginal(&self) -> Marginal {
        let mut probs = vec![0.0; self.grid.levels()];
        let points = self.v_index - self.w_index;
        for k in (self.w_index + 1)..=self.v_index {
            probs[k] = 1.0 / points as f64;
        }
        Marginal::new(self.grid, probs).expect("uniform law normalizes")
    }

    /// Checks the low-player constraint set: positive mass at zero and
    /// nondecreasing probabilities up to `w`, tolerating `slack` per step.
    pub fn low_marginal_satisfies(&self, marginal: &Marginal, slack: f64) -> bool {
        let probs = marginal.probs();
        if probs.len() <= self.w_index {
            return false;
        }
        if probs[0] <= 0.0 {
            return false;
        }
        for k in 0..self.w_index {
            if probs[k + 1] < probs[k] - slack {
                return false;
            }
        }
        true
    }
}

pub fn sp_limit(v: f64, w: f64, epsilon: f64) -> Result<SpLimitLaw> {
    if v <= w {
        return Err(CoreError::Unsupported(format!(
            "the second-price limit law requires v > w, got ({v}, {w})"
        )));
    }
    let grid = BidGrid::new(epsilon, v)?;
    let v_index = grid.index_of(v)?;
    let w_index = grid.index_of(w)?;
    if w_index < 1 {
        return Err(CoreError::InvalidConfig(format!(
            "need w >= eps, got w = {w}, eps = {epsilon}"
        )));
    }
    Ok(SpLimitLaw {
        grid,
        v_index,
        w_index,
    })
}

/// High-player payoff under the nearly-diagonal prediction when users with
/// true value 1 declare `(v, w)`, `v >= w`.
pub fn nearly_diagonal_u1(v: f64, w: f64) -> f64 {
    (1.0 - w * ONE_MINUS_LN2) * (1.0 - w / (4.0 * v))
}

/// Low-player payoff under the nearly-diagonal prediction.
pub fn nearly_diagonal_u2(v: f64, w: f64) -> f64 {
    0.5 * (1.0 - w / v) + (3.0 * w / (4.0 * v)) * (1.0 - w * ONE_MINUS_LN2)
}

/// The nearly-diagonal prediction of two-slot dynamics under declarations
/// `(v, w)` with true values 1: the high agent bids `x ~ F(x) = x/(w-x)` on
/// `[0, w/2]` and the low agent matches `x` with probability `w/v`,
/// otherwise bids 0.
///
/// This is the empirically validated prediction model, not a theorem; its
/// rigorous derivation is open.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NearlyDiagonalModel {
    pub v: f64,
    pub w: f64,
    pub swapped: bool,
    /// Probability that the low agent matches the high bid.
    pub diagonal_prob: f64,
    /// Predicted user payoffs at true value 1.
    pub u1: f64,
    pub u2: f64,
}

impl NearlyDiagonalModel {
    /// Draws a grid bid pair `(high, low)` from the prediction.
    pub fn sample_pair<R: rand::Rng + ?Sized>(&self, grid: &BidGrid, rng: &mut R) -> (usize, usize) {
        let q: f64 = rng.gen();
        // F(x) = x/(w-x) inverts to x = q w / (1 + q).
        let x_money = q * self.w / (1.0 + q);
        let cap = ((self.w / 2.0) / grid.epsilon()).floor() as usize;
        let x = ((x_money / grid.epsilon()).round() as usize).min(cap).min(grid.levels() - 1);
        let y = if rng.gen::<f64>() < self.diagonal_prob {
            x
        } else {
            0
        };
        (x, y)
    }
}

pub fn nearly_diagonal(v: f64, w: f64) -> Result<NearlyDiagonalModel> {
    if !(v > 0.0 && w > 0.0) || !v.is_finite() || !w.is_finite() {
        return Err(CoreError::InvalidConfig(format!(
            "declarations must be positive and finite, got ({v}, {w})"
        )));
    }
    let (hi, lo, swapped) = if v >= w { (v, w, false) } else { (w, v, true) };
    Ok(NearlyDiagonalModel {
        v: hi,
        w: lo,
        swapped,
        diagonal_prob: lo / hi,
        u1: nearly_diagonal_u1(hi, lo),
        u2: nearly_diagonal_u2(hi, lo),
    })
}

/// Meta-game equilibrium of declared values when both true values are 1 and
/// declarations are capped at `M`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetagameEquilibrium {
    /// Low declaration `1/(6(1 - ln 2))`.
    pub w_star: f64,
    /// High declaration (the cap).
    pub v_star: f64,
    pub high_payoff: f64,
    pub low_payoff: f64,
    /// With unbounded declarations the profile is an epsilon-equilibrium at
    /// this epsilon = 1/(24 M (1 - ln 2)).
    pub epsilon_bound: f64,
}

/// Threshold below which the cap constraint breaks the equilibrium.
pub fn metagame_min_cap() -> f64 {
    1.0 / ONE_MINUS_LN2
}

pub fn metagame_equilibrium(max_declaration: f64) -> Result<MetagameEquilibrium> {
    if !(max_declaration > metagame_min_cap()) {
        return Err(CoreError::InvalidConfig(format!(
            "the cap must exceed 1/(1-ln2) = {:.6}, got {max_declaration}",
            metagame_min_cap()
        )));
    }
    let w_star = 1.0 / (6.0 * ONE_MINUS_LN2);
    let eps = 1.0 / (24.0 * max_declaration * ONE_MINUS_LN2);
    Ok(MetagameEquilibrium {
        w_star,
        v_star: max_declaration,
        high_payoff: (5.0 / 6.0) * (1.0 - eps),
        low_payoff: nearly_diagonal_u2(max_declaration, w_star),
        epsilon_bound: eps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::LN_2;

    #[test]
    fn symmetric_nash_payoffs_are_half() {
        let eq = gfp_nash(1.0, 1.0, false).unwrap();
        assert_eq!(eq.u1, 0.5);
        assert_eq!(eq.u2, 0.5);
        assert!((eq.cdf_high(0.25) - 1.0 / 3.0).abs() < 1e-12);
        assert!((eq.cdf_high(0.5) - 1.0).abs() < 1e-12);
        assert!((eq.cdf_low(0.5) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn asymmetric_nash_closed_forms() {
        let eq = gfp_nash(2.0, 1.0, false).unwrap();
        assert!((eq.u1 - (1.0 + ONE_MINUS_LN2)).abs() < 1e-12);
        assert!((eq.u1 - 1.3068528194400547).abs() < 1e-9);
        assert_eq!(eq.u2, 0.5);
        assert!((eq.cdf_low(0.5) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn swap_flag_canonicalizes_roles() {
        assert!(gfp_nash(1.0, 2.0, false).is_err());
        let eq = gfp_nash(1.0, 2.0, true).unwrap();
        assert!(eq.swapped);
        assert_eq!(eq.v, 2.0);
        assert_eq!(eq.w, 1.0);
    }

    #[test]
    fn numeric_integrals_match_closed_forms() {
        for (v, w) in [(1.0, 1.0), (2.0, 1.0), (1.5, 0.7), (4.0, 0.5434)] {
            let eq = gfp_nash(v, w, false).unwrap();
            assert!(
                (eq.u1_numeric() - eq.u1).abs() < 1e-6,
                "u1 at ({v},{w}): {} vs {}",
                eq.u1_numeric(),
                eq.u1
            );
            assert!(
                (eq.u2_numeric() - eq.u2).abs() < 1e-6,
                "u2 at ({v},{w}): {} vs {}",
                eq.u2_numeric(),
                eq.u2
            );
        }
    }

    #[test]
    fn first_order_conditions_hold_in_the_symmetric_case() {
        for vw in [0.6, 1.0] {
            let eq = gfp_nash(vw, vw, false).unwrap();
            let top = eq.support_top();
            let mut x = 1e-3;
            while x < top {
                assert!(eq.foc_high_residual(x).abs() < 1e-8, "high FOC at {x}");
                assert!(eq.foc_low_residual(x).abs() < 1e-8, "low FOC at {x}");
                x += 1e-3;
            }
        }
    }

    #[test]
    fn low_foc_holds_for_all_values_high_foc_residual_is_known() {
        // The stated G satisfies the high player's stationarity only at
        // v = w; for v > w its residual is the constant 2(v-w)/w.
        let eq = gfp_nash(2.0, 1.0, false).unwrap();
        let expected = 2.0 * (eq.v - eq.w) / eq.w;
        let mut x = 1e-3;
        while x < eq.support_top() {
            assert!(eq.foc_low_residual(x).abs() < 1e-8);
            assert!((eq.foc_high_residual(x) - expected).abs() < 1e-8);
            x += 1e-3;
        }
    }

    #[test]
    fn sp_limit_five_point_uniform() {
        let law = sp_limit(1.0, 0.5, 0.1).unwrap();
        let m = law.high_marginal();
        for k in 0..=5 {
            assert_eq!(m.probs()[k], 0.0);
        }
        for k in 6..=10 {
            assert!((m.probs()[k] - 0.2).abs() < 1e-12);
        }
    }

    #[test]
    fn sp_limit_degenerate_and_invalid_cases() {
        // eps = v - w collapses the high marginal to a point mass at v.
        let law = sp_limit(1.0, 0.5, 0.5).unwrap();
        let m = law.high_marginal();
        assert_eq!(m.probs()[2], 1.0);
        assert!(sp_limit(1.0, 1.0, 0.1).is_err());
    }

    #[test]
    fn sp_limit_low_predicate() {
        let law = sp_limit(1.0, 0.5, 0.1).unwrap();
        let g = BidGrid::new(0.1, 0.5).unwrap();
        let ok = Marginal::new(g, vec![0.1, 0.1, 0.2, 0.2, 0.2, 0.2]).unwrap();
        assert!(law.low_marginal_satisfies(&ok, 0.0));
        let within_slack = Marginal::new(g, vec![0.1, 0.095, 0.2, 0.2, 0.2, 0.205]).unwrap();
        assert!(law.low_marginal_satisfies(&within_slack, 0.01));
        let bad = Marginal::new(g, vec![0.3, 0.1, 0.15, 0.15, 0.15, 0.15]).unwrap();
        assert!(!law.low_marginal_satisfies(&bad, 0.01));
        let zero_at_origin = Marginal::new(g, vec![0.0, 0.2, 0.2, 0.2, 0.2, 0.2]).unwrap();
        assert!(!law.low_marginal_satisfies(&zero_at_origin, 0.01));
    }

    #[test]
    fn nearly_diagonal_symmetric_matches_diagonal_payoff() {
        let model = nearly_diagonal(1.0, 1.0).unwrap();
        assert_eq!(model.diagonal_prob, 1.0);
        let expect = 0.75 * LN_2;
        assert!((model.u1 - expect).abs() < 1e-12);
        assert!((model.u2 - expect).abs() < 1e-12);
    }

    #[test]
    fn nearly_diagonal_two_one() {
        let model = nearly_diagonal(2.0, 1.0).unwrap();
        assert!((model.u1 - 0.875 * LN_2).abs() < 1e-12);
        assert!((model.u2 - (0.25 + 0.375 * LN_2)).abs() < 1e-12);
        assert!((model.u1 - 0.6065037830).abs() < 1e-9);
        assert!((model.u2 - 0.5099301927).abs() < 1e-9);
    }

    #[test]
    fn nearly_diagonal_high_value_limit() {
        let w = 0.8;
        let model = nearly_diagonal(1e9, w).unwrap();
        assert!((model.u1 - (1.0 - w * ONE_MINUS_LN2)).abs() < 1e-6);
    }

    #[test]
    fn low_payoff_is_stationary_at_w_star() {
        let w_star = 1.0 / (6.0 * ONE_MINUS_LN2);
        for v in [1.0, 2.0, 4.0] {
            let h = 1e-6;
            let deriv = (nearly_diagonal_u2(v, w_star + h) - nearly_diagonal_u2(v, w_star - h))
                / (2.0 * h);
            assert!(deriv.abs() < 1e-4, "d u2/d w at ({v}, w*) = {deriv}");
        }
    }

    #[test]
    fn high_payoff_increases_in_declaration() {
        for w in [0.2, 0.5431485589, 1.0, 3.0] {
            assert!(w < 1.0 / ONE_MINUS_LN2);
            for v in [1.0, 1.5, 2.0, 4.0, 8.0] {
                if v < w {
                    continue;
                }
                let h = 1e-6;
                let deriv = (nearly_diagonal_u1(v + h, w) - nearly_diagonal_u1(v - h, w)) / (2.0 * h);
                assert!(deriv > 0.0, "d u1/d v at ({v}, {w}) = {deriv}");
            }
        }
    }

    #[test]
    fn metagame_equilibrium_values() {
        let eq = metagame_equilibrium(100.0).unwrap();
        assert!((eq.w_star - 1.0 / (6.0 * ONE_MINUS_LN2)).abs() < 1e-15);
        assert!((eq.w_star - 0.5431485589).abs() < 1e-9);
        assert!((eq.high_payoff - 0.8322017738).abs() < 1e-9);
        assert!((eq.low_payoff - 0.5006789357).abs() < 1e-9);
    }

    #[test]
    fn metagame_limit_payoffs() {
        let eq = metagame_equilibrium(1e9).unwrap();
        assert!((eq.high_payoff - 5.0 / 6.0).abs() < 1e-6);
        assert!((eq.low_payoff - 0.5).abs() < 1e-6);
        // Users capture 8/9 of the welfare 1.5 in the limit.
        let user_share = (eq.high_payoff + eq.low_payoff) / 1.5;
        assert!((user_share - 8.0 / 9.0).abs() < 1e-6);
    }

    #[test]
    fn metagame_rejects_low_caps() {
        assert!(metagame_equilibrium(3.0).is_err());
        assert!(metagame_equilibrium(3.3).is_ok());
    }
}
