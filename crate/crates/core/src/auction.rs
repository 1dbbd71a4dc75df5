//! Allocation, payment, and utility semantics for the four auction formats.
//!
//! Bids, values, and prices are grid indices; utilities and revenue come out
//! in money. Equal bids are ranked by a uniformly random permutation of the
//! tied bidders, and counterfactual feedback averages over that permutation
//! analytically instead of sampling it.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::grid::BidGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AuctionFormat {
    FirstPrice,
    SecondPrice,
    GeneralizedFirstPrice,
    GeneralizedSecondPrice,
}

impl AuctionFormat {
    pub fn name(&self) -> &'static str {
        match self {
            AuctionFormat::FirstPrice => "FirstPrice",
            AuctionFormat::SecondPrice => "SecondPrice",
            AuctionFormat::GeneralizedFirstPrice => "GeneralizedFirstPrice",
            AuctionFormat::GeneralizedSecondPrice => "GeneralizedSecondPrice",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "FirstPrice" => Ok(AuctionFormat::FirstPrice),
            "SecondPrice" => Ok(AuctionFormat::SecondPrice),
            "GeneralizedFirstPrice" => Ok(AuctionFormat::GeneralizedFirstPrice),
            "GeneralizedSecondPrice" => Ok(AuctionFormat::GeneralizedSecondPrice),
            other => Err(CoreError::InvalidConfig(format!(
                "unknown auction format '{other}'"
            ))),
        }
    }
}

/// An auction format together with its slot click-through rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuctionRule {
    format: AuctionFormat,
    ctrs: Vec<f64>,
}

impl AuctionRule {
    pub fn first_price() -> Self {
        Self {
            format: AuctionFormat::FirstPrice,
            ctrs: vec![1.0],
        }
    }

    pub fn second_price() -> Self {
        Self {
            format: AuctionFormat::SecondPrice,
            ctrs: vec![1.0],
        }
    }

    pub fn generalized_first_price(ctrs: Vec<f64>) -> Result<Self> {
        Self::positional(AuctionFormat::GeneralizedFirstPrice, ctrs)
    }

    pub fn generalized_second_price(ctrs: Vec<f64>) -> Result<Self> {
        Self::positional(AuctionFormat::GeneralizedSecondPrice, ctrs)
    }

    /// Builds a rule from a format name and optional CTR vector.
    pub fn from_parts(format: AuctionFormat, ctrs: Option<Vec<f64>>) -> Result<Self> {
        match format {
            AuctionFormat::FirstPrice | AuctionFormat::SecondPrice => {
                if let Some(c) = ctrs {
                    if c != vec![1.0] {
                        return Err(CoreError::InvalidConfig(
                            "single-item auctions have exactly one slot with ctr 1".into(),
                        ));
                    }
                }
                Ok(Self {
                    format,
                    ctrs: vec![1.0],
                })
            }
            _ => Self::positional(
                format,
                ctrs.ok_or_else(|| {
                    CoreError::InvalidConfig("position auctions need a ctr vector".into())
                })?,
            ),
        }
    }

    fn positional(format: AuctionFormat, ctrs: Vec<f64>) -> Result<Self> {
        if ctrs.is_empty() || ctrs[0] <= 0.0 {
            return Err(CoreError::InvalidConfig(
                "ctr vector must start with a positive slot".into(),
            ));
        }
        for pair in ctrs.windows(2) {
            if pair[1] > pair[0] {
                return Err(CoreError::InvalidConfig(
                    "ctrs must be nonincreasing".into(),
                ));
            }
        }
        if ctrs.iter().any(|&c| !(0.0..=1.0).contains(&c)) {
            return Err(CoreError::InvalidConfig("ctrs must lie in [0, 1]".into()));
        }
        Ok(Self { format, ctrs })
    }

    pub fn format(&self) -> AuctionFormat {
        self.format
    }

    pub fn ctrs(&self) -> &[f64] {
        &self.ctrs
    }

    pub fn num_slots(&self) -> usize {
        self.ctrs.len()
    }

    fn ctr(&self, rank: usize) -> f64 {
        self.ctrs.get(rank).copied().unwrap_or(0.0)
    }

    /// Price index paid by the bidder at `rank` of the descending bid order.
    fn price_at_rank(&self, rank: usize, ranked_bids: &[usize]) -> usize {
        match self.format {
            AuctionFormat::FirstPrice | AuctionFormat::GeneralizedFirstPrice => ranked_bids[rank],
            AuctionFormat::SecondPrice | AuctionFormat::GeneralizedSecondPrice => {
                ranked_bids.get(rank + 1).copied().unwrap_or(0)
            }
        }
    }

    /// Runs the auction on realized bids; ties are broken by a uniform
    /// random permutation of the tied bidders.
    pub fn resolve<R: Rng + ?Sized>(
        &self,
        bids: &[usize],
        values: &[usize],
        epsilon: f64,
        rng: &mut R,
    ) -> Result<AuctionOutcome> {
        if bids.len() != values.len() {
            return Err(CoreError::DimensionMismatch(format!(
                "{} bids for {} bidders",
                bids.len(),
                values.len()
            )));
        }
        let n = bids.len();
        let mut order: Vec<(usize, u64, usize)> =
            bids.iter().enumerate().map(|(i, &b)| (i, rng.gen(), b)).collect();
        order.sort_by(|a, b| b.2.cmp(&a.2).then(a.1.cmp(&b.1)));

        let ranked_bids: Vec<usize> = order.iter().map(|&(_, _, b)| b).collect();
        let mut slots = vec![None; n];
        let mut price_idx = vec![0usize; n];
        for (rank, &(bidder, _, _)) in order.iter().enumerate() {
            if rank < self.num_slots() {
                slots[bidder] = Some(rank);
                price_idx[bidder] = self.price_at_rank(rank, &ranked_bids);
            }
        }
        let (utilities, revenue) = self.score(&slots, &price_idx, values, epsilon);
        Ok(AuctionOutcome {
            slots,
            price_idx,
            utilities,
            revenue,
        })
    }

    /// Utilities and revenue for a fixed allocation under the given values.
    /// Used to rescore an outcome from the users' true-value view.
    pub fn score(
        &self,
        slots: &[Option<usize>],
        price_idx: &[usize],
        values: &[usize],
        epsilon: f64,
    ) -> (Vec<f64>, f64) {
        let mut revenue = 0.0;
        let utilities = slots
            .iter()
            .zip(price_idx)
            .zip(values)
            .map(|((slot, &p), &v)| match slot {
                Some(s) => {
                    let ctr = self.ctr(*s);
                    revenue += ctr * p as f64 * epsilon;
                    ctr * (v as f64 - p as f64) * epsilon
                }
                None => 0.0,
            })
            .collect();
        (utilities, revenue)
    }

    /// Exact expected utility of an equal-bid tie for the supported cases:
    /// a two-way tie in FP/SP, and the two-player (1, 0.5) position auction
    /// where a coin toss over the two slots gives 3(v-b)/4.
    pub fn expected_utility_on_tie(&self, bid: usize, value: usize, epsilon: f64) -> Result<f64> {
        let margin = (value as f64 - bid as f64) * epsilon;
        match self.format {
            AuctionFormat::FirstPrice | AuctionFormat::SecondPrice => Ok(0.5 * margin),
            AuctionFormat::GeneralizedFirstPrice if self.ctrs == [1.0, 0.5] => Ok(0.75 * margin),
            _ => Err(CoreError::Unsupported(format!(
                "tie expectation not defined for {} with ctrs {:?}",
                self.format.name(),
                self.ctrs
            ))),
        }
    }

    /// Expected utility of bidding `bid` against fixed opponent bids, with
    /// the tie permutation averaged analytically.
    pub fn expected_utility_against(
        &self,
        bid: usize,
        others_bids: &[usize],
        value: usize,
        epsilon: f64,
    ) -> f64 {
        let above = others_bids.iter().filter(|&&b| b > bid).count();
        let tied = others_bids.iter().filter(|&&b| b == bid).count();
        let block = tied + 1;
        // Highest opponent bid strictly below mine, for next-price rules.
        let next_lower = others_bids.iter().filter(|&&b| b < bid).max().copied();

        let mut total = 0.0;
        for pos in 0..block {
            let rank = above + pos;
            let ctr = self.ctr(rank);
            if ctr == 0.0 {
                continue;
            }
            let price = match self.format {
                AuctionFormat::FirstPrice | AuctionFormat::GeneralizedFirstPrice => bid,
                AuctionFormat::SecondPrice | AuctionFormat::GeneralizedSecondPrice => {
                    if pos < block - 1 {
                        bid // the next rank is another tied bidder
                    } else {
                        next_lower.unwrap_or(0)
                    }
                }
            };
            total += ctr * (value as f64 - price as f64) * epsilon;
        }
        total / block as f64
    }

    /// Full-feedback utility vector: one entry per own bid level on `grid`,
    /// each the exact expected utility against the realized opponent bids.
    pub fn counterfactual_utilities(
        &self,
        others_bids: &[usize],
        value: usize,
        grid: &BidGrid,
        out: &mut Vec<f64>,
    ) {
        out.clear();
        out.extend(
            (0..grid.levels())
                .map(|b| self.expected_utility_against(b, others_bids, value, grid.epsilon())),
        );
    }

    /// Exact expected utilities of a full bid profile, tie permutation
    /// averaged per player.
    pub fn expected_profile_utilities(
        &self,
        bids: &[usize],
        values: &[usize],
        epsilon: f64,
    ) -> Vec<f64> {
        bids.iter()
            .enumerate()
            .map(|(i, &b)| {
                let mut others: Vec<usize> = Vec::with_capacity(bids.len() - 1);
                others.extend(bids.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &x)| x));
                self.expected_utility_against(b, &others, values[i], epsilon)
            })
            .collect()
    }
}

/// The result of one auction round.
#[derive(Debug, Clone, PartialEq)]
pub struct AuctionOutcome {
    /// Slot assigned to each bidder, if any.
    pub slots: Vec<Option<usize>>,
    /// Per-click price index per bidder (0 when unassigned).
    pub price_idx: Vec<usize>,
    /// Money utility per bidder under the values passed to `resolve`.
    pub utilities: Vec<f64>,
    /// Money paid to the auctioneer.
    pub revenue: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(7)
    }

    fn g(eps: f64, max: f64) -> BidGrid {
        BidGrid::new(eps, max).unwrap()
    }

    #[test]
    fn fp_winner_pays_own_bid() {
        // bids (0.5, 0.3), values (1, 0.5) on a 0.1 grid
        let rule = AuctionRule::first_price();
        let out = rule.resolve(&[5, 3], &[10, 5], 0.1, &mut rng()).unwrap();
        assert_eq!(out.slots, vec![Some(0), None]);
        assert!((out.utilities[0] - 0.5).abs() < 1e-12);
        assert_eq!(out.utilities[1], 0.0);
        assert!((out.revenue - 0.5).abs() < 1e-12);
    }

    #[test]
    fn sp_winner_pays_second_bid() {
        // bids (0.7, 0.4), values (1, 0.5)
        let rule = AuctionRule::second_price();
        let out = rule.resolve(&[7, 4], &[10, 5], 0.1, &mut rng()).unwrap();
        assert_eq!(out.slots[0], Some(0));
        assert!((out.utilities[0] - 0.6).abs() < 1e-12);
        assert_eq!(out.utilities[1], 0.0);
        assert!((out.revenue - 0.4).abs() < 1e-12);
    }

    #[test]
    fn gsp_two_slots() {
        // ctrs (1, 0.5), bids (0.6, 0.2), values (1, 0.5) on a 0.1 grid
        let rule = AuctionRule::generalized_second_price(vec![1.0, 0.5]).unwrap();
        let out = rule.resolve(&[6, 2], &[10, 5], 0.1, &mut rng()).unwrap();
        assert_eq!(out.slots, vec![Some(0), Some(1)]);
        assert!((out.utilities[0] - 0.8).abs() < 1e-12); // pays 0.2
        assert!((out.utilities[1] - 0.25).abs() < 1e-12); // pays 0
        assert!((out.revenue - 0.2).abs() < 1e-12);
    }

    #[test]
    fn resolve_rejects_mismatched_lengths() {
        let rule = AuctionRule::first_price();
        assert!(rule.resolve(&[1, 2], &[1], 0.1, &mut rng()).is_err());
    }

    #[test]
    fn tie_expectations() {
        let gfp = AuctionRule::generalized_first_price(vec![1.0, 0.5]).unwrap();
        // GFP, bid 0, value 1 on a 0.01 grid -> 3/4
        assert!((gfp.expected_utility_on_tie(0, 100, 0.01).unwrap() - 0.75).abs() < 1e-12);
        let fp = AuctionRule::first_price();
        assert_eq!(fp.expected_utility_on_tie(100, 100, 0.01).unwrap(), 0.0);
        // FP, bid 0.46, value 1 -> (1 - 0.46)/2 = 0.27
        assert!((fp.expected_utility_on_tie(46, 100, 0.01).unwrap() - 0.27).abs() < 1e-12);
        let gsp = AuctionRule::generalized_second_price(vec![1.0, 0.5]).unwrap();
        assert!(gsp.expected_utility_on_tie(10, 50, 0.01).is_err());
    }

    #[test]
    fn counterfactual_sp_example() {
        // Opponent bids 0.5, value 1, quarter grid capped at 1.
        let rule = AuctionRule::second_price();
        let grid = g(0.25, 1.0);
        let mut out = Vec::new();
        rule.counterfactual_utilities(&[2], 4, &grid, &mut out);
        let expected = [0.0, 0.0, 0.25, 0.5, 0.5];
        for (a, b) in out.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12, "{out:?}");
        }
    }

    #[test]
    fn counterfactual_fp_always_losing() {
        let rule = AuctionRule::first_price();
        let grid = g(0.25, 0.5); // no-overbid cap at 0.5
        let mut out = Vec::new();
        rule.counterfactual_utilities(&[4], 2, &grid, &mut out);
        assert!(out.iter().all(|&u| u == 0.0), "{out:?}");
    }

    #[test]
    fn counterfactual_gfp_example() {
        let rule = AuctionRule::generalized_first_price(vec![1.0, 0.5]).unwrap();
        let grid = g(0.01, 1.0);
        let mut out = Vec::new();
        rule.counterfactual_utilities(&[20], 100, &grid, &mut out);
        assert!((out[30] - 0.7).abs() < 1e-12);
        assert!((out[10] - 0.45).abs() < 1e-12);
    }

    #[test]
    fn accounting_identity_random_profiles() {
        let rules = [
            AuctionRule::first_price(),
            AuctionRule::second_price(),
            AuctionRule::generalized_first_price(vec![1.0, 0.5]).unwrap(),
            AuctionRule::generalized_second_price(vec![1.0, 0.5]).unwrap(),
        ];
        let mut r = rng();
        for _ in 0..2500 {
            for rule in &rules {
                let n = 2 + (r.gen::<usize>() % 2);
                let values: Vec<usize> = (0..n).map(|_| 1 + r.gen::<usize>() % 100).collect();
                let bids: Vec<usize> = values.iter().map(|&v| r.gen::<usize>() % (v + 1)).collect();
                let out = rule.resolve(&bids, &values, 0.01, &mut r).unwrap();
                let welfare: f64 = out
                    .slots
                    .iter()
                    .zip(&values)
                    .map(|(s, &v)| s.map_or(0.0, |s| rule.ctr(s) * v as f64 * 0.01))
                    .sum();
                let lhs: f64 = out.utilities.iter().sum::<f64>() + out.revenue;
                assert!(
                    (lhs - welfare).abs() < 1e-9,
                    "accounting broke: {lhs} vs {welfare}"
                );
            }
        }
    }

    #[test]
    fn raising_bid_never_lowers_win_probability() {
        // FP/SP monotonicity of the allocation probability in own bid.
        let mut r = rng();
        for _ in 0..500 {
            let others: Vec<usize> = (0..3).map(|_| r.gen::<usize>() % 50).collect();
            let win_prob = |b: usize| {
                let above = others.iter().filter(|&&x| x > b).count();
                let tied = others.iter().filter(|&&x| x == b).count();
                if above > 0 {
                    0.0
                } else {
                    1.0 / (tied + 1) as f64
                }
            };
            let mut prev = 0.0;
            for b in 0..51 {
                let p = win_prob(b);
                assert!(p >= prev - 1e-15);
                prev = p;
            }
        }
    }

    #[test]
    fn counterfactual_matches_monte_carlo_tie_sampling() {
        // Expected-tie feedback equals resolve() in expectation over the
        // tie permutation (1e5 draws, 3 standard errors), on every format.
        let rules = [
            AuctionRule::first_price(),
            AuctionRule::second_price(),
            AuctionRule::generalized_first_price(vec![1.0, 0.5]).unwrap(),
            AuctionRule::generalized_second_price(vec![1.0, 0.5]).unwrap(),
        ];
        let grid = g(0.1, 1.0);
        let value = 8usize;
        let bid = 4usize;
        let others = [4usize, 4];
        let mut r = rng();
        for rule in &rules {
            let exact = rule.expected_utility_against(bid, &others, value, grid.epsilon());
            let trials = 100_000;
            let mut sum = 0.0;
            let mut sumsq = 0.0;
            for _ in 0..trials {
                let bids = [bid, others[0], others[1]];
                let out = rule.resolve(&bids, &[value, 8, 8], grid.epsilon(), &mut r).unwrap();
                sum += out.utilities[0];
                sumsq += out.utilities[0] * out.utilities[0];
            }
            let mean = sum / trials as f64;
            let var = (sumsq / trials as f64 - mean * mean).max(0.0);
            let se = (var / trials as f64).sqrt();
            assert!(
                (mean - exact).abs() <= 3.0 * se + 1e-12,
                "{:?}: mc {mean} vs exact {exact} (se {se})",
                rule.format()
            );
        }
    }

    #[test]
    fn gfp_three_way_tie_uniform_permutation() {
        // With three tied bidders and slots (1, 0.5), each bidder's slot is
        // uniform over the three contested positions.
        let rule = AuctionRule::generalized_first_price(vec![1.0, 0.5]).unwrap();
        let exact = rule.expected_utility_against(3, &[3, 3], 10, 0.1);
        // positions: ctr 1, ctr 0.5, unassigned -> mean ctr = 0.5
        assert!((exact - 0.5 * (10.0 - 3.0) * 0.1).abs() < 1e-12);

        let mut r = rng();
        let mut slot_counts = [0usize; 3];
        let trials = 30_000;
        for _ in 0..trials {
            let out = rule.resolve(&[3, 3, 3], &[10, 10, 10], 0.1, &mut r).unwrap();
            match out.slots[0] {
                Some(s) => slot_counts[s] += 1,
                None => slot_counts[2] += 1,
            }
        }
        for c in slot_counts {
            let frac = c as f64 / trials as f64;
            assert!((frac - 1.0 / 3.0).abs() < 0.02, "{slot_counts:?}");
        }
    }

    #[test]
    fn ctr_validation() {
        assert!(AuctionRule::generalized_first_price(vec![0.5, 1.0]).is_err());
        assert!(AuctionRule::generalized_first_price(vec![]).is_err());
        assert!(AuctionRule::generalized_first_price(vec![1.0, 0.5, 0.0]).is_ok());
        assert!(AuctionRule::from_parts(AuctionFormat::FirstPrice, Some(vec![1.0, 0.5])).is_err());
    }
}
