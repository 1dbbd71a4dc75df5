//! Coarse-correlated-equilibrium verification and the co-undominated
//! refinement: deviation gains, weak-dominance witnesses, exhaustive
//! support enumeration on tiny grids, and the diagonal CCE condition for
//! the two-slot position auction.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::auction::AuctionRule;
use crate::error::{CoreError, Result};
use crate::grid::{support_of, BidGrid, JointBidDistribution, SupportPair};
use crate::lp::{solve_feasibility, LpConstraint};

/// Comparison slack for exact-arithmetic utility comparisons.
const UTIL_TOL: f64 = 1e-12;

/// Minimum support mass per cell in enumeration witnesses.
pub const DEFAULT_DELTA_MIN: f64 = 1e-6;

/// Grid cap for exhaustive support enumeration.
pub const ENUMERATION_LEVEL_CAP: usize = 8;

/// One player's best fixed deviation against a joint distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayerDeviation {
    pub best_bid: usize,
    pub best_deviation_utility: f64,
    pub in_distribution_utility: f64,
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationReport {
    pub players: Vec<PlayerDeviation>,
}

impl DeviationReport {
    pub fn max_gain(&self) -> f64 {
        self.players
            .iter()
            .map(|p| p.gain)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_cce(&self, delta: f64) -> bool {
        self.max_gain() <= delta
    }
}

/// Evidence that a supported action is weakly dominated relative to the
/// opponent's support.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DominanceWitness {
    pub player: usize,
    pub dominated: usize,
    pub dominating: usize,
    /// Opponent action where the inequality is strict.
    pub strict_at: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoUndominatedReport {
    pub verdict: bool,
    pub cce_ok: bool,
    pub deviations: DeviationReport,
    pub witnesses: Vec<DominanceWitness>,
}

/// Exact expected-tie utility tables for a two-player rule: `u[a][b]` for
/// the row player bidding `a` against `b` (and the mirrored table).
struct UtilityTables {
    u1: Vec<Vec<f64>>,
    u2: Vec<Vec<f64>>,
}

fn utility_tables(
    rule: &AuctionRule,
    grids: &[BidGrid],
    values: &[f64],
) -> Result<UtilityTables> {
    if grids.len() != 2 || values.len() != 2 {
        return Err(CoreError::Unsupported(
            "equilibrium checks are two-player".into(),
        ));
    }
    if (grids[0].epsilon() - grids[1].epsilon()).abs() > 1e-12 {
        return Err(CoreError::GridMismatch(
            "players must share the money step".into(),
        ));
    }
    let eps = grids[0].epsilon();
    let v1 = grids[0].index_of(values[0]).map_err(|_| {
        CoreError::InvalidConfig(format!("value {} is not on player 1's grid", values[0]))
    })?;
    let v2 = grids[1].index_of(values[1]).map_err(|_| {
        CoreError::InvalidConfig(format!("value {} is not on player 2's grid", values[1]))
    })?;
    let ka = grids[0].levels();
    let kb = grids[1].levels();
    let u1 = (0..ka)
        .map(|a| {
            (0..kb)
                .map(|b| rule.expected_utility_against(a, &[b], v1, eps))
                .collect()
        })
        .collect();
    let u2 = (0..ka)
        .map(|a| {
            (0..kb)
                .map(|b| rule.expected_utility_against(b, &[a], v2, eps))
                .collect()
        })
        .collect();
    Ok(UtilityTables { u1, u2 })
}

/// Best fixed-bid deviation gain per player against `d`. The distribution
/// is a delta-CCE iff the maximum gain is at most delta.
pub fn cce_gain(
    d: &JointBidDistribution,
    rule: &AuctionRule,
    values: &[f64],
) -> Result<DeviationReport> {
    let tables = utility_tables(rule, d.grids(), values)?;
    let ka = d.grids()[0].levels();
    let kb = d.grids()[1].levels();

    let mut in_dist = [0.0f64; 2];
    let mut marg_a = vec![0.0f64; ka];
    let mut marg_b = vec![0.0f64; kb];
    for a in 0..ka {
        for b in 0..kb {
            let p = d.prob2(a, b);
            if p > 0.0 {
                in_dist[0] += p * tables.u1[a][b];
                in_dist[1] += p * tables.u2[a][b];
                marg_a[a] += p;
                marg_b[b] += p;
            }
        }
    }

    let best_against = |util_of: &dyn Fn(usize, usize) -> f64, own_levels: usize, opp_marg: &[f64]| {
        let mut best_bid = 0usize;
        let mut best_util = f64::NEG_INFINITY;
        for k in 0..own_levels {
            let mut u = 0.0;
            for (j, &q) in opp_marg.iter().enumerate() {
                if q > 0.0 {
                    u += q * util_of(k, j);
                }
            }
            if u > best_util {
                best_util = u;
                best_bid = k;
            }
        }
        (best_bid, best_util)
    };

    let (b1, u1) = best_against(&|k, j| tables.u1[k][j], ka, &marg_b);
    let (b2, u2) = best_against(&|k, j| tables.u2[j][k], kb, &marg_a);

    Ok(DeviationReport {
        players: vec![
            PlayerDeviation {
                best_bid: b1,
                best_deviation_utility: u1,
                in_distribution_utility: in_dist[0],
                gain: u1 - in_dist[0],
            },
            PlayerDeviation {
                best_bid: b2,
                best_deviation_utility: u2,
                in_distribution_utility: in_dist[1],
                gain: u2 - in_dist[1],
            },
        ],
    })
}

/// Is row `i` weakly dominated by row `i_alt` over the opponent actions in
/// `support`? Returns the action where the inequality is strict.
fn dominated_over<FI: Fn(usize) -> f64, FA: Fn(usize) -> f64>(
    u_i: FI,
    u_alt: FA,
    support: &[usize],
) -> Option<usize> {
    let mut strict_at = None;
    for &j in support {
        let a = u_i(j);
        let b = u_alt(j);
        if a > b + UTIL_TOL {
            return None;
        }
        if strict_at.is_none() && a < b - UTIL_TOL {
            strict_at = Some(j);
        }
    }
    strict_at
}

/// Checks the co-undominated refinement: `d` must be a `cce_delta`-CCE and
/// no supported action may be weakly dominated relative to the opponent's
/// support. All witnesses are reported.
pub fn co_undominated_check(
    d: &JointBidDistribution,
    rule: &AuctionRule,
    values: &[f64],
    support_tol: f64,
    cce_delta: f64,
) -> Result<CoUndominatedReport> {
    let deviations = cce_gain(d, rule, values)?;
    let cce_ok = deviations.is_cce(cce_delta);
    let support = support_of(d, support_tol)?;
    let tables = utility_tables(rule, d.grids(), values)?;
    let ka = d.grids()[0].levels();
    let kb = d.grids()[1].levels();

    let mut witnesses = Vec::new();
    for &i in &support.support_a {
        for alt in 0..ka {
            if alt == i {
                continue;
            }
            if let Some(strict_at) = dominated_over(
                |j| tables.u1[i][j],
                |j| tables.u1[alt][j],
                &support.support_b,
            ) {
                witnesses.push(DominanceWitness {
                    player: 0,
                    dominated: i,
                    dominating: alt,
                    strict_at,
                });
                break; // one witness per dominated action suffices
            }
        }
    }
    for &j in &support.support_b {
        for alt in 0..kb {
            if alt == j {
                continue;
            }
            if let Some(strict_at) = dominated_over(
                |i| tables.u2[i][j],
                |i| tables.u2[i][alt],
                &support.support_a,
            ) {
                witnesses.push(DominanceWitness {
                    player: 1,
                    dominated: j,
                    dominating: alt,
                    strict_at,
                });
                break;
            }
        }
    }

    Ok(CoUndominatedReport {
        verdict: cce_ok && witnesses.is_empty(),
        cce_ok,
        deviations,
        witnesses,
    })
}

/// Exhaustively enumerates candidate co-undominated CCE supports on tiny
/// grids. For every support pair (A, B) that survives the dominance filter,
/// a dense witness is sought by linear feasibility: cell mass at least
/// `delta_min` on A x B, zero off it, total mass one, and no profitable
/// fixed-bid deviation for either player.
pub fn enumerate_co_undominated(
    rule: &AuctionRule,
    values: &[f64],
    grid_a: BidGrid,
    grid_b: BidGrid,
    delta_min: f64,
) -> Result<Vec<(SupportPair, JointBidDistribution)>> {
    let ka = grid_a.levels();
    let kb = grid_b.levels();
    for k in [ka, kb] {
        if k > ENUMERATION_LEVEL_CAP {
            return Err(CoreError::GridTooLarge {
                levels: k,
                cap: ENUMERATION_LEVEL_CAP,
            });
        }
    }
    let tables = utility_tables(rule, &[grid_a, grid_b], values)?;

    let masks_a: Vec<u32> = (1..(1u32 << ka)).collect();
    let mut found: Vec<(SupportPair, JointBidDistribution)> = masks_a
        .par_iter()
        .flat_map_iter(|&mask_a| {
            let support_a: Vec<usize> = (0..ka).filter(|&i| mask_a >> i & 1 == 1).collect();
            let mut local = Vec::new();
            'next_b: for mask_b in 1..(1u32 << kb) {
                let support_b: Vec<usize> = (0..kb).filter(|&j| mask_b >> j & 1 == 1).collect();

                // Dominance filter on both supports.
                for &i in &support_a {
                    for alt in 0..ka {
                        if alt != i
                            && dominated_over(
                                |j| tables.u1[i][j],
                                |j| tables.u1[alt][j],
                                &support_b,
                            )
                            .is_some()
                        {
                            continue 'next_b;
                        }
                    }
                }
                for &j in &support_b {
                    for alt in 0..kb {
                        if alt != j
                            && dominated_over(
                                |i| tables.u2[i][j],
                                |i| tables.u2[i][alt],
                                &support_a,
                            )
                            .is_some()
                        {
                            continue 'next_b;
                        }
                    }
                }

                // Linear feasibility over the support cells.
                let num_vars = support_a.len() * support_b.len();
                let cell = |i: usize, j: usize| -> usize { i * support_b.len() + j };
                let mut constraints = vec![LpConstraint::eq(vec![1.0; num_vars], 1.0)];
                for k in 0..ka {
                    let mut coeffs = vec![0.0; num_vars];
                    for (ia, &a) in support_a.iter().enumerate() {
                        for (jb, &b) in support_b.iter().enumerate() {
                            coeffs[cell(ia, jb)] = tables.u1[a][b] - tables.u1[k][b];
                        }
                    }
                    constraints.push(LpConstraint::ge(coeffs, 0.0));
                }
                for k in 0..kb {
                    let mut coeffs = vec![0.0; num_vars];
                    for (ia, &a) in support_a.iter().enumerate() {
                        for (jb, &b) in support_b.iter().enumerate() {
                            coeffs[cell(ia, jb)] = tables.u2[a][b] - tables.u2[a][k];
                        }
                    }
                    constraints.push(LpConstraint::ge(coeffs, 0.0));
                }

                if let Some(point) = solve_feasibility(num_vars, &constraints, delta_min) {
                    let total: f64 = point.iter().sum();
                    let cells: Vec<(usize, usize, f64)> = support_a
                        .iter()
                        .enumerate()
                        .flat_map(|(ia, &a)| {
                            let point = &point;
                            support_b.iter().enumerate().map(move |(jb, &b)| {
                                (a, b, point[cell(ia, jb)] / total)
                            })
                        })
                        .collect();
                    if let Ok(witness) = JointBidDistribution::two_player(grid_a, grid_b, &cells) {
                        local.push((
                            SupportPair {
                                support_a: support_a.clone(),
                                support_b: support_b.clone(),
                            },
                            witness,
                        ));
                    }
                }
            }
            local
        })
        .collect();

    found.sort_by(|x, y| (&x.0.support_a, &x.0.support_b).cmp(&(&y.0.support_a, &y.0.support_b)));
    Ok(found)
}

/// Outcome of the diagonal-CCE condition for the two-slot (1, 1/2) auction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagonalCceReport {
    /// On-distribution payoff of the high/low player.
    pub lhs_high: f64,
    pub lhs_low: f64,
    /// Best fixed-bid payoff of the high/low player.
    pub rhs_high: f64,
    pub rhs_low: f64,
    pub verdict: bool,
}

const DIAGONAL_STEP: f64 = 1e-4;
const DIAGONAL_VERDICT_SLACK: f64 = 1e-9;

/// Checks whether the diagonal bid distribution `(x, x)` with CDF `cdf` on
/// `[0, w/2]` is a CCE of the two-slot (1, 1/2) auction with values `v >= w`:
/// for each player, (3/4) int f(x) (value - x) dx must be at least
/// (1/2) max over fixed bids x0 of (F(x0) + 1)(value - x0).
pub fn diagonal_cce_check<F: Fn(f64) -> f64>(cdf: F, v: f64, w: f64) -> Result<DiagonalCceReport> {
    if !(w > 0.0) || v < w {
        return Err(CoreError::InvalidConfig(format!(
            "need v >= w > 0, got v={v}, w={w}"
        )));
    }
    let half = w / 2.0;
    let steps = (half / DIAGONAL_STEP).ceil() as usize;
    let xs: Vec<f64> = (0..=steps).map(|k| half * k as f64 / steps as f64).collect();

    // CDF contract: nonnegative, nondecreasing, reaching 1 at w/2.
    let mut prev = 0.0;
    for (k, &x) in xs.iter().enumerate() {
        let fx = cdf(x);
        if fx < -1e-9 || fx > 1.0 + 1e-9 {
            return Err(CoreError::ContractViolation(format!(
                "cdf({x}) = {fx} is outside [0, 1]"
            )));
        }
        if k > 0 && fx < prev - 1e-9 {
            return Err(CoreError::ContractViolation(format!(
                "cdf decreases at {x}"
            )));
        }
        prev = fx;
    }
    if (cdf(half) - 1.0).abs() > 1e-6 {
        return Err(CoreError::ContractViolation(format!(
            "cdf({half}) = {} but the support ends at w/2",
            cdf(half)
        )));
    }

    // Stieltjes trapezoid: an atom at 0 contributes cdf(0) directly, each
    // cell contributes its CDF increment times the averaged integrand.
    let expected_margin = |value: f64| -> f64 {
        let mut acc = cdf(xs[0]) * value;
        for k in 1..xs.len() {
            let df = cdf(xs[k]) - cdf(xs[k - 1]);
            acc += df * ((value - xs[k - 1]) + (value - xs[k])) * 0.5;
        }
        acc
    };
    let lhs_high = 0.75 * expected_margin(v);
    let lhs_low = 0.75 * expected_margin(w);

    let best_fixed = |value: f64| -> f64 {
        xs.iter()
            .map(|&x0| 0.5 * (cdf(x0) + 1.0) * (value - x0))
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let rhs_high = best_fixed(v);
    let rhs_low = best_fixed(w);

    Ok(DiagonalCceReport {
        lhs_high,
        lhs_low,
        rhs_high,
        rhs_low,
        verdict: lhs_high >= rhs_high - DIAGONAL_VERDICT_SLACK
            && lhs_low >= rhs_low - DIAGONAL_VERDICT_SLACK,
    })
}
