//! Declared-value sweeps of the meta-game: run the dynamics for a grid of
//! declaration pairs, aggregate user payoffs across seeds, and test
//! empirical best responses and meta-game equilibria.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agents::Algorithm;
use crate::auction::AuctionRule;
use crate::engine::{run, AgentSpec, RunConfig};
use crate::error::{CoreError, Result};
use crate::rng::derive_seed;
use crate::stats::{mean, std_err};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub rule: AuctionRule,
    pub epsilon: f64,
    pub algorithm: Algorithm,
    /// True value per user (payoffs are evaluated at these).
    pub true_values: Vec<f64>,
    /// Declaration pairs (v, w) to simulate.
    pub cells: Vec<(f64, f64)>,
    pub horizon: usize,
    pub seeds_per_cell: usize,
    pub base_seed: u64,
    pub burn_in_fraction: f64,
    pub eta: Option<f64>,
    pub perturb_scale: Option<f64>,
    pub recency_rho: Option<f64>,
}

impl SweepConfig {
    pub fn new(
        rule: AuctionRule,
        epsilon: f64,
        algorithm: Algorithm,
        true_values: Vec<f64>,
        cells: Vec<(f64, f64)>,
        horizon: usize,
        seeds_per_cell: usize,
        base_seed: u64,
    ) -> Self {
        Self {
            rule,
            epsilon,
            algorithm,
            true_values,
            cells,
            horizon,
            seeds_per_cell,
            base_seed,
            burn_in_fraction: 0.05,
            eta: None,
            perturb_scale: None,
            recency_rho: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.true_values.len() != 2 {
            return Err(CoreError::Unsupported("sweeps are two-user".into()));
        }
        if self.cells.is_empty() {
            return Err(CoreError::InvalidConfig("declared grid is empty".into()));
        }
        if self.seeds_per_cell == 0 {
            return Err(CoreError::InvalidConfig(
                "seeds_per_cell must be at least 1".into(),
            ));
        }
        for &(v, w) in &self.cells {
            if !(v > 0.0 && w > 0.0) {
                return Err(CoreError::InvalidConfig(format!(
                    "declarations must be positive, got ({v}, {w})"
                )));
            }
        }
        Ok(())
    }

    /// Reproducible per-(cell, seed-index) seed, independent of cell order.
    pub fn cell_seed(&self, v: f64, w: f64, seed_index: usize) -> u64 {
        let mut s = derive_seed(self.base_seed, v.to_bits());
        s = derive_seed(s, w.to_bits());
        derive_seed(s, seed_index as u64)
    }

    fn run_config(&self, v: f64, w: f64, seed_index: usize) -> RunConfig {
        let mk = |declared: f64| {
            let mut spec = AgentSpec::new(self.algorithm, declared);
            spec.eta = self.eta;
            spec.perturb_scale = self.perturb_scale;
            spec.recency_rho = self.recency_rho;
            spec
        };
        let mut cfg = RunConfig::new(
            self.rule.clone(),
            self.epsilon,
            vec![mk(v), mk(w)],
            self.true_values.clone(),
            self.horizon,
            self.cell_seed(v, w, seed_index),
        );
        cfg.burn_in_fraction = self.burn_in_fraction;
        cfg.snapshot_times = Some(Vec::new()); // sweeps skip snapshot tables
        cfg
    }
}

/// Aggregated statistics of one declaration cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceCell {
    pub v_declared: f64,
    pub w_declared: f64,
    pub seed_count: usize,
    /// Mean and standard error of user 1's true-value utility.
    pub u1_mean: f64,
    pub u1_se: f64,
    pub u2_mean: f64,
    pub u2_se: f64,
    pub revenue_mean: f64,
    /// Fraction of post-burn-in rounds won (top slot) by player 1.
    pub high_win_rate: f64,
    /// Fraction of post-burn-in rounds where player 2 bid above zero.
    pub nonzero_low_rate: f64,
    /// Populated when every run in the cell failed; the sweep continues.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PayoffSurface {
    pub cells: Vec<SurfaceCell>,
}

impl PayoffSurface {
    pub const CSV_HEADER: &'static str =
        "v_declared,w_declared,seed_count,u1_mean,u1_se,u2_mean,u2_se,revenue_mean,high_win_rate,nonzero_low_rate";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for c in &self.cells {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                c.v_declared,
                c.w_declared,
                c.seed_count,
                c.u1_mean,
                c.u1_se,
                c.u2_mean,
                c.u2_se,
                c.revenue_mean,
                c.high_win_rate,
                c.nonzero_low_rate
            ));
        }
        out
    }

    /// Cells where player 1's declaration equals `v` (a slice along w).
    pub fn slice_fixed_v(&self, v: f64) -> Vec<&SurfaceCell> {
        let mut out: Vec<&SurfaceCell> = self
            .cells
            .iter()
            .filter(|c| (c.v_declared - v).abs() < 1e-9)
            .collect();
        out.sort_by(|a, b| a.w_declared.partial_cmp(&b.w_declared).unwrap());
        out
    }

    pub fn slice_fixed_w(&self, w: f64) -> Vec<&SurfaceCell> {
        let mut out: Vec<&SurfaceCell> = self
            .cells
            .iter()
            .filter(|c| (c.w_declared - w).abs() < 1e-9)
            .collect();
        out.sort_by(|a, b| a.v_declared.partial_cmp(&b.v_declared).unwrap());
        out
    }

    pub fn find_cell(&self, v: f64, w: f64) -> Option<&SurfaceCell> {
        self.cells
            .iter()
            .find(|c| (c.v_declared - v).abs() < 1e-9 && (c.w_declared - w).abs() < 1e-9)
    }
}

/// Helper for 1-D slices: vary one player's declaration while the other is
/// fixed. `vary_player` is 0 (vary v) or 1 (vary w).
pub fn axis_cells(vary_player: usize, fixed_declaration: f64, axis: &[f64]) -> Vec<(f64, f64)> {
    axis.iter()
        .map(|&x| {
            if vary_player == 0 {
                (x, fixed_declaration)
            } else {
                (fixed_declaration, x)
            }
        })
        .collect()
}

/// Runs every (cell, seed) and aggregates user-view payoffs. Cell failures
/// are reported in the cell and do not abort the sweep.
pub fn sweep(config: &SweepConfig) -> Result<PayoffSurface> {
    config.validate()?;
    let jobs: Vec<(usize, usize)> = (0..config.cells.len())
        .flat_map(|c| (0..config.seeds_per_cell).map(move |s| (c, s)))
        .collect();

    #[derive(Clone)]
    struct RunStats {
        u1: f64,
        u2: f64,
        revenue: f64,
        high_win: f64,
        nonzero_low: f64,
    }

    let results: Vec<(usize, usize, std::result::Result<RunStats, String>)> = jobs
        .par_iter()
        .map(|&(c, s)| {
            let (v, w) = config.cells[c];
            let out = run(&config.run_config(v, w, s))
                .map(|record| RunStats {
                    u1: record.user_utils[0],
                    u2: record.user_utils[1],
                    revenue: record.revenue_avg,
                    high_win: record.win_rate[0],
                    nonzero_low: record.nonzero_bid_rate(1),
                })
                .map_err(|e| e.to_string());
            (c, s, out)
        })
        .collect();

    let mut per_cell: Vec<Vec<Option<std::result::Result<RunStats, String>>>> =
        vec![vec![None; config.seeds_per_cell]; config.cells.len()];
    for (c, s, r) in results {
        per_cell[c][s] = Some(r);
    }

    let cells = per_cell
        .into_iter()
        .enumerate()
        .map(|(c, seeds)| {
            let (v, w) = config.cells[c];
            let mut u1 = Vec::new();
            let mut u2 = Vec::new();
            let mut revenue = Vec::new();
            let mut high_win = Vec::new();
            let mut nonzero = Vec::new();
            let mut error = None;
            for r in seeds.into_iter().flatten() {
                match r {
                    Ok(stat) => {
                        u1.push(stat.u1);
                        u2.push(stat.u2);
                        revenue.push(stat.revenue);
                        high_win.push(stat.high_win);
                        nonzero.push(stat.nonzero_low);
                    }
                    Err(e) => error = Some(e),
                }
            }
            if u1.is_empty() {
                SurfaceCell {
                    v_declared: v,
                    w_declared: w,
                    seed_count: 0,
                    u1_mean: f64::NAN,
                    u1_se: f64::NAN,
                    u2_mean: f64::NAN,
                    u2_se: f64::NAN,
                    revenue_mean: f64::NAN,
                    high_win_rate: f64::NAN,
                    nonzero_low_rate: f64::NAN,
                    error,
                }
            } else {
                SurfaceCell {
                    v_declared: v,
                    w_declared: w,
                    seed_count: u1.len(),
                    u1_mean: mean(&u1),
                    u1_se: std_err(&u1),
                    u2_mean: mean(&u2),
                    u2_se: std_err(&u2),
                    revenue_mean: mean(&revenue),
                    high_win_rate: mean(&high_win),
                    nonzero_low_rate: mean(&nonzero),
                    error: None,
                }
            }
        })
        .collect();
    Ok(PayoffSurface { cells })
}

/// Empirical best response read off a sweep slice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestResponse {
    pub declaration: f64,
    pub utility: f64,
    /// False when the argmax is within one standard error of a neighbor on
    /// the slice (including exact ties).
    pub reliable: bool,
}

/// Argmax of `player`'s mean utility over the slice where the opponent
/// declares `opponent_declaration`.
pub fn best_response(
    surface: &PayoffSurface,
    player: usize,
    opponent_declaration: f64,
) -> Result<BestResponse> {
    if player > 1 {
        return Err(CoreError::InvalidConfig(format!("player {player} of 2")));
    }
    let slice = if player == 1 {
        surface.slice_fixed_v(opponent_declaration)
    } else {
        surface.slice_fixed_w(opponent_declaration)
    };
    let slice: Vec<&SurfaceCell> = slice.into_iter().filter(|c| c.error.is_none()).collect();
    if slice.is_empty() {
        return Err(CoreError::MissingData(format!(
            "no cells with the opponent declaring {opponent_declaration}"
        )));
    }
    let util = |c: &SurfaceCell| if player == 0 { c.u1_mean } else { c.u2_mean };
    let se = |c: &SurfaceCell| if player == 0 { c.u1_se } else { c.u2_se };
    let decl = |c: &SurfaceCell| {
        if player == 0 {
            c.v_declared
        } else {
            c.w_declared
        }
    };

    let mut best = 0usize;
    for (k, c) in slice.iter().enumerate() {
        if util(c) > util(slice[best]) {
            best = k;
        }
    }
    let mut reliable = true;
    for neighbor in [best.wrapping_sub(1), best + 1] {
        if let Some(c) = slice.get(neighbor) {
            let gap = util(slice[best]) - util(c);
            if gap <= se(slice[best]).max(se(c)) {
                reliable = false;
            }
        }
    }
    Ok(BestResponse {
        declaration: decl(slice[best]),
        utility: util(slice[best]),
        reliable,
    })
}

/// Does no unilateral deviation from `candidate` on the sweep grid improve
/// the deviator's mean utility by more than `epsilon` plus two standard
/// errors (of the comparison)?
pub fn check_metagame_equilibrium(
    surface: &PayoffSurface,
    candidate: (f64, f64),
    epsilon: f64,
) -> Result<bool> {
    let (v0, w0) = candidate;
    let base = surface
        .find_cell(v0, w0)
        .ok_or_else(|| CoreError::MissingData(format!("candidate cell ({v0}, {w0}) missing")))?;
    if base.error.is_some() {
        return Err(CoreError::MissingData("candidate cell failed".into()));
    }

    let v_deviations: Vec<&SurfaceCell> = surface
        .slice_fixed_w(w0)
        .into_iter()
        .filter(|c| c.error.is_none())
        .collect();
    let w_deviations: Vec<&SurfaceCell> = surface
        .slice_fixed_v(v0)
        .into_iter()
        .filter(|c| c.error.is_none())
        .collect();
    if v_deviations.len() < 2 || w_deviations.len() < 2 {
        return Err(CoreError::MissingData(
            "need at least one unilateral deviation per player on the grid".into(),
        ));
    }

    for c in v_deviations {
        let gain = c.u1_mean - base.u1_mean;
        let band = 2.0 * (c.u1_se * c.u1_se + base.u1_se * base.u1_se).sqrt();
        if gain > epsilon + band {
            return Ok(false);
        }
    }
    for c in w_deviations {
        let gain = c.u2_mean - base.u2_mean;
        let band = 2.0 * (c.u2_se * c.u2_se + base.u2_se * base.u2_se).sqrt();
        if gain > epsilon + band {
            return Ok(false);
        }
    }
    Ok(true)
}
