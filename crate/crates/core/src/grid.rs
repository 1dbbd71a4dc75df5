//! Discrete bid grids and probability tables over bids.
//!
//! All bids live on a money grid of multiples of `epsilon` and are handled
//! internally as integer indices (index `k` is the amount `k * epsilon`).
//! Conversion to real money happens only at I/O boundaries, so equal bids
//! are detected exactly and the grid never drifts.

use std::io::{BufRead, Write};

use crate::error::{CoreError, Result};

/// Tolerance for checking that a probability table is normalized.
pub const NORMALIZATION_TOL: f64 = 1e-9;

/// Default support threshold for empirical distributions.
pub const DEFAULT_SUPPORT_TOL: f64 = 1e-6;

/// A money grid: bids are `0, eps, 2*eps, ..., max_bid`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BidGrid {
    epsilon: f64,
    levels: usize,
}

impl BidGrid {
    /// Builds a grid from the step size and the top bid, which must be an
    /// exact multiple of the step.
    pub fn new(epsilon: f64, max_bid: f64) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(CoreError::InvalidConfig(format!(
                "epsilon must be positive, got {epsilon}"
            )));
        }
        let steps = max_bid / epsilon;
        let rounded = steps.round();
        if !(max_bid > 0.0) || (steps - rounded).abs() > 1e-6 {
            return Err(CoreError::InvalidConfig(format!(
                "max_bid {max_bid} is not a positive multiple of epsilon {epsilon}"
            )));
        }
        Self::with_levels(epsilon, rounded as usize + 1)
    }

    /// Builds a grid with an explicit number of levels (`levels - 1` steps).
    pub fn with_levels(epsilon: f64, levels: usize) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(CoreError::InvalidConfig(format!(
                "epsilon must be positive, got {epsilon}"
            )));
        }
        if levels < 2 {
            return Err(CoreError::InvalidConfig(format!(
                "a grid needs at least 2 levels, got {levels}"
            )));
        }
        Ok(Self { epsilon, levels })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn max_bid(&self) -> f64 {
        (self.levels - 1) as f64 * self.epsilon
    }

    /// Money amount of a grid index.
    pub fn money(&self, index: usize) -> f64 {
        index as f64 * self.epsilon
    }

    /// Index of a money amount that must lie on the grid (within 1e-6 of a
    /// grid point, relative to the step).
    pub fn index_of(&self, money: f64) -> Result<usize> {
        let steps = money / self.epsilon;
        let rounded = steps.round();
        if (steps - rounded).abs() > 1e-6 || rounded < 0.0 {
            return Err(CoreError::InvalidConfig(format!(
                "amount {money} is not on the grid with step {}",
                self.epsilon
            )));
        }
        let idx = rounded as usize;
        if idx >= self.levels {
            return Err(CoreError::InvalidConfig(format!(
                "amount {money} exceeds the grid cap {}",
                self.max_bid()
            )));
        }
        Ok(idx)
    }
}

/// A probability distribution over one player's grid bids.
#[derive(Debug, Clone, PartialEq)]
pub struct Marginal {
    grid: BidGrid,
    probs: Vec<f64>,
}

impl Marginal {
    pub fn new(grid: BidGrid, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != grid.levels() {
            return Err(CoreError::DimensionMismatch(format!(
                "probability vector has {} entries for a {}-level grid",
                probs.len(),
                grid.levels()
            )));
        }
        let mut total = 0.0;
        for &p in &probs {
            if !(p >= 0.0) {
                return Err(CoreError::ContractViolation(format!(
                    "negative probability {p}"
                )));
            }
            total += p;
        }
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(CoreError::ContractViolation(format!(
                "probabilities sum to {total}, expected 1"
            )));
        }
        Ok(Self { grid, probs })
    }

    pub fn from_counts(grid: BidGrid, counts: &[u64]) -> Result<Self> {
        if counts.len() != grid.levels() {
            return Err(CoreError::DimensionMismatch(format!(
                "count vector has {} entries for a {}-level grid",
                counts.len(),
                grid.levels()
            )));
        }
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(CoreError::ContractViolation(
                "cannot normalize an empty count table".into(),
            ));
        }
        let probs = counts.iter().map(|&c| c as f64 / total as f64).collect();
        Self::new(grid, probs)
    }

    pub fn point_mass(grid: BidGrid, index: usize) -> Result<Self> {
        if index >= grid.levels() {
            return Err(CoreError::DimensionMismatch(format!(
                "index {index} outside a {}-level grid",
                grid.levels()
            )));
        }
        let mut probs = vec![0.0; grid.levels()];
        probs[index] = 1.0;
        Self::new(grid, probs)
    }

    pub fn uniform(grid: BidGrid) -> Self {
        let p = 1.0 / grid.levels() as f64;
        Self {
            grid,
            probs: vec![p; grid.levels()],
        }
    }

    pub fn grid(&self) -> &BidGrid {
        &self.grid
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Cumulative distribution at each grid index.
    pub fn cdf(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect()
    }

    /// Mean bid in money units.
    pub fn mean(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(k, p)| self.grid.money(k) * p)
            .sum()
    }
}

/// A dense probability table over tuples of grid bids, one axis per player.
#[derive(Debug, Clone, PartialEq)]
pub struct JointBidDistribution {
    grids: Vec<BidGrid>,
    probs: Vec<f64>, // row-major over index tuples
}

impl JointBidDistribution {
    pub fn new(grids: Vec<BidGrid>, probs: Vec<f64>) -> Result<Self> {
        if grids.len() < 2 {
            return Err(CoreError::InvalidConfig(
                "a joint distribution needs at least two players".into(),
            ));
        }
        let cells: usize = grids.iter().map(|g| g.levels()).product();
        if probs.len() != cells {
            return Err(CoreError::DimensionMismatch(format!(
                "table has {} cells, grids imply {}",
                probs.len(),
                cells
            )));
        }
        let mut total = 0.0;
        for &p in &probs {
            if !(p >= 0.0) {
                return Err(CoreError::ContractViolation(format!(
                    "negative probability {p}"
                )));
            }
            total += p;
        }
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(CoreError::ContractViolation(format!(
                "joint table mass is {total}, expected 1"
            )));
        }
        Ok(Self { grids, probs })
    }

    /// Two-player table from sparse `(i, j, prob)` cells.
    pub fn two_player(grid_a: BidGrid, grid_b: BidGrid, cells: &[(usize, usize, f64)]) -> Result<Self> {
        let cols = grid_b.levels();
        let mut probs = vec![0.0; grid_a.levels() * cols];
        for &(i, j, p) in cells {
            if i >= grid_a.levels() || j >= grid_b.levels() {
                return Err(CoreError::DimensionMismatch(format!(
                    "cell ({i},{j}) outside {}x{} table",
                    grid_a.levels(),
                    grid_b.levels()
                )));
            }
            probs[i * cols + j] += p;
        }
        Self::new(vec![grid_a, grid_b], probs)
    }

    pub fn from_counts(grids: Vec<BidGrid>, counts: &[u64]) -> Result<Self> {
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(CoreError::ContractViolation(
                "cannot normalize an empty count table".into(),
            ));
        }
        let probs = counts.iter().map(|&c| c as f64 / total as f64).collect();
        Self::new(grids, probs)
    }

    pub fn num_players(&self) -> usize {
        self.grids.len()
    }

    pub fn grids(&self) -> &[BidGrid] {
        &self.grids
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Probability of a two-player cell.
    pub fn prob2(&self, i: usize, j: usize) -> f64 {
        debug_assert_eq!(self.grids.len(), 2);
        self.probs[i * self.grids[1].levels() + j]
    }

    /// Marginal distribution of one player.
    pub fn marginal(&self, player: usize) -> Result<Marginal> {
        if player >= self.grids.len() {
            return Err(CoreError::DimensionMismatch(format!(
                "player {player} of {}",
                self.grids.len()
            )));
        }
        let shape: Vec<usize> = self.grids.iter().map(|g| g.levels()).collect();
        let mut acc = vec![0.0; shape[player]];
        let stride: usize = shape[player + 1..].iter().product();
        let block = stride * shape[player];
        for (idx, &p) in self.probs.iter().enumerate() {
            let k = (idx % block) / stride;
            acc[k] += p;
        }
        // Empirical tables can accumulate rounding; renormalize defensively
        // is not needed because mass is preserved exactly by summation order.
        Marginal::new(self.grids[player], acc)
    }

    /// Writes the sparse CSV form: comment header with grid metadata, then
    /// `i,j,prob` rows for nonzero cells (two-player tables only).
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        assert_eq!(self.grids.len(), 2, "CSV form is two-player");
        writeln!(out, "# epsilon_1 = {}", self.grids[0].epsilon())?;
        writeln!(out, "# max_bid_1 = {}", self.grids[0].max_bid())?;
        writeln!(out, "# epsilon_2 = {}", self.grids[1].epsilon())?;
        writeln!(out, "# max_bid_2 = {}", self.grids[1].max_bid())?;
        writeln!(out, "i,j,prob")?;
        let cols = self.grids[1].levels();
        for (idx, &p) in self.probs.iter().enumerate() {
            if p > 0.0 {
                writeln!(out, "{},{},{}", idx / cols, idx % cols, p)?;
            }
        }
        Ok(())
    }

    /// Parses the CSV form written by [`write_csv`](Self::write_csv).
    pub fn read_csv<R: BufRead>(reader: R) -> Result<Self> {
        let mut epsilon = [None::<f64>; 2];
        let mut max_bid = [None::<f64>; 2];
        let mut cells: Vec<(usize, usize, f64)> = Vec::new();
        let mut saw_header = false;

        for (lineno, line) in reader.lines().enumerate() {
            let line_num = lineno + 1;
            let line = line.map_err(|e| CoreError::Parse {
                line: line_num,
                message: e.to_string(),
            })?;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            if let Some(rest) = trimmed.strip_prefix('#') {
                let mut parts = rest.splitn(2, '=');
                let key = parts.next().unwrap_or("").trim();
                let value = parts.next().map(str::trim);
                let parsed = value.and_then(|v| v.parse::<f64>().ok());
                match (key, parsed) {
                    ("epsilon_1", Some(v)) => epsilon[0] = Some(v),
                    ("epsilon_2", Some(v)) => epsilon[1] = Some(v),
                    ("max_bid_1", Some(v)) => max_bid[0] = Some(v),
                    ("max_bid_2", Some(v)) => max_bid[1] = Some(v),
                    _ => {
                        return Err(CoreError::Parse {
                            line: line_num,
                            message: format!("unrecognized metadata line: {trimmed}"),
                        })
                    }
                }
                continue;
            }
            if !saw_header {
                if trimmed != "i,j,prob" {
                    return Err(CoreError::Parse {
                        line: line_num,
                        message: format!("expected header 'i,j,prob', got '{trimmed}'"),
                    });
                }
                saw_header = true;
                continue;
            }
            let fields: Vec<&str> = trimmed.split(',').collect();
            if fields.len() != 3 {
                return Err(CoreError::Parse {
                    line: line_num,
                    message: format!("expected 3 fields, got {}", fields.len()),
                });
            }
            let i = fields[0].parse::<usize>().map_err(|e| CoreError::Parse {
                line: line_num,
                message: format!("bad index '{}': {e}", fields[0]),
            })?;
            let j = fields[1].parse::<usize>().map_err(|e| CoreError::Parse {
                line: line_num,
                message: format!("bad index '{}': {e}", fields[1]),
            })?;
            let p = fields[2].parse::<f64>().map_err(|e| CoreError::Parse {
                line: line_num,
                message: format!("bad probability '{}': {e}", fields[2]),
            })?;
            cells.push((i, j, p));
        }

        let (Some(e1), Some(e2), Some(m1), Some(m2)) = (epsilon[0], epsilon[1], max_bid[0], max_bid[1])
        else {
            return Err(CoreError::Parse {
                line: 0,
                message: "missing grid metadata (epsilon_*/max_bid_*)".into(),
            });
        };
        if !saw_header {
            return Err(CoreError::Parse {
                line: 0,
                message: "missing 'i,j,prob' header".into(),
            });
        }
        let grid_a = BidGrid::new(e1, m1)?;
        let grid_b = BidGrid::new(e2, m2)?;
        Self::two_player(grid_a, grid_b, &cells)
    }
}

/// A pair of per-player support index sets of a two-player joint table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupportPair {
    pub support_a: Vec<usize>,
    pub support_b: Vec<usize>,
}

/// L1 distance between two joint tables on identical grids.
///
/// Zero iff equal; bounds any cell-wise deviation between the tables.
pub fn l1_distance(a: &JointBidDistribution, b: &JointBidDistribution) -> Result<f64> {
    if a.grids != b.grids {
        return Err(CoreError::GridMismatch(
            "joint distributions live on different grids".into(),
        ));
    }
    Ok(a.probs
        .iter()
        .zip(&b.probs)
        .map(|(x, y)| (x - y).abs())
        .sum())
}

/// Per-player supports of a two-player joint table: an index is supported
/// when its marginal mass exceeds `support_tol`.
pub fn support_of(d: &JointBidDistribution, support_tol: f64) -> Result<SupportPair> {
    if d.num_players() != 2 {
        return Err(CoreError::Unsupported(
            "support extraction is defined for two players".into(),
        ));
    }
    if !(0.0..1.0).contains(&support_tol) {
        return Err(CoreError::InvalidConfig(format!(
            "support_tol must be in [0, 1), got {support_tol}"
        )));
    }
    let collect = |m: Marginal| -> Vec<usize> {
        m.probs()
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > support_tol)
            .map(|(k, _)| k)
            .collect()
    };
    Ok(SupportPair {
        support_a: collect(d.marginal(0)?),
        support_b: collect(d.marginal(1)?),
    })
}

/// Kolmogorov-Smirnov distance between a grid marginal and a continuous CDF,
/// with the usual continuity correction for discrete data: at each grid
/// point the empirical CDF is taken mid-jump before comparing.
pub fn ks_distance<F: Fn(f64) -> f64>(empirical: &Marginal, cdf: F) -> f64 {
    let mut acc = 0.0;
    let mut worst: f64 = 0.0;
    for (k, &p) in empirical.probs().iter().enumerate() {
        let mid = acc + 0.5 * p;
        acc += p;
        let gap = (mid - cdf(empirical.grid().money(k))).abs();
        worst = worst.max(gap);
    }
    worst
}
