//! Repeated-auction dynamics: run T rounds of agents bidding under a rule,
//! with full logs, empirical distributions, regret, and convergence
//! diagnostics. A run is strictly sequential and deterministic given its
//! seed; independent runs parallelize at the caller.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::agents::{Agent, AgentConfig, Algorithm, AuditProbe, MeanBasedAuditor, MeanBasedReport, ScriptedSchedule};
use crate::auction::AuctionRule;
use crate::error::{CoreError, Result};
use crate::grid::{BidGrid, JointBidDistribution, Marginal, l1_distance};
use crate::rng::{derive_seed, StreamRng};

/// Per-agent section of a run configuration (money units; the engine
/// translates onto the grid).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub algorithm: Algorithm,
    pub declared_value: f64,
    pub eta: Option<f64>,
    pub perturb_scale: Option<f64>,
    pub recency_rho: Option<f64>,
    pub seed: Option<u64>,
    pub init_weights: Option<Vec<f64>>,
    pub schedule: Option<ScriptedSchedule>,
    pub fallback: Option<Algorithm>,
}

impl AgentSpec {
    pub fn new(algorithm: Algorithm, declared_value: f64) -> Self {
        Self {
            algorithm,
            declared_value,
            eta: None,
            perturb_scale: None,
            recency_rho: None,
            seed: None,
            init_weights: None,
            schedule: None,
            fallback: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub rule: AuctionRule,
    pub epsilon: f64,
    pub agents: Vec<AgentSpec>,
    /// True value per user; declared values live in `agents`.
    pub true_values: Vec<f64>,
    pub horizon: usize,
    /// Initial fraction of rounds excluded from long-run statistics.
    pub burn_in_fraction: f64,
    /// Running-average window for bid-dynamics plots.
    pub window: usize,
    pub seed: u64,
    /// Times at which `p_t^T` is recorded; default 50 log-spaced values.
    pub snapshot_times: Option<Vec<usize>>,
    /// Enable the mean-based audit at this gamma(T).
    pub audit_gamma: Option<f64>,
}

/// Default learning-rate multiplier for MWLinear/Hedge agents, calibrated
/// on the second-price and position-auction reference dynamics.
pub const DEFAULT_ETA_MULTIPLIER: f64 = 4.5;

/// Sha-256 hex digest of a value's canonical JSON form. Stable under any
/// reordering of the config-file text it was parsed from.
pub fn digest_value<T: serde::Serialize>(value: &T) -> String {
    let canon = serde_json::to_string(value).expect("value serializes");
    let mut hasher = Sha256::new();
    hasher.update(canon.as_bytes());
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

impl RunConfig {
    pub fn new(
        rule: AuctionRule,
        epsilon: f64,
        agents: Vec<AgentSpec>,
        true_values: Vec<f64>,
        horizon: usize,
        seed: u64,
    ) -> Self {
        Self {
            rule,
            epsilon,
            agents,
            true_values,
            horizon,
            burn_in_fraction: 0.05,
            window: 100,
            seed,
            snapshot_times: None,
            audit_gamma: None,
        }
    }

    /// Stable digest of the resolved configuration (independent of any
    /// config-file text ordering).
    pub fn digest(&self) -> String {
        digest_value(self)
    }

    fn validate(&self) -> Result<()> {
        if self.agents.len() < 2 {
            return Err(CoreError::InvalidConfig(
                "a run needs at least two bidders".into(),
            ));
        }
        if self.true_values.len() != self.agents.len() {
            return Err(CoreError::InvalidConfig(format!(
                "{} true values for {} agents",
                self.true_values.len(),
                self.agents.len()
            )));
        }
        if self.horizon == 0 {
            return Err(CoreError::InvalidConfig("horizon must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.burn_in_fraction) {
            return Err(CoreError::InvalidConfig(
                "burn_in_fraction must lie in [0, 1)".into(),
            ));
        }
        if self.window == 0 {
            return Err(CoreError::InvalidConfig("window must be at least 1".into()));
        }
        for tv in &self.true_values {
            if !tv.is_finite() || *tv < 0.0 {
                return Err(CoreError::InvalidConfig(format!("bad true value {tv}")));
            }
        }
        if let Some(g) = self.audit_gamma {
            if !(g > 0.0) {
                return Err(CoreError::InvalidConfig("audit_gamma must be positive".into()));
            }
        }
        Ok(())
    }

    fn snapshot_schedule(&self) -> Vec<usize> {
        let t_max = self.horizon;
        let mut times: Vec<usize> = match &self.snapshot_times {
            Some(ts) => ts.clone(),
            None => {
                let n = 50usize;
                let ln_t = (t_max as f64).ln();
                (0..n)
                    .map(|k| {
                        let x = (ln_t * k as f64 / (n - 1) as f64).exp();
                        x.round().clamp(1.0, t_max as f64) as usize
                    })
                    .collect()
            }
        };
        times.retain(|&t| t >= 1 && t <= t_max);
        times.sort_unstable();
        times.dedup();
        times
    }

    fn agent_config(&self, i: usize) -> Result<AgentConfig> {
        let spec = &self.agents[i];
        if !(spec.declared_value > 0.0) {
            return Err(CoreError::InvalidConfig(format!(
                "agent {i} declared value must be positive"
            )));
        }
        let grid = BidGrid::new(self.epsilon, spec.declared_value)?;
        if grid.levels() > u16::MAX as usize {
            return Err(CoreError::InvalidConfig(format!(
                "agent {i} grid has {} levels; the log format caps at {}",
                grid.levels(),
                u16::MAX
            )));
        }
        let mut cfg = AgentConfig::new(spec.algorithm, grid, self.horizon, match spec.seed {
            Some(s) => s,
            None => derive_seed(self.seed, i as u64 + 1),
        });
        // Default learning rate: sqrt(ln K / T) scaled so that every agent
        // steps in a shared utility unit (the largest declared value), with
        // the calibrated multiplier.
        cfg.eta = spec.eta.or_else(|| {
            let max_declared = self
                .agents
                .iter()
                .map(|a| a.declared_value)
                .fold(0.0f64, f64::max);
            Some(
                DEFAULT_ETA_MULTIPLIER
                    * ((grid.levels() as f64).ln() / self.horizon as f64).sqrt()
                    * (spec.declared_value / max_declared),
            )
        });
        if let Some(ps) = spec.perturb_scale {
            cfg.perturb_scale = ps;
        }
        cfg.recency_rho = spec.recency_rho;
        cfg.init_weights = spec.init_weights.clone();
        cfg.schedule = spec.schedule.clone();
        if let Some(f) = spec.fallback {
            cfg.fallback = f;
        }
        Ok(cfg)
    }
}

/// Complete record of one run.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub config_digest: String,
    pub seed: u64,
    pub horizon: usize,
    pub burn_in_rounds: usize,
    pub epsilon: f64,
    pub rule: AuctionRule,
    pub agent_grids: Vec<BidGrid>,
    pub declared_values: Vec<f64>,
    pub true_values: Vec<f64>,

    /// Round-major bid indices, `bid_log[t * n + i]`.
    pub bid_log: Vec<u16>,
    /// Slot per bidder per round; `u8::MAX` when unassigned.
    pub slot_log: Vec<u8>,
    /// Price index per bidder per round (0 when unassigned).
    pub price_log: Vec<u16>,

    /// Post-burn-in empirical distribution over bid tuples.
    pub joint_empirical: JointBidDistribution,
    /// Running empirical distributions `p_t^T` at snapshot times
    /// (all rounds up to `t`, burn-in included).
    pub snapshots: Vec<(usize, JointBidDistribution)>,

    /// Post-burn-in mean per-round utility per agent at declared values.
    pub agent_utils: Vec<f64>,
    /// Post-burn-in mean per-round utility per user at true values.
    pub user_utils: Vec<f64>,
    pub agent_utils_all: Vec<f64>,
    pub user_utils_all: Vec<f64>,
    pub revenue_avg: f64,
    pub revenue_avg_all: f64,
    /// Mean price paid by the top-slot winner (money).
    pub winner_price_mean: f64,
    pub winner_price_mean_all: f64,
    /// Post-burn-in fraction of rounds each agent held the top slot.
    pub win_rate: Vec<f64>,

    /// Hindsight regret per agent (money).
    pub regret: Vec<f64>,
    /// Cumulative counterfactual utility per agent per own bid (money).
    pub cum_counterfactual: Vec<Vec<f64>>,
    /// Cumulative expected-tie utility of the bids actually played (money).
    pub played_counterfactual_total: Vec<f64>,
    /// Realized (sampled-tie) total utility per agent, declared view.
    pub realized_total: Vec<f64>,

    pub audits: Option<Vec<MeanBasedReport>>,
}

impl RunRecord {
    pub fn num_agents(&self) -> usize {
        self.agent_grids.len()
    }

    pub fn bid(&self, t: usize, agent: usize) -> usize {
        self.bid_log[t * self.num_agents() + agent] as usize
    }

    pub fn slot(&self, t: usize, agent: usize) -> Option<usize> {
        let s = self.slot_log[t * self.num_agents() + agent];
        (s != u8::MAX).then_some(s as usize)
    }

    pub fn price_index(&self, t: usize, agent: usize) -> usize {
        self.price_log[t * self.num_agents() + agent] as usize
    }

    /// Empirical bid marginal of one agent.
    pub fn marginal(&self, agent: usize, post_burn_in: bool) -> Result<Marginal> {
        let grid = self.agent_grids[agent];
        let start = if post_burn_in { self.burn_in_rounds } else { 0 };
        let mut counts = vec![0u64; grid.levels()];
        for t in start..self.horizon {
            counts[self.bid(t, agent)] += 1;
        }
        Marginal::from_counts(grid, &counts)
    }

    /// Post-burn-in fraction of rounds where the agent bid above zero.
    pub fn nonzero_bid_rate(&self, agent: usize) -> f64 {
        let start = self.burn_in_rounds;
        let total = self.horizon - start;
        let nonzero = (start..self.horizon).filter(|&t| self.bid(t, agent) > 0).count();
        nonzero as f64 / total as f64
    }

    /// Post-burn-in fraction of rounds with |bid_1 - bid_2| <= eps_steps
    /// (two-player runs).
    pub fn near_diagonal_rate(&self, eps_steps: usize) -> f64 {
        assert_eq!(self.num_agents(), 2);
        let start = self.burn_in_rounds;
        let total = self.horizon - start;
        let near = (start..self.horizon)
            .filter(|&t| {
                let a = self.bid(t, 0) as i64;
                let b = self.bid(t, 1) as i64;
                (a - b).unsigned_abs() as usize <= eps_steps
            })
            .count();
        near as f64 / total as f64
    }

    /// Post-burn-in empirical distribution of the round's highest bid
    /// (two-player runs on a common grid).
    pub fn high_bid_marginal(&self) -> Result<Marginal> {
        if self.num_agents() != 2 || self.agent_grids[0] != self.agent_grids[1] {
            return Err(CoreError::Unsupported(
                "high-bid marginal needs two players on one grid".into(),
            ));
        }
        let grid = self.agent_grids[0];
        let mut counts = vec![0u64; grid.levels()];
        for t in self.burn_in_rounds..self.horizon {
            counts[self.bid(t, 0).max(self.bid(t, 1))] += 1;
        }
        Marginal::from_counts(grid, &counts)
    }

    /// Rebuilds the joint table from the bid log (consistency oracle).
    pub fn recompute_joint(&self, post_burn_in: bool) -> Result<JointBidDistribution> {
        let shape: Vec<usize> = self.agent_grids.iter().map(|g| g.levels()).collect();
        let cells: usize = shape.iter().product();
        let mut counts = vec![0u64; cells];
        let start = if post_burn_in { self.burn_in_rounds } else { 0 };
        for t in start..self.horizon {
            let mut idx = 0usize;
            for (i, levels) in shape.iter().enumerate() {
                idx = idx * levels + self.bid(t, i).min(levels - 1);
            }
            counts[idx] += 1;
        }
        JointBidDistribution::from_counts(self.agent_grids.clone(), &counts)
    }
}

/// Runs the repeated auction described by `config`.
pub fn run(config: &RunConfig) -> Result<RunRecord> {
    config.validate()?;
    let n = config.agents.len();
    let eps = config.epsilon;
    let horizon = config.horizon;
    let burn_in_rounds = (config.burn_in_fraction * horizon as f64).floor() as usize;

    let mut agents: Vec<Agent> = (0..n)
        .map(|i| Agent::new(config.agent_config(i)?))
        .collect::<Result<_>>()?;
    let grids: Vec<BidGrid> = agents.iter().map(|a| a.config().grid).collect();
    let declared_idx: Vec<usize> = agents.iter().map(|a| a.config().declared_index()).collect();
    let declared_money: Vec<f64> = agents.iter().map(|a| a.config().declared_money()).collect();

    let mut tie_rng = StreamRng::new(derive_seed(config.seed, 0));
    let snapshot_times = config.snapshot_schedule();
    let shape: Vec<usize> = grids.iter().map(|g| g.levels()).collect();
    let cells: usize = shape.iter().product();

    let mut counts_all = vec![0u64; cells];
    let mut counts_post = vec![0u64; cells];
    let mut snapshots: Vec<(usize, JointBidDistribution)> = Vec::with_capacity(snapshot_times.len());
    let mut next_snapshot = 0usize;

    let mut bid_log: Vec<u16> = Vec::with_capacity(horizon * n);
    let mut slot_log: Vec<u8> = Vec::with_capacity(horizon * n);
    let mut price_log: Vec<u16> = Vec::with_capacity(horizon * n);

    let mut agent_sum_all = vec![0.0f64; n];
    let mut user_sum_all = vec![0.0f64; n];
    let mut agent_sum_post = vec![0.0f64; n];
    let mut user_sum_post = vec![0.0f64; n];
    let mut revenue_all = 0.0f64;
    let mut revenue_post = 0.0f64;
    let mut winner_price_all = 0.0f64;
    let mut winner_price_post = 0.0f64;
    let mut win_counts = vec![0u64; n];

    let mut cum_cf: Vec<Vec<f64>> = grids.iter().map(|g| vec![0.0; g.levels()]).collect();
    let mut played_cf = vec![0.0f64; n];
    let mut realized = vec![0.0f64; n];

    let mut auditors: Option<Vec<MeanBasedAuditor>> = config.audit_gamma.map(|g| {
        grids
            .iter()
            .map(|grid| MeanBasedAuditor::new(grid.levels(), g, horizon))
            .collect()
    });

    let mut bids = vec![0usize; n];
    let mut others: Vec<usize> = Vec::with_capacity(n - 1);
    let mut cf_buf: Vec<f64> = Vec::new();
    let mut norm_buf: Vec<f64> = Vec::new();

    for t in 0..horizon {
        for (i, agent) in agents.iter_mut().enumerate() {
            let b = agent.sample_bid()?;
            assert!(b <= declared_idx[i], "agent {i} overbid at round {t}");
            bids[i] = b;
        }
        let outcome = config
            .rule
            .resolve(&bids, &declared_idx, eps, tie_rng.at_round(t as u64))?;

        let post = t >= burn_in_rounds;
        let mut winner_price = 0.0;
        for i in 0..n {
            bid_log.push(bids[i] as u16);
            slot_log.push(outcome.slots[i].map_or(u8::MAX, |s| s as u8));
            price_log.push(outcome.price_idx[i] as u16);

            let declared_util = outcome.utilities[i];
            let user_util = match outcome.slots[i] {
                Some(s) => {
                    config.rule.ctrs().get(s).copied().unwrap_or(0.0)
                        * (config.true_values[i] - outcome.price_idx[i] as f64 * eps)
                }
                None => 0.0,
            };
            agent_sum_all[i] += declared_util;
            user_sum_all[i] += user_util;
            realized[i] += declared_util;
            if post {
                agent_sum_post[i] += declared_util;
                user_sum_post[i] += user_util;
            }
            if outcome.slots[i] == Some(0) {
                winner_price = outcome.price_idx[i] as f64 * eps;
                if post {
                    win_counts[i] += 1;
                }
            }
        }
        revenue_all += outcome.revenue;
        winner_price_all += winner_price;
        if post {
            revenue_post += outcome.revenue;
            winner_price_post += winner_price;
        }

        let mut cell = 0usize;
        for (i, levels) in shape.iter().enumerate() {
            cell = cell * levels + bids[i];
        }
        counts_all[cell] += 1;
        if post {
            counts_post[cell] += 1;
        }

        for i in 0..n {
            others.clear();
            others.extend(bids.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &b)| b));
            config
                .rule
                .counterfactual_utilities(&others, declared_idx[i], &grids[i], &mut cf_buf);
            for (acc, &u) in cum_cf[i].iter_mut().zip(&cf_buf) {
                *acc += u;
            }
            played_cf[i] += cf_buf[bids[i]];

            if let Some(auds) = auditors.as_mut() {
                norm_buf.clear();
                norm_buf.extend(cf_buf.iter().map(|u| u / declared_money[i]));
                match agents[i].action_probabilities() {
                    Some(probs) => auds[i].observe_round(AuditProbe::Mixed(&probs), &norm_buf),
                    None => auds[i].observe_round(AuditProbe::Sampled(bids[i]), &norm_buf),
                }
            }
            agents[i].update(&cf_buf, &others)?;
        }

        if next_snapshot < snapshot_times.len() && t + 1 == snapshot_times[next_snapshot] {
            snapshots.push((
                t + 1,
                JointBidDistribution::from_counts(grids.clone(), &counts_all)?,
            ));
            next_snapshot += 1;
        }
    }

    let post_rounds = (horizon - burn_in_rounds) as f64;
    let all_rounds = horizon as f64;
    let joint_empirical = JointBidDistribution::from_counts(grids.clone(), &counts_post)?;

    let regret: Vec<f64> = (0..n)
        .map(|i| {
            let best = cum_cf[i].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            best - played_cf[i]
        })
        .collect();

    Ok(RunRecord {
        config_digest: config.digest(),
        seed: config.seed,
        horizon,
        burn_in_rounds,
        epsilon: eps,
        rule: config.rule.clone(),
        agent_grids: grids,
        declared_values: declared_money,
        true_values: config.true_values.clone(),
        bid_log,
        slot_log,
        price_log,
        joint_empirical,
        snapshots,
        agent_utils: agent_sum_post.iter().map(|s| s / post_rounds).collect(),
        user_utils: user_sum_post.iter().map(|s| s / post_rounds).collect(),
        agent_utils_all: agent_sum_all.iter().map(|s| s / all_rounds).collect(),
        user_utils_all: user_sum_all.iter().map(|s| s / all_rounds).collect(),
        revenue_avg: revenue_post / post_rounds,
        revenue_avg_all: revenue_all / all_rounds,
        winner_price_mean: winner_price_post / post_rounds,
        winner_price_mean_all: winner_price_all / all_rounds,
        win_rate: win_counts.iter().map(|&c| c as f64 / post_rounds).collect(),
        regret,
        cum_counterfactual: cum_cf,
        played_counterfactual_total: played_cf,
        realized_total: realized,
        audits: auditors.map(|auds| auds.iter().map(|a| a.report()).collect()),
    })
}

/// Hindsight regret of one player: best fixed bid's cumulative
/// counterfactual utility minus the cumulative utility of the bids played.
pub fn regret_of(record: &RunRecord, player: usize) -> f64 {
    let best = record.cum_counterfactual[player]
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    best - record.played_counterfactual_total[player]
}

/// Distances of the running empirical distribution to the final post-burn-in
/// distribution at each snapshot time.
pub fn convergence_profile(record: &RunRecord) -> Vec<(usize, f64)> {
    record
        .snapshots
        .iter()
        .map(|(t, p)| {
            (
                *t,
                l1_distance(p, &record.joint_empirical).expect("snapshots share grids"),
            )
        })
        .collect()
}

/// Sliding windowed mean of a series; output has `len - window + 1` entries.
pub fn windowed_mean(xs: &[f64], window: usize) -> Result<Vec<f64>> {
    if window == 0 {
        return Err(CoreError::InvalidConfig("window must be at least 1".into()));
    }
    if window > xs.len() {
        return Err(CoreError::InvalidConfig(format!(
            "window {window} exceeds series length {}",
            xs.len()
        )));
    }
    let mut out = Vec::with_capacity(xs.len() - window + 1);
    let mut acc: f64 = xs[..window].iter().sum();
    out.push(acc / window as f64);
    for t in window..xs.len() {
        acc += xs[t] - xs[t - window];
        out.push(acc / window as f64);
    }
    Ok(out)
}

/// Per-agent running-average bid series in money units.
pub fn running_average(record: &RunRecord, window: usize) -> Result<Vec<Vec<f64>>> {
    (0..record.num_agents())
        .map(|i| {
            let series: Vec<f64> = (0..record.horizon)
                .map(|t| record.agent_grids[i].money(record.bid(t, i)))
                .collect();
            windowed_mean(&series, window)
        })
        .collect()
}

/// Replays a run with the mean-based audit enabled; determinism makes the
/// replay identical to the original run.
pub fn audit_run(config: &RunConfig, gamma: f64) -> Result<Vec<MeanBasedReport>> {
    let mut cfg = config.clone();
    cfg.audit_gamma = Some(gamma);
    let record = run(&cfg)?;
    Ok(record.audits.expect("audit was enabled"))
}
