//! Regret-minimizing bidding agents over a no-overbid grid.
//!
//! All agents act on the action set `{0, eps, ..., declared_value}` and
//! receive full (experts-setting) feedback: the exact expected utility of
//! every bid they could have placed. Utilities are normalized by the
//! declared value into [0, 1] before entering the update rules.
//!
//! Randomness is drawn from a per-round stream (see [`crate::rng`]), so an
//! agent's draw at round `t` depends only on its seed and `t`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::grid::{BidGrid, JointBidDistribution, Marginal};
use crate::rng::StreamRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Algorithm {
    MwLinear,
    Hedge,
    Ftpl,
    FtplRecency,
    Scripted,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::MwLinear => "MWLinear",
            Algorithm::Hedge => "Hedge",
            Algorithm::Ftpl => "FTPL",
            Algorithm::FtplRecency => "FTPLRecency",
            Algorithm::Scripted => "Scripted",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "MWLinear" => Ok(Algorithm::MwLinear),
            "Hedge" => Ok(Algorithm::Hedge),
            "FTPL" => Ok(Algorithm::Ftpl),
            "FTPLRecency" => Ok(Algorithm::FtplRecency),
            "Scripted" => Ok(Algorithm::Scripted),
            other => Err(CoreError::InvalidConfig(format!(
                "unknown algorithm '{other}'"
            ))),
        }
    }
}

/// A cyclic joint bid schedule for scripted play. The agent follows
/// `my_bids` while the opponent's realized bids match `opp_bids`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptedSchedule {
    pub my_bids: Vec<usize>,
    pub opp_bids: Vec<usize>,
}

impl ScriptedSchedule {
    pub fn new(my_bids: Vec<usize>, opp_bids: Vec<usize>) -> Result<Self> {
        if my_bids.is_empty() || my_bids.len() != opp_bids.len() {
            return Err(CoreError::InvalidConfig(
                "schedule sides must be nonempty and of equal length".into(),
            ));
        }
        Ok(Self { my_bids, opp_bids })
    }

    /// A round-robin cycle through the support of a two-player joint
    /// distribution, with multiplicities proportional to the cell weights
    /// (resolution `cycle_len`). Playing it forever makes the empirical
    /// joint distribution converge to the target.
    pub fn toward_joint(
        target: &JointBidDistribution,
        player: usize,
        cycle_len: usize,
    ) -> Result<Self> {
        if target.num_players() != 2 || player > 1 {
            return Err(CoreError::Unsupported(
                "scripted schedules are two-player".into(),
            ));
        }
        if cycle_len == 0 {
            return Err(CoreError::InvalidConfig("cycle_len must be positive".into()));
        }
        let cols = target.grids()[1].levels();
        let mut my = Vec::new();
        let mut opp = Vec::new();
        for (idx, &p) in target.probs().iter().enumerate() {
            let copies = (p * cycle_len as f64).round() as usize;
            let (i, j) = (idx / cols, idx % cols);
            for _ in 0..copies {
                if player == 0 {
                    my.push(i);
                    opp.push(j);
                } else {
                    my.push(j);
                    opp.push(i);
                }
            }
        }
        Self::new(my, opp)
    }

    fn at(&self, round: usize) -> (usize, usize) {
        let k = round % self.my_bids.len();
        (self.my_bids[k], self.opp_bids[k])
    }
}

/// Static configuration of one agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub algorithm: Algorithm,
    /// Action grid; its top index is the declared value (no overbidding).
    pub grid: BidGrid,
    /// Number of rounds the update parameter is tuned for; fixed throughout.
    pub horizon: usize,
    /// Learning rate for MWLinear/Hedge; defaults to sqrt(ln K / T).
    pub eta: Option<f64>,
    /// FTPL perturbation scale multiplier; perturbations are exponential
    /// with mean `perturb_scale * sqrt(T)`.
    pub perturb_scale: f64,
    /// Geometric discount of FTPLRecency's utility history; defaults to
    /// 1 - 1/T, which keeps the recency bias visible over the horizon
    /// without wrecking the regret guarantee.
    pub recency_rho: Option<f64>,
    pub seed: u64,
    /// Optional non-uniform initial weights (full support required).
    pub init_weights: Option<Vec<f64>>,
    /// Joint schedule for `Scripted`.
    pub schedule: Option<ScriptedSchedule>,
    /// Regret minimizer a scripted agent reverts to after a deviation.
    pub fallback: Algorithm,
}

impl AgentConfig {
    pub fn new(algorithm: Algorithm, grid: BidGrid, horizon: usize, seed: u64) -> Self {
        Self {
            algorithm,
            grid,
            horizon,
            eta: None,
            perturb_scale: 0.5,
            recency_rho: None,
            seed,
            init_weights: None,
            schedule: None,
            fallback: Algorithm::MwLinear,
        }
    }

    pub fn num_actions(&self) -> usize {
        self.grid.levels()
    }

    /// Declared value as a grid index (the top of the action set).
    pub fn declared_index(&self) -> usize {
        self.grid.levels() - 1
    }

    pub fn declared_money(&self) -> f64 {
        self.grid.max_bid()
    }

    pub fn effective_eta(&self) -> f64 {
        self.eta
            .unwrap_or_else(|| ((self.num_actions() as f64).ln() / self.horizon as f64).sqrt())
    }

    pub fn effective_recency_rho(&self) -> f64 {
        self.recency_rho
            .unwrap_or_else(|| 1.0 - 1.0 / self.horizon.max(2) as f64)
    }

    fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(CoreError::InvalidConfig("horizon must be at least 1".into()));
        }
        if let Some(eta) = self.eta {
            if !(eta >= 0.0) || !eta.is_finite() {
                return Err(CoreError::InvalidConfig(format!("bad eta {eta}")));
            }
        }
        if !(self.perturb_scale > 0.0) {
            return Err(CoreError::InvalidConfig("perturb_scale must be positive".into()));
        }
        if let Some(rho) = self.recency_rho {
            if !(rho > 0.0 && rho < 1.0) {
                return Err(CoreError::InvalidConfig(
                    "recency_rho must lie in (0, 1)".into(),
                ));
            }
        }
        if let Some(w) = &self.init_weights {
            if w.len() != self.num_actions() {
                return Err(CoreError::DimensionMismatch(format!(
                    "{} initial weights for {} actions",
                    w.len(),
                    self.num_actions()
                )));
            }
            if w.iter().any(|&x| !(x > 0.0)) {
                return Err(CoreError::InvalidConfig(
                    "initial weights must have full support".into(),
                ));
            }
        }
        match self.algorithm {
            Algorithm::Scripted => {
                let sched = self.schedule.as_ref().ok_or_else(|| {
                    CoreError::InvalidConfig("scripted agent needs a schedule".into())
                })?;
                if sched.my_bids.iter().any(|&b| b >= self.num_actions()) {
                    return Err(CoreError::InvalidConfig(
                        "schedule bids exceed the declared value".into(),
                    ));
                }
                if self.fallback == Algorithm::Scripted {
                    return Err(CoreError::InvalidConfig(
                        "scripted fallback must be a regret minimizer".into(),
                    ));
                }
            }
            _ => {
                if self.schedule.is_some() {
                    return Err(CoreError::InvalidConfig(
                        "only scripted agents take a schedule".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Mutable per-agent bookkeeping.
#[derive(Debug, Clone)]
pub struct AgentState {
    /// Cumulative normalized action utilities (discounted for FTPLRecency).
    pub cumulative: Vec<f64>,
    /// Multiplicative weights (MWLinear path only), renormalized each round.
    pub weights: Vec<f64>,
    pub round: usize,
    /// Whether a scripted agent has observed an off-schedule opponent bid.
    pub deviated: bool,
}

/// A bidding agent: configuration, learning state, and its random stream.
#[derive(Debug, Clone)]
pub struct Agent {
    config: AgentConfig,
    state: AgentState,
    rng: StreamRng,
    scratch: Vec<f64>,
}

impl Agent {
    pub fn new(config: AgentConfig) -> Result<Self> {
        config.validate()?;
        let k = config.num_actions();
        let weights = config.init_weights.clone().unwrap_or_else(|| vec![1.0; k]);
        let rng = StreamRng::new(config.seed);
        Ok(Self {
            config,
            state: AgentState {
                cumulative: vec![0.0; k],
                weights,
                round: 0,
                deviated: false,
            },
            rng,
            scratch: vec![0.0; k],
        })
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn state(&self) -> &AgentState {
        &self.state
    }

    pub fn round(&self) -> usize {
        self.state.round
    }

    /// The algorithm that currently governs play: the configured one, or a
    /// scripted agent's fallback after a deviation.
    fn live_algorithm(&self) -> Algorithm {
        match self.config.algorithm {
            Algorithm::Scripted if self.state.deviated => self.config.fallback,
            other => other,
        }
    }

    /// Model probabilities over the action set, when they exist in closed
    /// form: MWLinear and Hedge mix explicitly, a conforming scripted agent
    /// is a point mass, and FTPL's mixture is realized only by sampling
    /// (returns `None`).
    pub fn action_probabilities(&self) -> Option<Vec<f64>> {
        match self.live_algorithm() {
            Algorithm::MwLinear => {
                let total: f64 = self.state.weights.iter().sum();
                Some(self.state.weights.iter().map(|w| w / total).collect())
            }
            Algorithm::Hedge => {
                let eta = self.config.effective_eta();
                let best = self
                    .state
                    .cumulative
                    .iter()
                    .cloned()
                    .fold(f64::NEG_INFINITY, f64::max);
                let prior = self.config.init_weights.as_deref();
                let mut probs: Vec<f64> = self
                    .state
                    .cumulative
                    .iter()
                    .enumerate()
                    .map(|(i, &s)| {
                        let p0 = prior.map_or(1.0, |w| w[i]);
                        p0 * (eta * (s - best)).exp()
                    })
                    .collect();
                let total: f64 = probs.iter().sum();
                for p in &mut probs {
                    *p /= total;
                }
                Some(probs)
            }
            Algorithm::Scripted => {
                let (mine, _) = self.config.schedule.as_ref().unwrap().at(self.state.round);
                let mut probs = vec![0.0; self.config.num_actions()];
                probs[mine] = 1.0;
                Some(probs)
            }
            Algorithm::Ftpl | Algorithm::FtplRecency => None,
        }
    }

    /// Model distribution as a [`Marginal`], for algorithms that have one.
    pub fn action_distribution(&self) -> Result<Marginal> {
        if self.state.round >= self.config.horizon {
            return Err(CoreError::HorizonExceeded {
                round: self.state.round,
                horizon: self.config.horizon,
            });
        }
        match self.action_probabilities() {
            Some(p) => Marginal::new(self.config.grid, p),
            None => Err(CoreError::Unsupported(
                "FTPL mixes only implicitly; sample it instead".into(),
            )),
        }
    }

    /// Draws this round's bid. Errors once the horizon is exhausted.
    pub fn sample_bid(&mut self) -> Result<usize> {
        let round = self.state.round;
        if round >= self.config.horizon {
            return Err(CoreError::HorizonExceeded {
                round,
                horizon: self.config.horizon,
            });
        }
        let bid = match self.live_algorithm() {
            Algorithm::MwLinear => {
                let rng = self.rng.at_round(round as u64);
                sample_weighted(&self.state.weights, rng)
            }
            Algorithm::Hedge => {
                let probs = self.action_probabilities().expect("hedge mixes explicitly");
                let rng = self.rng.at_round(round as u64);
                sample_weighted(&probs, rng)
            }
            Algorithm::Ftpl | Algorithm::FtplRecency => {
                let scale = self.config.perturb_scale * (self.config.horizon as f64).sqrt();
                let rng = self.rng.at_round(round as u64);
                let mut best = 0usize;
                let mut best_val = f64::NEG_INFINITY;
                for (i, &s) in self.state.cumulative.iter().enumerate() {
                    let u: f64 = rng.gen::<f64>();
                    let perturbed = s - scale * (1.0 - u).ln();
                    if perturbed > best_val {
                        best_val = perturbed;
                        best = i;
                    }
                }
                best
            }
            Algorithm::Scripted => self.config.schedule.as_ref().unwrap().at(round).0,
        };
        debug_assert!(bid <= self.config.declared_index(), "overbid emitted");
        Ok(bid)
    }

    /// Feeds one round of counterfactual feedback (money units) plus the
    /// opponents' realized bids, and advances the round counter.
    pub fn update(&mut self, utilities: &[f64], opponent_bids: &[usize]) -> Result<()> {
        let k = self.config.num_actions();
        if utilities.len() != k {
            return Err(CoreError::DimensionMismatch(format!(
                "{} utilities for {} actions",
                utilities.len(),
                k
            )));
        }
        let round = self.state.round;
        if round >= self.config.horizon {
            return Err(CoreError::HorizonExceeded {
                round,
                horizon: self.config.horizon,
            });
        }
        let value = self.config.declared_money();
        for &u in utilities {
            if u < 0.0 {
                return Err(CoreError::ContractViolation(format!(
                    "negative utility {u}; the no-overbid grid rules this out"
                )));
            }
            if u > value + 1e-9 {
                return Err(CoreError::ContractViolation(format!(
                    "utility {u} exceeds the declared value {value}"
                )));
            }
        }

        // Scripted conformance: any off-schedule opponent bid triggers a
        // permanent reversion to the fallback algorithm from the next round.
        if self.config.algorithm == Algorithm::Scripted && !self.state.deviated {
            let (_, expected_opp) = self.config.schedule.as_ref().unwrap().at(round);
            if opponent_bids.len() != 1 {
                return Err(CoreError::Unsupported(
                    "scripted conformance tracking is two-player".into(),
                ));
            }
            if opponent_bids[0] != expected_opp {
                self.state.deviated = true;
            }
        }

        self.scratch.clear();
        self.scratch.extend(utilities.iter().map(|u| u / value));

        let recency = matches!(
            (self.config.algorithm, self.config.fallback),
            (Algorithm::FtplRecency, _) | (Algorithm::Scripted, Algorithm::FtplRecency)
        );
        if recency {
            let rho = self.config.effective_recency_rho();
            for (s, &u) in self.state.cumulative.iter_mut().zip(&self.scratch) {
                *s = rho * *s + u;
            }
        } else {
            for (s, &u) in self.state.cumulative.iter_mut().zip(&self.scratch) {
                *s += u;
            }
        }

        let uses_linear_weights = matches!(
            (self.config.algorithm, self.config.fallback),
            (Algorithm::MwLinear, _) | (Algorithm::Scripted, Algorithm::MwLinear)
        );
        if uses_linear_weights {
            let eta = self.config.effective_eta();
            let mut max_w = 0.0f64;
            for (w, &u) in self.state.weights.iter_mut().zip(&self.scratch) {
                *w *= 1.0 + eta * u;
                max_w = max_w.max(*w);
            }
            // Rescaling leaves the mixture unchanged and keeps weights finite
            // over long horizons.
            for w in &mut self.state.weights {
                *w /= max_w;
            }
        }

        self.state.round += 1;
        Ok(())
    }
}

fn sample_weighted<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let mut target = rng.gen::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        target -= w;
        if target < 0.0 {
            return i;
        }
    }
    weights.len() - 1
}

/// Result of monitoring a run against the mean-based property.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanBasedReport {
    /// Threshold gamma(T).
    pub gamma: f64,
    /// Largest probability placed on an action trailing the sigma leader by
    /// more than gamma(T) * T.
    pub max_violation: f64,
    /// Rounds where such an action received probability above gamma(T).
    pub violating_rounds: usize,
}

/// Per-round probability evidence fed to the auditor: the model's mixed
/// distribution where it exists, otherwise the sampled action.
#[derive(Debug, Clone, Copy)]
pub enum AuditProbe<'a> {
    Mixed(&'a [f64]),
    Sampled(usize),
}

/// Streams a run and accumulates mean-based violations. The auditor keeps
/// its own plain cumulative sums (normalized units), independent of the
/// audited agent's internals.
#[derive(Debug, Clone)]
pub struct MeanBasedAuditor {
    gamma: f64,
    threshold: f64,
    sigma: Vec<f64>,
    max_violation: f64,
    violating_rounds: usize,
}

impl MeanBasedAuditor {
    pub fn new(num_actions: usize, gamma: f64, horizon: usize) -> Self {
        Self {
            gamma,
            threshold: gamma * horizon as f64,
            sigma: vec![0.0; num_actions],
            max_violation: 0.0,
            violating_rounds: 0,
        }
    }

    /// Observes the probability placed on each action this round (before
    /// the round's utilities accrue), then absorbs the utilities.
    pub fn observe_round(&mut self, probe: AuditProbe<'_>, utilities_normalized: &[f64]) {
        let leader = self
            .sigma
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        let mut round_worst = 0.0f64;
        for (i, &s) in self.sigma.iter().enumerate() {
            if s < leader - self.threshold {
                let p = match probe {
                    AuditProbe::Mixed(probs) => probs[i],
                    AuditProbe::Sampled(a) => {
                        if a == i {
                            1.0
                        } else {
                            0.0
                        }
                    }
                };
                round_worst = round_worst.max(p);
            }
        }
        if round_worst > self.gamma {
            self.violating_rounds += 1;
        }
        self.max_violation = self.max_violation.max(round_worst);
        for (s, &u) in self.sigma.iter_mut().zip(utilities_normalized) {
            *s += u;
        }
    }

    pub fn report(&self) -> MeanBasedReport {
        MeanBasedReport {
            gamma: self.gamma,
            max_violation: self.max_violation,
            violating_rounds: self.violating_rounds,
        }
    }
}
