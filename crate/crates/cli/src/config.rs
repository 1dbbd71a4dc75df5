//! Run configuration files: one TOML dialect shared by every command, with
//! sections `[auction]`, `[agents.N]`, `[run]`, and `[sweep]`.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde::Deserialize;

use auctionlab_core::{
    axis_cells, AgentSpec, Algorithm, AuctionFormat, AuctionRule, BidGrid, RunConfig,
    ScriptedSchedule, SweepConfig,
};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub auction: AuctionSection,
    pub agents: BTreeMap<String, AgentSection>,
    pub run: RunSection,
    pub sweep: Option<SweepSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuctionSection {
    pub format: String,
    pub epsilon: f64,
    pub ctrs: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSection {
    pub algorithm: String,
    pub declared_value: f64,
    pub eta: Option<f64>,
    pub perturb_scale: Option<f64>,
    pub recency_rho: Option<f64>,
    pub seed: Option<u64>,
    pub init_weights: Option<Vec<f64>>,
    /// Scripted agents: cyclic own/opponent bid schedules in money.
    pub schedule_my: Option<Vec<f64>>,
    pub schedule_opp: Option<Vec<f64>>,
    pub fallback: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub horizon: usize,
    pub true_values: Vec<f64>,
    pub seed: u64,
    pub burn_in_fraction: Option<f64>,
    pub window: Option<usize>,
    pub snapshot_times: Option<Vec<usize>>,
    pub audit_gamma: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// 1-based index of the player whose declaration varies.
    pub vary_player: Option<usize>,
    pub fixed_declaration: Option<f64>,
    pub values: Option<Vec<f64>>,
    pub start: Option<f64>,
    pub stop: Option<f64>,
    pub step: Option<f64>,
    /// Alternative to the axis form: explicit (v, w) pairs.
    pub pairs: Option<Vec<[f64; 2]>>,
    pub seeds_per_cell: usize,
    pub horizon: Option<usize>,
}

pub fn load(path: &Path) -> Result<FileConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config file {}", path.display()))?;
    let config: FileConfig = toml::from_str(&text)
        .map_err(|e| anyhow!("{}: {e}", path.display()))?;
    Ok(config)
}

fn build_rule(auction: &AuctionSection) -> Result<AuctionRule> {
    let format = AuctionFormat::parse(&auction.format)?;
    Ok(AuctionRule::from_parts(format, auction.ctrs.clone())?)
}

fn agent_spec(section: &AgentSection, epsilon: f64) -> Result<AgentSpec> {
    let algorithm = Algorithm::parse(&section.algorithm)?;
    let mut spec = AgentSpec::new(algorithm, section.declared_value);
    spec.eta = section.eta;
    spec.perturb_scale = section.perturb_scale;
    spec.recency_rho = section.recency_rho;
    spec.seed = section.seed;
    spec.init_weights = section.init_weights.clone();
    if let Some(f) = &section.fallback {
        spec.fallback = Some(Algorithm::parse(f)?);
    }
    match (&section.schedule_my, &section.schedule_opp) {
        (Some(my), Some(opp)) => {
            let grid = BidGrid::new(epsilon, section.declared_value)?;
            let to_idx =
                |xs: &[f64]| -> Vec<usize> { xs.iter().map(|&x| (x / epsilon).round() as usize).collect() };
            let my_idx = to_idx(my);
            for (&money, &idx) in my.iter().zip(&my_idx) {
                if (idx as f64 * epsilon - money).abs() > 1e-9 || idx >= grid.levels() {
                    bail!("schedule bid {money} is not on the agent's grid");
                }
            }
            let opp_idx = to_idx(opp);
            spec.schedule = Some(ScriptedSchedule::new(my_idx, opp_idx)?);
        }
        (None, None) => {}
        _ => bail!("schedule_my and schedule_opp must be given together"),
    }
    Ok(spec)
}

fn ordered_agents(config: &FileConfig) -> Result<Vec<&AgentSection>> {
    let mut numbered: Vec<(usize, &AgentSection)> = Vec::new();
    for (key, section) in &config.agents {
        let n: usize = key
            .parse()
            .map_err(|_| anyhow!("agent section name '{key}' is not a number"))?;
        numbered.push((n, section));
    }
    numbered.sort_by_key(|(n, _)| *n);
    for (i, (n, _)) in numbered.iter().enumerate() {
        if *n != i + 1 {
            bail!("agent sections must be numbered 1..n without gaps");
        }
    }
    Ok(numbered.into_iter().map(|(_, s)| s).collect())
}

/// Resolves the file into an engine run configuration.
pub fn to_run_config(config: &FileConfig, seed_override: Option<u64>) -> Result<RunConfig> {
    let rule = build_rule(&config.auction)?;
    let agents = ordered_agents(config)?
        .iter()
        .map(|s| agent_spec(s, config.auction.epsilon))
        .collect::<Result<Vec<_>>>()?;
    let mut run = RunConfig::new(
        rule,
        config.auction.epsilon,
        agents,
        config.run.true_values.clone(),
        config.run.horizon,
        seed_override.unwrap_or(config.run.seed),
    );
    if let Some(b) = config.run.burn_in_fraction {
        run.burn_in_fraction = b;
    }
    if let Some(w) = config.run.window {
        run.window = w;
    }
    run.snapshot_times = config.run.snapshot_times.clone();
    run.audit_gamma = config.run.audit_gamma;
    Ok(run)
}

/// Resolves the file into a sweep configuration.
pub fn to_sweep_config(config: &FileConfig, seed_override: Option<u64>) -> Result<SweepConfig> {
    let section = config
        .sweep
        .as_ref()
        .ok_or_else(|| anyhow!("config has no [sweep] section"))?;
    let agents = ordered_agents(config)?;
    if agents.is_empty() {
        bail!("sweeps need an [agents.1] section for the algorithm");
    }
    let algorithm = Algorithm::parse(&agents[0].algorithm)?;

    let cells: Vec<(f64, f64)> = if let Some(pairs) = &section.pairs {
        pairs.iter().map(|p| (p[0], p[1])).collect()
    } else {
        let vary = section
            .vary_player
            .ok_or_else(|| anyhow!("[sweep] needs vary_player or pairs"))?;
        if !(vary == 1 || vary == 2) {
            bail!("vary_player must be 1 or 2");
        }
        let fixed = section
            .fixed_declaration
            .ok_or_else(|| anyhow!("[sweep] needs fixed_declaration with vary_player"))?;
        let axis: Vec<f64> = if let Some(values) = &section.values {
            values.clone()
        } else {
            let (start, stop, step) = (
                section.start.ok_or_else(|| anyhow!("[sweep] needs values or start/stop/step"))?,
                section.stop.ok_or_else(|| anyhow!("[sweep] needs stop"))?,
                section.step.ok_or_else(|| anyhow!("[sweep] needs step"))?,
            );
            if !(step > 0.0) || stop < start {
                bail!("bad sweep range: start {start}, stop {stop}, step {step}");
            }
            let n = ((stop - start) / step).round() as usize;
            (0..=n).map(|k| start + step * k as f64).collect()
        };
        if axis.is_empty() {
            bail!("sweep axis is empty");
        }
        axis_cells(vary - 1, fixed, &axis)
    };
    if cells.is_empty() {
        bail!("declared grid is empty");
    }

    let mut sweep = SweepConfig::new(
        build_rule(&config.auction)?,
        config.auction.epsilon,
        algorithm,
        config.run.true_values.clone(),
        cells,
        section.horizon.unwrap_or(config.run.horizon),
        section.seeds_per_cell,
        seed_override.unwrap_or(config.run.seed),
    );
    if let Some(b) = config.run.burn_in_fraction {
        sweep.burn_in_fraction = b;
    }
    sweep.eta = agents[0].eta;
    sweep.perturb_scale = agents[0].perturb_scale;
    sweep.recency_rho = agents[0].recency_rho;
    Ok(sweep)
}
