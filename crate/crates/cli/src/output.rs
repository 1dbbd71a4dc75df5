//! Result persistence: bid-log CSV, run summary JSON, and the run manifest.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde_json::json;

use auctionlab_core::{convergence_profile, RunConfig, RunRecord};

/// Records everything needed to re-run an output directory bit-identically.
pub struct Manifest {
    pub command: String,
    pub config_digest: String,
    pub seed: u64,
    pub threads: usize,
    outputs: Vec<String>,
    started: Instant,
}

impl Manifest {
    pub fn new(command: &str, config_digest: String, seed: u64, threads: usize) -> Self {
        Self {
            command: command.to_string(),
            config_digest,
            seed,
            threads,
            outputs: Vec::new(),
            started: Instant::now(),
        }
    }

    pub fn record(&mut self, path: &Path) {
        if let Some(name) = path.file_name() {
            self.outputs.push(name.to_string_lossy().into_owned());
        }
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let value = json!({
            "command": self.command,
            "tool_version": env!("CARGO_PKG_VERSION"),
            "config_digest": self.config_digest,
            "seed": self.seed,
            "threads": self.threads,
            "outputs": self.outputs,
            "wall_clock_ms": self.started.elapsed().as_millis() as u64,
        });
        let path = dir.join("manifest.json");
        std::fs::write(&path, serde_json::to_string_pretty(&value)?)
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }
}

/// Writes the per-round log:
/// `t,bid_1,..,bid_n,winner,price_1,..,price_n,u_agent_1,..,u_user_1,..`.
pub fn write_bid_log(dir: &Path, record: &RunRecord) -> Result<PathBuf> {
    let path = dir.join("bid_log.csv");
    let mut out = BufWriter::new(File::create(&path)?);
    let n = record.num_agents();
    let mut header = String::from("t");
    for i in 1..=n {
        header.push_str(&format!(",bid_{i}"));
    }
    header.push_str(",winner");
    for i in 1..=n {
        header.push_str(&format!(",price_{i}"));
    }
    for i in 1..=n {
        header.push_str(&format!(",u_agent_{i}"));
    }
    for i in 1..=n {
        header.push_str(&format!(",u_user_{i}"));
    }
    writeln!(out, "{header}")?;

    let eps = record.epsilon;
    for t in 0..record.horizon {
        let mut row = format!("{}", t + 1);
        for i in 0..n {
            row.push_str(&format!(",{}", record.agent_grids[i].money(record.bid(t, i))));
        }
        let winner = (0..n).find(|&i| record.slot(t, i) == Some(0));
        row.push_str(&format!(",{}", winner.map_or(0, |i| i + 1)));
        for i in 0..n {
            row.push_str(&format!(",{}", record.price_index(t, i) as f64 * eps));
        }
        for values in [&record.declared_values, &record.true_values] {
            for i in 0..n {
                let u = match record.slot(t, i) {
                    Some(s) => {
                        record.rule.ctrs().get(s).copied().unwrap_or(0.0)
                            * (values[i] - record.price_index(t, i) as f64 * eps)
                    }
                    None => 0.0,
                };
                row.push_str(&format!(",{u}"));
            }
        }
        writeln!(out, "{row}")?;
    }
    out.flush()?;
    Ok(path)
}

pub fn write_joint_csv(dir: &Path, record: &RunRecord) -> Result<PathBuf> {
    let path = dir.join("joint_empirical.csv");
    let mut out = BufWriter::new(File::create(&path)?);
    record.joint_empirical.write_csv(&mut out)?;
    out.flush()?;
    Ok(path)
}

/// JSON-shaped run summary with a full config echo.
pub fn write_summary(dir: &Path, config: &RunConfig, record: &RunRecord) -> Result<PathBuf> {
    let n = record.num_agents();
    let nonzero: Vec<f64> = (0..n).map(|i| record.nonzero_bid_rate(i)).collect();
    let profile: Vec<(usize, f64)> = convergence_profile(record);
    let regret_per_round: Vec<f64> = record
        .regret
        .iter()
        .map(|r| r / record.horizon as f64)
        .collect();
    let near_diagonal = (n == 2 && record.agent_grids[0] == record.agent_grids[1])
        .then(|| record.near_diagonal_rate(1));
    let value = json!({
        "schema": "auctionlab-run-summary/1",
        "config": config,
        "config_digest": record.config_digest,
        "seed": record.seed,
        "horizon": record.horizon,
        "burn_in_rounds": record.burn_in_rounds,
        "winner_price_mean": record.winner_price_mean,
        "winner_price_mean_all": record.winner_price_mean_all,
        "agent_utils": record.agent_utils,
        "user_utils": record.user_utils,
        "agent_utils_all": record.agent_utils_all,
        "user_utils_all": record.user_utils_all,
        "revenue_avg": record.revenue_avg,
        "revenue_avg_all": record.revenue_avg_all,
        "win_rate": record.win_rate,
        "nonzero_bid_rate": nonzero,
        "near_diagonal_rate": near_diagonal,
        "regret": record.regret,
        "regret_per_round": regret_per_round,
        "audits": record.audits,
        "convergence_profile": profile,
    });
    let path = dir.join("summary.json");
    std::fs::write(&path, serde_json::to_string_pretty(&value)?)?;
    Ok(path)
}
