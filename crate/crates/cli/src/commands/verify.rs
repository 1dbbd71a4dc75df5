//! `auctionlab verify`: equilibrium report for a stored joint distribution
//! or a completed run directory. Exit code 4 signals a failed verification
//! so the command can gate CI jobs.

use std::io::BufReader;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde_json::json;

use auctionlab_core::{
    cce_gain, co_undominated_check, audit_run, AuctionFormat, AuctionRule, JointBidDistribution,
    MeanBasedReport, RunConfig,
};

pub struct VerifyArgs<'a> {
    pub dist: Option<&'a Path>,
    pub run_dir: Option<&'a Path>,
    pub rule: Option<&'a str>,
    pub ctrs: Option<Vec<f64>>,
    pub values: Option<Vec<f64>>,
    pub delta: f64,
    pub support_tol: f64,
    pub audit_gamma: Option<f64>,
    pub out: Option<&'a Path>,
}

/// Resolved verification inputs (separated so input problems surface as
/// configuration errors before any work runs).
pub struct VerifyInputs {
    dist: JointBidDistribution,
    rule: AuctionRule,
    values: Vec<f64>,
    run_config: Option<RunConfig>,
}

pub fn execute(args: VerifyArgs<'_>, inputs: VerifyInputs) -> Result<i32> {
    let VerifyInputs {
        dist,
        rule,
        values,
        run_config,
    } = inputs;

    let deviations = cce_gain(&dist, &rule, &values)?;
    let report = co_undominated_check(&dist, &rule, &values, args.support_tol, args.delta)?;

    println!("equilibrium report ({} x {} grid)", dist.grids()[0].levels(), dist.grids()[1].levels());
    for (i, p) in deviations.players.iter().enumerate() {
        println!(
            "  player {}: in-distribution utility {:.6}, best fixed bid {:.4} worth {:.6}, gain {:+.3e}",
            i + 1,
            p.in_distribution_utility,
            dist.grids()[i].money(p.best_bid),
            p.best_deviation_utility,
            p.gain
        );
    }
    println!(
        "  CCE verdict (delta {:.1e}): {}",
        args.delta,
        if report.cce_ok { "yes" } else { "NO" }
    );
    if report.witnesses.is_empty() {
        println!("  co-undominated: yes (no weakly dominated supported action)");
    } else {
        println!("  co-undominated: NO ({} witnesses)", report.witnesses.len());
        for w in report.witnesses.iter().take(10) {
            println!(
                "    player {}: bid {:.4} weakly dominated by {:.4} (strict against {:.4})",
                w.player + 1,
                dist.grids()[w.player].money(w.dominated),
                dist.grids()[w.player].money(w.dominating),
                dist.grids()[1 - w.player].money(w.strict_at)
            );
        }
    }

    // Mean-based audit when a full run is available.
    let mut audits: Option<Vec<MeanBasedReport>> = None;
    let mut audit_ok = true;
    if let Some(config) = &run_config {
        let gamma = args
            .audit_gamma
            .unwrap_or_else(|| (config.horizon as f64).powf(-0.25));
        let reports = audit_run(config, gamma)?;
        for (i, a) in reports.iter().enumerate() {
            let ok = a.max_violation <= a.gamma;
            audit_ok &= ok;
            println!(
                "  mean-based audit agent {}: gamma {:.4}, max violation {:.3e}, violating rounds {} -> {}",
                i + 1,
                a.gamma,
                a.max_violation,
                a.violating_rounds,
                if ok { "ok" } else { "VIOLATED" }
            );
        }
        audits = Some(reports);
    }

    // The exit gate is the universal property (delta-CCE, plus the audit
    // for run inputs); the co-undominated refinement is reported above and
    // in the JSON but legitimate scripted CCEs may fail it.
    let verdict = report.cce_ok && audit_ok;
    if let Some(dir) = args.out {
        std::fs::create_dir_all(dir)?;
        let value = json!({
            "schema": "auctionlab-verify-report/1",
            "verdict": verdict,
            "cce_ok": report.cce_ok,
            "co_undominated": report.verdict,
            "deviations": deviations,
            "witnesses": report.witnesses,
            "audits": audits,
            "delta": args.delta,
            "support_tol": args.support_tol,
        });
        std::fs::write(dir.join("verify_report.json"), serde_json::to_string_pretty(&value)?)?;
    }

    if verdict {
        println!("verdict: PASS");
        Ok(0)
    } else {
        println!("verdict: FAIL");
        Ok(4)
    }
}

pub fn load_inputs(args: &VerifyArgs<'_>) -> Result<VerifyInputs> {
    match (args.dist, args.run_dir) {
        (Some(path), None) => {
            let file = std::fs::File::open(path)
                .with_context(|| format!("cannot open distribution file {}", path.display()))?;
            let dist = JointBidDistribution::read_csv(BufReader::new(file))?;
            let rule_name = args
                .rule
                .ok_or_else(|| anyhow!("--rule is required with --dist"))?;
            let rule = AuctionRule::from_parts(AuctionFormat::parse(rule_name)?, args.ctrs.clone())?;
            let values = args
                .values
                .clone()
                .ok_or_else(|| anyhow!("--values is required with --dist"))?;
            if values.len() != 2 {
                bail!("--values takes exactly two amounts");
            }
            Ok(VerifyInputs {
                dist,
                rule,
                values,
                run_config: None,
            })
        }
        (None, Some(dir)) => {
            let summary_path = dir.join("summary.json");
            let text = std::fs::read_to_string(&summary_path)
                .with_context(|| format!("cannot read {}", summary_path.display()))?;
            let summary: serde_json::Value = serde_json::from_str(&text)
                .with_context(|| format!("parsing {}", summary_path.display()))?;
            let config: RunConfig = serde_json::from_value(
                summary
                    .get("config")
                    .cloned()
                    .ok_or_else(|| anyhow!("summary.json has no config echo"))?,
            )
            .context("config echo does not parse")?;
            if config.agents.len() != 2 {
                bail!("equilibrium verification is two-player");
            }
            let joint_path = dir.join("joint_empirical.csv");
            let file = std::fs::File::open(&joint_path)
                .with_context(|| format!("cannot open {}", joint_path.display()))?;
            let dist = JointBidDistribution::read_csv(BufReader::new(file))?;
            let values: Vec<f64> = config.agents.iter().map(|a| a.declared_value).collect();
            Ok(VerifyInputs {
                dist,
                rule: config.rule.clone(),
                values,
                run_config: Some(config),
            })
        }
        _ => bail!("pass exactly one of --dist or --run"),
    }
}
