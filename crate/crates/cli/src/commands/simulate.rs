//! `auctionlab simulate`: run one configured repeated auction and persist
//! logs, summary, distributions, and figures.

use std::path::Path;

use anyhow::{Context, Result};

use auctionlab_core::{running_average, Marginal, RunRecord};

use crate::config::FileConfig;
use crate::output::{write_bid_log, write_joint_csv, write_summary, Manifest};
use crate::svg::{heatmap, histogram, line_chart, Series, PALETTE};
use crate::OutputFormat;

pub fn execute(
    file: &FileConfig,
    out_dir: &Path,
    seed: Option<u64>,
    formats: &[OutputFormat],
    threads: usize,
) -> Result<i32> {
    let config = crate::config::to_run_config(file, seed)?;
    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("creating output directory {}", out_dir.display()))?;
    let mut manifest = Manifest::new("simulate", config.digest(), config.seed, threads);

    let record = auctionlab_core::run(&config)?;

    if formats.contains(&OutputFormat::Csv) {
        manifest.record(&write_bid_log(out_dir, &record)?);
        manifest.record(&write_joint_csv(out_dir, &record)?);
    }
    if formats.contains(&OutputFormat::Json) {
        manifest.record(&write_summary(out_dir, &config, &record)?);
    }
    if formats.contains(&OutputFormat::Svg) {
        let window = config.window.min(config.horizon);
        for (name, svg) in figures(config.rule.format().name(), window, &record)? {
            let path = out_dir.join(name);
            std::fs::write(&path, svg)?;
            manifest.record(&path);
        }
    }
    manifest.write(out_dir)?;

    println!(
        "run complete: {} rounds, mean winner price {:.4} (post burn-in {:.4}), revenue/round {:.4}",
        record.horizon,
        record.winner_price_mean_all,
        record.winner_price_mean,
        record.revenue_avg
    );
    for i in 0..record.num_agents() {
        println!(
            "  agent {}: mean bid {:.4}, win rate {:.4}, user utility {:.4}, regret/round {:.6}",
            i + 1,
            record.marginal(i, true)?.mean(),
            record.win_rate[i],
            record.user_utils[i],
            record.regret[i] / record.horizon as f64
        );
    }
    Ok(0)
}

fn figures(
    title_rule: &str,
    window: usize,
    record: &RunRecord,
) -> Result<Vec<(&'static str, String)>> {
    let averages = running_average(record, window)?;
    let mut series = Vec::new();
    for (i, avg) in averages.iter().enumerate() {
        let points: Vec<(f64, f64)> = avg
            .iter()
            .enumerate()
            .map(|(t, &b)| ((t + window) as f64, b))
            .collect();
        series.push(Series::line(
            format!("agent {} (window {})", i + 1, window),
            PALETTE[i % PALETTE.len()],
            points,
        ));
    }
    let dynamics = line_chart(
        &format!("{title_rule}: running-average bid dynamics"),
        "auction round",
        "bid",
        &series,
    );

    let mut bars = Vec::new();
    for i in 0..record.num_agents() {
        let m: Marginal = record.marginal(i, true)?;
        bars.push((format!("agent {}", i + 1), PALETTE[i % PALETTE.len()], m));
    }
    let marginals = histogram(
        &format!("{title_rule}: post-burn-in bid distributions"),
        "bid",
        &bars,
    );

    let mut out = vec![("dynamics.svg", dynamics), ("marginals.svg", marginals)];
    if record.num_agents() == 2 {
        out.push((
            "joint_heatmap.svg",
            heatmap(
                &format!("{title_rule}: joint bid density (post burn-in)"),
                &record.joint_empirical,
            ),
        ));
    }
    Ok(out)
}
