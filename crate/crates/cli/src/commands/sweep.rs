//! `auctionlab sweep`: run a declared-value sweep and persist the payoff
//! surface with analytic overlays where closed forms exist.

use std::path::Path;

use anyhow::{Context, Result};
use serde_json::json;

use auctionlab_core::analytic::{nearly_diagonal_u1, nearly_diagonal_u2};
use auctionlab_core::{AuctionFormat, PayoffSurface, SweepConfig};

use crate::config::FileConfig;
use crate::output::Manifest;
use crate::svg::{line_chart, Series, PALETTE};
use crate::OutputFormat;

pub fn execute(
    file: &FileConfig,
    out_dir: &Path,
    seed: Option<u64>,
    formats: &[OutputFormat],
    threads: usize,
) -> Result<i32> {
    let config = crate::config::to_sweep_config(file, seed)?;
    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("creating output directory {}", out_dir.display()))?;
    let digest = auctionlab_core::engine::digest_value(&config);
    let mut manifest = Manifest::new("sweep", digest, config.base_seed, threads);

    let surface = auctionlab_core::sweep(&config)?;

    if formats.contains(&OutputFormat::Csv) {
        let path = out_dir.join("surface.csv");
        std::fs::write(&path, surface.to_csv())?;
        manifest.record(&path);
    }
    if formats.contains(&OutputFormat::Json) {
        let path = out_dir.join("summary.json");
        let value = json!({
            "schema": "auctionlab-sweep-summary/1",
            "config": config,
            "cells": surface.cells,
        });
        std::fs::write(&path, serde_json::to_string_pretty(&value)?)?;
        manifest.record(&path);
    }
    if formats.contains(&OutputFormat::Svg) {
        if let Some(svg) = payoff_chart(&config, &surface) {
            let path = out_dir.join("payoffs.svg");
            std::fs::write(&path, svg)?;
            manifest.record(&path);
        }
    }
    manifest.write(out_dir)?;

    let failures = surface.cells.iter().filter(|c| c.error.is_some()).count();
    println!(
        "sweep complete: {} cells x {} seeds ({failures} failed cells)",
        surface.cells.len(),
        config.seeds_per_cell
    );
    Ok(0)
}

/// Empirical payoff points with error bars along the varied axis, plus the
/// nearly-diagonal closed-form overlay for the (1, 1/2) position auction
/// with unit true values.
fn payoff_chart(config: &SweepConfig, surface: &PayoffSurface) -> Option<String> {
    // Detect the 1-D slice structure: exactly one axis must vary.
    let vs: Vec<f64> = surface.cells.iter().map(|c| c.v_declared).collect();
    let ws: Vec<f64> = surface.cells.iter().map(|c| c.w_declared).collect();
    let v_fixed = vs.iter().all(|&v| (v - vs[0]).abs() < 1e-12);
    let w_fixed = ws.iter().all(|&w| (w - ws[0]).abs() < 1e-12);
    if v_fixed == w_fixed {
        return None; // not a 1-D slice
    }
    let axis_label = if v_fixed {
        "declared value w of player 2"
    } else {
        "declared value v of player 1"
    };
    let mut cells: Vec<_> = surface.cells.iter().filter(|c| c.error.is_none()).collect();
    cells.sort_by(|a, b| {
        let (xa, xb) = if v_fixed {
            (a.w_declared, b.w_declared)
        } else {
            (a.v_declared, b.v_declared)
        };
        xa.partial_cmp(&xb).unwrap()
    });
    let axis: Vec<f64> = cells
        .iter()
        .map(|c| if v_fixed { c.w_declared } else { c.v_declared })
        .collect();

    let mut u1 = Series::line("user 1 (empirical)", PALETTE[0], Vec::new());
    u1.points = cells.iter().zip(&axis).map(|(c, &x)| (x, c.u1_mean)).collect();
    u1.error_bars = Some(cells.iter().map(|c| 2.0 * c.u1_se).collect());
    let mut u2 = Series::line("user 2 (empirical)", PALETTE[1], Vec::new());
    u2.points = cells.iter().zip(&axis).map(|(c, &x)| (x, c.u2_mean)).collect();
    u2.error_bars = Some(cells.iter().map(|c| 2.0 * c.u2_se).collect());
    let mut series = vec![u1, u2];

    let overlay = config.rule.format() == AuctionFormat::GeneralizedFirstPrice
        && config.rule.ctrs() == [1.0, 0.5]
        && config.true_values == [1.0, 1.0];
    if overlay {
        let model = |v: f64, w: f64| {
            let (hi, lo) = if v >= w { (v, w) } else { (w, v) };
            let (m1, m2) = (nearly_diagonal_u1(hi, lo), nearly_diagonal_u2(hi, lo));
            if v >= w {
                (m1, m2)
            } else {
                (m2, m1)
            }
        };
        let curve = |pick: usize| -> Vec<(f64, f64)> {
            cells
                .iter()
                .zip(&axis)
                .map(|(c, &x)| {
                    let (m1, m2) = model(c.v_declared, c.w_declared);
                    (x, if pick == 0 { m1 } else { m2 })
                })
                .collect()
        };
        let mut m1 = Series::line("user 1 (model)", PALETTE[0], curve(0));
        m1.dashed = true;
        let mut m2 = Series::line("user 2 (model)", PALETTE[1], curve(1));
        m2.dashed = true;
        series.push(m1);
        series.push(m2);
    }

    Some(line_chart(
        "meta-game payoffs along the declared-value slice",
        axis_label,
        "mean user utility",
        &series,
    ))
}
