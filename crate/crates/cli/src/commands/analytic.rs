//! `auctionlab analytic`: closed-form reports and curve exports.

use std::path::Path;

use anyhow::{anyhow, Result};
use clap::ValueEnum;

use auctionlab_core::{gfp_nash, metagame_equilibrium, nearly_diagonal, sp_limit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AnalyticQuery {
    #[value(name = "gfp-nash")]
    GfpNash,
    #[value(name = "sp-limit")]
    SpLimit,
    #[value(name = "nearly-diagonal")]
    NearlyDiagonal,
    #[value(name = "metagame")]
    Metagame,
}

pub struct AnalyticArgs<'a> {
    pub query: AnalyticQuery,
    pub v: Option<f64>,
    pub w: Option<f64>,
    pub eps: Option<f64>,
    pub max_declaration: Option<f64>,
    pub out: Option<&'a Path>,
    pub csv: bool,
}

pub fn execute(args: AnalyticArgs<'_>) -> Result<i32> {
    let need = |x: Option<f64>, name: &str| x.ok_or_else(|| anyhow!("--{name} is required"));
    match args.query {
        AnalyticQuery::GfpNash => {
            let (v, w) = (need(args.v, "v")?, need(args.w, "w")?);
            let eq = gfp_nash(v, w, true)?;
            println!("two-slot (1, 1/2) first-price Nash equilibrium, values ({v}, {w})");
            if eq.swapped {
                println!("  roles swapped internally so that v >= w");
            }
            println!("  support: both mix on [0, {:.4}]", eq.support_top());
            println!("  F(x) = x/(w-x), G(y) = (2v/w - 1) y/(v-y)");
            println!("  u_high = {:.6} (numeric check {:.6})", eq.u1, eq.u1_numeric());
            println!("  u_low  = {:.6} (numeric check {:.6})", eq.u2, eq.u2_numeric());
            if let Some(dir) = args.out {
                if args.csv {
                    let mut csv = String::from("x,F,G\n");
                    let steps = 500;
                    for k in 0..=steps {
                        let x = eq.support_top() * k as f64 / steps as f64;
                        csv.push_str(&format!("{x},{},{}\n", eq.cdf_high(x), eq.cdf_low(x)));
                    }
                    write_csv(dir, "gfp_nash_curves.csv", &csv)?;
                }
            }
        }
        AnalyticQuery::SpLimit => {
            let (v, w) = (need(args.v, "v")?, need(args.w, "w")?);
            let eps = need(args.eps, "eps")?;
            let law = sp_limit(v, w, eps)?;
            let high = law.high_marginal();
            println!("second-price limit law, values ({v}, {w}), grid step {eps}");
            println!("  high player: uniform on {{w+eps, ..., v}}:");
            for (k, &p) in high.probs().iter().enumerate() {
                if p > 0.0 {
                    println!("    bid {:.4}: {:.6}", high.grid().money(k), p);
                }
            }
            println!("  low player: constrained to 0 < Pr[0] <= Pr[eps] <= ... <= Pr[w]");
            println!("  implied mean winning price is strictly below the second price {w}");
            if let Some(dir) = args.out {
                if args.csv {
                    let mut csv = String::from("k,bid,prob\n");
                    for (k, &p) in high.probs().iter().enumerate() {
                        csv.push_str(&format!("{k},{},{p}\n", high.grid().money(k)));
                    }
                    write_csv(dir, "sp_limit_high_marginal.csv", &csv)?;
                }
            }
        }
        AnalyticQuery::NearlyDiagonal => {
            let (v, w) = (need(args.v, "v")?, need(args.w, "w")?);
            let model = nearly_diagonal(v, w)?;
            println!("nearly-diagonal prediction, declarations ({v}, {w}), true values 1");
            println!("  (prediction model, not a theorem)");
            println!("  diagonal probability w/v = {:.6}", model.diagonal_prob);
            println!("  u_high = {:.6}", model.u1);
            println!("  u_low  = {:.6}", model.u2);
            if let Some(dir) = args.out {
                if args.csv {
                    let mut csv = String::from("x,F\n");
                    let steps = 500;
                    let top = model.w / 2.0;
                    for k in 0..=steps {
                        let x = top * k as f64 / steps as f64;
                        csv.push_str(&format!("{x},{}\n", (x / (model.w - x)).clamp(0.0, 1.0)));
                    }
                    write_csv(dir, "nearly_diagonal_curve.csv", &csv)?;
                }
            }
        }
        AnalyticQuery::Metagame => {
            let m = need(args.max_declaration, "max-declaration")?;
            let eq = metagame_equilibrium(m)?;
            println!("meta-game equilibrium with declaration cap M = {m}");
            println!("  w* = 1/(6(1-ln2)) = {:.6}", eq.w_star);
            println!("  equilibrium declarations: ({}, {:.6}) or swapped", eq.v_star, eq.w_star);
            println!("  payoffs: high {:.6}, low {:.6}", eq.high_payoff, eq.low_payoff);
            println!("  epsilon bound without a cap: {:.6}", eq.epsilon_bound);
            let welfare = 1.5;
            println!(
                "  users capture {:.4} of the welfare (auctioneer {:.4})",
                (eq.high_payoff + eq.low_payoff) / welfare,
                1.0 - (eq.high_payoff + eq.low_payoff) / welfare
            );
            if let Some(dir) = args.out {
                if args.csv {
                    let csv = format!(
                        "w_star,v_star,high_payoff,low_payoff,epsilon_bound\n{},{},{},{},{}\n",
                        eq.w_star, eq.v_star, eq.high_payoff, eq.low_payoff, eq.epsilon_bound
                    );
                    write_csv(dir, "metagame_equilibrium.csv", &csv)?;
                }
            }
        }
    }
    Ok(0)
}

fn write_csv(dir: &Path, name: &str, text: &str) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(name), text)?;
    Ok(())
}
