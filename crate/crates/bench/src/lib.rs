//! Shared fixtures for the toolkit benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use auctionlab_core::{
    AgentSpec, Algorithm, AuctionRule, BidGrid, JointBidDistribution, RunConfig,
};

pub fn reference_rules() -> Vec<(&'static str, AuctionRule)> {
    vec![
        ("fp", AuctionRule::first_price()),
        ("sp", AuctionRule::second_price()),
        (
            "gfp",
            AuctionRule::generalized_first_price(vec![1.0, 0.5]).unwrap(),
        ),
        (
            "gsp",
            AuctionRule::generalized_second_price(vec![1.0, 0.5]).unwrap(),
        ),
    ]
}

/// A normalized random 101x101 joint table.
pub fn random_joint(seed: u64) -> JointBidDistribution {
    let grid = BidGrid::new(0.01, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut probs: Vec<f64> = (0..grid.levels() * grid.levels())
        .map(|_| rng.gen::<f64>())
        .collect();
    let total: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= total;
    }
    JointBidDistribution::new(vec![grid, grid], probs).unwrap()
}

pub fn short_run_config(alg: Algorithm, horizon: usize) -> RunConfig {
    let mut cfg = RunConfig::new(
        AuctionRule::second_price(),
        0.01,
        vec![AgentSpec::new(alg, 1.0), AgentSpec::new(alg, 0.5)],
        vec![1.0, 0.5],
        horizon,
        9,
    );
    cfg.snapshot_times = Some(Vec::new());
    cfg
}
