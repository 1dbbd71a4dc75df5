//! Simulation and analysis toolkit for repeated auctions played by
//! regret-minimizing agents.
//!
//! The crate covers the full pipeline: discrete bid grids and probability
//! tables ([`grid`]), auction semantics with exact tie handling
//! ([`auction`]), learning agents ([`agents`]), the repeated-auction
//! dynamics engine ([`engine`]), coarse-correlated-equilibrium verification
//! and the co-undominated refinement ([`equilibrium`]), closed-form
//! reference models ([`analytic`]), and declared-value meta-game sweeps
//! ([`sweep`]).

pub mod agents;
pub mod analytic;
pub mod auction;
pub mod engine;
pub mod equilibrium;
pub mod error;
pub mod grid;
pub mod lp;
pub mod rng;
pub mod stats;
pub mod sweep;

pub use agents::{Agent, AgentConfig, Algorithm, MeanBasedAuditor, MeanBasedReport, ScriptedSchedule};
pub use analytic::{
    gfp_nash, metagame_equilibrium, nearly_diagonal, sp_limit, GfpNash, MetagameEquilibrium,
    NearlyDiagonalModel, SpLimitLaw,
};
pub use auction::{AuctionFormat, AuctionOutcome, AuctionRule};
pub use engine::{
    audit_run, convergence_profile, regret_of, run, running_average, AgentSpec, RunConfig,
    RunRecord,
};
pub use equilibrium::{
    cce_gain, co_undominated_check, diagonal_cce_check, enumerate_co_undominated,
    CoUndominatedReport, DeviationReport, DiagonalCceReport, DominanceWitness,
};
pub use error::{CoreError, Result};
pub use grid::{
    ks_distance, l1_distance, support_of, BidGrid, JointBidDistribution, Marginal, SupportPair,
};
pub use sweep::{
    axis_cells, best_response, check_metagame_equilibrium, sweep, BestResponse, PayoffSurface,
    SurfaceCell, SweepConfig,
};
