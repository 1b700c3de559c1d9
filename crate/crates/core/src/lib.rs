//! Firms competing for customers on a circular market.
//!
//! Each firm sells on an arc of a one-dimensional periodic market. Arcs grow
//! at a constant rate and shrink in proportion to how much they overlap their
//! competitors; a firm whose radius falls below the profitability floor is
//! replaced by a small new firm at a random position. The crate provides the
//! geometry, the dynamics, the observables used to study the stationary state,
//! and sweeps over the competition strength.

pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod observables;
pub mod rng;

pub use dynamics::{
    death_birth_step, growth_step, init_state, run, run_from, step, Firm, FirmTrajectory,
    MarketConfig, MarketState, Recorders, StationaryRecord, TrajectoryPoint,
};
pub use error::{MarketError, Result};
pub use geometry::{
    arc_contains, arc_overlap, nearest_right_neighbor, right_neighbors, total_overlaps,
    total_overlaps_pairwise, Arc,
};
pub use harness::{
    beta_sweep, beta_sweep_with_threads, default_beta_grid, find_min_correlation_beta,
    refine_min_correlation_beta, run_experiment, CellSummary, ExperimentOptions, MinCorrelation,
    SweepCell, SweepResult, SweepRow, SweepSpec,
};
pub use observables::{
    fit_power_law, log_binned_histogram, mean_rank_size, pair_correlation_instant,
    pair_correlation_stationary, rank_size, track_firm, CorrelationSample, FitMethod, Histogram,
    PowerLawFit, RankSize, RankWindow, SizeSnapshot, StationaryEstimate,
};
