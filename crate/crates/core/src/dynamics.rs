//! Discrete-time market dynamics.
//!
//! One step applies the growth rule `r' = (1 + alpha) r - beta * Omega` to all
//! firms at once, using overlaps of the current state only, then replaces every
//! firm whose new radius falls below `r_min` by a fresh random firm with the
//! same id.

use serde::{Deserialize, Serialize};

use crate::error::{MarketError, Result};
use crate::geometry::{right_neighbors, total_overlaps, Arc};
use crate::observables::{pair_correlation_instant, CorrelationSample, SizeSnapshot};
use crate::rng::MarketRng;

/// Model and protocol parameters. Defaults are the reference protocol:
/// 500 firms on a market of length 3e5, alpha = 0.01, beta = 2, initial radii
/// in [2, 5), 1e5 discarded steps followed by 1e6 recorded ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MarketConfig {
    pub n_firms: usize,
    pub circumference: f64,
    pub alpha: f64,
    pub beta: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub burn_in_steps: u64,
    pub sample_steps: u64,
    pub sample_stride: u64,
    pub seed: u64,
}

impl Default for MarketConfig {
    fn default() -> Self {
        Self {
            n_firms: 500,
            circumference: 3.0e5,
            alpha: 0.01,
            beta: 2.0,
            r_min: 2.0,
            r_max: 5.0,
            burn_in_steps: 100_000,
            sample_steps: 1_000_000,
            sample_stride: 10,
            seed: 1,
        }
    }
}

impl MarketConfig {
    /// Reference parameters scaled to 200 firms at the same density, with
    /// 2e4 burn-in and 1e5 recorded steps.
    pub fn desk() -> Self {
        Self {
            n_firms: 200,
            circumference: 1.2e5,
            burn_in_steps: 20_000,
            sample_steps: 100_000,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(MarketError::Config(msg));
        if self.n_firms == 0 {
            return fail("n_firms must be positive".into());
        }
        if !(self.circumference.is_finite() && self.circumference > 0.0) {
            return fail(format!(
                "circumference must be positive, got {}",
                self.circumference
            ));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return fail(format!("alpha must be positive, got {}", self.alpha));
        }
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return fail(format!("beta must be non-negative, got {}", self.beta));
        }
        if !(self.r_min.is_finite() && self.r_min > 0.0) {
            return fail(format!("r_min must be positive, got {}", self.r_min));
        }
        if !(self.r_max > self.r_min && self.r_max <= self.circumference / 2.0) {
            return fail(format!(
                "need r_min < r_max <= circumference / 2, got r_min = {}, r_max = {}",
                self.r_min, self.r_max
            ));
        }
        if self.sample_stride == 0 {
            return fail("sample_stride must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Firm {
    pub id: usize,
    pub arc: Arc,
    /// Steps survived since the last (re)birth.
    pub age: u64,
}

impl Firm {
    pub fn radius(&self) -> f64 {
        self.arc.radius()
    }

    pub fn position(&self) -> f64 {
        self.arc.center()
    }

    /// Selling area `S = 2r`.
    pub fn size(&self) -> f64 {
        self.arc.length()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarketState {
    pub firms: Vec<Firm>,
    pub time: u64,
    pub respawn_count: u64,
    /// How often a proposed radius was capped at `L/2`.
    pub clamp_count: u64,
    rng: MarketRng,
}

impl MarketState {
    pub fn arcs(&self) -> Vec<Arc> {
        self.firms.iter().map(|f| f.arc).collect()
    }

    pub fn radii(&self) -> Vec<f64> {
        self.firms.iter().map(Firm::radius).collect()
    }

    /// Advances one synchronous step in place.
    pub fn advance(&mut self, config: &MarketConfig) -> Result<()> {
        let proposed = growth_step(self, config)?;
        self.apply_death_birth(&proposed, config)
    }

    fn apply_death_birth(&mut self, proposed: &[f64], config: &MarketConfig) -> Result<()> {
        if proposed.len() != self.firms.len() {
            return Err(MarketError::Domain(format!(
                "expected {} proposed radii, got {}",
                self.firms.len(),
                proposed.len()
            )));
        }
        let cap = config.circumference / 2.0;
        for (firm, &r) in self.firms.iter_mut().zip(proposed) {
            let mut r = r;
            if r > cap {
                r = cap;
                self.clamp_count += 1;
            }
            if r < config.r_min {
                *firm = spawn(&mut self.rng, firm.id, config)?;
                self.respawn_count += 1;
            } else {
                firm.arc = firm.arc.with_radius(r);
                firm.age += 1;
            }
        }
        self.time += 1;
        Ok(())
    }
}

fn spawn(rng: &mut MarketRng, id: usize, config: &MarketConfig) -> Result<Firm> {
    let center = rng.uniform(0.0, config.circumference);
    let radius = rng.uniform(config.r_min, config.r_max);
    Ok(Firm {
        id,
        arc: Arc::new(center, radius, config.circumference)?,
        age: 0,
    })
}

/// Fresh market: every firm gets a uniform position on `[0, L)` and a uniform
/// radius on `[r_min, r_max)`, drawn in id order (position, then radius).
pub fn init_state(config: &MarketConfig) -> Result<MarketState> {
    config.validate()?;
    let mut rng = MarketRng::from_seed(config.seed);
    let firms = (0..config.n_firms)
        .map(|id| spawn(&mut rng, id, config))
        .collect::<Result<Vec<_>>>()?;
    Ok(MarketState {
        firms,
        time: 0,
        respawn_count: 0,
        clamp_count: 0,
        rng,
    })
}

/// Proposed radii `(1 + alpha) r_i - beta * Omega_i`, all overlaps taken from
/// the current state. Values may be negative.
pub fn growth_step(state: &MarketState, config: &MarketConfig) -> Result<Vec<f64>> {
    let omega = total_overlaps(&state.arcs())?;
    let growth = 1.0 + config.alpha;
    Ok(state
        .firms
        .iter()
        .zip(&omega)
        .map(|(f, &o)| growth * f.radius() - config.beta * o)
        .collect())
}

/// Applies proposed radii: survivors (`r >= r_min` after the `L/2` cap) keep
/// their position and age by one step, the rest are respawned in ascending id
/// order.
pub fn death_birth_step(
    state: MarketState,
    proposed: &[f64],
    config: &MarketConfig,
) -> Result<MarketState> {
    let mut next = state;
    next.apply_death_birth(proposed, config)?;
    Ok(next)
}

pub fn step(state: &MarketState, config: &MarketConfig) -> Result<MarketState> {
    let mut next = state.clone();
    next.advance(config)?;
    Ok(next)
}

/// What to measure while the market runs through its recorded window.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Recorders {
    /// Instantaneous nearest-neighbour correlation.
    pub correlation: bool,
    /// Total overlap and largest-firm share of the selling area.
    pub market_totals: bool,
    /// Full radius snapshot every this many recorded steps.
    pub snapshot_every: Option<u64>,
    /// Firms whose size is logged at every sample.
    pub track_firms: Vec<usize>,
}

impl Recorders {
    pub fn all(snapshot_every: u64) -> Self {
        Self {
            correlation: true,
            market_totals: true,
            snapshot_every: Some(snapshot_every),
            track_firms: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub time: u64,
    /// Selling area `2r`.
    pub size: f64,
    pub age: u64,
    /// The firm went bankrupt and was replaced since the previous point.
    pub respawned: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirmTrajectory {
    pub id: usize,
    pub points: Vec<TrajectoryPoint>,
}

/// Everything measured over the recorded window of a run.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StationaryRecord {
    pub n_firms: usize,
    pub circumference: f64,
    pub burn_in_steps: u64,
    pub sample_steps: u64,
    pub sample_stride: u64,
    pub correlation: Vec<CorrelationSample>,
    /// Correlation samples skipped for zero radius variance.
    pub degenerate_samples: u64,
    pub snapshots: Vec<SizeSnapshot>,
    pub trajectories: Vec<FirmTrajectory>,
    /// Sum of all `Omega_i` at each sample.
    pub total_overlap: Vec<f64>,
    /// `max S_i / sum S_j` at each sample.
    pub max_share: Vec<f64>,
    /// Respawns during the recorded window.
    pub respawns: u64,
    pub respawns_total: u64,
    pub clamps_total: u64,
}

impl StationaryRecord {
    /// Respawns per firm per recorded step.
    pub fn respawn_rate(&self) -> f64 {
        if self.sample_steps == 0 {
            0.0
        } else {
            self.respawns as f64 / (self.sample_steps as f64 * self.n_firms as f64)
        }
    }
}

fn record_sample(
    state: &MarketState,
    recorders: &Recorders,
    record: &mut StationaryRecord,
    last_sample_time: u64,
) -> Result<()> {
    let arcs = state.arcs();
    if recorders.correlation {
        if arcs.len() < 2 {
            record.degenerate_samples += 1;
        } else {
            let neighbors = right_neighbors(&arcs)?;
            match pair_correlation_instant(&state.radii(), &neighbors) {
                Ok(value) => record.correlation.push(CorrelationSample {
                    time: state.time,
                    value,
                }),
                Err(MarketError::DegenerateSample) => record.degenerate_samples += 1,
                Err(e) => return Err(e),
            }
        }
    }
    if recorders.market_totals {
        let omega = total_overlaps(&arcs)?;
        record.total_overlap.push(omega.iter().sum());
        let total: f64 = arcs.iter().map(Arc::length).sum();
        let largest = arcs.iter().map(Arc::length).fold(0.0, f64::max);
        record.max_share.push(largest / total);
    }
    for traj in &mut record.trajectories {
        let firm = &state.firms[traj.id];
        traj.points.push(TrajectoryPoint {
            time: state.time,
            size: firm.size(),
            age: firm.age,
            respawned: firm.age < state.time - last_sample_time,
        });
    }
    Ok(())
}

/// Runs `burn_in_steps` unrecorded steps, then `sample_steps` steps with the
/// recorders firing every `sample_stride` steps (snapshots on their own
/// cadence).
pub fn run(config: &MarketConfig, recorders: &Recorders) -> Result<StationaryRecord> {
    run_from(init_state(config)?, config, recorders).map(|(_, record)| record)
}

/// [`run`] starting from a given state; also hands back the final state.
pub fn run_from(
    mut state: MarketState,
    config: &MarketConfig,
    recorders: &Recorders,
) -> Result<(MarketState, StationaryRecord)> {
    config.validate()?;
    for &id in &recorders.track_firms {
        if id >= config.n_firms {
            return Err(MarketError::Config(format!(
                "tracked firm {id} out of range for {} firms",
                config.n_firms
            )));
        }
    }
    if recorders.snapshot_every == Some(0) {
        return Err(MarketError::Config("snapshot interval must be at least 1".into()));
    }

    for _ in 0..config.burn_in_steps {
        state.advance(config)?;
    }

    let mut record = StationaryRecord {
        n_firms: config.n_firms,
        circumference: config.circumference,
        burn_in_steps: config.burn_in_steps,
        sample_steps: config.sample_steps,
        sample_stride: config.sample_stride,
        trajectories: recorders
            .track_firms
            .iter()
            .map(|&id| FirmTrajectory {
                id,
                points: Vec::new(),
            })
            .collect(),
        ..StationaryRecord::default()
    };
    let respawns_before = state.respawn_count;
    let mut last_sample_time = state.time;
    for s in 1..=config.sample_steps {
        state.advance(config)?;
        if s % config.sample_stride == 0 {
            record_sample(&state, recorders, &mut record, last_sample_time)?;
            last_sample_time = state.time;
        }
        if let Some(every) = recorders.snapshot_every {
            if s % every == 0 {
                record.snapshots.push(SizeSnapshot::of(&state));
            }
        }
    }
    record.respawns = state.respawn_count - respawns_before;
    record.respawns_total = state.respawn_count;
    record.clamps_total = state.clamp_count;
    Ok((state, record))
}
