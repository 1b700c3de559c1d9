//! Experiment protocols: single runs with the standard recorders, sweeps over
//! the competition strength `beta`, and the search for the `beta` that
//! minimises the stationary neighbour correlation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{init_state, run_from, MarketConfig, Recorders, StationaryRecord};
use crate::error::{MarketError, Result};
use crate::observables::{
    fit_power_law, mean_rank_size, mean_with_error, pair_correlation_stationary, FitMethod,
    PowerLawFit, RankSize, RankWindow, SizeSnapshot,
};
use crate::rng::replicate_seed;

/// Snapshot cadence of the standard recorder set, in recorded steps.
pub const DEFAULT_SNAPSHOT_EVERY: u64 = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOptions {
    pub snapshot_every: u64,
    pub track_firms: Vec<usize>,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        Self {
            snapshot_every: DEFAULT_SNAPSHOT_EVERY,
            track_firms: Vec::new(),
        }
    }
}

/// One run with correlation, market totals, periodic snapshots and any
/// requested trajectories. The final state is always the last snapshot, so a
/// run without recorded steps still yields the state at the end of burn-in.
pub fn run_experiment(config: &MarketConfig, options: &ExperimentOptions) -> Result<StationaryRecord> {
    let recorders = Recorders {
        track_firms: options.track_firms.clone(),
        ..Recorders::all(options.snapshot_every)
    };
    let (state, mut record) = run_from(init_state(config)?, config, &recorders)?;
    if record.snapshots.last().map(|s| s.time) != Some(state.time) {
        record.snapshots.push(SizeSnapshot::of(&state));
    }
    Ok(record)
}

/// Default grid: 16 log-spaced points on [0.25, 16].
pub fn default_beta_grid() -> Vec<f64> {
    log_grid(0.25, 16.0, 16)
}

/// `n` points from `lo` to `hi` with constant ratio; the endpoints are exact.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let ratio = (hi / lo).ln() / (n - 1) as f64;
            (0..n)
                .map(|k| match k {
                    0 => lo,
                    k if k == n - 1 => hi,
                    k => lo * (ratio * k as f64).exp(),
                })
                .collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub base: MarketConfig,
    pub beta_values: Vec<f64>,
    pub replicates: usize,
    #[serde(default)]
    pub options: ExperimentOptions,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.beta_values.is_empty() {
            return Err(MarketError::Config("beta grid is empty".into()));
        }
        if self.beta_values.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(MarketError::Config("beta grid must be strictly increasing".into()));
        }
        if self.beta_values.iter().any(|b| !(b.is_finite() && *b >= 0.0)) {
            return Err(MarketError::Config("beta values must be finite and non-negative".into()));
        }
        if self.replicates == 0 {
            return Err(MarketError::Config("need at least one replicate".into()));
        }
        Ok(())
    }

    fn cell_config(&self, beta_index: usize, replicate: usize) -> MarketConfig {
        MarketConfig {
            beta: self.beta_values[beta_index],
            seed: replicate_seed(self.base.seed, beta_index, replicate),
            ..self.base.clone()
        }
    }
}

/// Stationary summary of one replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub mean_c: f64,
    pub std_error: f64,
    pub samples: usize,
    pub excluded: u64,
    pub respawn_rate: f64,
    pub mean_total_overlap: f64,
    pub mean_max_share: f64,
    /// Snapshot-averaged rank-size curve.
    pub rank_size: Vec<RankSize>,
    /// Every snapshot's sizes `2r`, in snapshot order.
    pub sizes: Vec<f64>,
}

impl CellSummary {
    pub fn from_record(record: &StationaryRecord) -> Result<Self> {
        let c = pair_correlation_stationary(&record.correlation)?;
        let mean = |v: &[f64]| mean_with_error(v).map_or(f64::NAN, |e| e.mean);
        Ok(Self {
            mean_c: c.mean,
            std_error: c.std_error,
            samples: c.samples,
            excluded: record.degenerate_samples,
            respawn_rate: record.respawn_rate(),
            mean_total_overlap: mean(&record.total_overlap),
            mean_max_share: mean(&record.max_share),
            rank_size: mean_rank_size(&record.snapshots),
            sizes: record.snapshots.iter().flat_map(SizeSnapshot::sizes).collect(),
        })
    }

    pub fn fit(&self, window: RankWindow) -> Result<PowerLawFit> {
        fit_power_law(&self.rank_size, window, FitMethod::Regression)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub beta: f64,
    pub beta_index: usize,
    pub replicate: usize,
    pub seed: u64,
    /// The summary, or the error message of a failed replicate.
    pub outcome: std::result::Result<CellSummary, String>,
}

/// Aggregate over the replicates at one grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub beta: f64,
    /// Mean over successful replicates of the stationary correlation.
    pub mean_c: f64,
    /// Standard error across replicates (zero with a single replicate).
    pub std_error: f64,
    pub replicates: usize,
    pub failed: usize,
    pub excluded: u64,
    pub respawn_rate: f64,
    pub mean_total_overlap: f64,
    pub mean_max_share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub spec: SweepSpec,
    pub rows: Vec<SweepRow>,
    /// Grid-major, replicate-minor.
    pub cells: Vec<SweepCell>,
}

impl SweepResult {
    pub fn cells_at(&self, beta_index: usize) -> impl Iterator<Item = &SweepCell> {
        self.cells.iter().filter(move |c| c.beta_index == beta_index)
    }

    /// Pooled sizes of all successful replicates at one grid point.
    pub fn pooled_sizes(&self, beta_index: usize) -> Vec<f64> {
        self.cells_at(beta_index)
            .filter_map(|c| c.outcome.as_ref().ok())
            .flat_map(|s| s.sizes.iter().copied())
            .collect()
    }
}

fn aggregate(beta: f64, cells: &[SweepCell]) -> SweepRow {
    let ok: Vec<&CellSummary> = cells.iter().filter_map(|c| c.outcome.as_ref().ok()).collect();
    let stat = |f: fn(&CellSummary) -> f64| {
        let v: Vec<f64> = ok.iter().map(|s| f(s)).collect();
        mean_with_error(&v)
    };
    let c = stat(|s| s.mean_c);
    let nan = f64::NAN;
    SweepRow {
        beta,
        mean_c: c.map_or(nan, |e| e.mean),
        std_error: c.map_or(nan, |e| e.std_error),
        replicates: ok.len(),
        failed: cells.len() - ok.len(),
        excluded: ok.iter().map(|s| s.excluded).sum(),
        respawn_rate: stat(|s| s.respawn_rate).map_or(nan, |e| e.mean),
        mean_total_overlap: stat(|s| s.mean_total_overlap).map_or(nan, |e| e.mean),
        mean_max_share: stat(|s| s.mean_max_share).map_or(nan, |e| e.mean),
    }
}

/// Runs every (beta, replicate) cell on the current rayon pool and aggregates
/// in grid order. Results do not depend on the number of worker threads.
pub fn beta_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    spec.validate()?;
    let jobs: Vec<(usize, usize)> = (0..spec.beta_values.len())
        .flat_map(|b| (0..spec.replicates).map(move |r| (b, r)))
        .collect();
    let cells: Vec<SweepCell> = jobs
        .par_iter()
        .map(|&(b, r)| {
            let config = spec.cell_config(b, r);
            let outcome = run_experiment(&config, &spec.options)
                .and_then(|rec| CellSummary::from_record(&rec))
                .map_err(|e| e.to_string());
            SweepCell {
                beta: config.beta,
                beta_index: b,
                replicate: r,
                seed: config.seed,
                outcome,
            }
        })
        .collect();
    let rows = spec
        .beta_values
        .iter()
        .enumerate()
        .map(|(b, &beta)| {
            let at: Vec<SweepCell> = cells.iter().filter(|c| c.beta_index == b).cloned().collect();
            aggregate(beta, &at)
        })
        .collect();
    Ok(SweepResult {
        spec: spec.clone(),
        rows,
        cells,
    })
}

/// [`beta_sweep`] on a dedicated pool of `threads` workers.
pub fn beta_sweep_with_threads(spec: &SweepSpec, threads: usize) -> Result<SweepResult> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| MarketError::Config(format!("cannot build worker pool: {e}")))?;
    pool.install(|| beta_sweep(spec))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinCorrelation {
    pub beta: f64,
    pub mean_c: f64,
    /// Index into `grid`.
    pub index: usize,
    /// Whether the minimum lies strictly inside the grid.
    pub interior: bool,
    pub warning: Option<String>,
    /// `(beta, mean C)` pairs the decision was made on, in increasing beta.
    pub grid: Vec<(f64, f64)>,
}

/// Grid point with the smallest mean correlation; ties go to the smaller beta.
/// Rows without a successful replicate are ignored.
pub fn find_min_correlation_beta(result: &SweepResult) -> Result<MinCorrelation> {
    let grid: Vec<(f64, f64)> = result
        .rows
        .iter()
        .filter(|r| r.mean_c.is_finite())
        .map(|r| (r.beta, r.mean_c))
        .collect();
    min_of_grid(grid)
}

fn min_of_grid(grid: Vec<(f64, f64)>) -> Result<MinCorrelation> {
    if grid.len() < 3 {
        return Err(MarketError::Config(format!(
            "need at least 3 grid points with valid correlation, got {}",
            grid.len()
        )));
    }
    let mut index = 0;
    for (k, &(_, c)) in grid.iter().enumerate() {
        if c < grid[index].1 {
            index = k;
        }
    }
    let interior = index > 0 && index + 1 < grid.len();
    let warning = (!interior).then(|| {
        format!(
            "no interior minimum: C is smallest at the grid endpoint beta = {}",
            grid[index].0
        )
    });
    Ok(MinCorrelation {
        beta: grid[index].0,
        mean_c: grid[index].1,
        index,
        interior,
        warning,
        grid,
    })
}

/// Narrows an interior minimum by evaluating the midpoints of its bracketing
/// triple `depth` times, each time re-centring on the smallest of the five
/// points. New points are run with the sweep's base configuration and
/// replicate count.
pub fn refine_min_correlation_beta(
    spec: &SweepSpec,
    found: &MinCorrelation,
    depth: usize,
) -> Result<MinCorrelation> {
    let mut grid = found.grid.clone();
    let mut best = found.clone();
    for level in 0..depth {
        if !best.interior {
            break;
        }
        let (l, m, r) = (grid[best.index - 1], grid[best.index], grid[best.index + 1]);
        let mids = vec![(l.0 + m.0) / 2.0, (m.0 + r.0) / 2.0];
        let sub = SweepSpec {
            beta_values: mids.clone(),
            base: MarketConfig {
                seed: crate::rng::mix64(spec.base.seed ^ (level as u64 + 1)),
                ..spec.base.clone()
            },
            ..spec.clone()
        };
        let extra = beta_sweep(&sub)?;
        grid.extend(
            extra
                .rows
                .iter()
                .filter(|r| r.mean_c.is_finite())
                .map(|r| (r.beta, r.mean_c)),
        );
        grid.sort_by(|a, b| a.0.total_cmp(&b.0));
        best = min_of_grid(grid.clone())?;
    }
    Ok(best)
}

/// Spearman rank correlation (average ranks for ties).
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut out = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for &k in &idx[i..=j] {
                out[k] = avg;
            }
            i = j + 1;
        }
        out
    }
    let (rx, ry) = (ranks(xs), ranks(ys));
    crate::observables::least_squares(&rx, &ry)
        .map(|line| line.r_squared.sqrt().copysign(line.slope))
        .unwrap_or(f64::NAN)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(beta: f64, mean_c: f64) -> SweepRow {
        SweepRow {
            beta,
            mean_c,
            std_error: 0.0,
            replicates: 1,
            failed: 0,
            excluded: 0,
            respawn_rate: 0.0,
            mean_total_overlap: 0.0,
            mean_max_share: 0.0,
        }
    }

    fn result_of(rows: Vec<SweepRow>) -> SweepResult {
        SweepResult {
            spec: SweepSpec {
                base: MarketConfig::default(),
                beta_values: rows.iter().map(|r| r.beta).collect(),
                replicates: 1,
                options: ExperimentOptions::default(),
            },
            rows,
            cells: Vec::new(),
        }
    }

    fn tiny(beta_values: Vec<f64>, replicates: usize) -> SweepSpec {
        SweepSpec {
            base: MarketConfig {
                n_firms: 20,
                circumference: 12_000.0,
                burn_in_steps: 200,
                sample_steps: 300,
                ..MarketConfig::default()
            },
            beta_values,
            replicates,
            options: ExperimentOptions {
                snapshot_every: 100,
                track_firms: Vec::new(),
            },
        }
    }

    #[test]
    fn minimum_examples() {
        let r = result_of(vec![row(1.0, 0.5), row(2.0, 0.1), row(3.0, 0.4)]);
        let m = find_min_correlation_beta(&r).unwrap();
        assert_eq!(m.beta, 2.0);
        assert!(m.interior);
        assert!(m.warning.is_none());
        assert_eq!(m.grid, vec![(1.0, 0.5), (2.0, 0.1), (3.0, 0.4)]);

        let r = result_of(vec![row(1.0, 0.5), row(2.0, 0.4), row(3.0, 0.1)]);
        let m = find_min_correlation_beta(&r).unwrap();
        assert_eq!(m.beta, 3.0);
        assert!(!m.interior);
        assert!(m.warning.is_some());
    }

    #[test]
    fn minimum_ties_and_gaps() {
        let r = result_of(vec![row(1.0, 0.5), row(2.0, 0.1), row(3.0, 0.1), row(4.0, 0.3)]);
        assert_eq!(find_min_correlation_beta(&r).unwrap().beta, 2.0);
        let r = result_of(vec![row(1.0, 0.5), row(2.0, f64::NAN), row(3.0, 0.1)]);
        assert!(find_min_correlation_beta(&r).is_err());
    }

    #[test]
    fn grids() {
        let g = default_beta_grid();
        assert_eq!(g.len(), 16);
        assert_eq!(g[0], 0.25);
        assert_eq!(g[15], 16.0);
        // ratio 64^(1/15)
        for w in g.windows(2) {
            assert!((w[1] / w[0] - 64f64.powf(1.0 / 15.0)).abs() < 1e-12);
        }
        assert_eq!(log_grid(1.0, 2.0, 1), vec![1.0]);
    }

    #[test]
    fn spec_validation() {
        assert!(tiny(vec![], 1).validate().is_err());
        assert!(tiny(vec![1.0, 1.0], 1).validate().is_err());
        assert!(tiny(vec![2.0, 1.0], 1).validate().is_err());
        assert!(tiny(vec![1.0], 0).validate().is_err());
        assert!(tiny(vec![1.0, 2.0], 2).validate().is_ok());
    }

    #[test]
    fn sweep_bookkeeping() {
        let spec = tiny(vec![0.5, 1.0, 2.0, 4.0, 8.0], 3);
        let res = beta_sweep(&spec).unwrap();
        assert_eq!(res.cells.len(), 15);
        assert_eq!(res.rows.len(), 5);
        for (row, beta) in res.rows.iter().zip(&spec.beta_values) {
            assert_eq!(row.beta, *beta);
            assert_eq!(row.replicates + row.failed, 3);
        }
    }

    #[test]
    fn sweep_is_independent_of_thread_count() {
        let spec = tiny(vec![0.5, 2.0, 8.0], 2);
        let one = beta_sweep_with_threads(&spec, 1).unwrap();
        let four = beta_sweep_with_threads(&spec, 4).unwrap();
        assert_eq!(one, four);
    }

    #[test]
    fn replicate_failure_is_recorded_per_cell() {
        // no recorded steps: no correlation samples, every cell fails
        let mut spec = tiny(vec![1.0, 2.0, 3.0], 1);
        spec.base.sample_steps = 0;
        let res = beta_sweep(&spec).unwrap();
        assert!(res.cells.iter().all(|c| c.outcome.is_err()));
        assert!(res.rows.iter().all(|r| r.failed == 1 && r.mean_c.is_nan()));
    }

    #[test]
    fn experiment_without_samples_keeps_final_state() {
        let mut c = tiny(vec![1.0], 1).base;
        c.sample_steps = 0;
        let rec = run_experiment(&c, &ExperimentOptions::default()).unwrap();
        assert_eq!(rec.snapshots.len(), 1);
        assert_eq!(rec.snapshots[0].time, 200);
        assert!(rec.correlation.is_empty());
    }

    #[test]
    fn spearman_examples() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-12);
        assert!((spearman(&[1.0, 2.0, 3.0, 4.0], &[1.0, 4.0, 9.0, 16.0]) - 1.0).abs() < 1e-12);
        // ties share the average rank
        let s = spearman(&[1.0, 2.0, 3.0], &[1.0, 1.0, 2.0]);
        assert!((s - 0.866_025_403_784_438_6).abs() < 1e-12);
    }

    #[test]
    fn refinement_adds_midpoints() {
        let spec = tiny(vec![0.5, 2.0, 8.0], 1);
        let found = MinCorrelation {
            beta: 2.0,
            mean_c: -1.0,
            index: 1,
            interior: true,
            warning: None,
            grid: vec![(0.5, 0.0), (2.0, -1.0), (8.0, 0.0)],
        };
        let refined = refine_min_correlation_beta(&spec, &found, 1).unwrap();
        assert_eq!(refined.grid.len(), 5);
        assert_eq!(refined.grid[1].0, 1.25);
        assert_eq!(refined.grid[3].0, 5.0);
        assert_eq!(refine_min_correlation_beta(&spec, &found, 0).unwrap(), found);
    }
}
