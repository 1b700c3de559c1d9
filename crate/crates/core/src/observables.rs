//! Measurements on simulated markets: nearest-neighbour size correlation,
//! rank-size curves, log-binned size distributions, power-law exponents and
//! single-firm trajectories.
//!
//! "Size" always means the selling area `S = 2r`.

use serde::{Deserialize, Serialize};

use crate::dynamics::{MarketState, StationaryRecord, TrajectoryPoint};
use crate::error::{MarketError, Result};

/// Relative variance floor below which a correlation sample is degenerate.
pub const DEGENERATE_VARIANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSample {
    pub time: u64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeSnapshot {
    pub time: u64,
    pub radii: Vec<f64>,
}

impl SizeSnapshot {
    pub fn of(state: &MarketState) -> Self {
        Self {
            time: state.time,
            radii: state.radii(),
        }
    }

    pub fn sizes(&self) -> impl Iterator<Item = f64> + '_ {
        self.radii.iter().map(|r| 2.0 * r)
    }
}

/// Instantaneous correlation between each radius and the radius of its right
/// neighbour:
///
/// `[mean(r_i r_k(i)) - mean(r)^2] / [mean(r^2) - mean(r)^2]`.
///
/// Moments are taken about the mean, which is algebraically the same quotient
/// but does not cancel catastrophically.
pub fn pair_correlation_instant(radii: &[f64], neighbor_of: &[usize]) -> Result<f64> {
    let n = radii.len();
    if n < 2 {
        return Err(MarketError::InsufficientPopulation { needed: 2, got: n });
    }
    if neighbor_of.len() != n || neighbor_of.iter().any(|&k| k >= n) {
        return Err(MarketError::Domain(
            "neighbour map does not match the population".into(),
        ));
    }
    let nf = n as f64;
    let mean = radii.iter().sum::<f64>() / nf;
    let dev: Vec<f64> = radii.iter().map(|r| r - mean).collect();
    let var = dev.iter().map(|d| d * d).sum::<f64>() / nf;
    let second = radii.iter().map(|r| r * r).sum::<f64>() / nf;
    if var <= DEGENERATE_VARIANCE * second {
        return Err(MarketError::DegenerateSample);
    }
    let cross = dev
        .iter()
        .zip(neighbor_of)
        .map(|(d, &k)| d * dev[k])
        .sum::<f64>()
        / nf;
    // Non-zero only when the neighbour map is not a permutation.
    let drift = neighbor_of.iter().map(|&k| dev[k]).sum::<f64>() / nf;
    Ok((cross + mean * drift) / var)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationaryEstimate {
    pub mean: f64,
    /// Naive standard error of the mean; consecutive samples are correlated in
    /// time, so treat it as a lower bound.
    pub std_error: f64,
    pub samples: usize,
}

/// Temporal average of the instantaneous correlation.
pub fn pair_correlation_stationary(samples: &[CorrelationSample]) -> Result<StationaryEstimate> {
    let values: Vec<f64> = samples.iter().map(|s| s.value).collect();
    mean_with_error(&values).ok_or(MarketError::EmptyRecord)
}

pub(crate) fn mean_with_error(values: &[f64]) -> Option<StationaryEstimate> {
    let n = values.len();
    if n == 0 {
        return None;
    }
    let nf = n as f64;
    let mean = values.iter().sum::<f64>() / nf;
    let std_error = if n > 1 {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (nf - 1.0);
        (var / nf).sqrt()
    } else {
        0.0
    };
    Some(StationaryEstimate {
        mean,
        std_error,
        samples: n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankSize {
    pub rank: usize,
    pub size: f64,
}

/// Sizes `2r` in descending order, ranked from 1. Ties keep input order.
pub fn rank_size(radii: &[f64]) -> Vec<RankSize> {
    let mut sizes: Vec<f64> = radii.iter().map(|r| 2.0 * r).collect();
    // stable sort
    sizes.sort_by(|a, b| b.total_cmp(a));
    sizes
        .into_iter()
        .enumerate()
        .map(|(i, size)| RankSize { rank: i + 1, size })
        .collect()
}

/// Rank-size curve averaged over snapshots: the size at rank `k` is the mean of
/// the `k`-th largest size across all snapshots.
pub fn mean_rank_size(snapshots: &[SizeSnapshot]) -> Vec<RankSize> {
    let Some(first) = snapshots.first() else {
        return Vec::new();
    };
    let mut acc = vec![0.0; first.radii.len()];
    for snap in snapshots {
        for (slot, rs) in acc.iter_mut().zip(rank_size(&snap.radii)) {
            *slot += rs.size;
        }
    }
    let m = snapshots.len() as f64;
    acc.into_iter()
        .enumerate()
        .map(|(i, s)| RankSize {
            rank: i + 1,
            size: s / m,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitMethod {
    /// Least squares on log(size) against log(rank).
    Regression,
    /// Continuous Hill estimator of the tail index.
    Mle,
}

impl std::str::FromStr for FitMethod {
    type Err = MarketError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "regression" => Ok(Self::Regression),
            "mle" => Ok(Self::Mle),
            other => Err(MarketError::Config(format!(
                "unknown fit method {other:?} (expected regression or mle)"
            ))),
        }
    }
}

/// Inclusive rank window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankWindow {
    pub lo: usize,
    pub hi: usize,
}

impl RankWindow {
    pub const MIN_POINTS: usize = 10;

    /// Ranks 5 through `ceil(0.8 n)`.
    pub fn default_for(n: usize) -> Self {
        Self {
            lo: 5,
            hi: (4 * n).div_ceil(5),
        }
    }

    pub fn full(n: usize) -> Self {
        Self { lo: 1, hi: n }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub method: FitMethod,
    /// Regression: |slope| of the log-log rank-size line.
    /// Mle: tail index `a` of `P(S > s) ~ s^-a`.
    pub exponent: f64,
    /// Regression: intercept of the log-log line. Mle: `ln s_min`.
    pub intercept: f64,
    /// Coefficient of determination (regression only).
    pub r_squared: Option<f64>,
    /// Zipf exponent implied by the fit: the regression exponent itself, or
    /// `1 / a` for a tail index `a` (equivalently `1 / (d - 1)` for the density
    /// exponent `d = a + 1`).
    pub rank_exponent: f64,
    pub fit_range: (usize, usize),
    pub points: usize,
}

/// Fits a power law to the part of a rank-size curve inside `window`.
pub fn fit_power_law(curve: &[RankSize], window: RankWindow, method: FitMethod) -> Result<PowerLawFit> {
    if window.lo == 0 || window.hi < window.lo {
        return Err(MarketError::Fit(format!(
            "degenerate rank window {}..={}",
            window.lo, window.hi
        )));
    }
    let pts: Vec<&RankSize> = curve
        .iter()
        .filter(|p| p.rank >= window.lo && p.rank <= window.hi)
        .collect();
    if pts.len() < RankWindow::MIN_POINTS {
        return Err(MarketError::Fit(format!(
            "window {}..={} holds {} points, need at least {}",
            window.lo,
            window.hi,
            pts.len(),
            RankWindow::MIN_POINTS
        )));
    }
    if let Some(p) = pts.iter().find(|p| !(p.size > 0.0 && p.size.is_finite())) {
        return Err(MarketError::Domain(format!(
            "size {} at rank {} is not positive",
            p.size, p.rank
        )));
    }
    let fit_range = (window.lo, window.hi);
    match method {
        FitMethod::Regression => {
            let xs: Vec<f64> = pts.iter().map(|p| (p.rank as f64).ln()).collect();
            let ys: Vec<f64> = pts.iter().map(|p| p.size.ln()).collect();
            let line = least_squares(&xs, &ys)
                .ok_or_else(|| MarketError::Fit("ranks in window are all equal".into()))?;
            let exponent = line.slope.abs();
            Ok(PowerLawFit {
                method,
                exponent,
                intercept: line.intercept,
                r_squared: Some(line.r_squared),
                rank_exponent: exponent,
                fit_range,
                points: pts.len(),
            })
        }
        FitMethod::Mle => {
            let sizes: Vec<f64> = pts.iter().map(|p| p.size).collect();
            let s_min = sizes.iter().copied().fold(f64::INFINITY, f64::min);
            let tail = hill_tail_index(&sizes, s_min)?;
            Ok(PowerLawFit {
                method,
                exponent: tail,
                intercept: s_min.ln(),
                r_squared: None,
                rank_exponent: 1.0 / tail,
                fit_range,
                points: sizes.len(),
            })
        }
    }
}

/// Continuous Hill estimate `n / sum ln(s / s_min)` over the sizes `>= s_min`.
pub fn hill_tail_index(sizes: &[f64], s_min: f64) -> Result<f64> {
    if !(s_min > 0.0) {
        return Err(MarketError::Domain(format!("s_min must be positive, got {s_min}")));
    }
    let mut n = 0usize;
    let mut log_sum = 0.0;
    for &s in sizes.iter().filter(|&&s| s >= s_min) {
        n += 1;
        log_sum += (s / s_min).ln();
    }
    if n == 0 || log_sum <= 0.0 {
        return Err(MarketError::Fit("all sizes equal s_min".into()));
    }
    Ok(n as f64 / log_sum)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Line {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares `y = intercept + slope * x`.
pub fn least_squares(xs: &[f64], ys: &[f64]) -> Option<Line> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if !(sxx > 0.0) {
        return None;
    }
    let slope = sxy / sxx;
    let r_squared = if syy > 0.0 {
        (sxy * sxy / (sxx * syy)).min(1.0)
    } else {
        1.0
    };
    Some(Line {
        slope,
        intercept: my - slope * mx,
        r_squared,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `counts.len() + 1` logarithmically spaced edges; bin `k` is
    /// `[edges[k], edges[k + 1])`.
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
    /// `count / (width * total)` when density normalisation was requested.
    pub density: Option<Vec<f64>>,
}

impl Histogram {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Density of each bin, whether or not it was requested at construction.
    pub fn densities(&self) -> Vec<f64> {
        let total = self.total() as f64;
        self.counts
            .iter()
            .zip(self.bin_edges.windows(2))
            .map(|(&c, e)| c as f64 / ((e[1] - e[0]) * total))
            .collect()
    }
}

/// Histogram on bins of equal width in `log10`, starting at the smallest
/// value, with enough bins that the largest value falls inside the last one.
pub fn log_binned_histogram(sizes: &[f64], bins_per_decade: u32, density: bool) -> Result<Histogram> {
    if sizes.is_empty() {
        return Err(MarketError::Domain("empty sample".into()));
    }
    if bins_per_decade == 0 {
        return Err(MarketError::Domain("bins_per_decade must be at least 1".into()));
    }
    if let Some(bad) = sizes.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
        return Err(MarketError::Domain(format!("size {bad} is not positive")));
    }
    let lo = sizes.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = sizes.iter().copied().fold(0.0, f64::max);
    let per = f64::from(bins_per_decade);
    let n_bins = ((hi / lo).log10() * per).floor() as usize + 1;
    let bin_edges: Vec<f64> = (0..=n_bins)
        .map(|k| lo * 10f64.powf(k as f64 / per))
        .collect();
    let mut counts = vec![0u64; n_bins];
    for &s in sizes {
        let k = bin_edges[1..].partition_point(|&e| e <= s).min(n_bins - 1);
        counts[k] += 1;
    }
    let mut hist = Histogram {
        bin_edges,
        counts,
        density: None,
    };
    if density {
        hist.density = Some(hist.densities());
    }
    Ok(hist)
}

/// Default log-binning resolution.
pub const BINS_PER_DECADE: u32 = 10;

/// Pools every snapshot's sizes into one histogram.
pub fn snapshot_histogram(snapshots: &[SizeSnapshot], bins_per_decade: u32) -> Result<Histogram> {
    let sizes: Vec<f64> = snapshots.iter().flat_map(SizeSnapshot::sizes).collect();
    log_binned_histogram(&sizes, bins_per_decade, true)
}

/// Recorded size history of firm `id`.
pub fn track_firm(record: &StationaryRecord, id: usize) -> Result<&[TrajectoryPoint]> {
    if id >= record.n_firms {
        return Err(MarketError::Domain(format!(
            "firm {id} out of range for {} firms",
            record.n_firms
        )));
    }
    record
        .trajectories
        .iter()
        .find(|t| t.id == id)
        .map(|t| t.points.as_slice())
        .ok_or(MarketError::MissingRecorder("trajectory"))
}
