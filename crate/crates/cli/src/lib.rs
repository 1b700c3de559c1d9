//! Command-line front end: `run`, `sweep` and `fit`.
//!
//! Exit codes: 0 success, 2 bad input or configuration, 3 I/O failure.

pub mod config;
pub mod output;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use pareto_market::harness::{beta_sweep_with_threads, default_beta_grid, CellSummary};
use pareto_market::observables::snapshot_histogram;
use pareto_market::{
    find_min_correlation_beta, fit_power_law, log_binned_histogram, mean_rank_size,
    pair_correlation_stationary, run_experiment, ExperimentOptions, FitMethod, MarketConfig,
    MarketError, PowerLawFit, RankSize, RankWindow, SweepSpec,
};
use serde::Serialize;
use thiserror::Error;

use crate::config::{offending_keys, LoadedConfig};
use crate::output::{OutputDir, RunManifest};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl From<MarketError> for CliError {
    fn from(e: MarketError) -> Self {
        CliError::Usage(e.to_string())
    }
}

pub const THREADS_ENV: &str = "PARETO_MARKET_THREADS";

#[derive(Debug, Parser)]
#[command(name = "pareto-market", version, about = "Spatial firm competition on a circular market")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one market and export its stationary observables.
    Run(RunArgs),
    /// Sweep the competition strength beta and locate the correlation minimum.
    Sweep(SweepArgs),
    /// Fit a power law to a rank-size table.
    Fit(FitArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// Record the size history of this firm (trajectory.csv).
    #[arg(long)]
    pub track_firm: Option<usize>,
    /// Record observables every this many steps.
    #[arg(long)]
    pub stride: Option<u64>,
    /// Accepted for symmetry with `sweep`; a single run is sequential.
    #[arg(long, env = THREADS_ENV)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated, strictly increasing beta values.
    #[arg(long)]
    pub betas: Option<String>,
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long)]
    pub stride: Option<u64>,
    #[arg(long, env = THREADS_ENV)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    /// CSV with header `rank,size`.
    pub ranksize: PathBuf,
    /// First rank of the fit window (default 5).
    #[arg(long)]
    pub rank_lo: Option<usize>,
    /// Last rank of the fit window (default ceil(0.8 n)).
    #[arg(long)]
    pub rank_hi: Option<usize>,
    #[arg(long, default_value = "regression")]
    pub method: String,
}

pub const DEFAULT_REPLICATES: usize = 3;

fn validated_market(loaded: &LoadedConfig, market: &MarketConfig) -> Result<(), CliError> {
    market.validate().map_err(|e| {
        let msg = e.to_string();
        loaded.error_at(&offending_keys(&msg), msg)
    })
}

/// Summary written next to the tables of a single run.
#[derive(Debug, Serialize)]
struct RunSummary {
    beta: f64,
    mean_c: Option<f64>,
    c_std_error: Option<f64>,
    c_samples: usize,
    excluded_samples: u64,
    respawn_rate: f64,
    clamps: u64,
    snapshots: usize,
    rank_size_fit: Option<PowerLawFit>,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub out: PathBuf,
    pub manifest: RunManifest,
}

pub fn cmd_run(args: &RunArgs) -> Result<RunOutcome, CliError> {
    let started = output::unix_now();
    let loaded = config::load(args.config.as_deref())?;
    let mut cfg = loaded.config.clone();
    if let Some(seed) = args.seed {
        cfg.market.seed = seed;
    }
    if let Some(beta) = args.beta {
        cfg.market.beta = beta;
    }
    if let Some(stride) = args.stride {
        cfg.market.sample_stride = stride;
    }
    if args.track_firm.is_some() {
        cfg.output.track_firm = args.track_firm;
    }
    validated_market(&loaded, &cfg.market)?;
    if cfg.output.snapshot_every == 0 {
        return Err(loaded.error_at(&["snapshot_every"], "snapshot_every must be at least 1"));
    }
    if let Some(id) = cfg.output.track_firm {
        if id >= cfg.market.n_firms {
            return Err(CliError::Usage(format!(
                "--track-firm {id} out of range for {} firms",
                cfg.market.n_firms
            )));
        }
    }

    let options = ExperimentOptions {
        snapshot_every: cfg.output.snapshot_every,
        track_firms: cfg.output.track_firm.into_iter().collect(),
    };
    let record = run_experiment(&cfg.market, &options)?;

    let mut out = OutputDir::create(&args.out)?;
    out.write("correlation.csv", &output::correlation_csv(&record.correlation))?;
    out.write("snapshots.csv", &output::snapshots_csv(&record.snapshots))?;
    let curve = mean_rank_size(&record.snapshots);
    out.write("ranksize.csv", &output::ranksize_csv(&curve))?;
    let hist = snapshot_histogram(&record.snapshots, cfg.output.bins_per_decade)?;
    out.write("histogram.csv", &output::histogram_csv(&hist))?;
    if let Some(id) = cfg.output.track_firm {
        let points = pareto_market::track_firm(&record, id)?;
        out.write("trajectory.csv", &output::trajectory_csv(points))?;
    }
    let c = pair_correlation_stationary(&record.correlation).ok();
    let summary = RunSummary {
        beta: cfg.market.beta,
        mean_c: c.map(|e| e.mean),
        c_std_error: c.map(|e| e.std_error),
        c_samples: record.correlation.len(),
        excluded_samples: record.degenerate_samples,
        respawn_rate: record.respawn_rate(),
        clamps: record.clamps_total,
        snapshots: record.snapshots.len(),
        rank_size_fit: fit_power_law(
            &curve,
            RankWindow::default_for(curve.len()),
            FitMethod::Regression,
        )
        .ok(),
    };
    out.write_json("summary.json", &summary)?;

    let manifest = finish_manifest(&mut out, "run", &loaded, &cfg, cfg.market.seed, started)?;
    Ok(RunOutcome {
        out: args.out.clone(),
        manifest,
    })
}

fn finish_manifest(
    out: &mut OutputDir,
    command: &str,
    loaded: &LoadedConfig,
    effective: &impl Serialize,
    seed: u64,
    started: f64,
) -> Result<RunManifest, CliError> {
    let manifest = RunManifest {
        artifact: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command: command.to_string(),
        seed,
        config_origin: loaded.origin.clone(),
        config_source: loaded.source.clone(),
        config: serde_json::to_value(effective)
            .map_err(|e| CliError::Io(format!("cannot serialise config: {e}")))?,
        started_unix: started,
        finished_unix: output::unix_now(),
        outputs: out.files.clone(),
    };
    let mut text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| CliError::Io(format!("cannot serialise manifest: {e}")))?;
    text.push('\n');
    let path = out.path().join("manifest.json");
    std::fs::write(&path, text)
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
    Ok(manifest)
}

/// Parses `--betas 0.5,1,2`.
pub fn parse_betas(list: &str) -> Result<Vec<f64>, CliError> {
    let betas = list
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| CliError::Usage(format!("--betas: {s:?} is not a number")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if betas.is_empty() {
        return Err(CliError::Usage(
            "--betas: empty grid (usage: --betas 0.5,1,2,4)".into(),
        ));
    }
    Ok(betas)
}

pub fn resolve_threads(flag: Option<usize>) -> usize {
    flag.filter(|&n| n > 0).unwrap_or_else(|| {
        std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)
    })
}

#[derive(Debug, Serialize)]
struct GridPoint {
    beta: f64,
    mean_c: f64,
    stderr: f64,
}

#[derive(Debug, Serialize)]
struct BetaStar {
    beta_star: Option<f64>,
    mean_c: Option<f64>,
    interior: bool,
    warning: Option<String>,
    grid: Vec<GridPoint>,
}

#[derive(Debug)]
pub struct SweepOutcome {
    pub out: PathBuf,
    pub manifest: RunManifest,
    pub beta_star: Option<f64>,
}

pub fn histogram_file_name(beta: f64) -> String {
    format!("histogram_beta={beta}.csv")
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<SweepOutcome, CliError> {
    let started = output::unix_now();
    let loaded = config::load(args.config.as_deref())?;
    let mut cfg = loaded.config.clone();
    if let Some(seed) = args.seed {
        cfg.market.seed = seed;
    }
    if let Some(stride) = args.stride {
        cfg.market.sample_stride = stride;
    }
    validated_market(&loaded, &cfg.market)?;
    let betas = match (&args.betas, &cfg.sweep.betas) {
        (Some(flag), _) => parse_betas(flag)?,
        (None, Some(list)) => list.clone(),
        (None, None) => default_beta_grid(),
    };
    let replicates = args
        .replicates
        .or(cfg.sweep.replicates)
        .unwrap_or(DEFAULT_REPLICATES);
    cfg.sweep.betas = Some(betas.clone());
    cfg.sweep.replicates = Some(replicates);

    let spec = SweepSpec {
        base: cfg.market.clone(),
        beta_values: betas,
        replicates,
        options: ExperimentOptions {
            snapshot_every: cfg.output.snapshot_every,
            track_firms: Vec::new(),
        },
    };
    spec.validate()?;
    let result = beta_sweep_with_threads(&spec, resolve_threads(args.threads))?;

    let mut out = OutputDir::create(&args.out)?;
    let mut table = String::from("beta,mean_C,stderr,replicates,excluded\n");
    let mut regimes =
        String::from("beta,respawn_rate,mean_total_overlap,mean_max_share,rank_exponent\n");
    for (b, row) in result.rows.iter().enumerate() {
        table.push_str(&format!(
            "{},{},{},{},{}\n",
            row.beta, row.mean_c, row.std_error, row.replicates, row.excluded
        ));
        let exponents: Vec<f64> = result
            .cells_at(b)
            .filter_map(|c| c.outcome.as_ref().ok())
            .filter_map(|s: &CellSummary| {
                s.fit(RankWindow::default_for(s.rank_size.len()))
                    .ok()
                    .map(|f| f.exponent)
            })
            .collect();
        let exponent = if exponents.is_empty() {
            f64::NAN
        } else {
            exponents.iter().sum::<f64>() / exponents.len() as f64
        };
        regimes.push_str(&format!(
            "{},{},{},{},{}\n",
            row.beta, row.respawn_rate, row.mean_total_overlap, row.mean_max_share, exponent
        ));
    }
    out.write("c_of_beta.csv", &table)?;
    out.write("regimes.csv", &regimes)?;

    for (b, &beta) in spec.beta_values.iter().enumerate() {
        let sizes = result.pooled_sizes(b);
        let text = if sizes.is_empty() {
            String::from("bin_lo,bin_hi,count,density\n")
        } else {
            output::histogram_csv(&log_binned_histogram(
                &sizes,
                cfg.output.bins_per_decade,
                true,
            )?)
        };
        out.write(&histogram_file_name(beta), &text)?;
    }

    let grid = result
        .rows
        .iter()
        .map(|r| GridPoint {
            beta: r.beta,
            mean_c: r.mean_c,
            stderr: r.std_error,
        })
        .collect();
    let star = match find_min_correlation_beta(&result) {
        Ok(m) => BetaStar {
            beta_star: Some(m.beta),
            mean_c: Some(m.mean_c),
            interior: m.interior,
            warning: m.warning,
            grid,
        },
        Err(e) => BetaStar {
            beta_star: None,
            mean_c: None,
            interior: false,
            warning: Some(e.to_string()),
            grid,
        },
    };
    out.write_json("beta_star.json", &star)?;

    let manifest = finish_manifest(&mut out, "sweep", &loaded, &cfg, cfg.market.seed, started)?;
    Ok(SweepOutcome {
        out: args.out.clone(),
        manifest,
        beta_star: star.beta_star,
    })
}

pub fn read_ranksize(path: &Path) -> Result<Vec<RankSize>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        CliError::Usage(format!("cannot read {}: {e}", path.display()))
    })?;
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
        .clone();
    if headers.iter().collect::<Vec<_>>() != ["rank", "size"] {
        return Err(CliError::Usage(format!(
            "{}:1: expected header \"rank,size\"",
            path.display()
        )));
    }
    let mut curve = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| CliError::Usage(format!("{}:{line}: {e}", path.display())))?;
        let bad = || CliError::Usage(format!("{}:{line}: malformed row", path.display()));
        let rank = row.get(0).and_then(|s| s.trim().parse::<usize>().ok()).ok_or_else(bad)?;
        let size = row.get(1).and_then(|s| s.trim().parse::<f64>().ok()).ok_or_else(bad)?;
        curve.push(RankSize { rank, size });
    }
    Ok(curve)
}

/// Returns the fit as one line of JSON.
pub fn cmd_fit(args: &FitArgs) -> Result<String, CliError> {
    let method: FitMethod = args.method.parse()?;
    let curve = read_ranksize(&args.ranksize)?;
    let default = RankWindow::default_for(curve.len());
    let window = RankWindow {
        lo: args.rank_lo.unwrap_or(default.lo),
        hi: args.rank_hi.unwrap_or(default.hi),
    };
    let fit = fit_power_law(&curve, window, method)?;
    serde_json::to_string(&fit).map_err(|e| CliError::Io(e.to_string()))
}
