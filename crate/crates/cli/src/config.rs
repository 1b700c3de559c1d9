//! Run configuration files.
//!
//! ```toml
//! [market]            # MarketConfig fields; anything omitted keeps its default
//! n_firms = 200
//! circumference = 1.2e5
//! beta = 2.0
//!
//! [output]
//! snapshot_every = 1000
//! bins_per_decade = 10
//! track_firm = 7
//!
//! [sweep]
//! betas = [0.5, 1, 2, 4]
//! replicates = 3
//! ```
//!
//! An empty file reproduces the reference protocol.

use std::path::Path;

use pareto_market::harness::DEFAULT_SNAPSHOT_EVERY;
use pareto_market::observables::BINS_PER_DECADE;
use pareto_market::MarketConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub snapshot_every: u64,
    pub bins_per_decade: u32,
    pub track_firm: Option<usize>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            snapshot_every: DEFAULT_SNAPSHOT_EVERY,
            bins_per_decade: BINS_PER_DECADE,
            track_firm: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub betas: Option<Vec<f64>>,
    pub replicates: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub market: MarketConfig,
    pub output: OutputSection,
    pub sweep: SweepSection,
}

/// A parsed config together with the exact text it came from.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub source: String,
    pub origin: String,
}

impl LoadedConfig {
    pub fn defaults() -> Self {
        Self {
            config: RunConfig::default(),
            source: String::new(),
            origin: "<defaults>".into(),
        }
    }

    /// Reports a validation failure at the line that sets `key`, if any.
    /// Usage error anchored at the first of `keys` that is set in the file.
    pub fn error_at(&self, keys: &[&str], msg: impl std::fmt::Display) -> CliError {
        let line = keys.iter().find_map(|key| {
            self.source.lines().position(|l| {
                l.trim_start()
                    .strip_prefix(key)
                    .is_some_and(|rest| rest.trim_start().starts_with('='))
            })
        });
        match line {
            Some(n) => CliError::Usage(format!("{}:{}: {msg}", self.origin, n + 1)),
            None => CliError::Usage(format!("{}: {msg}", self.origin)),
        }
    }
}

pub fn parse(source: &str, origin: &str) -> Result<LoadedConfig, CliError> {
    let config: RunConfig = toml::from_str(source).map_err(|e| {
        let line = e
            .span()
            .map(|s| source[..s.start.min(source.len())].matches('\n').count() + 1);
        let msg = e.message().trim().to_string();
        match line {
            Some(n) => CliError::Usage(format!("{origin}:{n}: {msg}")),
            None => CliError::Usage(format!("{origin}: {msg}")),
        }
    })?;
    Ok(LoadedConfig {
        config,
        source: source.to_string(),
        origin: origin.to_string(),
    })
}

pub fn load(path: Option<&Path>) -> Result<LoadedConfig, CliError> {
    let Some(path) = path else {
        return Ok(LoadedConfig::defaults());
    };
    let source = std::fs::read_to_string(path).map_err(|e| {
        let msg = format!("cannot read config {}: {e}", path.display());
        if e.kind() == std::io::ErrorKind::NotFound {
            CliError::Usage(msg)
        } else {
            CliError::Io(msg)
        }
    })?;
    parse(&source, &path.display().to_string())
}

/// Maps a `MarketConfig` validation message to the field it complains about.
pub fn offending_keys(msg: &str) -> Vec<&'static str> {
    // r_min/r_max messages also mention the circumference
    const KEYS: [&str; 7] = [
        "r_min",
        "r_max",
        "n_firms",
        "alpha",
        "beta",
        "sample_stride",
        "circumference",
    ];
    KEYS.into_iter().filter(|k| msg.contains(k)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_reference_protocol() {
        let c = parse("", "empty.toml").unwrap();
        assert_eq!(c.config.market, MarketConfig::default());
        assert_eq!(c.config.output.snapshot_every, 1000);
        assert_eq!(c.config.output.bins_per_decade, 10);
    }

    #[test]
    fn partial_market_section() {
        let c = parse("[market]\nbeta = 4.0\nn_firms = 20\n", "x.toml").unwrap();
        assert_eq!(c.config.market.beta, 4.0);
        assert_eq!(c.config.market.n_firms, 20);
        assert_eq!(c.config.market.alpha, 0.01);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = parse("[market]\nbeta = 1.0\nbogus = 3\n", "x.toml").unwrap_err();
        let CliError::Usage(msg) = err else { panic!() };
        assert!(msg.starts_with("x.toml:3:"), "{msg}");
        let err = parse("[market]\nn_firms = \"many\"\n", "y.toml").unwrap_err();
        let CliError::Usage(msg) = err else { panic!() };
        assert!(msg.starts_with("y.toml:2:"), "{msg}");
    }

    #[test]
    fn validation_errors_point_at_the_key() {
        let c = parse("[market]\n\nalpha = -1\n", "z.toml").unwrap();
        let CliError::Usage(msg) = c.error_at(&["alpha"], "bad") else { panic!() };
        assert_eq!(msg, "z.toml:3: bad");
        assert_eq!(offending_keys("alpha must be positive, got -1"), ["alpha"]);
        assert_eq!(offending_keys("need r_min < r_max"), ["r_min", "r_max"]);
        let c = parse("[market]\nr_max = 1\n", "w.toml").unwrap();
        let CliError::Usage(msg) = c.error_at(&["r_min", "r_max"], "bad") else { panic!() };
        assert_eq!(msg, "w.toml:2: bad");
    }
}
