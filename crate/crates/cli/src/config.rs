//! Resolved run settings. Defaults are overridden by command-line flags, which are in
//! turn overridden by keys from a TOML config file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use svqkd_core::session::DEFAULT_ABORT_SIGMA;

use crate::error::CliError;

pub const DEFAULT_PARTIES: usize = 3;
pub const DEFAULT_ROUNDS: usize = 40_000;
pub const DEFAULT_VISIBILITY: f64 = 1.0;
pub const DEFAULT_SEED: u64 = 0;
pub const DEFAULT_RESTARTS: usize = 200;
pub const DEFAULT_GRID: &str = "0:1:0.01";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    /// Aligned text for reading.
    #[default]
    Table,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum AttackKind {
    /// Intercept and resend spin eigenstates along optimized directions.
    ProductState,
    /// Fix the outcomes of all but one party.
    OutcomeControl,
    /// Mix known local correlations with GHZ correlations.
    ConvexCombination,
}

/// Every setting a command may use.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub parties: usize,
    pub rounds: usize,
    pub visibility: f64,
    pub seed: u64,
    pub abort_sigma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attack: Option<AttackKind>,
    /// JSON or TOML file holding a full attack description; wins over `attack`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attack_spec: Option<PathBuf>,
    /// Optimizer restarts for the product-state attack.
    pub restarts: usize,
    pub grid: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transcript: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    pub format: Format,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            parties: DEFAULT_PARTIES,
            rounds: DEFAULT_ROUNDS,
            visibility: DEFAULT_VISIBILITY,
            seed: DEFAULT_SEED,
            abort_sigma: DEFAULT_ABORT_SIGMA,
            attack: None,
            attack_spec: None,
            restarts: DEFAULT_RESTARTS,
            grid: DEFAULT_GRID.to_string(),
            transcript: None,
            summary: None,
            output: None,
            format: Format::Table,
        }
    }
}

/// A layer of optional overrides, from flags or from a file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    pub parties: Option<usize>,
    pub rounds: Option<usize>,
    pub visibility: Option<f64>,
    pub seed: Option<u64>,
    pub abort_sigma: Option<f64>,
    pub attack: Option<AttackKind>,
    pub attack_spec: Option<PathBuf>,
    pub restarts: Option<usize>,
    pub grid: Option<String>,
    pub transcript: Option<PathBuf>,
    pub summary: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub format: Option<Format>,
}

macro_rules! apply_fields {
    ($cfg:ident, $layer:ident, [$($plain:ident),*], [$($opt:ident),*]) => {
        $(if let Some(v) = $layer.$plain { $cfg.$plain = v; })*
        $(if $layer.$opt.is_some() { $cfg.$opt = $layer.$opt; })*
    };
}

impl RunConfig {
    pub fn apply(mut self, layer: Overrides) -> RunConfig {
        apply_fields!(
            self,
            layer,
            [parties, rounds, visibility, seed, abort_sigma, restarts, grid, format],
            [attack, attack_spec, transcript, summary, output]
        );
        self
    }

    /// Defaults, then `flags`, then the optional config file.
    pub fn resolve(flags: Overrides, file: Option<&Path>) -> Result<RunConfig, CliError> {
        let mut cfg = RunConfig::default().apply(flags);
        if let Some(path) = file {
            cfg = cfg.apply(load_overrides(path)?);
        }
        Ok(cfg)
    }
}

pub fn load_overrides(path: &Path) -> Result<Overrides, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    toml::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
}

/// Parses `start:end:step`, a comma list, or a single value.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Usage(format!("invalid grid '{spec}', expected start:end:step or v1,v2,..."));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
    let parts: Vec<&str> = spec.split(':').collect();
    let grid = match parts.as_slice() {
        [start, end, step] => {
            let (start, end, step) = (num(start)?, num(end)?, num(step)?);
            if !step.is_finite() || step <= 0.0 || !start.is_finite() || !end.is_finite() || start > end {
                return Err(bad());
            }
            let count = ((end - start) / step + 1e-9).floor() as usize + 1;
            (0..count).map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12).collect()
        }
        [list] if !list.trim().is_empty() => list.split(',').map(num).collect::<Result<Vec<_>, _>>()?,
        _ => return Err(bad()),
    };
    if grid.is_empty() {
        return Err(CliError::Usage("empty grid".into()));
    }
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layers_apply_in_order() {
        let flags = Overrides { parties: Some(4), seed: Some(9), ..Default::default() };
        let file = Overrides { seed: Some(11), ..Default::default() };
        let cfg = RunConfig::default().apply(flags).apply(file);
        assert_eq!((cfg.parties, cfg.seed, cfg.rounds), (4, 11, DEFAULT_ROUNDS));
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(toml::from_str::<Overrides>("partys = 3").is_err());
        let o: Overrides = toml::from_str("parties = 5\nformat = \"json\"").unwrap();
        assert_eq!(o.parties, Some(5));
        assert_eq!(o.format, Some(Format::Json));
    }

    #[test]
    fn grids() {
        let g = parse_grid("0.70:1.00:0.01").unwrap();
        assert_eq!(g.len(), 31);
        assert_eq!(g[8], 0.78);
        assert_eq!(g[30], 1.0);
        assert_eq!(parse_grid("1").unwrap(), vec![1.0]);
        assert_eq!(parse_grid("0.8,0.9").unwrap(), vec![0.8, 0.9]);
        assert!(parse_grid("").is_err());
        assert!(parse_grid("1:0:0.1").is_err());
        assert!(parse_grid("0:1:0").is_err());
    }
}
