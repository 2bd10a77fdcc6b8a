//! Flat `key = value` experiment configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Grids are either a
//! comma-separated list (`0.1, 0.2, 0.4`) or `start:step:stop`. Any key left
//! out keeps its reference value; see [`ExperimentConfig::default`].

use std::collections::HashSet;
use std::path::PathBuf;
use std::str::FromStr;

use eharq::model::{ChannelModel, EnergyQuanta, HarvestDistribution, LinkConfig, LinkParameters, Protocol};

use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub rate: f64,
    pub tx_power: f64,
    pub mean_gain: f64,
    pub max_attempts: usize,
    pub battery_capacity: u32,
    pub cost_sample: u32,
    pub cost_decode: u32,
    pub cost_feedback: u32,
    pub harvest_amount: u32,
    pub rho: f64,
    pub protocol: Protocol,
    pub tth: f64,
    pub rho_grid: Vec<f64>,
    pub tth_grid: Vec<f64>,
    pub ef_grid: Vec<u32>,
    pub horizon: u64,
    pub seed: u64,
    pub reps: usize,
    pub imax: usize,
    pub delta: f64,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            rate: 0.5,
            tx_power: 1.0,
            mean_gain: 1.0,
            max_attempts: 4,
            battery_capacity: 15,
            cost_sample: 3,
            cost_decode: 3,
            cost_feedback: 1,
            harvest_amount: 6,
            rho: 0.6,
            protocol: Protocol::AdaptiveFeedback,
            tth: 0.2,
            rho_grid: (1..=9).map(|i| i as f64 / 10.0).collect(),
            tth_grid: (0..=26).map(|i| i as f64 / 40.0).collect(),
            ef_grid: vec![1, 2],
            horizon: 1_000_000,
            seed: 20_160_101,
            reps: 10,
            imax: eharq::opt::DEFAULT_MAX_ITERATIONS,
            delta: eharq::opt::DEFAULT_TOLERANCE,
            workers: None,
            out: None,
        }
    }
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn number<T: FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value.trim().parse().map_err(|_| bad(format!("{key}: cannot parse {value:?}")))
}

fn round12(x: f64) -> f64 {
    (x * 1e12).round() / 1e12
}

/// Parses `a,b,c` or `start:step:stop`; the result must be non-empty and
/// strictly increasing.
pub fn parse_grid(key: &str, text: &str) -> Result<Vec<f64>, CliError> {
    let values: Vec<f64> = if text.contains(':') {
        let parts: Vec<f64> = text.split(':').map(|p| number(key, p)).collect::<Result<_, _>>()?;
        let [start, step, stop] = parts[..] else {
            return Err(bad(format!("{key}: range must be start:step:stop")));
        };
        if !(step > 0.0) || stop < start {
            return Err(bad(format!("{key}: empty range {text:?}")));
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
        (0..n).map(|i| round12(start + i as f64 * step)).collect()
    } else {
        text.split(',').map(|p| number(key, p)).collect::<Result<_, _>>()?
    };
    if values.is_empty() || values.iter().any(|v: &f64| !v.is_finite()) {
        return Err(bad(format!("{key}: grid must hold finite values")));
    }
    if values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(bad(format!("{key}: grid must be strictly increasing")));
    }
    Ok(values)
}

fn integer_grid(key: &str, text: &str) -> Result<Vec<u32>, CliError> {
    parse_grid(key, text)?
        .into_iter()
        .map(|v| {
            if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
                Ok(v as u32)
            } else {
                Err(bad(format!("{key}: {v} is not a whole number of quanta")))
            }
        })
        .collect()
}

impl ExperimentConfig {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let value = value.trim();
        match key {
            "rate" => self.rate = number(key, value)?,
            "tx_power" => self.tx_power = number(key, value)?,
            "mean_gain" => self.mean_gain = number(key, value)?,
            "max_attempts" | "k" => self.max_attempts = number(key, value)?,
            "battery_capacity" => self.battery_capacity = number(key, value)?,
            "cost_sample" => self.cost_sample = number(key, value)?,
            "cost_decode" => self.cost_decode = number(key, value)?,
            "cost_feedback" | "ef" => self.cost_feedback = number(key, value)?,
            "harvest_amount" => self.harvest_amount = number(key, value)?,
            "rho" => self.rho = number(key, value)?,
            "protocol" => self.protocol = value.parse().map_err(|e: String| bad(e))?,
            "tth" => self.tth = number(key, value)?,
            "rho_grid" => self.rho_grid = parse_grid(key, value)?,
            "tth_grid" => self.tth_grid = parse_grid(key, value)?,
            "ef_grid" => self.ef_grid = integer_grid(key, value)?,
            "horizon" => self.horizon = number(key, value)?,
            "seed" => self.seed = number(key, value)?,
            "reps" => self.reps = number(key, value)?,
            "imax" => self.imax = number(key, value)?,
            "delta" => self.delta = number(key, value)?,
            "workers" => self.workers = Some(number(key, value)?),
            "out" => self.out = Some(PathBuf::from(value)),
            _ => return Err(bad(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut cfg = ExperimentConfig::default();
        let mut seen = HashSet::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(bad(format!("line {}: expected key = value", n + 1)));
            };
            let key = key.trim();
            if !seen.insert(key.to_string()) {
                return Err(bad(format!("line {}: duplicate key {key:?}", n + 1)));
            }
            cfg.set(key, value).map_err(|e| bad(format!("line {}: {e}", n + 1)))?;
        }
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| bad(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Range checks that do not need a built link.
    pub fn validate(&self) -> Result<(), CliError> {
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(bad(format!("rho {} outside [0, 1]", self.rho)));
        }
        if let Some(r) = self.rho_grid.iter().find(|r| !(0.0..=1.0).contains(*r)) {
            return Err(bad(format!("rho_grid value {r} outside [0, 1]")));
        }
        if let Some(t) = std::iter::once(&self.tth).chain(&self.tth_grid).find(|t| !(**t >= 0.0)) {
            return Err(bad(format!("throughput floor {t} must be non-negative")));
        }
        if self.horizon == 0 {
            return Err(bad("horizon must be positive"));
        }
        if self.imax == 0 {
            return Err(bad("imax must be positive"));
        }
        if !(self.delta > 0.0) {
            return Err(bad(format!("delta {} must be positive", self.delta)));
        }
        if self.workers == Some(0) {
            return Err(bad("workers must be positive"));
        }
        for (key, grid) in [("rho_grid", &self.rho_grid), ("tth_grid", &self.tth_grid)] {
            if grid.is_empty() || grid.windows(2).any(|w| w[1] <= w[0]) {
                return Err(bad(format!("{key} must be non-empty and strictly increasing")));
            }
        }
        if self.ef_grid.is_empty() || self.ef_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(bad("ef_grid must be non-empty and strictly increasing"));
        }
        Ok(())
    }

    /// The link at harvest probability `rho` and feedback cost `ef`.
    pub fn link_at(&self, rho: f64, ef: u32) -> Result<LinkParameters, CliError> {
        let harvest = HarvestDistribution::bernoulli(EnergyQuanta(self.harvest_amount), rho)
            .map_err(|e| bad(e.to_string()))?;
        LinkConfig {
            channel: ChannelModel::Rayleigh { rate: self.rate, tx_power: self.tx_power, mean_gain: self.mean_gain },
            max_attempts: self.max_attempts,
            battery_capacity: EnergyQuanta(self.battery_capacity),
            cost_sample: EnergyQuanta(self.cost_sample),
            cost_decode: EnergyQuanta(self.cost_decode),
            cost_feedback: EnergyQuanta(ef),
            harvest,
        }
        .build()
        .map_err(|e| bad(e.to_string()))
    }

    pub fn link(&self) -> Result<LinkParameters, CliError> {
        self.link_at(self.rho, self.cost_feedback)
    }
}
