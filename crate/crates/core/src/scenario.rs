//! Scenario files: flat `key = value` TOML mirroring [`NetworkConfig`], with
//! powers in dB, plus sweep settings.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dof::{db_to_linear, SweepSpec, DEFAULT_REL_TOL};
use crate::error::{Error, Result};
use crate::model::{Duplex, NetworkConfig, RelayMode};
use crate::scheme::Scheme;

/// Every key a scenario file (or an override) may set.
pub const KEYS: [&str; 16] = [
    "k",
    "m",
    "relay_mode",
    "duplex",
    "gain_min",
    "gain_max",
    "p_db",
    "p_r_db",
    "noise_var",
    "master_seed",
    "scheme",
    "grid_start_db",
    "grid_stop_db",
    "grid_step_db",
    "trials",
    "rel_tol",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Scenario {
    pub k: usize,
    pub m: usize,
    pub relay_mode: RelayMode,
    pub duplex: Duplex,
    pub gain_min: f64,
    pub gain_max: f64,
    pub p_db: f64,
    /// Relay budget; follows `p_db` when absent.
    pub p_r_db: Option<f64>,
    pub noise_var: f64,
    pub master_seed: u64,
    /// Forces a scheme instead of deriving it from the relay settings.
    pub scheme: Option<Scheme>,
    pub grid_start_db: f64,
    pub grid_stop_db: f64,
    pub grid_step_db: f64,
    pub trials: usize,
    pub rel_tol: f64,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            k: 2,
            m: 0,
            relay_mode: RelayMode::None,
            duplex: Duplex::Full,
            gain_min: 0.1,
            gain_max: 10.0,
            p_db: 40.0,
            p_r_db: None,
            noise_var: 1.0,
            master_seed: 0,
            scheme: None,
            grid_start_db: 30.0,
            grid_stop_db: 90.0,
            grid_step_db: 10.0,
            trials: 200,
            rel_tol: DEFAULT_REL_TOL,
        }
    }
}

fn parse_value(raw: &str) -> toml::Value {
    let raw = raw.trim();
    match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

impl Scenario {
    /// Parses scenario text and applies `key=value` overrides on top.
    pub fn parse(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(format!("scenario does not parse: {e}")))?;
        for key in table.keys() {
            if !KEYS.contains(&key.as_str()) {
                return Err(Error::Config(format!("unknown scenario key '{key}'")));
            }
        }
        for item in overrides {
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override '{item}' is not key=value")))?;
            let key = key.trim();
            if !KEYS.contains(&key) {
                return Err(Error::Config(format!("override references unknown key '{key}'")));
            }
            table.insert(key.to_string(), parse_value(value));
        }
        let scenario: Scenario = table
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(format!("invalid scenario: {e}")))?;
        scenario.network_config().validate()?;
        Ok(scenario)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, overrides)
    }

    pub fn network_config(&self) -> NetworkConfig {
        NetworkConfig {
            k: self.k,
            m: self.m,
            relay_mode: self.relay_mode,
            duplex: self.duplex,
            gain_min: self.gain_min,
            gain_max: self.gain_max,
            p: db_to_linear(self.p_db),
            p_r: db_to_linear(self.p_r_db.unwrap_or(self.p_db)),
            noise_var: self.noise_var,
        }
    }

    /// The forced scheme if any, else the one implied by the relay settings.
    pub fn scheme(&self) -> Result<Scheme> {
        let cfg = self.network_config();
        match self.scheme {
            Some(s) => s.check_feasible(&cfg).map(|_| s),
            None => Scheme::for_config(&cfg),
        }
    }

    #[allow(clippy::neg_cmp_op_on_partial_ord)] // negated comparisons also reject NaN
    pub fn grid(&self) -> Result<Vec<f64>> {
        if !(self.grid_step_db > 0.0) || self.grid_stop_db < self.grid_start_db {
            return Err(Error::Config("grid needs a positive step and stop >= start".into()));
        }
        let n = ((self.grid_stop_db - self.grid_start_db) / self.grid_step_db + 1e-9).floor() as usize;
        Ok((0..=n).map(|i| self.grid_start_db + i as f64 * self.grid_step_db).collect())
    }

    pub fn sweep_spec(&self) -> Result<SweepSpec> {
        let spec = SweepSpec::new(self.network_config(), self.scheme()?, self.grid()?, self.trials);
        spec.validate()?;
        Ok(spec)
    }
}
