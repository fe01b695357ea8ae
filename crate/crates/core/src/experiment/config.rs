use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::{PathlossParams, SeConfig};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Rsa,
    Regenerative,
    DistributedRsa,
    Random,
    Maxmin,
    Bnp,
}

impl Scheme {
    pub const ALL: [Scheme; 6] = [
        Scheme::Rsa,
        Scheme::Regenerative,
        Scheme::DistributedRsa,
        Scheme::Random,
        Scheme::Maxmin,
        Scheme::Bnp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Rsa => "rsa",
            Scheme::Regenerative => "regenerative",
            Scheme::DistributedRsa => "distributed-rsa",
            Scheme::Random => "random",
            Scheme::Maxmin => "maxmin",
            Scheme::Bnp => "bnp",
        }
    }

    pub fn default_trials(self) -> usize {
        match self {
            Scheme::Maxmin => 100,
            Scheme::Bnp => 50,
            _ => 500,
        }
    }

    pub fn uses_radius(self) -> bool {
        matches!(self, Scheme::Rsa | Scheme::Regenerative | Scheme::DistributedRsa)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Scheme::ALL.iter().map(|k| k.name()).collect();
                Error::Config(format!("unknown scheme `{s}`; expected one of {}", names.join(", ")))
            })
    }
}

/// Flat, typed experiment description. Every key is optional in the file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scheme: Scheme,
    /// RRHs per m².
    pub rrh_density: f64,
    /// Users per m².
    pub user_density: f64,
    pub pilots: usize,
    pub inhibition_radius: f64,
    /// When non-empty, one run per radius replaces `inhibition_radius`.
    pub inhibition_radii: Vec<f64>,
    pub generation_radius: f64,
    pub measurement_radius: f64,
    pub pilot_snr_db: f64,
    pub sinr_cap_db: f64,
    /// Defaults by scheme when absent.
    pub trials: Option<usize>,
    pub seed: u64,
    pub street_width: f64,
    pub ap_height: f64,
    pub user_height: f64,
    pub building_height: f64,
    pub carrier_ghz: f64,
    pub sinr_floor_db: f64,
    pub big_m: f64,
    pub maxmin_epsilon: f64,
    /// Fixed spectral cluster count for BnP.
    pub clusters: Option<usize>,
    pub time_budget_s: f64,
    /// Deterministic BnP work limit.
    pub max_pricing_calls: Option<usize>,
    /// Adds wall-clock milliseconds to each row; output is then not reproducible.
    pub record_timing: bool,
    /// Skip the window sum SE, which dominates cost at high densities.
    pub skip_sum_se: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let pl = PathlossParams::<f64>::default();
        ExperimentConfig {
            scheme: Scheme::Rsa,
            rrh_density: 1e-4,
            user_density: 1e-5,
            pilots: 16,
            inhibition_radius: 200.0,
            inhibition_radii: Vec::new(),
            generation_radius: 1500.0,
            measurement_radius: 600.0,
            pilot_snr_db: 80.0,
            sinr_cap_db: 40.0,
            trials: None,
            seed: 1,
            street_width: pl.street_width,
            ap_height: pl.ap_height,
            user_height: pl.user_height,
            building_height: pl.building_height,
            carrier_ghz: pl.carrier_ghz,
            sinr_floor_db: 0.0,
            big_m: 1e6,
            maxmin_epsilon: 1.0,
            clusters: None,
            time_budget_s: 10.0,
            max_pricing_calls: None,
            record_timing: false,
            skip_sum_se: false,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let table: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Self::from_table(table)
    }

    fn from_table(table: toml::Table) -> Result<Self> {
        let cfg: ExperimentConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses the file, then applies `key=value` overrides. Values are read
    /// as TOML, falling back to a bare string.
    pub fn load(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        for o in overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override `{o}` is not key=value")))?;
            let (k, v) = (k.trim(), v.trim());
            let value = toml::from_str::<toml::Table>(&format!("x = {v}"))
                .ok()
                .and_then(|mut t| t.remove("x"))
                .unwrap_or_else(|| toml::Value::String(v.to_string()));
            table.insert(k.to_string(), value);
        }
        Self::from_table(table)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.trials == Some(0) {
            return bad("trials must be >= 1".into());
        }
        if self.pilots == 0 {
            return bad("pilots must be >= 1".into());
        }
        for (name, v) in [("rrh_density", self.rrh_density), ("user_density", self.user_density)] {
            if !(v >= 0.0) || !v.is_finite() {
                return bad(format!("{name} must be finite and >= 0, got {v}"));
            }
        }
        if !(self.generation_radius > 0.0) || !(self.measurement_radius > 0.0) {
            return bad("window radii must be > 0".into());
        }
        if self.measurement_radius > self.generation_radius {
            return bad("measurement_radius exceeds generation_radius".into());
        }
        if self.radii().iter().any(|r| !(*r >= 0.0)) {
            return bad("inhibition radii must be >= 0".into());
        }
        if !(self.time_budget_s >= 0.0) {
            return bad("time_budget_s must be >= 0".into());
        }
        self.pathloss().validate().map_err(|e| Error::Config(e.to_string()))
    }

    pub fn trials(&self) -> usize {
        self.trials.unwrap_or(self.scheme.default_trials())
    }

    pub fn radii(&self) -> Vec<f64> {
        if self.inhibition_radii.is_empty() {
            vec![self.inhibition_radius]
        } else {
            self.inhibition_radii.clone()
        }
    }

    pub fn pathloss(&self) -> PathlossParams<f64> {
        PathlossParams {
            street_width: self.street_width,
            ap_height: self.ap_height,
            user_height: self.user_height,
            building_height: self.building_height,
            carrier_ghz: self.carrier_ghz,
        }
    }

    /// Pilot length equals the pilot count.
    pub fn se_config(&self) -> SeConfig<f64> {
        SeConfig {
            pathloss: self.pathloss(),
            pilot_energy: self.pilots as f64 * 10f64.powf(self.pilot_snr_db / 10.0),
            sinr_cap_db: self.sinr_cap_db,
        }
    }
}
