//! Scenario and experiment configuration.
//!
//! Configuration lives in a TOML file; every scalar can be overridden from
//! the command line. A `[fixed]` section turns the scenario into a replay:
//! capacities, caches and Has sets are taken verbatim and the channel model
//! is bypassed.

use serde::Deserialize;
use thiserror::Error;

use crate::sets::MAX_ELEMS;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config field `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
    #[error("failed to read config file: {0}")]
    Io(#[from] std::io::Error),
    #[error("failed to parse config file: {0}")]
    Parse(#[from] toml::de::Error),
}

fn invalid(field: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field,
        reason: reason.into(),
    }
}

/// Static scenario parameters. Rates derived from this config are in bits/s
/// (spectral efficiency times `bandwidth_hz`); `rate_threshold` is given as
/// spectral efficiency and scaled by the bandwidth at instantiation time.
/// Powers are given in dBm/Hz and converted to watts over the bandwidth.
#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub num_errhs: usize,
    pub num_users: usize,
    pub num_files: usize,
    pub file_size_bits: f64,
    pub cache_ratio: f64,
    /// QoS rate floor, bits/s/Hz.
    pub rate_threshold: f64,
    pub errh_power_dbm_hz: f64,
    pub user_power_dbm_hz: f64,
    pub noise_dbm_hz: f64,
    pub bandwidth_hz: f64,
    pub cell_radius_m: f64,
    pub coverage_radius_m: f64,
    /// Initial side information: |Has| drawn uniformly from
    /// [ceil(lo*F), floor(hi*F)].
    pub has_fraction_lo: f64,
    pub has_fraction_hi: f64,
    pub fading: bool,
    pub redraw_positions_per_slot: bool,
    /// Cap on the number of files XORed into one combination.
    pub combo_cap: usize,
    /// Optional explicit eRRH positions (meters, cell-centered).
    pub errh_positions: Option<Vec<(f64, f64)>>,
    pub max_slots: usize,
    /// Consecutive infeasible slots tolerated before declaring a stall when
    /// the channel varies between slots.
    pub stall_patience: usize,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            num_errhs: 3,
            num_users: 12,
            num_files: 15,
            file_size_bits: 1.0e6,
            cache_ratio: 0.6,
            rate_threshold: 0.05,
            errh_power_dbm_hz: -42.60,
            user_power_dbm_hz: -42.60,
            noise_dbm_hz: -174.0,
            bandwidth_hz: 1.0e6,
            cell_radius_m: 900.0,
            coverage_radius_m: 50.0,
            has_fraction_lo: 0.45,
            has_fraction_hi: 0.55,
            fading: true,
            redraw_positions_per_slot: false,
            combo_cap: 4,
            errh_positions: None,
            max_slots: 1_000_000,
            stall_patience: 1000,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.num_errhs == 0 {
            return Err(invalid("num_errhs", "must be positive"));
        }
        if self.num_users == 0 || self.num_users > MAX_ELEMS {
            return Err(invalid("num_users", format!("must be in 1..={MAX_ELEMS}")));
        }
        if self.num_files == 0 || self.num_files > MAX_ELEMS {
            return Err(invalid("num_files", format!("must be in 1..={MAX_ELEMS}")));
        }
        if !(0.0..=1.0).contains(&self.cache_ratio) {
            return Err(invalid("cache_ratio", "must lie in [0, 1]"));
        }
        let cache_size = (self.cache_ratio * self.num_files as f64).round() as usize;
        if cache_size == 0 {
            return Err(invalid("cache_ratio", "round(cache_ratio * num_files) must be >= 1"));
        }
        if cache_size * self.num_errhs < self.num_files {
            return Err(invalid(
                "cache_ratio",
                "caches cannot collectively cover the frame: round(mu*F)*K < F",
            ));
        }
        for (field, v) in [
            ("file_size_bits", self.file_size_bits),
            ("bandwidth_hz", self.bandwidth_hz),
            ("cell_radius_m", self.cell_radius_m),
            ("coverage_radius_m", self.coverage_radius_m),
        ] {
            if !(v > 0.0) {
                return Err(invalid(field, "must be positive"));
            }
        }
        if self.rate_threshold < 0.0 {
            return Err(invalid("rate_threshold", "must be non-negative"));
        }
        if !(0.0..=1.0).contains(&self.has_fraction_lo)
            || !(0.0..=1.0).contains(&self.has_fraction_hi)
            || self.has_fraction_lo > self.has_fraction_hi
        {
            return Err(invalid("has_fraction_lo", "need 0 <= lo <= hi <= 1"));
        }
        if self.combo_cap == 0 {
            return Err(invalid("combo_cap", "must be >= 1"));
        }
        if let Some(pos) = &self.errh_positions {
            if pos.len() != self.num_errhs {
                return Err(invalid("errh_positions", "length must equal num_errhs"));
            }
        }
        Ok(())
    }

    pub fn noise_power_w(&self) -> f64 {
        dbm_hz_to_watts(self.noise_dbm_hz, self.bandwidth_hz)
    }

    pub fn errh_max_power_w(&self) -> f64 {
        dbm_hz_to_watts(self.errh_power_dbm_hz, self.bandwidth_hz)
    }

    pub fn user_power_w(&self) -> f64 {
        dbm_hz_to_watts(self.user_power_dbm_hz, self.bandwidth_hz)
    }

    /// Rate floor in bits/s.
    pub fn rate_threshold_bps(&self) -> f64 {
        self.rate_threshold * self.bandwidth_hz
    }
}

/// dBm/Hz spectral density integrated over `bandwidth` Hz, in watts.
pub fn dbm_hz_to_watts(dbm_hz: f64, bandwidth: f64) -> f64 {
    10f64.powf(dbm_hz / 10.0) * 1e-3 * bandwidth
}

/// Replay section: everything the channel model would otherwise produce.
/// Rates are taken literally (bits/s); zone membership is `csm > 0`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedScenario {
    /// K rows of N capacities, bits/s.
    pub errh_caps: Vec<Vec<f64>>,
    /// N rows of N device-to-device capacities, bits/s; zero diagonal.
    pub csm: Vec<Vec<f64>>,
    /// Per-eRRH cached file indices (0-based).
    pub caches: Vec<Vec<usize>>,
    /// Per-user initially held file indices (0-based).
    pub has: Vec<Vec<usize>>,
}

impl FixedScenario {
    pub fn validate(&self, cfg: &ScenarioConfig) -> Result<(), ConfigError> {
        let (k, n, f) = (cfg.num_errhs, cfg.num_users, cfg.num_files);
        if self.errh_caps.len() != k || self.errh_caps.iter().any(|r| r.len() != n) {
            return Err(invalid("fixed.errh_caps", format!("must be {k} rows of {n}")));
        }
        if self.csm.len() != n || self.csm.iter().any(|r| r.len() != n) {
            return Err(invalid("fixed.csm", format!("must be {n}x{n}")));
        }
        for (i, row) in self.csm.iter().enumerate() {
            if row[i] != 0.0 {
                return Err(invalid("fixed.csm", format!("diagonal entry {i} must be 0")));
            }
        }
        if self.caches.len() != k {
            return Err(invalid("fixed.caches", format!("must have {k} entries")));
        }
        if self.has.len() != n {
            return Err(invalid("fixed.has", format!("must have {n} entries")));
        }
        if self.caches.iter().flatten().chain(self.has.iter().flatten()).any(|&x| x >= f) {
            return Err(invalid("fixed.caches", format!("file index out of range 0..{f}")));
        }
        let mut union = 0u64;
        for c in &self.caches {
            for &x in c {
                union |= 1 << x;
            }
        }
        if union.count_ones() as usize != f {
            return Err(invalid("fixed.caches", "cache union must cover the whole frame"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepVar {
    Users,
    Files,
    FileSize,
}

impl SweepVar {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepVar::Users => "users",
            SweepVar::Files => "files",
            SweepVar::FileSize => "file-size",
        }
    }
}

impl std::str::FromStr for SweepVar {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "users" => Ok(SweepVar::Users),
            "files" => Ok(SweepVar::Files),
            "file-size" | "file-size-bits" => Ok(SweepVar::FileSize),
            other => Err(format!("unknown sweep variable `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub sweep_var: Option<SweepVar>,
    pub sweep_values: Vec<f64>,
    pub schemes: Vec<String>,
    pub iterations: usize,
    pub base_seed: u64,
    pub out: Option<String>,
    pub threads: Option<usize>,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            sweep_var: None,
            sweep_values: Vec::new(),
            schemes: vec!["joint".into(), "coordinated".into()],
            iterations: 200,
            base_seed: 1,
            out: None,
            threads: None,
        }
    }
}

/// Whole config file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub scenario: ScenarioConfig,
    #[serde(default)]
    pub experiment: ExperimentSection,
    pub fixed: Option<FixedScenario>,
}

impl ConfigFile {
    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: ConfigFile = toml::from_str(text)?;
        cfg.scenario.validate()?;
        if let Some(fixed) = &cfg.fixed {
            fixed.validate(&cfg.scenario)?;
        }
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_match_protocol() {
        let cfg = ScenarioConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.num_errhs, 3);
        assert_eq!(cfg.coverage_radius_m, 50.0);
        assert_eq!(cfg.cell_radius_m, 900.0);
        assert_eq!(cfg.noise_dbm_hz, -174.0);
        assert_eq!(cfg.errh_power_dbm_hz, -42.60);
        assert_eq!(cfg.user_power_dbm_hz, -42.60);
        assert_eq!(cfg.cache_ratio, 0.6);
        assert_eq!(cfg.bandwidth_hz, 1.0e6);
    }

    #[test]
    fn power_conversion() {
        // -30 dBm/Hz over 1 kHz = 1 mW/Hz * 1e-3 * 1e3 = 1 mW.
        let w = dbm_hz_to_watts(-30.0, 1e3);
        assert!((w - 1e-3).abs() < 1e-12);
    }

    #[test]
    fn rejects_uncoverable_cache() {
        let cfg = ScenarioConfig {
            num_errhs: 2,
            num_files: 10,
            cache_ratio: 0.3,
            ..Default::default()
        };
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("cache_ratio"));
    }

    #[test]
    fn parse_toml_with_fixed_section() {
        let text = r#"
            [scenario]
            num_errhs = 2
            num_users = 3
            num_files = 2
            file_size_bits = 10.0
            cache_ratio = 1.0
            bandwidth_hz = 1.0
            rate_threshold = 0.0

            [fixed]
            errh_caps = [[1.0, 2.0, 3.0], [1.0, 1.0, 1.0]]
            csm = [[0.0, 5.0, 0.0], [0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]
            caches = [[0, 1], [0, 1]]
            has = [[0], [1], []]
        "#;
        let cfg = ConfigFile::parse(text).unwrap();
        assert!(cfg.fixed.is_some());
    }

    #[test]
    fn diagnostic_names_offending_field() {
        let cfg = ScenarioConfig {
            num_users: 0,
            ..Default::default()
        };
        assert!(cfg.validate().unwrap_err().to_string().contains("num_users"));
    }
}
