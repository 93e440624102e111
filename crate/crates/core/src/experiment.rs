//! Experiment orchestration: parameter sweeps over the Monte Carlo engine
//! and deterministic CSV emission.

use std::io::Write;
use std::path::Path;

use thiserror::Error;

use crate::config::{ConfigFile, ScenarioConfig, SweepVar};
use crate::schedulers::Scheme;
use crate::sim::{monte_carlo, Aggregate, EpisodeResult};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("experiment field `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

fn invalid(field: &'static str, reason: impl Into<String>) -> ExperimentError {
    ExperimentError::Invalid { field, reason: reason.into() }
}

/// A fully resolved experiment: which scenario knob to sweep, which schemes
/// to compare, and how many paired iterations per point.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub scenario: ScenarioConfig,
    /// None runs a single point at the scenario's own values.
    pub sweep_var: Option<SweepVar>,
    pub sweep_values: Vec<f64>,
    pub schemes: Vec<Scheme>,
    pub iterations: usize,
    pub base_seed: u64,
}

impl ExperimentSpec {
    pub fn from_config(cfg: &ConfigFile) -> Result<Self, ExperimentError> {
        let schemes = cfg
            .experiment
            .schemes
            .iter()
            .map(|s| s.parse::<Scheme>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| invalid("schemes", e))?;
        let spec = Self {
            scenario: cfg.scenario.clone(),
            sweep_var: cfg.experiment.sweep_var,
            sweep_values: cfg.experiment.sweep_values.clone(),
            schemes,
            iterations: cfg.experiment.iterations,
            base_seed: cfg.experiment.base_seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        self.scenario.validate()?;
        if self.schemes.is_empty() {
            return Err(invalid("schemes", "at least one scheme is required"));
        }
        let mut seen = std::collections::BTreeSet::new();
        for s in &self.schemes {
            if !seen.insert(*s) {
                return Err(invalid("schemes", format!("duplicate scheme `{s}`")));
            }
        }
        if self.iterations == 0 {
            return Err(invalid("iterations", "must be >= 1"));
        }
        match self.sweep_var {
            Some(_) => {
                if self.sweep_values.is_empty() {
                    return Err(invalid("sweep_values", "sweep variable set but no values given"));
                }
                if !self.sweep_values.windows(2).all(|w| w[0] < w[1]) {
                    return Err(invalid("sweep_values", "values must be strictly increasing"));
                }
                for &v in &self.sweep_values {
                    if !(v > 0.0) {
                        return Err(invalid("sweep_values", "values must be positive"));
                    }
                }
            }
            None => {
                if !self.sweep_values.is_empty() {
                    return Err(invalid("sweep_var", "sweep values given without a sweep variable"));
                }
            }
        }
        Ok(())
    }

    fn scenario_at(&self, value: f64) -> ScenarioConfig {
        let mut sc = self.scenario.clone();
        match self.sweep_var {
            Some(SweepVar::Users) => sc.num_users = value as usize,
            Some(SweepVar::Files) => sc.num_files = value as usize,
            Some(SweepVar::FileSize) => sc.file_size_bits = value,
            None => {}
        }
        sc
    }

    fn points(&self) -> Vec<f64> {
        match self.sweep_var {
            Some(_) => self.sweep_values.clone(),
            // Single point labelled by the scenario's user count.
            None => vec![self.scenario.num_users as f64],
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentRow {
    pub scheme: Scheme,
    pub sweep_var: &'static str,
    pub sweep_value: f64,
    pub agg: Aggregate,
}

pub struct ExperimentOutput {
    pub rows: Vec<ExperimentRow>,
    /// Per (sweep point, scheme) episode lists, in row order; present only
    /// when requested.
    pub episodes: Vec<Vec<EpisodeResult>>,
    pub csv: String,
}

pub const CSV_HEADER: &str =
    "scheme,sweep_var,sweep_value,iterations,completed,stalled,mean_T_o_s,std_T_o_s,ci95_lo,ci95_hi,mean_slots";

fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else {
        format!("{x:.9e}")
    }
}

pub fn csv_row(row: &ExperimentRow) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{},{}",
        row.scheme,
        row.sweep_var,
        fmt_f64(row.sweep_value),
        row.agg.iterations,
        row.agg.completed,
        row.agg.stalled,
        fmt_f64(row.agg.mean),
        fmt_f64(row.agg.std_dev),
        fmt_f64(row.agg.ci95_lo),
        fmt_f64(row.agg.ci95_hi),
        fmt_f64(row.agg.mean_slots),
    )
}

/// Run the sweep. Rows are ordered by sweep value then scheme order; the CSV
/// is byte-identical across runs of the same spec.
pub fn run_experiment(spec: &ExperimentSpec, keep_episodes: bool) -> Result<ExperimentOutput, ExperimentError> {
    spec.validate()?;
    let var_name = spec.sweep_var.map(|v| v.as_str()).unwrap_or("users");
    let mut rows = Vec::new();
    let mut episodes = Vec::new();
    let mut csv = String::from(CSV_HEADER);
    csv.push('\n');
    for value in spec.points() {
        let sc = spec.scenario_at(value);
        sc.validate()?;
        let results = monte_carlo(&sc, &spec.schemes, spec.iterations, spec.base_seed, keep_episodes);
        for (agg, eps) in results {
            let row = ExperimentRow { scheme: agg.scheme, sweep_var: var_name, sweep_value: value, agg };
            csv.push_str(&csv_row(&row));
            csv.push('\n');
            rows.push(row);
            episodes.push(if keep_episodes { eps } else { Vec::new() });
        }
    }
    Ok(ExperimentOutput { rows, episodes, csv })
}

/// Run and write the CSV; returns the output and whether any point stalled
/// in every iteration (nonzero exit for the CLI).
pub fn run_experiment_to_file(
    spec: &ExperimentSpec,
    out: &Path,
    keep_episodes: bool,
) -> Result<(ExperimentOutput, bool), ExperimentError> {
    let output = run_experiment(spec, keep_episodes)?;
    let mut file = std::fs::File::create(out)?;
    file.write_all(output.csv.as_bytes())?;
    let any_dead_point = output.rows.iter().any(|r| r.agg.completed == 0);
    Ok((output, any_dead_point))
}

/// Human-readable summary table for the terminal.
pub fn summary_table(rows: &[ExperimentRow]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<24} {:>10} {:>12} {:>12} {:>8} {:>10}\n",
        "scheme", "sweep", "mean T_o[s]", "std[s]", "stalled", "mean slots"
    ));
    for r in rows {
        out.push_str(&format!(
            "{:<24} {:>10} {:>12.4} {:>12.4} {:>8} {:>10.2}\n",
            r.scheme.to_string(),
            r.sweep_value,
            r.agg.mean,
            r.agg.std_dev,
            r.agg.stalled,
            r.agg.mean_slots
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_spec() -> ExperimentSpec {
        ExperimentSpec {
            scenario: ScenarioConfig {
                num_users: 4,
                num_files: 4,
                cache_ratio: 0.75,
                num_errhs: 2,
                rate_threshold: 0.0,
                ..Default::default()
            },
            sweep_var: None,
            sweep_values: vec![],
            schemes: vec![Scheme::RaIdnc, Scheme::UncodedUnicast],
            iterations: 3,
            base_seed: 9,
        }
    }

    #[test]
    fn empty_scheme_list_is_rejected() {
        let mut spec = tiny_spec();
        spec.schemes.clear();
        assert!(spec.validate().is_err());
    }

    #[test]
    fn sweep_values_must_increase() {
        let mut spec = tiny_spec();
        spec.sweep_var = Some(SweepVar::Users);
        spec.sweep_values = vec![6.0, 5.0];
        assert!(spec.validate().is_err());
        spec.sweep_values = vec![5.0, 6.0];
        assert!(spec.validate().is_ok());
    }

    #[test]
    fn csv_is_byte_identical_across_runs() {
        let spec = tiny_spec();
        let a = run_experiment(&spec, false).unwrap();
        let b = run_experiment(&spec, false).unwrap();
        assert_eq!(a.csv, b.csv);
        assert!(a.csv.starts_with(CSV_HEADER));
        // header + 2 schemes x 1 point
        assert_eq!(a.csv.lines().count(), 3);
    }
}
