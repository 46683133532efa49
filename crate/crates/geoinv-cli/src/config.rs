//! Flat dotted-key experiment configuration.
//!
//! The on-disk format is plain text, one `key = value` pair per line, with
//! `#` comments and blank lines ignored. Every key must be known; unknown
//! keys are hard errors so a typo cannot silently fall back to a default.
//! A parsed config can be re-serialized with every key stated explicitly,
//! which is what run directories store so a finished run can be reproduced
//! from its own artifacts.

use crate::CliError;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProblemKind {
    Fault,
    ToyScalar,
    DenseRandom,
}

impl ProblemKind {
    pub fn name(&self) -> &'static str {
        match self {
            ProblemKind::Fault => "fault",
            ProblemKind::ToyScalar => "toy_scalar",
            ProblemKind::DenseRandom => "dense_random",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScenarioLabel {
    Low,
    High,
}

impl ScenarioLabel {
    pub fn name(&self) -> &'static str {
        match self {
            ScenarioLabel::Low => "low",
            ScenarioLabel::High => "high",
        }
    }

    pub fn default_fraction(&self) -> f64 {
        match self {
            ScenarioLabel::Low => 0.05,
            ScenarioLabel::High => 0.25,
        }
    }
}

/// Everything a run needs, with defaults matching the benchmark protocol.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub problem: ProblemKind,
    pub output_dir: PathBuf,

    pub scenario_label: ScenarioLabel,
    /// Noise scale as a fraction of the peak noise-free response; defaults
    /// to 0.05 (low) or 0.25 (high) when unset.
    pub scenario_fraction: Option<f64>,
    pub scenario_seed: u64,

    pub sampler_seed: u64,
    pub sampler_n_steps: usize,
    pub sampler_cov_update_every: usize,
    pub sampler_n_parallel: usize,
    pub sampler_burn_in_draws: usize,
    pub sampler_scale: Option<f64>,
    /// Fixed blend weight for the proposal covariances; None selects the
    /// decaying min(0.9, 5/sqrt(step)) schedule.
    pub sampler_beta_constant: Option<f64>,

    pub report_burn_in_fraction: f64,
    pub report_histogram_bins: usize,

    pub fault_grid_m: usize,
    pub fault_stations: usize,
    pub fault_station_seed: u64,
    pub fault_full_scale: bool,
    pub fault_slip_center_x1: f64,
    pub fault_slip_center_x2: f64,
    pub fault_slip_radius: f64,
    pub fault_slip_amplitude: f64,

    pub selectors_enabled: bool,
    pub selectors_n_starts: usize,
    pub selectors_max_evals: usize,
    pub selectors_seed: u64,

    pub oracle_m_points: usize,
    pub oracle_alpha_points: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            problem: ProblemKind::Fault,
            output_dir: PathBuf::from("runs/run"),
            scenario_label: ScenarioLabel::Low,
            scenario_fraction: None,
            scenario_seed: 3,
            sampler_seed: 42,
            sampler_n_steps: 50_000,
            sampler_cov_update_every: 100,
            sampler_n_parallel: 20,
            sampler_burn_in_draws: 500,
            sampler_scale: None,
            sampler_beta_constant: None,
            report_burn_in_fraction: 0.2,
            report_histogram_bins: 60,
            fault_grid_m: 41,
            fault_stations: 65,
            fault_station_seed: 7,
            fault_full_scale: false,
            fault_slip_center_x1: 50.0,
            fault_slip_center_x2: 50.0,
            fault_slip_radius: 80.0,
            fault_slip_amplitude: 2.0,
            selectors_enabled: false,
            selectors_n_starts: 12,
            selectors_max_evals: 1500,
            selectors_seed: 99,
            oracle_m_points: 161,
            oracle_alpha_points: 81,
        }
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, raw: &str) -> Result<T, CliError> {
    raw.parse::<T>()
        .map_err(|_| CliError::Config(format!("key `{key}`: cannot parse value `{raw}`")))
}

fn parse_bool(key: &str, raw: &str) -> Result<bool, CliError> {
    match raw {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(CliError::Config(format!(
            "key `{key}`: expected true or false, got `{other}`"
        ))),
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        Self::from_text(&text)
    }

    pub fn from_text(text: &str) -> Result<Self, CliError> {
        let mut cfg = ExperimentConfig::default();
        for (lineno, raw_line) in text.lines().enumerate() {
            let line = match raw_line.split_once('#') {
                Some((head, _comment)) => head,
                None => raw_line,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            cfg.set(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        if value.is_empty() {
            return Err(CliError::Config(format!("key `{key}` has an empty value")));
        }
        match key {
            "problem" => {
                self.problem = match value {
                    "fault" => ProblemKind::Fault,
                    "toy_scalar" => ProblemKind::ToyScalar,
                    "dense_random" => ProblemKind::DenseRandom,
                    other => {
                        return Err(CliError::Config(format!(
                            "problem must be fault, toy_scalar, or dense_random, got `{other}`"
                        )))
                    }
                }
            }
            "output.dir" => self.output_dir = PathBuf::from(value),
            "scenario.label" => {
                self.scenario_label = match value {
                    "low" => ScenarioLabel::Low,
                    "high" => ScenarioLabel::High,
                    other => {
                        return Err(CliError::Config(format!(
                            "scenario.label must be low or high, got `{other}`"
                        )))
                    }
                }
            }
            "scenario.fraction" => self.scenario_fraction = Some(parse_value(key, value)?),
            "scenario.seed" => self.scenario_seed = parse_value(key, value)?,
            "sampler.seed" => self.sampler_seed = parse_value(key, value)?,
            "sampler.n_steps" => self.sampler_n_steps = parse_value(key, value)?,
            "sampler.cov_update_every" => {
                self.sampler_cov_update_every = parse_value(key, value)?
            }
            "sampler.n_parallel" => self.sampler_n_parallel = parse_value(key, value)?,
            "sampler.burn_in_draws" => self.sampler_burn_in_draws = parse_value(key, value)?,
            "sampler.scale" => self.sampler_scale = Some(parse_value(key, value)?),
            "sampler.beta_constant" => {
                self.sampler_beta_constant = Some(parse_value(key, value)?)
            }
            "report.burn_in_fraction" => {
                self.report_burn_in_fraction = parse_value(key, value)?
            }
            "report.histogram_bins" => self.report_histogram_bins = parse_value(key, value)?,
            "fault.grid_m" => self.fault_grid_m = parse_value(key, value)?,
            "fault.stations" => self.fault_stations = parse_value(key, value)?,
            "fault.station_seed" => self.fault_station_seed = parse_value(key, value)?,
            "fault.full_scale" => self.fault_full_scale = parse_bool(key, value)?,
            "fault.slip_center_x1" => self.fault_slip_center_x1 = parse_value(key, value)?,
            "fault.slip_center_x2" => self.fault_slip_center_x2 = parse_value(key, value)?,
            "fault.slip_radius" => self.fault_slip_radius = parse_value(key, value)?,
            "fault.slip_amplitude" => self.fault_slip_amplitude = parse_value(key, value)?,
            "selectors.enabled" => self.selectors_enabled = parse_bool(key, value)?,
            "selectors.n_starts" => self.selectors_n_starts = parse_value(key, value)?,
            "selectors.max_evals" => self.selectors_max_evals = parse_value(key, value)?,
            "selectors.seed" => self.selectors_seed = parse_value(key, value)?,
            "oracle.m_points" => self.oracle_m_points = parse_value(key, value)?,
            "oracle.alpha_points" => self.oracle_alpha_points = parse_value(key, value)?,
            other => {
                return Err(CliError::Config(format!("unknown config key `{other}`")));
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if let Some(f) = self.scenario_fraction {
            if !(f > 0.0) || !f.is_finite() {
                return Err(CliError::Config(format!(
                    "scenario.fraction must be positive and finite, got {f}"
                )));
            }
        }
        if !(0.0..0.95).contains(&self.report_burn_in_fraction) {
            return Err(CliError::Config(format!(
                "report.burn_in_fraction must lie in [0, 0.95), got {}",
                self.report_burn_in_fraction
            )));
        }
        if self.report_histogram_bins == 0 {
            return Err(CliError::Config(
                "report.histogram_bins must be at least 1".into(),
            ));
        }
        if let Some(b) = self.sampler_beta_constant {
            if !(0.0..=1.0).contains(&b) {
                return Err(CliError::Config(format!(
                    "sampler.beta_constant must lie in [0, 1], got {b}"
                )));
            }
        }
        if self.fault_grid_m < 2 {
            return Err(CliError::Config(format!(
                "fault.grid_m must be at least 2, got {}",
                self.fault_grid_m
            )));
        }
        if self.fault_stations == 0 {
            return Err(CliError::Config("fault.stations must be at least 1".into()));
        }
        if self.oracle_m_points < 2 || self.oracle_alpha_points < 2 {
            return Err(CliError::Config(
                "oracle grids need at least 2 points per axis".into(),
            ));
        }
        Ok(())
    }

    /// Problem lattice resolution after applying the full-scale switch.
    pub fn effective_grid_m(&self) -> usize {
        if self.fault_full_scale {
            101
        } else {
            self.fault_grid_m
        }
    }

    /// Station count after applying the full-scale switch.
    pub fn effective_stations(&self) -> usize {
        if self.fault_full_scale {
            195
        } else {
            self.fault_stations
        }
    }

    pub fn scenario_fraction_value(&self) -> f64 {
        self.scenario_fraction
            .unwrap_or_else(|| self.scenario_label.default_fraction())
    }

    /// Serializes every key explicitly, in a fixed order, so that parsing the
    /// result reproduces this configuration exactly.
    pub fn resolved_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "problem = {}", self.problem.name());
        let _ = writeln!(s, "output.dir = {}", self.output_dir.display());
        let _ = writeln!(s, "scenario.label = {}", self.scenario_label.name());
        let _ = writeln!(s, "scenario.fraction = {}", self.scenario_fraction_value());
        let _ = writeln!(s, "scenario.seed = {}", self.scenario_seed);
        let _ = writeln!(s, "sampler.seed = {}", self.sampler_seed);
        let _ = writeln!(s, "sampler.n_steps = {}", self.sampler_n_steps);
        let _ = writeln!(
            s,
            "sampler.cov_update_every = {}",
            self.sampler_cov_update_every
        );
        let _ = writeln!(s, "sampler.n_parallel = {}", self.sampler_n_parallel);
        let _ = writeln!(s, "sampler.burn_in_draws = {}", self.sampler_burn_in_draws);
        if let Some(v) = self.sampler_scale {
            let _ = writeln!(s, "sampler.scale = {v}");
        }
        if let Some(v) = self.sampler_beta_constant {
            let _ = writeln!(s, "sampler.beta_constant = {v}");
        }
        let _ = writeln!(
            s,
            "report.burn_in_fraction = {}",
            self.report_burn_in_fraction
        );
        let _ = writeln!(s, "report.histogram_bins = {}", self.report_histogram_bins);
        let _ = writeln!(s, "fault.grid_m = {}", self.fault_grid_m);
        let _ = writeln!(s, "fault.stations = {}", self.fault_stations);
        let _ = writeln!(s, "fault.station_seed = {}", self.fault_station_seed);
        let _ = writeln!(s, "fault.full_scale = {}", self.fault_full_scale);
        let _ = writeln!(s, "fault.slip_center_x1 = {}", self.fault_slip_center_x1);
        let _ = writeln!(s, "fault.slip_center_x2 = {}", self.fault_slip_center_x2);
        let _ = writeln!(s, "fault.slip_radius = {}", self.fault_slip_radius);
        let _ = writeln!(s, "fault.slip_amplitude = {}", self.fault_slip_amplitude);
        let _ = writeln!(s, "selectors.enabled = {}", self.selectors_enabled);
        let _ = writeln!(s, "selectors.n_starts = {}", self.selectors_n_starts);
        let _ = writeln!(s, "selectors.max_evals = {}", self.selectors_max_evals);
        let _ = writeln!(s, "selectors.seed = {}", self.selectors_seed);
        let _ = writeln!(s, "oracle.m_points = {}", self.oracle_m_points);
        let _ = writeln!(s, "oracle.alpha_points = {}", self.oracle_alpha_points);
        s
    }
}

/// Command-line overrides applied on top of a parsed (or default) config.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub n_par: Option<usize>,
    pub steps: Option<usize>,
    pub full_scale: bool,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(seed) = self.seed {
            cfg.sampler_seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
        if let Some(n) = self.n_par {
            cfg.sampler_n_parallel = n;
        }
        if let Some(n) = self.steps {
            cfg.sampler_n_steps = n;
        }
        if self.full_scale {
            cfg.fault_full_scale = true;
        }
    }
}

/// Loads the config (or defaults when no path is given) and applies CLI
/// overrides.
pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match path {
        Some(p) => ExperimentConfig::from_file(p)?,
        None => ExperimentConfig::default(),
    };
    overrides.apply(&mut cfg);
    cfg.validate()?;
    Ok(cfg)
}
