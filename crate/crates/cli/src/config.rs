//! Line-oriented `key = value` run configuration.
//!
//! ```text
//! # comments start with '#'
//! params.b = 0
//! scenario.t_end = 80
//! abm.replicates = 50
//! ```
//!
//! Unspecified keys keep their defaults. Unless `params.c` is given it is
//! recomputed from the final `mu_n` and `n_p_bar`.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use tcell_core::{default_params, default_scenario, AbmConfig, ModelParams, Scenario};

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    /// 1-based line, absent for command-line overrides.
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(format!("unknown output format '{other}' (expected csv or json)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: ModelParams,
    pub scenario: Scenario,
    pub abm: AbmConfig,
    pub output_path: Option<PathBuf>,
    pub output_format: OutputFormat,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            params: default_params(),
            scenario: default_scenario(),
            abm: AbmConfig::default(),
            output_path: None,
            output_format: OutputFormat::Csv,
        }
    }
}

/// Every key accepted in a config file or `--set`.
pub const KNOWN_KEYS: &[&str] = &[
    "params.lambda_thymic",
    "params.lambda_n",
    "params.mu_n",
    "params.c",
    "params.lambda_mn",
    "params.mu_m",
    "params.lambda_na",
    "params.lambda_npa",
    "params.lambda_a",
    "params.mu_a",
    "params.s_bar",
    "params.n_p_bar",
    "params.b",
    "params.n_b",
    "params.s0_global_scale",
    "scenario.t_start",
    "scenario.t_end",
    "scenario.dt",
    "scenario.record_every",
    "scenario.max_steps",
    "scenario.n0",
    "scenario.np0",
    "scenario.a0",
    "scenario.m0",
    "abm.dt",
    "abm.seed",
    "abm.replicates",
    "abm.scale",
    "output.path",
    "output.format",
];

/// Accumulates overrides, then validates everything at once.
#[derive(Debug, Clone, Default)]
pub struct ConfigBuilder {
    cfg: RunConfig,
    c_explicit: bool,
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("cannot parse '{value}' as a value for {key}"))
}

impl ConfigBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let f = || parse_value::<f64>(key, value);
        let cfg = &mut self.cfg;
        match key {
            "params.lambda_thymic" => cfg.params.lambda_thymic = f()?,
            "params.lambda_n" => cfg.params.lambda_n = f()?,
            "params.mu_n" => cfg.params.mu_n = f()?,
            "params.c" => {
                cfg.params.c = f()?;
                self.c_explicit = true;
            }
            "params.lambda_mn" => cfg.params.lambda_mn = f()?,
            "params.mu_m" => cfg.params.mu_m = f()?,
            "params.lambda_na" => cfg.params.lambda_na = f()?,
            "params.lambda_npa" => cfg.params.lambda_npa = f()?,
            "params.lambda_a" => cfg.params.lambda_a = f()?,
            "params.mu_a" => cfg.params.mu_a = f()?,
            "params.s_bar" => cfg.params.s_bar = f()?,
            "params.n_p_bar" => cfg.params.n_p_bar = f()?,
            "params.b" => cfg.params.b = f()?,
            "params.n_b" => cfg.params.n_b = f()?,
            "params.s0_global_scale" => cfg.params.s0_global_scale = f()?,
            "scenario.t_start" => cfg.scenario.t_start = f()?,
            "scenario.t_end" => cfg.scenario.t_end = f()?,
            "scenario.dt" => cfg.scenario.dt = f()?,
            "scenario.record_every" => cfg.scenario.record_every = parse_value(key, value)?,
            "scenario.max_steps" => cfg.scenario.max_steps = parse_value(key, value)?,
            "scenario.n0" => cfg.scenario.initial_state.n = f()?,
            "scenario.np0" => cfg.scenario.initial_state.n_p = f()?,
            "scenario.a0" => cfg.scenario.initial_state.a = f()?,
            "scenario.m0" => cfg.scenario.initial_state.m = f()?,
            "abm.dt" => cfg.abm.dt = f()?,
            "abm.seed" => cfg.abm.seed = parse_value(key, value)?,
            "abm.replicates" => cfg.abm.replicates = parse_value(key, value)?,
            "abm.scale" => cfg.abm.scale = f()?,
            "output.path" => cfg.output_path = Some(PathBuf::from(value)),
            "output.format" => cfg.output_format = value.parse()?,
            _ => return Err(format!("unknown key '{key}'")),
        }
        Ok(())
    }

    /// Apply every non-blank, non-comment line of a config document.
    pub fn apply_document(&mut self, text: &str) -> Result<(), ConfigError> {
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = split_assignment(content).map_err(|message| ConfigError {
                line: Some(line),
                message,
            })?;
            self.set(key, value).map_err(|message| ConfigError {
                line: Some(line),
                message,
            })?;
        }
        Ok(())
    }

    /// Apply a `key=value` override from the command line.
    pub fn apply_override(&mut self, assignment: &str) -> Result<(), ConfigError> {
        let to_err = |message| ConfigError { line: None, message };
        let (key, value) = split_assignment(assignment).map_err(to_err)?;
        self.set(key, value)
            .map_err(|m| to_err(format!("--set {assignment}: {m}")))
    }

    pub fn build(mut self) -> Result<RunConfig, ConfigError> {
        let to_err = |e: tcell_core::SimError| ConfigError {
            line: None,
            message: e.to_string(),
        };
        let cfg = &mut self.cfg;
        if !self.c_explicit {
            cfg.params.c = ModelParams::derived_c(cfg.params.mu_n, cfg.params.n_p_bar);
        }
        cfg.scenario.initial_state.t = cfg.scenario.t_start;
        cfg.params.validate().map_err(to_err)?;
        cfg.scenario.validate().map_err(to_err)?;
        cfg.abm.validate().map_err(to_err)?;
        Ok(self.cfg)
    }
}

fn split_assignment(content: &str) -> Result<(&str, &str), String> {
    let (key, value) = content
        .split_once('=')
        .ok_or_else(|| format!("expected 'key = value', got '{content}'"))?;
    let (key, value) = (key.trim(), value.trim());
    if key.is_empty() || value.is_empty() {
        return Err(format!("expected 'key = value', got '{content}'"));
    }
    Ok((key, value))
}

/// Parse a whole config document, all or nothing.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut builder = ConfigBuilder::new();
    builder.apply_document(text)?;
    builder.build()
}
