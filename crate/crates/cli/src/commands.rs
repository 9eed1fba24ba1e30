//! Subcommand implementations. Each returns a [`CliError`] that maps onto
//! the process exit code.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use tcell_core::{
    compare, extract_features, integrate, run_ensemble, trec_death_factor, ComparisonReport,
    EnsembleStats, ModelParams, SimError, Trajectory,
};

use crate::config::{ConfigBuilder, ConfigError, OutputFormat, RunConfig};
use crate::csvio::{self, CsvError, SweepRow};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("simulation failed: {0}")]
    Simulation(#[from] SimError),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: CsvError },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Usage(_) => 2,
            CliError::Simulation(_) | CliError::Io { .. } => 1,
        }
    }

    fn io(path: &Path, source: impl Into<CsvError>) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source: source.into(),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Write to `path`, or to stdout when absent.
fn emit(path: Option<&Path>, f: impl FnOnce(&mut dyn Write) -> Result<(), CsvError>) -> CliResult<()> {
    match path {
        Some(path) => {
            let file = File::create(path).map_err(|e| CliError::io(path, e))?;
            let mut out = BufWriter::new(file);
            f(&mut out).map_err(|e| CliError::io(path, e))?;
            out.flush().map_err(|e| CliError::io(path, e))
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            match f(&mut lock) {
                // A closed pipe (`| head`) is not a failure.
                Err(e) if is_broken_pipe(&e) => Ok(()),
                r => r.map_err(|e| CliError::io(Path::new("<stdout>"), e)),
            }
        }
    }
}

fn is_broken_pipe(e: &CsvError) -> bool {
    let io = match e {
        CsvError::Io(io) => Some(io),
        CsvError::Csv(c) => match c.kind() {
            csv::ErrorKind::Io(io) => Some(io),
            _ => None,
        },
        _ => None,
    };
    io.is_some_and(|io| io.kind() == io::ErrorKind::BrokenPipe)
}

fn write_json<T: serde::Serialize>(value: &T, out: &mut dyn Write) -> Result<(), CsvError> {
    serde_json::to_writer_pretty(&mut *out, value).map_err(io::Error::from)?;
    out.write_all(b"\n")?;
    Ok(())
}

pub fn write_trajectory_as(traj: &Trajectory, format: OutputFormat, out: &mut dyn Write) -> Result<(), CsvError> {
    match format {
        OutputFormat::Csv => csvio::write_trajectory(traj, out),
        OutputFormat::Json => write_json(traj, out),
    }
}

pub fn write_ensemble_as(stats: &EnsembleStats, format: OutputFormat, out: &mut dyn Write) -> Result<(), CsvError> {
    match format {
        OutputFormat::Csv => csvio::write_ensemble(stats, out),
        OutputFormat::Json => write_json(stats, out),
    }
}

pub fn cmd_run_ode(cfg: &RunConfig) -> CliResult<()> {
    let traj = integrate(&cfg.scenario, &cfg.params)?;
    emit(cfg.output_path.as_deref(), |out| write_trajectory_as(&traj, cfg.output_format, out))
}

pub fn cmd_run_abm(cfg: &RunConfig) -> CliResult<()> {
    let stats = run_ensemble(&cfg.scenario, &cfg.params, &cfg.abm)?;
    emit(cfg.output_path.as_deref(), |out| write_ensemble_as(&stats, cfg.output_format, out))
}

/// Both engines on the same configuration.
pub fn run_comparison(cfg: &RunConfig) -> CliResult<ComparisonReport> {
    let ode = integrate(&cfg.scenario, &cfg.params)?;
    let stats = run_ensemble(&cfg.scenario, &cfg.params, &cfg.abm)?;
    Ok(compare(&ode, &stats, &Default::default())?)
}

pub fn render_report(report: &ComparisonReport, cfg: &RunConfig) -> String {
    let mut s = String::new();
    let tol = &report.tolerance;
    let _ = writeln!(
        s,
        "ODE vs ABM ensemble: {} replicates, seed {}, scale {}",
        cfg.abm.replicates, cfg.abm.seed, cfg.abm.scale
    );
    let _ = writeln!(
        s,
        "tolerance: max({}% relative, {} absolute)",
        tol.relative * 100.0,
        tol.absolute
    );
    let _ = writeln!(
        s,
        "{:<4} {:>12} {:>12} {:>10} {:>10} {:>11}  result",
        "", "rmse", "max |err|", "at t", "max rel", "worst ratio"
    );
    for c in &report.compartments {
        let _ = writeln!(
            s,
            "{:<4} {:>12.4} {:>12.4} {:>10.2} {:>10.4} {:>11.3}  {}",
            c.compartment.label(),
            c.rmse,
            c.max_abs_error,
            c.time_of_max_error,
            c.max_rel_error,
            c.worst_tolerance_ratio,
            if c.pass { "PASS" } else { "FAIL" }
        );
    }
    let _ = writeln!(s, "overall: {}", if report.pass { "PASS" } else { "FAIL" });
    s
}

/// Prints the report on stdout and writes it as JSON to the output path.
pub fn cmd_compare(cfg: &RunConfig) -> CliResult<ComparisonReport> {
    let report = run_comparison(cfg)?;
    print!("{}", render_report(&report, cfg));
    if let Some(path) = cfg.output_path.as_deref() {
        emit(Some(path), |out| write_json(&report, out))?;
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    /// Either `b` or `params.b`.
    pub param: String,
    pub values: Vec<f64>,
}

impl SweepSpec {
    pub fn key(&self) -> String {
        if self.param.contains('.') {
            self.param.clone()
        } else {
            format!("params.{}", self.param)
        }
    }

    fn short_name(&self) -> &str {
        self.param.rsplit('.').next().unwrap_or(&self.param)
    }
}

fn mean_thymic_death_rate(traj: &Trajectory, p: &ModelParams, start: f64, end: f64) -> Option<f64> {
    let rates: Vec<f64> = traj
        .samples
        .iter()
        .filter(|s| (start..=end).contains(&s.t))
        .map(|s| p.mu_n * trec_death_factor(s.n_p, p))
        .collect();
    (!rates.is_empty()).then(|| rates.iter().sum::<f64>() / rates.len() as f64)
}

/// Run the ODE once per value. Every configuration is built and validated
/// before the first run.
pub fn cmd_sweep(base: &ConfigBuilder, spec: &SweepSpec, out_dir: &Path) -> CliResult<Vec<SweepRow>> {
    if spec.values.is_empty() {
        return Err(CliError::Usage("sweep needs at least one value".into()));
    }
    let key = spec.key();
    if !key.starts_with("params.") {
        return Err(CliError::Usage(format!("only params.* can be swept, got '{key}'")));
    }
    let configs = spec
        .values
        .iter()
        .map(|v| {
            let mut b = base.clone();
            b.apply_override(&format!("{key}={v}"))?;
            Ok((*v, b.build()?))
        })
        .collect::<CliResult<Vec<_>>>()?;

    fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let mut rows = Vec::with_capacity(configs.len());
    for (value, cfg) in configs {
        let traj = integrate(&cfg.scenario, &cfg.params)?;
        let features = extract_features(&traj)?;
        let file = format!("{}_{value}.csv", spec.short_name());
        let path = out_dir.join(&file);
        emit(Some(&path), |out| csvio::write_trajectory(&traj, out))?;
        let w = features.window;
        rows.push(SweepRow {
            value,
            late_thymic_death_rate: mean_thymic_death_rate(&traj, &cfg.params, w.start, w.end),
            features,
            file,
        });
    }
    let summary = out_dir.join("summary.csv");
    emit(Some(&summary), |out| csvio::write_sweep_summary(spec.short_name(), &rows, out))?;
    Ok(rows)
}
