//! CSV encoding of trajectories, ensembles and feature tables.
//!
//! Floats use the shortest representation that parses back to the same
//! bits, so a written trajectory re-reads exactly. Records end in `\n`.

use std::io::{Read, Write};

use tcell_core::{Compartment, EnsembleStats, FeatureReport, StateVector, Trajectory};

pub const TRAJECTORY_HEADER: [&str; 6] = ["t", "N", "Np", "A", "M", "total_naive"];

const STAT_SUFFIXES: [&str; 4] = ["mean", "var", "min", "max"];

#[derive(Debug, thiserror::Error)]
pub enum CsvError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("unexpected header {found:?}, expected {expected:?}")]
    Header { found: Vec<String>, expected: Vec<String> },
    #[error("row {row}: {message}")]
    Row { row: usize, message: String },
}

fn writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn ensemble_header() -> Vec<String> {
    let mut cols = vec!["t".to_string()];
    for c in Compartment::ALL {
        cols.extend(STAT_SUFFIXES.iter().map(|s| format!("{}_{s}", c.label())));
    }
    cols.push("total_naive_mean".to_string());
    cols
}

pub fn write_samples<W: Write>(samples: &[StateVector], out: W) -> Result<(), CsvError> {
    let mut w = writer(out);
    w.write_record(TRAJECTORY_HEADER)?;
    for s in samples {
        let [n, n_p, a, m] = s.values();
        w.write_record([s.t, n, n_p, a, m, s.total_naive()].map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trajectory<W: Write>(traj: &Trajectory, out: W) -> Result<(), CsvError> {
    write_samples(&traj.samples, out)
}

/// Parse the samples of a trajectory CSV. `total_naive` is checked for
/// being numeric and otherwise ignored.
pub fn read_samples<R: Read>(input: R) -> Result<Vec<StateVector>, CsvError> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != TRAJECTORY_HEADER {
        return Err(CsvError::Header {
            found: header,
            expected: TRAJECTORY_HEADER.map(String::from).to_vec(),
        });
    }
    let mut samples = Vec::new();
    for (i, record) in r.records().enumerate() {
        let record = record?;
        let row = i + 1;
        let mut vals = [0.0; 6];
        for (slot, field) in vals.iter_mut().zip(record.iter()) {
            *slot = field.parse().map_err(|_| CsvError::Row {
                row,
                message: format!("not a number: '{field}'"),
            })?;
        }
        let [t, n, n_p, a, m, _] = vals;
        samples.push(StateVector::new(t, n, n_p, a, m));
    }
    Ok(samples)
}

pub fn write_ensemble<W: Write>(stats: &EnsembleStats, out: W) -> Result<(), CsvError> {
    let mut w = writer(out);
    w.write_record(ensemble_header())?;
    for pt in &stats.points {
        let mut row = vec![pt.t.to_string()];
        for c in &pt.compartments {
            row.extend([c.mean, c.variance, c.min, c.max].map(|v| v.to_string()));
        }
        let naive = pt.get(Compartment::NaiveThymic).mean + pt.get(Compartment::NaiveProliferated).mean;
        row.push(naive.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// One row of a sweep summary.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub features: FeatureReport,
    /// Mean per-capita death rate of thymic naive cells over the feature window.
    pub late_thymic_death_rate: Option<f64>,
    pub file: String,
}

pub fn write_sweep_summary<W: Write>(param: &str, rows: &[SweepRow], out: W) -> Result<(), CsvError> {
    let mut w = writer(out);
    w.write_record([
        param,
        "crossover_age",
        "thymic_peak_age",
        "late_decay_halflife",
        "total_naive_drift",
        "thymic_naive_change",
        "late_thymic_death_rate",
        "file",
    ])?;
    for r in rows {
        let f = &r.features;
        w.write_record([
            r.value.to_string(),
            fmt_opt(f.crossover_age),
            f.thymic_peak_age.to_string(),
            fmt_opt(f.late_decay_halflife),
            fmt_opt(f.total_naive_drift),
            fmt_opt(f.thymic_naive_change),
            fmt_opt(r.late_thymic_death_rate),
            r.file.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
