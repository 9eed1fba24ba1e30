//! Cross-engine comparison, lifespan features and the memory extrapolation.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::abm::EnsembleStats;
use crate::error::{Result, SimError};
use crate::model::{Compartment, StateVector};
use crate::ode::Trajectory;

/// A point passes when `|candidate − reference| ≤ max(relative·|reference|, absolute)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToleranceProfile {
    pub relative: f64,
    /// cells / mm³
    pub absolute: f64,
    /// Denominator floor for the reported relative error, cells / mm³.
    pub relative_floor: f64,
}

impl Default for ToleranceProfile {
    fn default() -> Self {
        Self {
            relative: 0.05,
            absolute: 5.0,
            relative_floor: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompartmentError {
    pub compartment: Compartment,
    pub rmse: f64,
    pub max_abs_error: f64,
    /// `|Δ| / max(|reference|, floor)`
    pub max_rel_error: f64,
    /// Time of `max_abs_error`.
    pub time_of_max_error: f64,
    /// Largest `|Δ| / max(relative·|reference|, absolute)`; ≤ 1 passes.
    pub worst_tolerance_ratio: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub tolerance: ToleranceProfile,
    pub compartments: Vec<CompartmentError>,
    pub pass: bool,
}

impl ComparisonReport {
    pub fn get(&self, c: Compartment) -> &CompartmentError {
        &self.compartments[c.index()]
    }
}

/// Compare two state series recorded on the same time grid.
pub fn compare_series(
    reference: &[StateVector],
    candidate: &[StateVector],
    tol: &ToleranceProfile,
) -> Result<ComparisonReport> {
    if reference.len() != candidate.len() {
        return Err(SimError::Alignment(format!(
            "{} reference samples vs {} candidate samples",
            reference.len(),
            candidate.len()
        )));
    }
    if reference.is_empty() {
        return Err(SimError::Alignment("no samples to compare".into()));
    }
    for (r, c) in reference.iter().zip(candidate) {
        if (r.t - c.t).abs() > 1e-9 * r.t.abs().max(1.0) {
            return Err(SimError::Alignment(format!(
                "sample at t = {} paired with t = {}",
                r.t, c.t
            )));
        }
    }

    let compartments: Vec<CompartmentError> = Compartment::ALL
        .iter()
        .map(|&comp| {
            let mut sum_sq = 0.0;
            let mut max_abs: f64 = 0.0;
            let mut max_rel: f64 = 0.0;
            let mut worst: f64 = 0.0;
            let mut t_max = reference[0].t;
            for (r, c) in reference.iter().zip(candidate) {
                let (rv, cv) = (r.get(comp), c.get(comp));
                let d = (cv - rv).abs();
                sum_sq += d * d;
                if d > max_abs {
                    max_abs = d;
                    t_max = r.t;
                }
                max_rel = max_rel.max(d / rv.abs().max(tol.relative_floor));
                worst = worst.max(d / (tol.relative * rv.abs()).max(tol.absolute));
            }
            CompartmentError {
                compartment: comp,
                rmse: (sum_sq / reference.len() as f64).sqrt(),
                max_abs_error: max_abs,
                max_rel_error: max_rel,
                time_of_max_error: t_max,
                worst_tolerance_ratio: worst,
                pass: worst <= 1.0,
            }
        })
        .collect();
    let pass = compartments.iter().all(|c| c.pass);
    Ok(ComparisonReport {
        tolerance: *tol,
        compartments,
        pass,
    })
}

/// Compare an ODE trajectory with ABM ensemble means.
pub fn compare(
    ode: &Trajectory,
    abm: &EnsembleStats,
    tol: &ToleranceProfile,
) -> Result<ComparisonReport> {
    compare_series(&ode.samples, &abm.mean_states(), tol)
}

/// Late-life window used by [`extract_features`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureWindow {
    pub start: f64,
    pub end: f64,
}

impl Default for FeatureWindow {
    fn default() -> Self {
        Self {
            start: 40.0,
            end: 90.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureReport {
    /// First recorded time with `Np > N`.
    pub crossover_age: Option<f64>,
    /// Time of the largest recorded `N`.
    pub thymic_peak_age: f64,
    /// `ln 2 / −slope` of a least-squares fit to `ln N` over the window;
    /// absent unless `N` is decaying there.
    pub late_decay_halflife: Option<f64>,
    /// `(N+Np)(end) / (N+Np)(start) − 1`
    pub total_naive_drift: Option<f64>,
    /// `N(end) / N(start) − 1`
    pub thymic_naive_change: Option<f64>,
    pub window: FeatureWindow,
}

/// Linear interpolation of `f` at time `t`; `None` outside the samples.
fn value_at(samples: &[StateVector], t: f64, f: impl Fn(&StateVector) -> f64) -> Option<f64> {
    let idx = samples.partition_point(|s| s.t < t);
    let hi = samples.get(idx)?;
    if hi.t == t {
        return Some(f(hi));
    }
    let lo = samples.get(idx.checked_sub(1)?)?;
    let w = (t - lo.t) / (hi.t - lo.t);
    Some(f(lo) + w * (f(hi) - f(lo)))
}

fn relative_change(from: Option<f64>, to: Option<f64>) -> Option<f64> {
    match (from, to) {
        (Some(a), Some(b)) if a > 0.0 => Some(b / a - 1.0),
        _ => None,
    }
}

pub fn extract_features(traj: &Trajectory) -> Result<FeatureReport> {
    extract_features_in(traj, FeatureWindow::default())
}

pub fn extract_features_in(traj: &Trajectory, window: FeatureWindow) -> Result<FeatureReport> {
    let samples = &traj.samples;
    let (first, last) = match (samples.first(), samples.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => return Err(SimError::Analysis("empty trajectory".into())),
    };
    if last.t - first.t < 30.0 {
        return Err(SimError::Analysis(format!(
            "trajectory spans {} years, need at least 30",
            last.t - first.t
        )));
    }

    let crossover_age = samples.iter().find(|s| s.n_p > s.n).map(|s| s.t);
    let thymic_peak_age = samples
        .iter()
        .fold(first, |best, s| if s.n > best.n { s } else { best })
        .t;

    let fit: Vec<(f64, f64)> = samples
        .iter()
        .filter(|s| s.t >= window.start && s.t <= window.end && s.n > 0.0)
        .map(|s| (s.t, s.n.ln()))
        .collect();
    let late_decay_halflife = least_squares_slope(&fit)
        .filter(|slope| *slope < 0.0)
        .map(|slope| LN_2 / -slope);

    let total = |s: &StateVector| s.total_naive();
    let thymic = |s: &StateVector| s.n;
    Ok(FeatureReport {
        crossover_age,
        thymic_peak_age,
        late_decay_halflife,
        total_naive_drift: relative_change(
            value_at(samples, window.start, total),
            value_at(samples, window.end, total),
        ),
        thymic_naive_change: relative_change(
            value_at(samples, window.start, thymic),
            value_at(samples, window.end, thymic),
        ),
        window,
    })
}

fn least_squares_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryPoint {
    pub t: f64,
    /// The model's own memory compartment `M(t)`.
    pub model_memory: f64,
    /// `A(t) / active_fraction`: total T cell population if the modelled
    /// active pool is that fraction of it.
    pub estimated_total: Option<f64>,
    /// `M(t) / estimated_total`
    pub memory_share: Option<f64>,
}

/// Extrapolation of the T cell population from the active fraction.
///
/// This is a rough rescaling, not model output; `model_memory` remains the
/// authoritative memory series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryEstimate {
    pub active_fraction: f64,
    pub points: Vec<MemoryPoint>,
}

impl MemoryEstimate {
    pub fn has_estimate(&self) -> bool {
        self.points.iter().any(|p| p.estimated_total.is_some())
    }
}

pub fn memory_estimate(traj: &Trajectory, active_fraction: f64) -> Result<MemoryEstimate> {
    if !(active_fraction > 0.0 && active_fraction < 1.0) {
        return Err(SimError::Analysis(format!(
            "active fraction must lie in (0, 1), got {active_fraction}"
        )));
    }
    let any_active = traj.samples.iter().any(|s| s.a > 0.0);
    let points = traj
        .samples
        .iter()
        .map(|s| {
            let estimated_total = any_active.then(|| s.a / active_fraction);
            MemoryPoint {
                t: s.t,
                model_memory: s.m,
                estimated_total,
                memory_share: estimated_total.filter(|tot| *tot > 0.0).map(|tot| s.m / tot),
            }
        })
        .collect();
    Ok(MemoryEstimate {
        active_fraction,
        points,
    })
}
