//! Fixed-step RK4 integration of the compartment model.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::model::{derivatives, Compartment, ModelParams, StateVector};

/// Default upper bound on the number of integration steps in one run.
pub const DEFAULT_MAX_STEPS: u64 = 50_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub t_start: f64,
    pub t_end: f64,
    /// ODE step, years.
    pub dt: f64,
    /// Record a sample every this many ODE steps.
    pub record_every: u64,
    pub initial_state: StateVector,
    pub max_steps: u64,
}

impl Default for Scenario {
    fn default() -> Self {
        default_scenario()
    }
}

/// 100 years from birth, 2000 thymic naive cells/mm³, dt = 0.01, yearly samples.
pub fn default_scenario() -> Scenario {
    Scenario {
        t_start: 0.0,
        t_end: 100.0,
        dt: 0.01,
        record_every: 100,
        initial_state: StateVector::new(0.0, 2000.0, 0.0, 0.0, 0.0),
        max_steps: DEFAULT_MAX_STEPS,
    }
}

impl Scenario {
    pub fn span(&self) -> f64 {
        self.t_end - self.t_start
    }

    /// Time between recorded samples.
    pub fn record_interval(&self) -> f64 {
        self.dt * self.record_every as f64
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(SimError::InvalidScenario(msg));
        if !self.t_start.is_finite() || !self.t_end.is_finite() {
            return bad("t_start and t_end must be finite".into());
        }
        if !(self.t_end > self.t_start) {
            return bad(format!("t_end ({}) must exceed t_start ({})", self.t_end, self.t_start));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return bad(format!("dt must be > 0, got {}", self.dt));
        }
        if self.dt > self.span() * (1.0 + 1e-12) {
            return bad(format!("dt ({}) exceeds the horizon ({})", self.dt, self.span()));
        }
        if self.record_every < 1 {
            return bad("record_every must be >= 1".into());
        }
        self.initial_state.validate()?;
        if self.initial_state.t != self.t_start {
            return bad(format!(
                "initial state time {} differs from t_start {}",
                self.initial_state.t, self.t_start
            ));
        }
        Ok(())
    }

    /// Number of steps of size `dt` needed to cover the horizon.
    pub(crate) fn steps_for(&self, dt: f64) -> Result<u64> {
        let exact = self.span() / dt;
        let rounded = exact.round();
        let steps = if (exact - rounded).abs() <= 1e-9 * exact.max(1.0) {
            rounded
        } else {
            exact.ceil()
        };
        let steps = steps.max(1.0) as u64;
        if steps > self.max_steps {
            return Err(SimError::StepLimitExceeded {
                required: steps,
                cap: self.max_steps,
            });
        }
        Ok(steps)
    }

    /// Canonical time of the `k`-th recorded sample.
    ///
    /// Both engines stamp samples through this function so their grids are
    /// bit-identical whatever their internal step sizes.
    pub(crate) fn sample_time(&self, k: u64) -> f64 {
        self.t_start + k as f64 * self.record_interval()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Ode,
    Abm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub engine: Engine,
    pub scenario: Scenario,
    /// Seed of the random stream, ABM only.
    pub seed: Option<u64>,
    pub samples: Vec<StateVector>,
    /// Number of times a compartment stepped below zero and was reset to 0.
    pub clamp_count: u64,
}

impl Trajectory {
    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.t)
    }

    pub fn series(&self, c: Compartment) -> Vec<f64> {
        self.samples.iter().map(|s| s.get(c)).collect()
    }

    pub fn last(&self) -> &StateVector {
        self.samples.last().expect("trajectory always holds the initial state")
    }
}

/// One classical RK4 step for an arbitrary four-component system.
pub fn rk4_step<F>(t: f64, y: [f64; 4], dt: f64, f: F) -> [f64; 4]
where
    F: Fn(f64, &[f64; 4]) -> [f64; 4],
{
    let axpy = |base: &[f64; 4], k: &[f64; 4], h: f64| {
        let mut out = *base;
        for (o, ki) in out.iter_mut().zip(k) {
            *o += h * ki;
        }
        out
    };
    let k1 = f(t, &y);
    let k2 = f(t + 0.5 * dt, &axpy(&y, &k1, 0.5 * dt));
    let k3 = f(t + 0.5 * dt, &axpy(&y, &k2, 0.5 * dt));
    let k4 = f(t + dt, &axpy(&y, &k3, dt));
    let mut out = y;
    for i in 0..4 {
        out[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

/// Advance `s` by `dt`. Returns the new state and how many compartments
/// had to be clamped to zero.
pub fn step_rk4(s: &StateVector, dt: f64, p: &ModelParams) -> Result<(StateVector, u32)> {
    let rhs = |t: f64, y: &[f64; 4]| derivatives(&StateVector::from_array(t, *y), p).values();
    let mut y = rk4_step(s.t, s.values(), dt, rhs);
    let t = s.t + dt;
    let mut clamps = 0;
    for (c, v) in Compartment::ALL.iter().zip(y.iter_mut()) {
        if !v.is_finite() {
            return Err(SimError::IntegrationFault { compartment: *c, t });
        }
        if *v < 0.0 {
            *v = 0.0;
            clamps += 1;
        }
    }
    Ok((StateVector::from_array(t, y), clamps))
}

/// Integrate from `sc.initial_state` to `sc.t_end`.
///
/// The final step is shortened when the horizon is not a multiple of `dt`.
pub fn integrate(sc: &Scenario, p: &ModelParams) -> Result<Trajectory> {
    sc.validate()?;
    p.validate()?;
    let steps = sc.steps_for(sc.dt)?;

    let mut samples = Vec::with_capacity((steps / sc.record_every + 2) as usize);
    samples.push(sc.initial_state);
    let mut state = sc.initial_state;
    let mut clamp_count = 0u64;
    for i in 1..=steps {
        let t_next = if i == steps {
            sc.t_end
        } else {
            sc.t_start + i as f64 * sc.dt
        };
        let (mut next, clamps) = step_rk4(&state, t_next - state.t, p)?;
        next.t = t_next;
        clamp_count += u64::from(clamps);
        state = next;
        if i % sc.record_every == 0 && i != steps {
            let mut rec = state;
            rec.t = sc.sample_time(i / sc.record_every);
            samples.push(rec);
        }
    }
    samples.push(state);

    Ok(Trajectory {
        engine: Engine::Ode,
        scenario: sc.clone(),
        seed: None,
        samples,
        clamp_count,
    })
}
