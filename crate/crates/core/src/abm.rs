//! Agent-based realization of the compartment model.
//!
//! Each cell is an agent in one of four states. A step of length `dt`:
//!
//! 1. adds `Poisson(influx(t, Np) · scale · dt)` thymic naive agents;
//! 2. lets every agent face its competing exit hazards `r₁..r_k`: an event
//!    fires with probability `1 − exp(−Σr·dt)` and is event `i` with
//!    probability `rᵢ / Σr`;
//! 3. adds `Poisson(c · h(N, Np) · Np · dt)` proliferated naive births.
//!
//! Activation does not consume the naive cell: `dA/dt` gains `λNa·N + λNpA·Np`
//! while neither naive equation loses that term. Each naive agent therefore
//! spawns active agents at its activation hazard (Poisson counts) and stays
//! naive, so the ensemble mean tracks the ODE.
//!
//! All hazards use the counts frozen at the start of the step. Agents are
//! exchangeable, so the per-agent draws are sampled in aggregate as
//! binomial/multinomial counts; the distribution is the same.
//!
//! Counts are divided by `scale` (agents per cell/mm³) before entering any
//! rate function, which makes the ensemble mean approach the ODE as `scale`
//! grows.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::model::{
    proliferation_dilution, thymic_influx, trec_death_factor, Compartment, ModelParams,
    StateVector,
};
use crate::ode::{Engine, Scenario, Trajectory};

/// Probability that an exponential event with hazard `rate` fires within `dt`.
pub fn hazard_to_prob(rate: f64, dt: f64) -> f64 {
    -(-rate * dt).exp_m1()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentPopulation {
    pub t: f64,
    pub naive_thymic: u64,
    pub naive_proliferated: u64,
    pub active: u64,
    pub memory: u64,
}

impl AgentPopulation {
    pub fn total(&self) -> u64 {
        self.naive_thymic + self.naive_proliferated + self.active + self.memory
    }

    /// Round a density state to agent counts (half to even).
    pub fn from_state(s: &StateVector, scale: f64) -> Self {
        let count = |v: f64| (v * scale).round_ties_even() as u64;
        Self {
            t: s.t,
            naive_thymic: count(s.n),
            naive_proliferated: count(s.n_p),
            active: count(s.a),
            memory: count(s.m),
        }
    }

    pub fn to_state(&self, scale: f64) -> StateVector {
        StateVector::new(
            self.t,
            self.naive_thymic as f64 / scale,
            self.naive_proliferated as f64 / scale,
            self.active as f64 / scale,
            self.memory as f64 / scale,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbmConfig {
    /// Stochastic step, years.
    pub dt: f64,
    pub seed: u64,
    pub replicates: u64,
    /// Agents per cell/mm³.
    pub scale: f64,
}

impl Default for AbmConfig {
    fn default() -> Self {
        Self {
            dt: 0.001,
            seed: 20_100_709,
            replicates: 200,
            scale: 1.0,
        }
    }
}

impl AbmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(SimError::InvalidAbmConfig(format!("dt must be > 0, got {}", self.dt)));
        }
        if self.replicates < 1 {
            return Err(SimError::InvalidAbmConfig("replicates must be >= 1".into()));
        }
        if !(self.scale > 0.0) || !self.scale.is_finite() {
            return Err(SimError::InvalidAbmConfig(format!(
                "scale must be > 0, got {}",
                self.scale
            )));
        }
        Ok(())
    }

    /// Random stream for one replicate. Streams differ by replicate index
    /// and are reproducible from `(seed, index)` alone.
    pub fn replicate_rng(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        rng
    }
}

fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    let d = Poisson::new(mean).expect("finite positive Poisson mean");
    d.sample(rng) as u64
}

fn binomial<R: Rng + ?Sized>(n: u64, p: f64, rng: &mut R) -> u64 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    Binomial::new(n, p).expect("probability in (0, 1)").sample(rng)
}

/// Split `count` agents across competing hazards for one step.
///
/// Returns how many agents took each exit; the remainder stays put.
fn competing_exits<R: Rng + ?Sized, const K: usize>(
    count: u64,
    rates: [f64; K],
    dt: f64,
    rng: &mut R,
) -> [u64; K] {
    let mut out = [0u64; K];
    let total: f64 = rates.iter().sum();
    if count == 0 || total <= 0.0 {
        return out;
    }
    let mut remaining = binomial(count, hazard_to_prob(total, dt), rng);
    let mut rate_left = total;
    for (i, &r) in rates.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if i == K - 1 {
            out[i] = remaining;
            break;
        }
        let k = binomial(remaining, r / rate_left, rng);
        out[i] = k;
        remaining -= k;
        rate_left -= r;
    }
    out
}

/// One synchronous stochastic step.
pub fn step_population<R: Rng + ?Sized>(
    pop: &AgentPopulation,
    p: &ModelParams,
    dt: f64,
    scale: f64,
    rng: &mut R,
) -> AgentPopulation {
    let n = pop.naive_thymic as f64 / scale;
    let n_p = pop.naive_proliferated as f64 / scale;

    let influx = poisson(thymic_influx(pop.t, n_p, p) * scale * dt, rng);

    let [n_die, n_to_np] = competing_exits(
        pop.naive_thymic,
        [p.mu_n * trec_death_factor(n_p, p), p.lambda_n],
        dt,
        rng,
    );
    let [np_die, births] = competing_exits(
        pop.naive_proliferated,
        [p.mu_n, p.c * proliferation_dilution(n, n_p, p)],
        dt,
        rng,
    );
    let activated = poisson(
        (p.lambda_na * pop.naive_thymic as f64 + p.lambda_npa * pop.naive_proliferated as f64)
            * dt,
        rng,
    );
    let [a_die, a_to_m] = competing_exits(pop.active, [p.mu_a, p.lambda_a], dt, rng);
    let [m_die, m_to_np] = competing_exits(pop.memory, [p.mu_m, p.lambda_mn], dt, rng);

    AgentPopulation {
        t: pop.t + dt,
        naive_thymic: pop.naive_thymic - n_die - n_to_np + influx,
        naive_proliferated: pop.naive_proliferated - np_die + births + n_to_np + m_to_np,
        active: pop.active - a_die - a_to_m + activated,
        memory: pop.memory - m_die - m_to_np + a_to_m,
    }
}

/// Number of ABM steps per recorded sample.
fn abm_record_stride(sc: &Scenario, cfg: &AbmConfig) -> Result<u64> {
    let ratio = sc.record_interval() / cfg.dt;
    let stride = ratio.round();
    if stride < 1.0 || (ratio - stride).abs() > 1e-6 * ratio {
        return Err(SimError::InvalidAbmConfig(format!(
            "record interval {} is not a whole number of ABM steps of {}",
            sc.record_interval(),
            cfg.dt
        )));
    }
    Ok(stride as u64)
}

/// Run one replicate, recording on the same grid as [`crate::integrate`].
pub fn run_replicate(
    sc: &Scenario,
    p: &ModelParams,
    cfg: &AbmConfig,
    replicate_index: u64,
) -> Result<Trajectory> {
    sc.validate()?;
    p.validate()?;
    cfg.validate()?;
    let stride = abm_record_stride(sc, cfg)?;
    let steps = sc.steps_for(cfg.dt)?;
    let mut rng = cfg.replicate_rng(replicate_index);

    let mut pop = AgentPopulation::from_state(&sc.initial_state, cfg.scale);
    let mut samples = Vec::with_capacity((steps / stride + 2) as usize);
    samples.push(pop.to_state(cfg.scale));
    for i in 1..=steps {
        let t_next = if i == steps {
            sc.t_end
        } else {
            sc.t_start + i as f64 * cfg.dt
        };
        pop = step_population(&pop, p, t_next - pop.t, cfg.scale, &mut rng);
        pop.t = t_next;
        if i % stride == 0 && i != steps {
            let mut rec = pop.to_state(cfg.scale);
            rec.t = sc.sample_time(i / stride);
            samples.push(rec);
        }
    }
    samples.push(pop.to_state(cfg.scale));

    Ok(Trajectory {
        engine: Engine::Abm,
        scenario: sc.clone(),
        seed: Some(cfg.seed),
        samples,
        clamp_count: 0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompartmentStats {
    pub mean: f64,
    /// Sample variance (n − 1 denominator); 0 for a single replicate.
    pub variance: f64,
    pub min: f64,
    pub max: f64,
}

impl CompartmentStats {
    fn from_values(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let variance = if values.len() > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        // Rounding in the mean can step just outside [min, max].
        Self {
            mean: mean.clamp(min, max),
            variance,
            min,
            max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsemblePoint {
    pub t: f64,
    /// Indexed in [`Compartment::ALL`] order.
    pub compartments: [CompartmentStats; 4],
}

impl EnsemblePoint {
    pub fn get(&self, c: Compartment) -> &CompartmentStats {
        &self.compartments[c.index()]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub replicates: u64,
    pub seed: u64,
    pub points: Vec<EnsemblePoint>,
}

impl EnsembleStats {
    /// Ensemble means as a state series.
    pub fn mean_states(&self) -> Vec<StateVector> {
        self.points
            .iter()
            .map(|pt| {
                let mut v = [0.0; 4];
                for c in Compartment::ALL {
                    v[c.index()] = pt.get(c).mean;
                }
                StateVector::from_array(pt.t, v)
            })
            .collect()
    }
}

/// Order-insensitive collection of replicate trajectories.
///
/// Replicates are keyed by index and statistics are always computed in
/// index order, so merging partial ensembles in any order or grouping
/// yields bit-identical [`EnsembleStats`].
#[derive(Debug, Clone, Default)]
pub struct EnsembleAccumulator {
    seed: Option<u64>,
    replicates: BTreeMap<u64, Trajectory>,
}

impl EnsembleAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, index: u64, traj: Trajectory) -> Result<()> {
        if let (Some(a), Some(b)) = (self.seed, traj.seed) {
            if a != b {
                return Err(SimError::InvalidAbmConfig(format!(
                    "cannot mix replicates from seeds {a} and {b}"
                )));
            }
        }
        self.seed = self.seed.or(traj.seed);
        if self.replicates.insert(index, traj).is_some() {
            return Err(SimError::InvalidAbmConfig(format!("replicate {index} added twice")));
        }
        Ok(())
    }

    pub fn merge(mut self, other: EnsembleAccumulator) -> Result<Self> {
        for (index, traj) in other.replicates {
            self.insert(index, traj)?;
        }
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.replicates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.replicates.is_empty()
    }

    pub fn finish(&self) -> Result<EnsembleStats> {
        let first = self
            .replicates
            .values()
            .next()
            .ok_or_else(|| SimError::InvalidAbmConfig("empty ensemble".into()))?;
        let len = first.samples.len();
        for (index, traj) in &self.replicates {
            let aligned = traj.samples.len() == len
                && traj.samples.iter().zip(&first.samples).all(|(a, b)| a.t == b.t);
            if !aligned {
                return Err(SimError::Alignment(format!(
                    "replicate {index} is recorded on a different time grid"
                )));
            }
        }

        let mut values = vec![0.0; self.replicates.len()];
        let points = (0..len)
            .map(|k| {
                let compartments = Compartment::ALL.map(|c| {
                    for (slot, traj) in values.iter_mut().zip(self.replicates.values()) {
                        *slot = traj.samples[k].get(c);
                    }
                    CompartmentStats::from_values(&values)
                });
                EnsemblePoint {
                    t: first.samples[k].t,
                    compartments,
                }
            })
            .collect();
        Ok(EnsembleStats {
            replicates: self.replicates.len() as u64,
            seed: self.seed.unwrap_or_default(),
            points,
        })
    }
}

/// Run the replicates with indices in `indices`, in parallel.
pub fn run_replicates(
    sc: &Scenario,
    p: &ModelParams,
    cfg: &AbmConfig,
    indices: std::ops::Range<u64>,
) -> Result<EnsembleAccumulator> {
    let runs: Vec<(u64, Trajectory)> = indices
        .into_par_iter()
        .map(|index| {
            run_replicate(sc, p, cfg, index)
                .map(|traj| (index, traj))
                .map_err(|e| SimError::Replicate {
                    index,
                    source: Box::new(e),
                })
        })
        .collect::<Result<_>>()?;
    let mut acc = EnsembleAccumulator::new();
    for (index, traj) in runs {
        acc.insert(index, traj)?;
    }
    Ok(acc)
}

/// Run `cfg.replicates` replicates and aggregate per-sample statistics.
pub fn run_ensemble(sc: &Scenario, p: &ModelParams, cfg: &AbmConfig) -> Result<EnsembleStats> {
    cfg.validate()?;
    run_replicates(sc, p, cfg, 0..cfg.replicates)?.finish()
}
