//! Naive T cell repertoire maintenance over a human lifespan.
//!
//! Two engines share one set of rate functions ([`model`]):
//!
//! * [`ode`] integrates the four-compartment system (thymic naive `N`,
//!   proliferated naive `Np`, active `A`, memory `M`) with fixed-step RK4.
//! * [`abm`] treats every cell as an agent that dies or changes state under
//!   per-capita hazards, with Poisson thymic influx and Poisson proliferation.
//!
//! [`analysis`] compares the two, extracts lifespan features from a
//! trajectory and produces the memory extrapolation.
//!
//! All populations are cells per mm³ of peripheral blood; time is in years.

pub mod abm;
pub mod analysis;
pub mod error;
pub mod model;
pub mod ode;

pub use abm::{
    hazard_to_prob, run_ensemble, run_replicate, step_population, AbmConfig, AgentPopulation,
    CompartmentStats, EnsembleAccumulator, EnsemblePoint, EnsembleStats,
};
pub use analysis::{
    compare, compare_series, extract_features, extract_features_in, memory_estimate, ComparisonReport,
    CompartmentError, FeatureReport, FeatureWindow, MemoryEstimate, MemoryPoint,
    ToleranceProfile,
};
pub use error::{Result, SimError};
pub use model::{
    default_params, derivatives, export_modulation, proliferation_dilution, thymic_influx,
    thymic_output, trec_death_factor, Compartment, GaussianTerm, ModelParams, StateDerivative,
    StateVector,
};
pub use ode::{default_scenario, integrate, rk4_step, step_rk4, Engine, Scenario, Trajectory};
