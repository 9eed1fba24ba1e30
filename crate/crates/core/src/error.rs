use thiserror::Error;

use crate::model::Compartment;

pub type Result<T, E = SimError> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("invalid ABM configuration: {0}")]
    InvalidAbmConfig(String),

    #[error("integration fault: {compartment} became non-finite at t = {t}")]
    IntegrationFault { compartment: Compartment, t: f64 },

    #[error("scenario needs {required} steps, exceeding the cap of {cap}")]
    StepLimitExceeded { required: u64, cap: u64 },

    #[error("replicate {index}: {source}")]
    Replicate {
        index: u64,
        #[source]
        source: Box<SimError>,
    },

    #[error("time grids do not align: {0}")]
    Alignment(String),

    #[error("analysis: {0}")]
    Analysis(String),
}
