use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QueueError {
    #[error("unstable queue: load {load} >= service rate {rate}")]
    Unstable { load: f64, rate: f64 },
    #[error("negative load {load}")]
    NegativeLoad { load: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("{0}")]
    Invalid(String),
}

impl ModelError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        ModelError::Invalid(msg.into())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("infeasible: offered load {offered} exceeds admissible capacity {capacity}")]
    Infeasible { offered: f64, capacity: f64 },
    #[error("offered load must be positive and finite, got {0}")]
    InvalidLoad(f64),
    #[error("no destinations to offload to")]
    NoDestinations,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FormationError {
    #[error("no network size up to {j_max} admits a stable split")]
    Infeasible { j_max: usize },
    #[error("gamma never admitted the target network size within {cap} iterations (last gamma {gamma})")]
    IterationCapExceeded { cap: usize, gamma: f64 },
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("formation probability never reached {target} for gamma <= {gamma_max} (reached {reached})")]
    NotReached { target: f64, gamma_max: f64, reached: f64 },
}
