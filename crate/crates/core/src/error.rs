use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("size mismatch: expected {expected}, found {found}")]
    SizeMismatch { expected: usize, found: usize },

    #[error(transparent)]
    Solver(#[from] SolverError),

    #[error("newton iteration did not converge after {iterations} iterations (last increment {last_increment:e})")]
    NotConverged { iterations: usize, last_increment: f64 },

    #[error("{stage} failed: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },

    #[error("realization {index} failed: {source}")]
    Realization {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("at least {required} samples are required, got {found}")]
    TooFewSamples { required: usize, found: usize },
}

/// Failure modes of the linear solver.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("conjugate gradient stalled after {iterations} iterations (relative residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("conjugate gradient breakdown: non-positive curvature {curvature:e} at iteration {iteration}")]
    Breakdown { iteration: usize, curvature: f64 },

    #[error("right-hand side not orthogonal to constants (component {component:e}, norm {norm:e})")]
    Incompatible { component: f64, norm: f64 },
}

/// Stage of the homogenization pipeline, for error reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    InitialGuess,
    Newton,
    Sensitivities,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Stage::InitialGuess => "initial guess",
            Stage::Newton => "newton solve",
            Stage::Sensitivities => "corrector sensitivities",
        };
        f.write_str(name)
    }
}

impl Error {
    pub(crate) fn at(self, stage: Stage) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// The pipeline stage that failed, if recorded.
    pub fn stage(&self) -> Option<Stage> {
        match self {
            Error::Stage { stage, .. } => Some(*stage),
            Error::Realization { source, .. } => source.stage(),
            _ => None,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
