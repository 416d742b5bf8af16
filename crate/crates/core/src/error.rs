use thiserror::Error;

/// Errors raised while building models, evaluating bounds or solving programs.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not Hermitian (residual {residual:.3e})")]
    NotHermitian { residual: f64 },

    #[error("eigendecomposition did not converge")]
    EigSolverFailure,

    #[error("parse error: {0}")]
    Parse(String),

    #[error("invariant violation: {}", .0.join("; "))]
    InvariantViolation(Vec<String>),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("closed-form Gram block disagrees with direct evaluation (residual {residual:.3e})")]
    BlockMismatch { residual: f64 },

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eig:.3e})")]
    NotPsd { min_eig: f64 },

    #[error("derivative has a kernel-kernel component of {residual:.3e} (rank is changing)")]
    DerivativeOutsideModel { residual: f64 },

    #[error("singular model: {0}")]
    SingularModel(String),

    #[error("right logarithmic derivatives do not exist for this model")]
    RldUnsupported,

    #[error("outcome {outcome} has probability {probability:.3e} but derivative {derivative:.3e}")]
    IllConditionedOutcome {
        outcome: usize,
        probability: f64,
        derivative: f64,
    },

    #[error("conic solver failed: {0}")]
    SolverFailure(String),

    #[error("relative duality gap {gap:.3e} exceeds tolerance {tol:.3e}")]
    GapTooLarge { gap: f64, tol: f64 },

    #[error("Holland-Burnett states need an even photon number, got {0}")]
    OddPhotonNumber(usize),

    #[error("transmissivity must lie strictly inside (0, 1), got {0}")]
    BoundaryTransmissivity(f64),

    #[error("every restart of the measurement search hit a singular Fisher matrix")]
    AllRestartsFailed,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
