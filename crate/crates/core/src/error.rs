use thiserror::Error;

/// Failures raised by the numerical library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("site index {site} out of range for {n_spins} spins")]
    SiteOutOfRange { site: usize, n_spins: usize },

    #[error("site index {0} appears twice in one operator term")]
    DuplicateSite(usize),

    #[error("invalid Pauli axis {0:?} (expected x, y or z)")]
    InvalidAxis(String),

    #[error("invalid basis shape: {0}")]
    InvalidShape(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("state is not normalised (norm^2 = {0})")]
    NotNormalized(f64),

    #[error("matrix is not Hermitian (max asymmetry {0:e})")]
    NonHermitian(f64),

    #[error("invalid density matrix: {0}")]
    InvalidDensityMatrix(String),

    #[error("time step must be positive, got {0}")]
    InvalidTimeStep(f64),

    #[error("invalid time interval [{t0}, {t1}]")]
    InvalidInterval { t0: f64, t1: f64 },

    #[error("invalid subsystem selector: {0}")]
    InvalidSelector(String),

    #[error("dephasing rate must be non-negative, got {0}")]
    NegativeRate(f64),

    #[error("dephasing step too large: gamma*dt = {0} (limit 0.1)")]
    StepTooLarge(f64),

    #[error("time {t} outside ramp interval [0, {t_total}]")]
    TimeOutOfRange { t: f64, t_total: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unsupported system size: {0}")]
    UnsupportedSize(String),

    #[error("integrator not converged: halving dt changed the result by {change:e} (limit {limit:e})")]
    NotConverged { change: f64, limit: f64 },

    #[error("Fock truncation overflow: population {population:e} in the top two of {fock_levels} levels; raise fock_levels")]
    FockOverflow { population: f64, fock_levels: usize },

    #[error("detuning must be non-zero")]
    ZeroDetuning,

    #[error("invalid probability triple ({0}, {1}, {2})")]
    InvalidProbabilities(f64, f64, f64),

    #[error("invalid bright-ion count {0} (expected 0, 1 or 2)")]
    InvalidBrightCount(usize),

    #[error("too few shots for a fit: {0} (need at least 100)")]
    TooFewShots(u64),

    #[error("population fit did not converge after {iterations} iterations (last loglik change {last_change:e})")]
    FitNotConverged { iterations: usize, last_change: f64 },

    #[error("phase grid unusable for a contrast fit: {0}")]
    DegeneratePhaseGrid(String),

    #[error("value out of range: {0}")]
    OutOfRange(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
