use thiserror::Error;

/// Errors raised by the laboratory.
#[derive(Debug, Error)]
pub enum WaveError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unsupported derivative order (ds={ds}, dy={dy}); at most ds=2, dy=3")]
    UnsupportedOrder { ds: usize, dy: usize },
    #[error("speed {omega} outside the subsonic window (0, {sonic})")]
    Supersonic { omega: f64, sonic: f64 },
    #[error("Newton did not converge after {iterations} iterations (residual {residual:e})")]
    NewtonDiverged { iterations: usize, residual: f64 },
    #[error("Newton iterate collapsed to the zero profile")]
    ZeroProfile,
    #[error("grid of {n} points exceeds the dense operator cap of {cap}")]
    GridTooLarge { n: usize, cap: usize },
    #[error("eigensolver failure: {0}")]
    Eigen(String),
    #[error("right-hand side not orthogonal to the kernel (relative defect {0:e})")]
    NotKernelOrthogonal(f64),
    #[error("singular linear system: {0}")]
    Singular(String),
    #[error("degenerate slope: |dP/domega| = {0:e}")]
    DegenerateSlope(f64),
    #[error("cutoff support 2/eps = {support} exceeds the half-length {half_length}; enlarge L or increase eps")]
    CutoffTooWide { support: f64, half_length: f64 },
    #[error("speed left the admissible window at t = {t}: omega = {omega}")]
    SpeedExit { t: f64, omega: f64 },
    #[error("non-finite state at t = {0}")]
    NonFinite(f64),
    #[error("tracker failure: {0}")]
    Tracker(String),
    #[error("time step too large: Richardson defect {0:e}")]
    TimeStepTooLarge(f64),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("scaling fit needs at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, WaveError>;
