use thiserror::Error;

/// Failures raised by the geometry, entropy and flow layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("metric not positive definite at node {node}: smallest eigenvalue {min_eigenvalue:e} below floor {floor:e}")]
    NonPositiveDefinite { node: usize, min_eigenvalue: f64, floor: f64 },

    #[error("resolution {resolution} along axis {axis} too coarse for stencil half-width {half_width}")]
    ResolutionTooCoarse { axis: usize, resolution: usize, half_width: usize },

    #[error("fields live on different charts")]
    ChartMismatch,

    #[error("{solver} did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { solver: &'static str, iterations: usize, residual: f64 },

    #[error("minimizer lost positivity: min value {min_value:e} below floor {floor:e}")]
    PositivityLoss { min_value: f64, floor: f64 },

    #[error("direction is not divergence-free: relative divergence {relative:e}")]
    NotDivergenceFree { relative: f64 },

    #[error("scalar curvature is not constant: oscillation {oscillation:e} exceeds {tolerance:e}")]
    NonConstantScalar { oscillation: f64, tolerance: f64 },

    #[error("scalar curvature {scal} is not positive")]
    NonPositiveScalar { scal: f64 },

    #[error("Einstein constant {mu} is not positive")]
    NonPositiveMu { mu: f64 },

    #[error("not enough data: {0}")]
    InsufficientData(String),

    #[error("time step {dt:e} exceeds stability bound {bound:e}")]
    CflViolation { dt: f64, bound: f64 },

    #[error("metric degenerated at t = {time}: smallest eigenvalue {min_eigenvalue:e}")]
    MetricDegenerate { time: f64, min_eigenvalue: f64 },

    #[error("tau-flow needs a positive first eigenvalue of -4 Laplacian + scal, found {lambda}")]
    TauFlowUnavailable { lambda: f64 },

    #[error("only {found} snapshots, need at least {needed}")]
    InsufficientSnapshots { found: usize, needed: usize },

    #[error("step size underflow: {0}")]
    StepUnderflow(String),

    #[error("finite-difference ladder is noise dominated: successive differences {0:?}")]
    NoisyFunctional(Vec<f64>),

    #[error("closed form requires an Einstein background: {0}")]
    NonEinsteinBackgroundForClosedForm(String),

    #[error("round spheres are excluded from the eigenvalue stability rule")]
    ExcludedSphere,

    #[error("eigenvalue {0} coincides with the resolvent pole")]
    ResolventPole(String),

    #[error("value {0} is not in the spectrum")]
    NotInSpectrum(String),

    #[error("i/o: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
