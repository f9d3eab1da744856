use thiserror::Error;

/// Errors raised by the geometric, Hamiltonian, transfer and solver layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("point is not on the manifold (constraint residual {residual:e})")]
    NotOnManifold { residual: f64 },

    #[error("constraint Jacobian is rank deficient (smallest singular value {sigma_min:e})")]
    RankDeficient { sigma_min: f64 },

    #[error("vector is not tangent (normal component {residual:e})")]
    NotTangent { residual: f64 },

    #[error("vector is not normal (tangent component {residual:e})")]
    NotNormal { residual: f64 },

    #[error("point is outside the tubular neighbourhood: {reason}")]
    OutsideTube { reason: String },

    #[error("closest point is not unique: {first:?} and {second:?} are equidistant")]
    NonUnique { first: Vec<f64>, second: Vec<f64> },

    #[error("linear map is numerically singular (smallest singular value {sigma_min:e})")]
    SingularMap { sigma_min: f64 },

    #[error("point {point:?} lies outside the chart domain")]
    ChartDomain { point: Vec<f64> },

    #[error("non-finite Hamiltonian gradient at q = {q:?}, p = {p:?}")]
    NonFiniteGradient { q: Vec<f64>, p: Vec<f64> },

    #[error("integration step rejected at t = {t}: non-finite state")]
    StepRejected { t: f64 },

    #[error("time step {dt:e} violates the CFL bound {limit:e}")]
    CflViolation { dt: f64, limit: f64 },

    #[error("non-finite value produced at node {node} (t = {t})")]
    NonFinite { node: usize, t: f64 },

    #[error("point {point:?} lies outside the grid")]
    OutOfGrid { point: Vec<f64> },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown catalog entry `{0}`")]
    UnknownCatalogEntry(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
