use thiserror::Error;

/// Errors raised by the simulation and synthesis layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeoError {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("model error: {0}")]
    Model(String),

    #[error("convergence error: {0}")]
    Convergence(String),

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("degenerate loop: cos(chi1) equals cos(chi3)")]
    DegenerateLoop,

    #[error("singular phase drift on the equator (chi = {chi}) with nonzero latitude span")]
    SingularDrift { chi: f64 },

    #[error("topology error: {0}")]
    Topology(String),

    #[error("unknown name: {0}")]
    Lookup(String),

    #[error("amplitude error: requested coupling {requested} exceeds reachable maximum {max}")]
    Amplitude { requested: f64, max: f64 },

    #[error("validity error: {0}")]
    Validity(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("no feasible cell in landscape")]
    EmptyLandscape,

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("io error: {0}")]
    Io(String),
}

impl GeoError {
    /// True for errors that stem from numerical non-convergence rather than bad input.
    pub fn is_convergence(&self) -> bool {
        matches!(self, GeoError::Convergence(_))
    }
}

impl From<std::io::Error> for GeoError {
    fn from(e: std::io::Error) -> Self {
        GeoError::Io(e.to_string())
    }
}

impl From<csv::Error> for GeoError {
    fn from(e: csv::Error) -> Self {
        GeoError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, GeoError>;
