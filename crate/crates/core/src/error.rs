use thiserror::Error;

/// Errors raised across the estimation pipeline.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum HawkesError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("observation window too short: length {length} < bin width {delta}")]
    WindowTooShort { length: f64, delta: f64 },
    #[error("excitation evaluation failed: {0}")]
    Evaluation(String),
    #[error("rejected model specification: {0}")]
    RejectedSpec(String),
    #[error("invalid autoregressive order: p = {p} must satisfy 1 <= p < n = {n}")]
    InvalidOrder { p: usize, n: usize },
    #[error("underdetermined design: {rows} usable rows, need at least {required}")]
    Underdetermined { rows: usize, required: usize },
    #[error("singular design (condition estimate {condition:.3e}); try a larger bin size or a smaller support")]
    SingularDesign { condition: f64 },
    #[error("diagnostics unavailable: {0}")]
    DiagnosticsUnavailable(String),
    #[error("degenerate residual covariance at order {p}")]
    DegenerateResidualCovariance { p: usize },
    #[error("selection failed: {0}")]
    SelectionFailed(String),
    #[error("insufficient events: {0}")]
    InsufficientEvents(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl HawkesError {
    /// Whether the failure is a modelling/domain failure rather than bad input plumbing.
    pub fn is_domain(&self) -> bool {
        !matches!(self, HawkesError::Parse(_) | HawkesError::Io(_))
    }
}

impl From<std::io::Error> for HawkesError {
    fn from(e: std::io::Error) -> Self {
        HawkesError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for HawkesError {
    fn from(e: serde_json::Error) -> Self {
        HawkesError::Parse(e.to_string())
    }
}

impl From<csv::Error> for HawkesError {
    fn from(e: csv::Error) -> Self {
        if e.is_io_error() {
            HawkesError::Io(e.to_string())
        } else {
            HawkesError::Parse(e.to_string())
        }
    }
}

pub type Result<T> = std::result::Result<T, HawkesError>;
