use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at row {row}, column `{column}`: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("domain error for record `{id}`: {message}")]
    Domain { id: String, message: String },

    #[error("feature `{0}` has no observed values in the fit set")]
    NoObservedValues(String),

    #[error("state error: {0}")]
    State(String),

    #[error("empty dataset: {0}")]
    Empty(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error(
        "calibration failed after {attempts} attempts; achieved stage death rates \
         {achieved:?} vs targets {targets:?} (tolerance {tolerance})"
    )]
    Calibration {
        attempts: usize,
        achieved: [f64; 3],
        targets: [f64; 3],
        tolerance: f64,
    },

    #[error("training diverged at epoch {epoch}; last finite objective {last_finite:?}")]
    Diverged { epoch: usize, last_finite: Option<f64> },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("exact Shapley enumeration limited to {max} features, got {requested}; use permutation sampling")]
    TooManyFeatures { requested: usize, max: usize },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code for the CLI: 1 validation, 2 numerical, 3 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. }
            | Error::Validation(_)
            | Error::Domain { .. }
            | Error::NoObservedValues(_)
            | Error::State(_)
            | Error::Empty(_)
            | Error::TooManyFeatures { .. } => 1,
            Error::DegenerateFit(_) | Error::Calibration { .. } | Error::Diverged { .. } | Error::Numerical(_) => 2,
            Error::Io(_) => 3,
            Error::Csv(e) => match e.kind() {
                csv::ErrorKind::Io(_) => 3,
                _ => 1,
            },
        }
    }
}
