use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("numeric error: {0}")]
    Numeric(String),

    /// Dykstra's alternating projections did not settle. Carries the best iterate.
    #[error("projection did not converge after {iterations} sweeps (last change {last_change:.3e})")]
    Projection {
        iterations: usize,
        last_change: f64,
        best: Vec<f64>,
    },

    /// The offline solver failed; the message carries the residual report.
    #[error("solver error: {0}")]
    Solver(String),

    /// An expert inside an ensemble failed; `start` is the expert's start round.
    #[error("expert started at round {start}: {source}")]
    Expert {
        start: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("missing input file {path}")]
    MissingFile { path: String },

    #[error("non-numeric cell at row {row}, column `{column}`: {value:?}")]
    NonNumeric {
        row: usize,
        column: String,
        value: String,
    },

    #[error("empty selection: {0}")]
    EmptySelection(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
