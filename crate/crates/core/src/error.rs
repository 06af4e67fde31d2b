use thiserror::Error;

/// Errors produced by the recovery library and the simulator.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument fell outside the domain of a function.
    #[error("domain error: {0}")]
    Domain(String),

    /// A model or scenario parameter set violates one of its constraints.
    #[error("invalid parameters: {0}")]
    Params(String),

    /// Least squares was asked to solve a rank-deficient system.
    #[error("matrix is rank deficient: column {column} of {cols} is (numerically) dependent")]
    Singular { column: usize, cols: usize },

    /// A regression over `cols` columns leaves no residual degrees of freedom in `rows`.
    #[error("degenerate regression: {cols} columns in least squares with only {rows} rows")]
    Degenerate { cols: usize, rows: usize },

    #[error("index {index} out of range (limit {limit})")]
    IndexOutOfRange { index: usize, limit: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    /// Every candidate block has already been selected.
    #[error("no selectable block left")]
    Exhausted,

    #[error("codec error: {0}")]
    Codec(String),

    /// A failure inside an iterative recovery, annotated with the iteration.
    #[error("iteration {iteration}: {source}")]
    Iteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    /// A Monte Carlo trial failed; carries the cell it belonged to.
    #[error("rule {rule} at {snr_db} dB, trial {trial}: {source}")]
    Trial {
        rule: String,
        snr_db: f64,
        trial: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn at_iteration(self, iteration: usize) -> Self {
        Error::Iteration {
            iteration,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
