use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("qubit count mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("qubit index {qubit} out of range for {n} qubits")]
    QubitOutOfRange { qubit: usize, n: usize },

    #[error("dense representation on {qubits} qubits exceeds the limit of {limit}")]
    DenseLimit { qubits: usize, limit: usize },

    #[error("{what} would exceed the capacity cap ({predicted} > {cap})")]
    Capacity {
        what: &'static str,
        predicted: u64,
        cap: u64,
    },

    #[error("plan parse error at {location}: {message}")]
    PlanParse { location: String, message: String },

    #[error("invalid {what}: {message}")]
    Invalid { what: &'static str, message: String },

    #[error("missing input file: {path}")]
    MissingInput { path: String },

    #[error("dataset format error: {0}")]
    DatasetFormat(String),

    #[error("degenerate distribution: {0}")]
    Degenerate(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the CLI: missing inputs are distinguishable
    /// from all other failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::MissingInput { .. } => 2,
            _ => 1,
        }
    }
}
