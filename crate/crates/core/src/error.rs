use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// The requested register would exceed the configured qubit cap.
    #[error("state of {requested_qubits} qubits (dimension 2^{requested_qubits} = {dim}) exceeds the cap of {cap} qubits")]
    Resource {
        requested_qubits: usize,
        dim: u128,
        cap: usize,
    },

    /// A caller broke an operation's precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("capacity exceeded: requested {requested}, at most {available} available")]
    Capacity { requested: usize, available: usize },

    #[error("dataset generation failed: {0}")]
    Generation(String),

    #[error("non-finite {what} at epoch {epoch}")]
    NonFinite { what: &'static str, epoch: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    /// Config errors map to exit code 1, everything else to 2.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_))
    }
}
