use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Config does not match the expected schema.
    #[error("schema violation at `{path}`: {message}")]
    Schema { path: String, message: String },

    /// A value parsed fine but breaks a model invariant.
    #[error("invariant violation: {0}")]
    Invariant(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// Backward integration left the finite range; the Riccati solution does
    /// not exist on the whole horizon for this data.
    #[error("Riccati solution does not exist on [0,T] at this horizon: blow-up at knot {knot} (t = {time})")]
    BlowUp { knot: usize, time: f64 },

    #[error("non-finite value in {what} (path {path}, step {step})")]
    NonFinite { what: &'static str, path: usize, step: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("missing bound data for player pair ({0}, {1})")]
    MissingPair(usize, usize),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

impl Error {
    /// True for failures caused by the numerical method rather than by input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::BlowUp { .. } | Error::NonFinite { .. })
    }

    pub fn is_config(&self) -> bool {
        matches!(self, Error::Schema { .. } | Error::Invariant(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
