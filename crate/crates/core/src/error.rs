use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid natural parameters: eta2 = {eta2} (must be finite and < 0)")]
    InvalidNaturalParams { eta2: f64 },

    #[error("invalid variance: {0} (must be finite and > 0)")]
    InvalidVariance(f64),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("non-finite value at index {index} in {what}")]
    NonFinite { what: &'static str, index: usize },

    #[error("too few distinct points: got {got}, need at least {required}")]
    TooFewDistinct { got: usize, required: usize },

    #[error("{what} is constant; direction is undecidable")]
    ConstantVector { what: &'static str },

    #[error("too few samples: got {got}, need at least {required}")]
    TooFewSamples { got: usize, required: usize },

    #[error("singular normal matrix ({dim}x{dim}); rank deficient system, use delta > 0")]
    Singular { dim: usize },

    #[error("non-finite objective at iteration {iteration}: {detail}")]
    NonFiniteObjective { iteration: usize, detail: String },

    #[error("non-finite training loss at step {step}")]
    NonFiniteLoss { step: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error in {file} line {line}: {msg}")]
    Parse { file: String, line: usize, msg: String },

    #[error("empty corpus: {0}")]
    EmptyCorpus(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
