use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {context}: expected {expected}, got {actual}")]
    Shape {
        context: &'static str,
        expected: String,
        actual: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite value in {what}")]
    NonFinite { what: String },

    #[error("training diverged at epoch {epoch} (non-finite loss)")]
    Diverged { epoch: usize, trace: Vec<f64> },

    #[error("ODE state became non-finite at step {step}")]
    OdeBlowup { step: usize },

    #[error("schedule coefficient alpha vanishes on [0, 1-tau]; psi is undefined")]
    VanishingAlpha,

    #[error("degenerate ensemble: all pairwise response distances are zero")]
    DegenerateEnsemble,

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub fn shape(context: &'static str, expected: impl ToString, actual: impl ToString) -> Self {
        Error::Shape {
            context,
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }
}
