use thiserror::Error;

/// Errors raised anywhere in the toolkit.
///
/// Variants fall into two families: input validation and numerical failure.
/// The CLI maps them to exit codes 2 and 3 respectively.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("non-finite sample at index {index}")]
    NonFinite { index: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("ODE integration diverged at step {step}")]
    Diverged { step: usize },

    #[error("no vibration detected")]
    NoVibration,

    #[error("stage `{stage}` failed{}: {source}", cycle.map(|c| format!(" at cycle {c}")).unwrap_or_default())]
    Stage {
        stage: &'static str,
        cycle: Option<usize>,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    /// True for failures caused by the numbers rather than by the request.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Numerical(_) | Error::Diverged { .. } | Error::NoVibration => true,
            Error::Stage { source, .. } => source.is_numerical(),
            _ => false,
        }
    }

    pub(crate) fn at_stage(self, stage: &'static str, cycle: Option<usize>) -> Self {
        Error::Stage {
            stage,
            cycle,
            source: Box::new(self),
        }
    }
}

/// Reject the first non-finite value in `xs`.
pub(crate) fn ensure_finite(xs: &[f64]) -> Result<()> {
    match xs.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite { index }),
        None => Ok(()),
    }
}
