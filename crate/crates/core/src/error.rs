use thiserror::Error;

/// Errors raised by the solvers and oracles in this crate.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    /// A precondition on the arguments did not hold.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Two vectors (or a vector and a set) disagree on dimension.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    /// A scalar root-finder or inner iteration broke down.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// An iterative method ran out of its iteration budget.
    #[error("{method} did not converge after {iterations} iterations (residual {residual:.3e}, target {target:.3e})")]
    NoConvergence {
        method: &'static str,
        iterations: usize,
        residual: f64,
        target: f64,
    },

    /// The requested accuracy cannot be met under the given constants.
    #[error("configuration error: {0}")]
    Config(String),

    /// Wraps an inner failure with the context it occurred in.
    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub fn with_context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// Strips any [`Error::Context`] layers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension { expected, got })
    }
}
