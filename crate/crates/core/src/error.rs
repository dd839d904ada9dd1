use thiserror::Error;

/// Errors raised by the solver toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain where the operation is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// The operation was asked to evaluate at a point where it is singular.
    #[error("singularity: {0}")]
    Singularity(String),

    #[error("overflow: {0}")]
    Overflow(String),

    /// A truncated series did not meet its tolerance.
    #[error("series did not converge after {terms} terms (last partial sum {partial_sum})")]
    SeriesConvergence { partial_sum: f64, terms: usize },

    /// Cancellation in an alternating series destroyed the requested precision.
    #[error("precision loss: {0}")]
    PrecisionLoss(String),

    /// The pointwise implicit relation `g = f(t, u, v, g)` could not be solved.
    #[error("implicit fixed point failed after {iterations} iterations (residual {residual:e})")]
    FixedPoint { residual: f64, iterations: usize },

    /// Picard iteration exhausted its sweep budget.
    #[error("Picard iteration did not converge in {} sweeps (last delta {:e})", deltas.len(), deltas.last().copied().unwrap_or(f64::NAN))]
    NonConvergence { deltas: Vec<f64> },

    /// A node-level failure inside a Picard sweep.
    #[error("at node {node} (t = {t}): {source}")]
    AtNode {
        node: usize,
        t: f64,
        #[source]
        source: Box<Error>,
    },

    /// Invalid problem configuration; `field` names the offending key.
    #[error("configuration error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("parse error at offset {offset}: {message}")]
    Parse { offset: usize, message: String },

    /// The stability theorem does not apply because the contraction constant is not below one.
    #[error("certificate is not contractive (L = {0:.4})")]
    NonContractive(f64),

    #[error("I/O error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn at_node(self, node: usize, t: f64) -> Self {
        Error::AtNode {
            node,
            t,
            source: Box::new(self),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
