//! Error type shared across the crate.

/// Errors produced by the numerical kernel, the simulator, the filter and
/// the experiment harness.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    /// A matrix that must be symmetric positive definite failed its
    /// Cholesky factorization even after the jitter retry.
    #[error("matrix is not positive definite ({0})")]
    NotPositiveDefinite(String),

    /// A matrix handed to an SPD routine is not symmetric within tolerance.
    #[error("matrix is not symmetric within tolerance")]
    NotSymmetric,

    /// A special function was evaluated outside its domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// The inverse-Wishart mean requested with dof <= dim + 1.
    #[error("inverse-Wishart mean undefined: dof {dof} must exceed dim + 1 = {}", dim + 1)]
    MeanUndefined { dof: f64, dim: usize },

    /// A scenario or hyper-parameter configuration failed validation.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Paired series of different lengths.
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    /// An aggregate over an empty collection.
    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    /// An experiment preset name that does not exist.
    #[error("unknown preset `{0}` (valid: exp1, exp2, exp3, exp4a, exp4b, exp4c)")]
    UnknownPreset(String),

    /// A numeric failure inside the filter, annotated with where it happened.
    #[error("filter failed at step {step}, vi iteration {iteration}{}: {source}",
            sensor.map(|s| format!(", sensor {s}")).unwrap_or_default())]
    FilterStep {
        step: usize,
        iteration: usize,
        sensor: Option<usize>,
        source: Box<Error>,
    },

    /// A simulator/experiment failure annotated with the Monte-Carlo rep.
    #[error("experiment failed at sweep point {sweep_index}, rep {rep}: {source}")]
    ExperimentRep {
        sweep_index: usize,
        rep: usize,
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Attach filter step context to an error bubbling out of a VI iteration.
    pub(crate) fn at_step(
        self,
        step: usize,
        iteration: usize,
        sensor: Option<usize>,
    ) -> Self {
        Error::FilterStep {
            step,
            iteration,
            sensor,
            source: Box::new(self),
        }
    }
}
