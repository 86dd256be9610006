use alloc::string::String;

/// Errors produced by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("matrix is not positive definite (pivot {pivot} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("column `{0}` has zero standard deviation")]
    ConstantColumn(String),
    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: String, found: String },
    #[error("score cross-product matrix is singular")]
    SingularScores,
    #[error("chain has {0} retained states; at least 2 are required")]
    InsufficientChain(usize),
    #[error("trace variance is zero")]
    DegenerateTrace,
    #[error("NIPALS inner loop did not converge for component {component} within {iterations} iterations")]
    ConvergenceFailure { component: usize, iterations: usize },
    #[error("rank deficient input at component {0}")]
    RankDeficient(usize),
    #[error("invalid fold specification: {0}")]
    InvalidFolds(String),
    #[error("latent summaries were not stored in this chain")]
    MissingLatentSummaries,
    #[error("sampler failed at iteration {iteration}: {source}")]
    Sampler {
        iteration: usize,
        #[source]
        source: alloc::boxed::Box<Error>,
    },
}

pub type Result<T> = core::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }

    pub(crate) fn shape(expected: impl Into<String>, found: impl Into<String>) -> Self {
        Error::ShapeMismatch { expected: expected.into(), found: found.into() }
    }

    /// True for failures caused by arithmetic rather than by bad inputs.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NotPositiveDefinite { .. }
            | Error::SingularScores
            | Error::ConvergenceFailure { .. }
            | Error::RankDeficient(_)
            | Error::DegenerateTrace => true,
            Error::Sampler { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
