use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("parameter `{name}` = {value} is outside its domain {expected}")]
    ParameterDomain {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("paths are not on the same time grid ({left} vs {right} points)")]
    GridMismatch { left: usize, right: usize },

    #[error("grid is not nested in the sampled path: time {time} not found")]
    NotNested { time: f64 },

    #[error("invariant violated: {0}")]
    Invariant(String),

    /// Circulant embedding produced an eigenvalue below the admissible floor.
    /// Callers should fall back to exact covariance factorization.
    #[error(
        "circulant embedding eigenvalue {value:e} at index {index} is negative; \
         fall back to covariance factorization"
    )]
    NegativeEigenvalue { index: usize, value: f64 },

    #[error("covariance matrix is not positive definite after {retries} jitter retries (last jitter {jitter:e})")]
    Factorization { retries: u32, jitter: f64 },

    #[error("non-finite value in {what} at t = {time}")]
    NumericDomain { what: &'static str, time: f64 },

    #[error("exponent overflow at t = {time} (exponent {exponent})")]
    NumericOverflow { time: f64, exponent: f64 },

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("internal consistency failure at t = {time}: {detail}")]
    Consistency { time: f64, detail: String },
}

impl Error {
    pub(crate) fn domain(name: &'static str, value: f64, expected: &'static str) -> Self {
        Error::ParameterDomain {
            name,
            value,
            expected,
        }
    }

    /// True for failures that indicate a broken algebraic identity rather than
    /// a numeric limitation of a particular path.
    pub fn is_consistency(&self) -> bool {
        matches!(self, Error::Consistency { .. } | Error::Invariant(_))
    }
}
