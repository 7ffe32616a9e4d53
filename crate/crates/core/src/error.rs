use thiserror::Error;

/// Errors raised by the simulator and its estimators.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A physical parameter is outside its admissible domain.
    #[error("{field}: {reason}")]
    Domain { field: &'static str, reason: String },

    /// A Monte-Carlo average was requested with too few samples to be meaningful.
    #[error("need at least {required} samples, got {got}")]
    Precision { required: usize, got: usize },

    /// An estimator received no data (or an empty component).
    #[error("empty input: {0}")]
    Empty(&'static str),

    /// A ratio estimator hit a zero denominator.
    #[error("zero denominator in {0}")]
    ZeroDenominator(&'static str),

    /// Least-squares fit could not be carried out.
    #[error("fit failed: {0}")]
    Fit(String),

    /// Histogram binning cannot represent the data.
    #[error("degenerate binning: {0}")]
    Binning(String),

    /// The run could not allocate the requested records.
    #[error("resource exhaustion: {0}")]
    Resource(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(field: &'static str, reason: impl Into<String>) -> Error {
    Error::Domain {
        field,
        reason: reason.into(),
    }
}

pub(crate) fn ensure(cond: bool, field: &'static str, reason: impl Into<String>) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(domain(field, reason))
    }
}
