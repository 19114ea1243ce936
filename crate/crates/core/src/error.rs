use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A named input failed range or shape validation.
    #[error("invalid `{field}`: {reason}")]
    Invalid { field: String, reason: String },

    #[error("effect must be nonzero")]
    ZeroEffect,

    /// No allele frequency in (0, 0.5] reaches the target; the genotype
    /// variance 2p(1-p) cannot exceed 0.5.
    #[error("no minor allele frequency achieves the target: required genotype variance {required_variance:.6} exceeds 0.5")]
    MafInfeasible { required_variance: f64 },

    #[error("covariance matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("singular design matrix")]
    SingularDesign,

    #[error("covariates are collinear")]
    Collinear,

    #[error("no events in data")]
    NoEvents,

    #[error("insufficient longitudinal data: {0}")]
    InsufficientData(String),

    #[error("unknown subject {0}")]
    UnknownSubject(usize),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("{failed} of {total} replicates failed (limit 5%); first failure: {first}")]
    TooManyFailures {
        failed: usize,
        total: usize,
        first: String,
    },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Invalid {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn at_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub(crate) fn check_probability(field: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("must lie in (0, 1), got {value}")))
    }
}

pub(crate) fn check_finite(field: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("must be finite, got {value}")))
    }
}

pub(crate) fn check_positive(field: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("must be positive, got {value}")))
    }
}
