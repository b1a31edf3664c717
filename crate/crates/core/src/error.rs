use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid value for `{field}`: {reason}")]
    ParameterDomain { field: String, reason: String },

    #[error("support mismatch: {0}")]
    SupportIncompatible(String),

    #[error("outside the regime of this evaluator: {0}")]
    Regime(String),

    #[error("degenerate regime: {0}")]
    DegenerateRegime(String),

    #[error("{what} did not converge after {iterations} iterations (best iterate {best:?})")]
    NumericalFailure {
        what: String,
        iterations: usize,
        best: Vec<f64>,
    },

    #[error("moment budget c = {c} must exceed f(0) = {floor}")]
    InfeasibleBudget { c: f64, floor: f64 },

    #[error("unsupported moment function: {0}")]
    UnsupportedSpec(String),

    #[error("unsupported support: {0}")]
    UnsupportedSupport(String),

    #[error("nothing to do: {0}")]
    TrivialRequest(String),

    #[error("degenerate bound: {0}")]
    DegenerateBound(String),

    #[error("ground truth does not single out a best population: {0}")]
    UndefinedTruth(String),
}

impl Error {
    pub fn domain(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::ParameterDomain {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Stable machine-readable category, used by the CLI for error reporting.
    pub fn category(&self) -> &'static str {
        match self {
            Error::ParameterDomain { .. } => "parameter-domain",
            Error::SupportIncompatible(_) => "support-incompatible",
            Error::Regime(_) => "regime",
            Error::DegenerateRegime(_) => "degenerate-regime",
            Error::NumericalFailure { .. } => "numerical-failure",
            Error::InfeasibleBudget { .. } => "infeasible-budget",
            Error::UnsupportedSpec(_) => "unsupported-spec",
            Error::UnsupportedSupport(_) => "unsupported-support",
            Error::TrivialRequest(_) => "trivial-request",
            Error::DegenerateBound(_) => "degenerate-bound",
            Error::UndefinedTruth(_) => "undefined-truth",
        }
    }

    /// Prefix the field path of a parameter-domain error, e.g. `models.a` + `lambda`.
    pub fn within(self, prefix: &str) -> Self {
        match self {
            Error::ParameterDomain { field, reason } => Error::ParameterDomain {
                field: format!("{prefix}.{field}"),
                reason,
            },
            other => other,
        }
    }
}

pub(crate) fn check_probability_open(field: &str, p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(field, format!("must lie in (0, 1), got {p}")))
    }
}

pub(crate) fn check_positive(field: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(field, format!("must be finite and > 0, got {x}")))
    }
}

pub(crate) fn check_finite(field: &str, x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(field, format!("must be finite, got {x}")))
    }
}
