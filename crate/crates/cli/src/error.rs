use serde_json::json;
use thiserror::Error;

/// Exit status for invalid input, with a field path where one is known.
pub const EXIT_VALIDATION: u8 = 2;
/// Exit status for a solver that failed to converge.
pub const EXIT_NUMERICAL: u8 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{message}")]
    Validation { field: Option<String>, message: String },

    #[error(transparent)]
    Core(#[from] ordinal_core::Error),

    #[error("{0} of the reproduced values failed")]
    Failed(usize),

    #[error(transparent)]
    Other(#[from] anyhow::Error),
}

/// Attaches a field prefix to a core error.
pub fn core_at(prefix: &str, e: ordinal_core::Error) -> CliError {
    match e {
        ordinal_core::Error::ParameterDomain { .. } if !prefix.is_empty() => CliError::Core(e.within(prefix)),
        e => CliError::Core(e),
    }
}

impl CliError {
    pub fn validation(field: Option<String>, message: String) -> Self {
        CliError::Validation { field, message }
    }

    pub fn from_path_error<E: std::fmt::Display>(prefix: &str, e: serde_path_to_error::Error<E>) -> Self {
        let path = e.path().to_string();
        let field = match (prefix.is_empty(), path == ".") {
            (true, true) => None,
            (true, false) => Some(path),
            (false, true) => Some(prefix.to_string()),
            (false, false) if path.starts_with('[') => Some(format!("{prefix}{path}")),
            (false, false) => Some(format!("{prefix}.{path}")),
        };
        CliError::validation(field, e.into_inner().to_string())
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation { .. } => EXIT_VALIDATION,
            CliError::Core(ordinal_core::Error::NumericalFailure { .. }) => EXIT_NUMERICAL,
            CliError::Core(_) => EXIT_VALIDATION,
            CliError::Failed(_) | CliError::Other(_) => 1,
        }
    }

    /// One-line JSON report for stderr.
    pub fn report(&self) -> serde_json::Value {
        match self {
            CliError::Validation { field, message } => {
                json!({"category": "validation", "field": field, "message": message})
            }
            CliError::Core(e) => {
                let mut r = json!({"category": e.category(), "message": e.to_string()});
                match e {
                    ordinal_core::Error::ParameterDomain { field, .. } => r["field"] = json!(field),
                    ordinal_core::Error::NumericalFailure { best, iterations, .. } => {
                        r["best_iterate"] = json!(best);
                        r["iterations"] = json!(iterations);
                    }
                    _ => {}
                }
                r
            }
            CliError::Failed(n) => json!({"category": "reproduction-failed", "failed": n, "message": self.to_string()}),
            CliError::Other(e) => json!({"category": "io", "message": format!("{e:#}")}),
        }
    }
}
