use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid value for `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("degenerate selection: {0}")]
    Degenerate(String),

    #[error("correlation structure is not positive semidefinite (smallest eigenvalue {min_eigenvalue:.3e} in the {block} block)")]
    NotPsd { block: &'static str, min_eigenvalue: f64 },

    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },

    #[error("{path}: missing required column `{column}`")]
    MissingColumn { path: String, column: String },

    #[error("missing input: {0}")]
    MissingInput(String),

    #[error("alleles cannot be harmonized for {} SNP(s): {}", .0.len(), .0.join(", "))]
    AlleleMismatch(Vec<String>),

    #[error("covariate design is rank deficient; collinear columns: {}", .0.join(", "))]
    RankDeficient(Vec<String>),

    #[error("jackknife estimator failed when leaving out block {block}: {source}")]
    Jackknife {
        block: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("requested {requested} genotype cells exceeds the memory budget of {budget}")]
    Budget { requested: u64, budget: u64 },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name: name.into(), reason: reason.into() }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// True for failures caused by the numbers themselves (degenerate
    /// selection, non-PSD parameters, failed fits) rather than by malformed
    /// or missing inputs.
    pub fn is_numeric(&self) -> bool {
        match self {
            Error::Degenerate(_)
            | Error::NotPsd { .. }
            | Error::RankDeficient(_)
            | Error::Numeric(_) => true,
            Error::Jackknife { source, .. } => source.is_numeric(),
            _ => false,
        }
    }

    /// Short machine-readable tag used in CLI error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter { .. } => "invalid_parameter",
            Error::Degenerate(_) => "degenerate_selection",
            Error::NotPsd { .. } => "not_psd",
            Error::Parse { .. } => "parse",
            Error::MissingColumn { .. } => "missing_column",
            Error::MissingInput(_) => "missing_input",
            Error::AlleleMismatch(_) => "allele_mismatch",
            Error::RankDeficient(_) => "rank_deficient",
            Error::Jackknife { .. } => "jackknife",
            Error::Budget { .. } => "budget",
            Error::Numeric(_) => "numeric",
            Error::Io { .. } => "io",
        }
    }
}
