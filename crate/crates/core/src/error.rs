use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("ill-conditioned {what}: condition number {cond:e}")]
    IllConditioned { what: String, cond: f64 },

    #[error("eigenvalue splitting failed: {0}")]
    EigenSplit(String),

    #[error("eigenvalue iteration did not converge")]
    EigenNoConvergence,

    #[error("overflow in matrix exponential (norm {0:e})")]
    ExpmOverflow(f64),

    #[error("invalid model: {}", .0.join("; "))]
    InvalidModel(Vec<String>),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no convergence: {0}")]
    NoConvergence(String),

    #[error("config parse error: {0}")]
    ConfigParse(String),
}

impl Error {
    /// True for errors caused by bad input rather than numerical trouble.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidModel(_) | Error::InvalidArgument(_) | Error::ConfigParse(_) | Error::Shape(_)
        )
    }

    /// Short machine-readable tag.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Shape(_) => "shape_mismatch",
            Error::Singular(_) => "singular_matrix",
            Error::IllConditioned { .. } => "ill_conditioned",
            Error::EigenSplit(_) => "eigen_split",
            Error::EigenNoConvergence => "eigen_no_convergence",
            Error::ExpmOverflow(_) => "expm_overflow",
            Error::InvalidModel(_) => "invalid_model",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::NoConvergence(_) => "no_convergence",
            Error::ConfigParse(_) => "config_parse",
        }
    }
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
