use thiserror::Error;

/// Errors raised across the estimation stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("singular likelihood: survival probability {q} is on the boundary of [0, 1]")]
    SingularLikelihood { q: f64 },

    #[error("sampling error: acceptance rate {rate:.2e} fell below {min:.0e}")]
    Sampling { rate: f64, min: f64 },

    #[error(
        "degenerate posterior at datum {step}: all particle weights vanished \
         (min ESS {min_ess:.3}, {resample_count} resamples so far)"
    )]
    DegeneratePosterior {
        step: usize,
        min_ess: f64,
        resample_count: usize,
    },

    #[error("support collision: {attempts} proposals rejected while resampling one particle")]
    SupportCollision { attempts: usize },

    #[error("underdetermined fit: {distinct} distinct sequence lengths, need at least {needed}")]
    Underdetermined { distinct: usize, needed: usize },

    #[error("ratio undefined: fitted reference decay is zero")]
    RatioUndefined,

    #[error("divergence: {0}")]
    Divergence(String),

    #[error("channel construction failed: {0}")]
    Construction(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Short machine-readable category, used by the CLI.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::SingularLikelihood { .. } => "singular_likelihood",
            Error::Sampling { .. } => "sampling",
            Error::DegeneratePosterior { .. } => "degenerate_posterior",
            Error::SupportCollision { .. } => "support_collision",
            Error::Underdetermined { .. } => "underdetermined",
            Error::RatioUndefined => "ratio_undefined",
            Error::Divergence(_) => "divergence",
            Error::Construction(_) => "construction",
            Error::Config(_) => "config",
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
            Error::Csv(_) => "io",
        }
    }

    /// Process exit code for the category.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Parse(_) => 2,
            Error::Io(_) | Error::Csv(_) => 3,
            Error::Domain(_) => 4,
            _ => 5,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
