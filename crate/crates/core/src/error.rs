use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid subtraction: minuend is smaller than subtrahend")]
    InvalidSubtraction,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("resource guard: {what} would need {requested} entries (cap {cap})")]
    ResourceLimit {
        what: &'static str,
        requested: u128,
        cap: usize,
    },

    #[error("point {0} is not a member of the sequence")]
    NotInFamily(String),

    #[error("ill-conditioned Pick problem: nodes {0} and {1} (nearly) coincide")]
    IllConditioned(usize, usize),

    #[error("Pick bisection failed to bracket the minimal norm: {0}")]
    PickFailure(String),

    #[error("certificate rejected: first failing point {index} has margin {margin:e}")]
    CertificateRejected { index: usize, margin: f64 },

    #[error("quadrature did not converge: estimated error {error:e} after {panels} panels")]
    QuadratureNonConvergence { error: f64, panels: usize },

    #[error("linear program: {0}")]
    Lp(String),

    #[error("csv row {row}: {message}")]
    Csv { row: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
