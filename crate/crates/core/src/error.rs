use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("eigenvalue {value} has positive real part (tolerance {tolerance:e})")]
    PositiveRealPart { value: String, tolerance: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("value {x} outside interpolation range [{lo}, {hi}]")]
    OutOfRange { x: f64, lo: f64, hi: f64 },

    #[error("alpha too large: the alpha shape boundary is disconnected ({0})")]
    AlphaTooLarge(String),

    #[error("degree {degree} exceeds the monomial expansion guard {max}")]
    DegreeTooLarge { degree: usize, max: usize },

    #[error("construction failed: {0}")]
    Construction(String),

    #[error("integration diverged at step {step} (t = {t})")]
    Diverged { step: usize, t: f64 },

    #[error("tableau format error: {0}")]
    Format(String),
}
