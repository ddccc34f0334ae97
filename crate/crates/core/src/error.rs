use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid continued fraction: {0}")]
    InvalidCf(String),

    #[error("continued fraction has no coefficient a_{needed}")]
    CfExhausted { needed: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("coupling constant {lambda} outside the valid range ({requirement})")]
    Domain { lambda: f64, requirement: &'static str },

    #[error("floor(n·β) not separable from an integer: coefficient stream exhausted at a_{needed}")]
    PrecisionUnreachable { needed: usize },

    #[error("trace map lost precision at level {level} (Fricke residual {residual:e}, {bits} bits)")]
    PrecisionLoss { level: usize, residual: f64, bits: u32 },

    #[error("band count mismatch for {what}: found {found}, expected {expected}")]
    CountMismatch { what: String, found: usize, expected: usize },

    #[error("band classification failed at level {level}: {detail}")]
    Classification { level: usize, detail: String },

    #[error("{0} is beyond the supported size")]
    TooLarge(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors raised by the numerics (as opposed to bad input).
    pub fn is_computational(&self) -> bool {
        matches!(
            self,
            Error::PrecisionUnreachable { .. }
                | Error::PrecisionLoss { .. }
                | Error::CountMismatch { .. }
                | Error::Classification { .. }
                | Error::TooLarge(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
