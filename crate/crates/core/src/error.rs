use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("config line {line}: {message}")]
    ConfigSyntax { line: usize, message: String },

    #[error("unknown config key `{0}`")]
    UnknownKey(String),

    #[error("unknown frame kind `{0}`")]
    UnknownFrameKind(String),

    #[error("distance must be positive, got {0} m")]
    NonPositiveDistance(f64),

    #[error("link budget {budget_db:.2} dB is below the reference loss {reference_db:.2} dB")]
    ZeroRange { budget_db: f64, reference_db: f64 },

    #[error("only {placed} of {wanted} STAs associated after {attempts} placement attempts")]
    PlacementFailed { placed: usize, wanted: usize, attempts: usize },

    #[error("empty BSS")]
    EmptyBss,

    #[error("{0}")]
    Model(String),

    #[error("event scheduled at {at} us, before current time {now} us")]
    ScheduleInPast { at: u64, now: u64 },

    #[error("no results to summarize")]
    EmptyResults,

    #[error("sweep point {point}: {source}")]
    SweepPoint {
        point: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("plot: {0}")]
    Plot(String),
}

impl Error {
    /// Stable short identifier of the error variant.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidConfig(_) => "invalid-config",
            Error::ConfigSyntax { .. } => "config-syntax",
            Error::UnknownKey(_) => "unknown-key",
            Error::UnknownFrameKind(_) => "unknown-frame-kind",
            Error::NonPositiveDistance(_) => "non-positive-distance",
            Error::ZeroRange { .. } => "zero-range",
            Error::PlacementFailed { .. } => "placement-failed",
            Error::EmptyBss => "empty-bss",
            Error::Model(_) => "model",
            Error::ScheduleInPast { .. } => "schedule-in-past",
            Error::EmptyResults => "empty-results",
            Error::SweepPoint { source, .. } => source.code(),
            Error::Io { .. } => "io",
            Error::Plot(_) => "plot",
        }
    }
}
