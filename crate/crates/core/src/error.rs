use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("duration must be strictly positive, got {0}")]
    NonPositiveDuration(f64),

    #[error("fractional-polynomial power {0} is not in the candidate set")]
    UnknownPower(f64),

    #[error("information matrix is numerically singular")]
    SingularInformation,

    #[error("no candidate model converged")]
    NoConvergedFit,

    #[error("dataset has {found} distinct durations, at least {needed} are required")]
    Unidentifiable { found: usize, needed: usize },

    #[error("design matrix has {rows} rows but outcome has {outcomes} entries")]
    DimensionMismatch { rows: usize, outcomes: usize },

    #[error("unknown scenario id {0} (expected 1..=16)")]
    UnknownScenario(u32),

    #[error("invalid trial design: {0}")]
    InvalidDesign(String),

    #[error("invalid estimation target: {0}")]
    InvalidTarget(String),

    #[error("method {method} does not support target {target}")]
    UnsupportedTarget { method: String, target: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("all bootstrap replicates failed to fit")]
    BootstrapExhausted,

    #[error("every replicate in the cell failed")]
    AllReplicatesFailed,

    #[error("row {row}: {message}")]
    MalformedRow { row: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
