use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("no interest survives the audience floor of {floor} ({dropped} dropped)")]
    EmptyCatalog { floor: u64, dropped: usize },

    #[error("missing configuration: {0}")]
    MissingConfig(String),

    #[error("contradictory selectors on {predicate}: {left:?} vs {right:?}")]
    Contradiction {
        predicate: String,
        left: String,
        right: String,
    },

    /// The backend rejected a predicate value. Never retried.
    #[error("invalid targeting: unknown {predicate} value {value:?}")]
    InvalidTargeting { predicate: String, value: String },

    #[error("transport error: {0}")]
    Transport(String),

    #[error("quota exceeded")]
    QuotaExceeded { retry_after_ms: Option<u64> },

    #[error("query plan needs {requested} requests, budget is {budget}")]
    PlanTooLarge { requested: usize, budget: usize },

    #[error("fetch aborted after {completed} completed queries: {reason}")]
    FetchAborted { completed: usize, reason: String },

    #[error("both populations are empty")]
    EmptyPopulations,

    #[error("request {request_id} is not present in the snapshot")]
    NotInSnapshot { request_id: String },

    #[error("malformed snapshot at line {line}: {message}")]
    Snapshot { line: usize, message: String },

    #[error("infeasible scenario: interest {interest} would need share {required:.4} in {population}")]
    InfeasibleScenario {
        population: String,
        interest: String,
        required: f64,
    },

    #[error("no interest survives the destination filter")]
    EmptyFilter,

    #[error("all counts are zero for {0}")]
    AllZero(String),

    #[error("unknown interest id {0:?}")]
    UnknownInterest(String),

    #[error("unknown category {category:?} on axis {axis}")]
    UnknownCategory { axis: String, category: String },

    #[error("category sets differ on axis {axis}")]
    CategoryMismatch { axis: String },

    #[error("all values are identical; density bandwidth would be zero")]
    ZeroVariance,

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("design matrix is rank deficient; collinear columns: {}", columns.join(", "))]
    RankDeficient { columns: Vec<String> },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}: {message}")]
    Config { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Whether a count request that failed with this error may be retried.
    pub fn is_retryable(&self) -> bool {
        matches!(self, Error::Transport(_) | Error::QuotaExceeded { .. })
    }

    /// Stable machine-readable tag used in error documents and on the wire.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::EmptyCatalog { .. } => "empty_catalog",
            Error::MissingConfig(_) => "missing_config",
            Error::Contradiction { .. } => "contradiction",
            Error::InvalidTargeting { .. } => "invalid_targeting",
            Error::Transport(_) => "transport",
            Error::QuotaExceeded { .. } => "quota_exceeded",
            Error::PlanTooLarge { .. } => "plan_too_large",
            Error::FetchAborted { .. } => "fetch_aborted",
            Error::EmptyPopulations => "empty_populations",
            Error::NotInSnapshot { .. } => "not_in_snapshot",
            Error::Snapshot { .. } => "snapshot",
            Error::InfeasibleScenario { .. } => "infeasible_scenario",
            Error::EmptyFilter => "empty_filter",
            Error::AllZero(_) => "all_zero",
            Error::UnknownInterest(_) => "unknown_interest",
            Error::UnknownCategory { .. } => "unknown_category",
            Error::CategoryMismatch { .. } => "category_mismatch",
            Error::ZeroVariance => "zero_variance",
            Error::InsufficientData(_) => "insufficient_data",
            Error::RankDeficient { .. } => "rank_deficient",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Config { .. } => "config",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}
