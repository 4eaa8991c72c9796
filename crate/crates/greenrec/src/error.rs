use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("{path}:{line}: malformed row: {reason}")]
    MalformedRow {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("split configuration error: {0}")]
    SplitConfig(String),

    #[error("user {user} has only {n} interactions; at least 3 are required for an 80/10/10 split")]
    UserTooSmall { user: String, n: usize },

    #[error("{kind} requires explicit ratings and cannot run on implicit feedback")]
    UnsupportedCombination { kind: String },

    #[error("item index {0} is not in the catalog")]
    ItemNotInCatalog(usize),

    #[error("bundle {0} has no evaluable users (empty test sets)")]
    NoEvaluableUsers(String),

    #[error("relative runtime {0} is outside [0, 1]")]
    RelativeRuntimeOutOfRange(f64),

    #[error("missing p=1.0 baseline records for {0}")]
    MissingBaseline(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("result store was produced by a different config (hash {found} != {expected})")]
    ManifestMismatch { expected: String, found: String },
}
