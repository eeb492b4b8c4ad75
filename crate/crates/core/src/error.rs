use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("syntax error at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: String },

    #[error("unknown kernel family `{0}` (expected one of tc, gaussian, rank_one, diagonal, matrix)")]
    UnknownFamily(String),

    #[error("unknown key `{0}`")]
    UnknownKey(String),

    #[error("parameter `{name}` = {value} out of range: {reason}")]
    ParamOutOfRange {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("matrix is not symmetric: entry ({i},{j}) differs from ({j},{i})")]
    NonSymmetric { i: usize, j: usize },

    #[error("matrix is not square: row {row} has {len} entries, expected {expected}")]
    NonSquare {
        row: usize,
        len: usize,
        expected: usize,
    },

    #[error("matrix contains a non-finite entry at ({i},{j})")]
    NonFinite { i: usize, j: usize },

    #[error("family `{family}` requires {required} time mode")]
    ModeConflict {
        family: &'static str,
        required: &'static str,
    },

    #[error("size mismatch: expected {expected}, got {got}")]
    SizeMismatch { expected: usize, got: usize },

    #[error("length mismatch: operator has {expected} nodes, vector has {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("exhaustive enumeration refused: n = {n} exceeds the limit of {limit} nodes")]
    EnumerationLimit { n: usize, limit: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid horizons: {0}")]
    InvalidHorizons(String),

    #[error("classification needs at least {needed} horizons, got {got}")]
    TooFewHorizons { needed: usize, got: usize },

    #[error("internal invariant violated: {0}")]
    Internal(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed test-function file: {0}")]
    Format(String),
}

impl Error {
    /// True for failures raised by a computational guard or a violated
    /// precondition of an algorithm, as opposed to malformed input.
    pub fn is_guard(&self) -> bool {
        matches!(
            self,
            Error::EnumerationLimit { .. } | Error::Precondition(_) | Error::Internal(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
