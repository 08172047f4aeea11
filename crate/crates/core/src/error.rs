use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch in {context}: expected {expected:?}, found {found:?}")]
    Shape { context: &'static str, expected: (usize, usize), found: (usize, usize) },

    #[error("invalid label value {value} at ({row}, {col})")]
    InvalidLabel { row: usize, col: usize, value: f64 },

    #[error("row {row} has no observed feature in any view")]
    UncoveredRow { row: usize },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("feature removal rate {rate} cannot keep every sample in at least one view (view {view})")]
    CoverageUnsatisfiable { rate: f64, view: usize },

    #[error("split with fraction {fraction} of {n} rows leaves an empty side")]
    EmptySplit { fraction: f64, n: usize },

    #[error("label offset bisection did not reach positive rate {target} (got {achieved})")]
    BisectionFailed { target: f64, achieved: f64 },

    #[error("kernel needs at least 2 rows, got {0}")]
    TooFewRows(usize),

    #[error("evaluation mask selects no entries")]
    EmptyEvalMask,

    #[error("no label column has a held-out positive")]
    NoQualifyingColumn,
}
