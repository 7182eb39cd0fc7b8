use alloc::string::String;

pub type Result<T, E = NmfError> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NmfError {
    #[error("{op}: shape mismatch, expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        op: &'static str,
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("data length {len} does not match {rows}x{cols}")]
    DataLength { rows: usize, cols: usize, len: usize },
    #[error("entry ({row}, {col}) = {value} is negative or not finite")]
    InvalidEntry { row: usize, col: usize, value: f64 },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("initializer entry ({row}, {col}) must be strictly positive")]
    NonPositiveInitializer { row: usize, col: usize },
    #[error("non-finite value in {what} at iteration {iter}{}", row.map(|r| alloc::format!(", row {r}")).unwrap_or_default())]
    NonFinite {
        what: &'static str,
        iter: usize,
        row: Option<usize>,
    },
    #[error("row {row} of the initial basis has zero l1 norm")]
    ZeroNormRow { row: usize },
    #[error("could not draw a full-rank {what} after {retries} attempts")]
    RankDeficient { what: &'static str, retries: usize },
    #[error("columns {a} and {b} are separated by {degrees:.3} degrees (minimum {min_degrees})")]
    AngleSeparation {
        a: usize,
        b: usize,
        degrees: f64,
        min_degrees: f64,
    },
    #[error("reference signal has zero energy")]
    ZeroSignal,
}
