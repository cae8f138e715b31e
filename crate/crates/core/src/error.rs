//! Error type shared by every module in the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong between loading a CSV and printing a report.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// Input file could not be read or parsed at all.
    #[error("failed to read {path}: {detail}")]
    Io { path: String, detail: String },

    /// A cell failed to parse; rows are 1-based data rows (header excluded).
    #[error("parse error at data row {row}, column {column}: {detail}")]
    Parse {
        row: usize,
        column: String,
        detail: String,
    },

    /// Prices must be strictly positive before taking logs.
    #[error("non-positive price {value} at data row {row}, column {column}")]
    NonPositivePrice {
        row: usize,
        column: String,
        value: f64,
    },

    /// Dates must be strictly increasing down the file.
    #[error("dates not strictly increasing at data row {row}")]
    NonIncreasingDates { row: usize },

    /// Input was empty or shorter than the operation can use.
    #[error("{0}")]
    TooShort(String),

    /// A gap at the first or last observation cannot be interpolated.
    #[error("series '{series}' has a gap at its {end} boundary; trim before interpolating")]
    BoundaryGap { series: String, end: &'static str },

    /// Two series that must share a calendar do not.
    #[error("series are not aligned: {0}")]
    Misaligned(String),

    /// A fraction, index or tuning knob is outside its documented range.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Regressor matrix is numerically singular (e.g. a constant series).
    #[error("singular regressor matrix: {0}")]
    SingularRegressor(String),

    /// Eigen decomposition produced non-finite or out-of-range values.
    #[error("eigen computation failed: {0}")]
    EigenFailure(String),

    /// The dominant cointegration vector has a vanishing first component,
    /// so no hedge ratio of the form (1, b) exists.
    #[error("degenerate cointegration vector: first component is zero")]
    DegenerateVector,

    /// Parameters violate a model constraint (documented on the operation).
    #[error("constraint violated: {0}")]
    ConstraintViolation(String),

    /// The filter hit a zero or non-finite predictive variance.
    #[error("numerical degeneracy in filter: {0}")]
    NumericalDegeneracy(String),

    /// The optimizer never saw a finite objective value.
    #[error("estimation failed: {0}")]
    EstimationFailed(String),

    /// No threshold candidate produced a single trade.
    #[error("no candidate threshold produced any trades")]
    NoTrades,

    /// Simulation spec describes an unbuildable system.
    #[error("degenerate simulation spec: {0}")]
    DegenerateSpec(String),

    /// A pair requested by name is not present in the data or scan output.
    #[error("unknown pair: {0}")]
    UnknownPair(String),
}
