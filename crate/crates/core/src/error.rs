use thiserror::Error;

use crate::timeseries::MonthKey;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    // ingestion
    #[error("stratum {stratum}: missing month {month}")]
    MissingMonth { stratum: String, month: MonthKey },
    #[error("stratum {stratum}: negative deaths in {month}")]
    NegativeDeaths { stratum: String, month: MonthKey },
    #[error("stratum {stratum}: duplicate month {month}")]
    DuplicateMonth { stratum: String, month: MonthKey },
    #[error("malformed row {line}: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("stratum {stratum}: no population for year {year}")]
    MissingPopulationYear { stratum: String, year: i32 },
    #[error("stratum {stratum}: non-positive population {value} in year {year}")]
    NonPositivePopulation { stratum: String, year: i32, value: f64 },
    #[error("stratum {stratum}: months {start} + {len} outside the series")]
    OutOfRange {
        stratum: String,
        start: MonthKey,
        len: usize,
    },
    #[error("invalid series: {0}")]
    InvalidSeries(String),

    // basis and design
    #[error("degenerate spline domain: {0}")]
    DegenerateDomain(String),
    #[error("difference order {order} needs more than {order} coefficients, got {columns}")]
    OrderTooLarge { order: usize, columns: usize },
    #[error("series of {len} months is too short, need at least {min}")]
    ShortSeries { len: usize, min: usize },
    #[error("exposure has {got} values, expected {expected}")]
    ExposureLengthMismatch { got: usize, expected: usize },
    #[error("invalid penalty: {0}")]
    InvalidPenalty(String),

    // solver
    #[error("penalized normal equations are singular")]
    SingularSystem,
    #[error("IWLS did not converge in {iterations} iterations")]
    NonConvergence { iterations: usize },
    #[error("IWLS diverged: non-finite linear predictor at iteration {iteration}")]
    Diverged { iteration: usize },
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("fitted mean must be positive, got {0}")]
    NonPositiveMu(f64),
    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    // forecast, evaluation, excess
    #[error("operation requires an {expected} fit, got {got}")]
    WrongModelKind { expected: String, got: String },
    #[error("observed value is zero at position {0}; MAPE undefined")]
    ZeroObserved(usize),
    #[error("empty input: {0}")]
    Empty(String),
    #[error("month {0} is not in the forecast horizon")]
    MonthNotInHorizon(MonthKey),
    #[error("periods {0} and {1} overlap")]
    OverlappingPeriods(String, String),
    #[error("invalid period {label}: {reason}")]
    InvalidPeriod { label: String, reason: String },
}

impl Error {
    /// Solver failures as opposed to input validation failures.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SingularSystem | Error::NonConvergence { .. } | Error::Diverged { .. }
        )
    }
}
