//! Survey statistics: frequency/percentage tables, Likert mean and sample
//! standard deviation against an agreement benchmark, and the chi-square
//! goodness-of-fit statistic with a fixed critical value.
//!
//! Everything here is a pure function over its inputs.

mod chi;
mod ingest;
mod likert;
mod report;
mod table;

pub use chi::{chi_square, chi_square_with, decide, ChiCell, ChiSquareResult, Decision, DEFAULT_CRITICAL_VALUE};
pub use ingest::{parse_expected_csv, parse_frequency_csv, parse_likert_csv};
pub use likert::{
    agreed_flag, likert_mean, likert_sd, round_mean, LikertCounts, LikertSummary, AGREED_MEAN, SCALE_LABELS,
};
pub use report::{chi_report, fmt_num, frequency_report, likert_report, Report};
pub use table::{percentages, FrequencyTable};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StatsError {
    #[error("table total is zero")]
    EmptyTable,
    #[error("no Likert responses")]
    EmptyCounts,
    #[error("standard deviation needs at least two responses")]
    InsufficientData,
    #[error("{observed} observed values but {expected} expected values")]
    LengthMismatch { observed: usize, expected: usize },
    #[error("expected frequencies must be positive and finite")]
    NonpositiveExpected,
    #[error("critical value must be positive and finite")]
    NonpositiveCritical,
    #[error("at least two categories are required")]
    TooFewCategories,
    #[error("Likert score {0} outside 1..=5")]
    InvalidScore(i64),
    #[error("line {line}: {reason}")]
    Csv { line: u64, reason: String },
}

pub type StatsResult<T> = std::result::Result<T, StatsError>;
