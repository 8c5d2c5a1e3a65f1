use std::fmt;

use serde::{Deserialize, Serialize};

use super::{StatsError, StatsResult};

/// Threshold the survey analysis compares X² against.
pub const DEFAULT_CRITICAL_VALUE: f64 = 5.99;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    RejectH0,
    AcceptH0,
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Decision::RejectH0 => "Reject H0",
            Decision::AcceptH0 => "Accept H0",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiCell {
    pub observed: u64,
    pub expected: f64,
    pub contribution: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub per_cell: Vec<ChiCell>,
    /// (r − 1)(c − 1) for the 2 × k observed/expected layout.
    pub df: u32,
    pub critical_value: f64,
    pub decision: Decision,
}

/// Strict: a statistic equal to the critical value is not rejected.
pub fn decide(statistic: f64, critical_value: f64) -> Decision {
    if statistic > critical_value {
        Decision::RejectH0
    } else {
        Decision::AcceptH0
    }
}

/// `chi_square_with` at [`DEFAULT_CRITICAL_VALUE`].
pub fn chi_square(observed: &[u64], expected: &[f64]) -> StatsResult<ChiSquareResult> {
    chi_square_with(observed, expected, DEFAULT_CRITICAL_VALUE)
}

/// X² = Σ (f_o − f_e)² / f_e with per-cell contributions and the decision
/// against `critical_value`.
pub fn chi_square_with(observed: &[u64], expected: &[f64], critical_value: f64) -> StatsResult<ChiSquareResult> {
    if observed.len() != expected.len() {
        return Err(StatsError::LengthMismatch {
            observed: observed.len(),
            expected: expected.len(),
        });
    }
    if observed.len() < 2 {
        return Err(StatsError::TooFewCategories);
    }
    if expected.iter().any(|e| !e.is_finite() || *e <= 0.0) {
        return Err(StatsError::NonpositiveExpected);
    }
    if !critical_value.is_finite() || critical_value <= 0.0 {
        return Err(StatsError::NonpositiveCritical);
    }
    let per_cell: Vec<ChiCell> = observed
        .iter()
        .zip(expected)
        .map(|(&o, &e)| {
            let d = o as f64 - e;
            ChiCell {
                observed: o,
                expected: e,
                contribution: d * d / e,
            }
        })
        .collect();
    let statistic: f64 = per_cell.iter().map(|c| c.contribution).sum();
    Ok(ChiSquareResult {
        statistic,
        df: u32::try_from(observed.len() - 1).unwrap_or(u32::MAX),
        critical_value,
        decision: decide(statistic, critical_value),
        per_cell,
    })
}
