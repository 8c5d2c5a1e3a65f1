use serde::{Deserialize, Serialize};

use super::{StatsError, StatsResult};

/// Observed counts per category, in presentation order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrequencyTable {
    labels: Vec<String>,
    observed: Vec<u64>,
}

impl FrequencyTable {
    pub fn new(labels: Vec<String>, observed: Vec<u64>) -> StatsResult<Self> {
        if labels.len() != observed.len() {
            return Err(StatsError::LengthMismatch {
                observed: observed.len(),
                expected: labels.len(),
            });
        }
        Ok(Self { labels, observed })
    }

    /// Convenience constructor from `(label, count)` pairs.
    pub fn from_pairs<S: Into<String>>(pairs: impl IntoIterator<Item = (S, u64)>) -> Self {
        let (labels, observed) = pairs.into_iter().map(|(l, c)| (l.into(), c)).unzip();
        Self { labels, observed }
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn observed(&self) -> &[u64] {
        &self.observed
    }

    pub fn total(&self) -> u128 {
        self.observed.iter().map(|&c| u128::from(c)).sum()
    }

    pub fn len(&self) -> usize {
        self.observed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observed.is_empty()
    }
}

/// `100 * observed / total` per category, rounded half-up to one decimal.
///
/// Rounding is done on exact integers, so values such as 2.5 or 82.5 are
/// never disturbed by binary floating point.
pub fn percentages(table: &FrequencyTable) -> StatsResult<Vec<f64>> {
    let total = table.total();
    if total == 0 {
        return Err(StatsError::EmptyTable);
    }
    Ok(table
        .observed
        .iter()
        .map(|&o| {
            let tenths = (2000 * u128::from(o) + total) / (2 * total);
            tenths as f64 / 10.0
        })
        .collect())
}
