use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{StatsError, StatsResult};

/// Labels of scores 1 through 5.
pub const SCALE_LABELS: [&str; 5] = ["Strongly Disagree", "Disagree", "Don't Know", "Agree", "Strongly Agree"];

/// Benchmark a question's mean must strictly exceed to count as agreed.
pub const AGREED_MEAN: f64 = 3.00;

/// Response counts for one five-point question.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LikertCounts {
    counts: [u64; 5],
}

impl LikertCounts {
    /// `counts[0]` is the number of 1-point answers, `counts[4]` of 5-point.
    pub fn new(counts: [u64; 5]) -> Self {
        Self { counts }
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (i64, u64)>) -> StatsResult<Self> {
        let mut out = Self::default();
        for (score, count) in pairs {
            let idx = usize::try_from(score - 1)
                .ok()
                .filter(|i| *i < 5)
                .ok_or(StatsError::InvalidScore(score))?;
            out.counts[idx] += count;
        }
        Ok(out)
    }

    /// Count for `score` in 1..=5; zero otherwise.
    pub fn count(&self, score: u8) -> u64 {
        usize::from(score)
            .checked_sub(1)
            .and_then(|i| self.counts.get(i))
            .copied()
            .unwrap_or(0)
    }

    pub fn counts(&self) -> [u64; 5] {
        self.counts
    }

    /// n = Σf
    pub fn total(&self) -> u128 {
        self.counts.iter().map(|&c| u128::from(c)).sum()
    }

    /// Σfx
    pub fn sum_fx(&self) -> u128 {
        self.weighted(|x| x)
    }

    /// Σfx²
    pub fn sum_fx2(&self) -> u128 {
        self.weighted(|x| x * x)
    }

    fn weighted(&self, g: impl Fn(u128) -> u128) -> u128 {
        self.counts
            .iter()
            .zip(1u128..)
            .map(|(&f, x)| u128::from(f) * g(x))
            .sum()
    }
}

impl Serialize for LikertCounts {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let map: BTreeMap<String, u64> = (1..=5u8).map(|x| (x.to_string(), self.count(x))).collect();
        map.serialize(s)
    }
}

impl<'de> Deserialize<'de> for LikertCounts {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let map = BTreeMap::<String, u64>::deserialize(d)?;
        let pairs = map
            .into_iter()
            .map(|(k, v)| k.parse::<i64>().map(|k| (k, v)))
            .collect::<Result<Vec<_>, _>>()
            .map_err(serde::de::Error::custom)?;
        LikertCounts::from_pairs(pairs).map_err(serde::de::Error::custom)
    }
}

/// Σfx / Σf, unrounded.
pub fn likert_mean(counts: &LikertCounts) -> StatsResult<f64> {
    let n = counts.total();
    if n == 0 {
        return Err(StatsError::EmptyCounts);
    }
    Ok(counts.sum_fx() as f64 / n as f64)
}

/// Sample standard deviation, `sqrt((Σfx² − (Σfx)²/n) / (n − 1))`.
///
/// The numerator is formed as `(nΣfx² − (Σfx)²) / n` over exact integers,
/// which avoids the cancellation the textbook form suffers in floating
/// point.
pub fn likert_sd(counts: &LikertCounts) -> StatsResult<f64> {
    let n = counts.total();
    if n < 2 {
        return Err(StatsError::InsufficientData);
    }
    let s1 = counts.sum_fx();
    let scaled_ss = n * counts.sum_fx2() - s1 * s1;
    let variance = scaled_ss as f64 / (n as f64 * (n - 1) as f64);
    Ok(variance.sqrt())
}

/// Mean rounded half-up to two decimals, computed exactly from the counts.
pub fn round_mean(counts: &LikertCounts) -> StatsResult<f64> {
    let n = counts.total();
    if n == 0 {
        return Err(StatsError::EmptyCounts);
    }
    let hundredths = (200 * counts.sum_fx() + n) / (2 * n);
    Ok(hundredths as f64 / 100.0)
}

/// True iff `mean > benchmark`.
pub fn agreed_flag(mean: f64, benchmark: f64) -> bool {
    mean > benchmark
}

/// Everything reported for one question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LikertSummary {
    pub counts: LikertCounts,
    pub n: u128,
    pub mean: f64,
    pub mean_rounded: f64,
    pub sd: Option<f64>,
    pub benchmark: f64,
    pub agreed: bool,
}

impl LikertSummary {
    pub fn compute(counts: &LikertCounts, benchmark: f64) -> StatsResult<Self> {
        let mean = likert_mean(counts)?;
        Ok(Self {
            counts: *counts,
            n: counts.total(),
            mean,
            mean_rounded: round_mean(counts)?,
            sd: likert_sd(counts).ok(),
            benchmark,
            agreed: agreed_flag(mean, benchmark),
        })
    }
}
