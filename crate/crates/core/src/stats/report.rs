use serde_json::{json, Value};

use super::{percentages, ChiSquareResult, FrequencyTable, LikertCounts, LikertSummary, StatsResult, SCALE_LABELS};

/// A rendered analysis: a plain-text table and one JSON document.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub text: String,
    pub json: Value,
}

/// Up to four decimals, trailing zeros dropped: `36.1`, `18.05`, `0.7403`.
pub fn fmt_num(x: f64) -> String {
    let s = format!("{x:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.to_owned()
    }
}

fn label_width<'a>(labels: impl Iterator<Item = &'a str>, min: usize) -> usize {
    labels.map(|l| l.chars().count()).max().unwrap_or(0).max(min)
}

pub fn frequency_report(table: &FrequencyTable) -> StatsResult<Report> {
    let pct = percentages(table)?;
    let w = label_width(table.labels().iter().map(String::as_str), "Category".len());
    let mut text = format!("{:<w$}  {:>9}  {:>10}\n", "Category", "Frequency", "Percentage");
    for ((label, obs), p) in table.labels().iter().zip(table.observed()).zip(&pct) {
        text += &format!("{label:<w$}  {obs:>9}  {p:>10.1}\n");
    }
    let pct_total: f64 = pct.iter().sum();
    text += &format!("{:<w$}  {:>9}  {:>10.1}\n", "Total", table.total(), pct_total);
    let json = json!({
        "analysis": "frequency",
        "labels": table.labels(),
        "observed": table.observed(),
        "total": table.total() as u64,
        "percentages": pct,
    });
    Ok(Report { text, json })
}

pub fn likert_report(counts: &LikertCounts, benchmark: f64) -> StatsResult<Report> {
    let s = LikertSummary::compute(counts, benchmark)?;
    let w = label_width(SCALE_LABELS.iter().copied(), 0);
    let mut text = format!("{:<5}  {:<w$}  {:>9}  {:>9}\n", "Score", "Response", "f", "fx");
    for x in (1..=5u8).rev() {
        let f = counts.count(x);
        let label = SCALE_LABELS[usize::from(x) - 1];
        text += &format!("{x:<5}  {label:<w$}  {f:>9}  {:>9}\n", u128::from(f) * u128::from(x));
    }
    text += &format!("n = {}\n", s.n);
    text += &format!("mean = {} (reported {:.2})\n", fmt_num(s.mean), s.mean_rounded);
    match s.sd {
        Some(sd) => text += &format!("standard deviation = {}\n", fmt_num(sd)),
        None => text += "standard deviation = n/a (fewer than 2 responses)\n",
    }
    text += &format!(
        "agreed (mean > {}): {}\n",
        fmt_num(benchmark),
        if s.agreed { "yes" } else { "no" }
    );
    let json = json!({
        "analysis": "likert",
        "counts": s.counts,
        "n": s.n as u64,
        "mean": s.mean,
        "mean_rounded": s.mean_rounded,
        "sd": s.sd,
        "benchmark": s.benchmark,
        "agreed": s.agreed,
    });
    Ok(Report { text, json })
}

pub fn chi_report(labels: &[String], result: &ChiSquareResult) -> Report {
    let w = label_width(labels.iter().map(String::as_str), "Responses".len());
    let mut text = format!(
        "{:<w$}  {:>9}  {:>9}  {:>11}  {:>13}  {:>17}\n",
        "Responses", "f_o", "f_e", "(f_o - f_e)", "(f_o - f_e)^2", "(f_o - f_e)^2/f_e"
    );
    for (label, c) in labels.iter().zip(&result.per_cell) {
        let d = c.observed as f64 - c.expected;
        text += &format!(
            "{label:<w$}  {:>9}  {:>9}  {:>11}  {:>13}  {:>17}\n",
            c.observed,
            fmt_num(c.expected),
            fmt_num(d),
            fmt_num(d * d),
            fmt_num(c.contribution)
        );
    }
    let sum = result
        .per_cell
        .iter()
        .map(|c| fmt_num(c.contribution))
        .collect::<Vec<_>>()
        .join(" + ");
    let cmp = if result.statistic > result.critical_value {
        ">"
    } else {
        "<="
    };
    text += &format!("X² = {sum} = {}\n", fmt_num(result.statistic));
    text += &format!("X² = {}\n", fmt_num(result.statistic));
    text += &format!("df = {}\n", result.df);
    text += &format!("critical value = {}\n", fmt_num(result.critical_value));
    text += &format!(
        "decision: {} ({} {cmp} {})\n",
        result.decision,
        fmt_num(result.statistic),
        fmt_num(result.critical_value)
    );
    let json = json!({
        "analysis": "chi_square",
        "labels": labels,
        "statistic": result.statistic,
        "per_cell": result.per_cell,
        "df": result.df,
        "critical_value": result.critical_value,
        "decision": result.decision,
    });
    Report { text, json }
}
