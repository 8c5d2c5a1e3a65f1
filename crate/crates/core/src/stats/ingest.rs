//! CSV inputs. A frequency file is a header row of category labels and one
//! row of counts; a Likert file has the header `score,count` and one row per
//! score; an expected-frequency file is shaped like a frequency file but
//! accepts positive reals.

use super::{FrequencyTable, LikertCounts, StatsError, StatsResult};

fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes())
}

fn csv_error(e: csv::Error) -> StatsError {
    let line = e.position().map_or(0, |p| p.line());
    StatsError::Csv {
        line,
        reason: match e.kind() {
            csv::ErrorKind::UnequalLengths { expected_len, len, .. } => {
                format!("expected {expected_len} fields, found {len}")
            }
            csv::ErrorKind::Utf8 { .. } => "invalid UTF-8".into(),
            _ => e.to_string(),
        },
    }
}

fn bad(line: u64, reason: impl Into<String>) -> StatsError {
    StatsError::Csv {
        line,
        reason: reason.into(),
    }
}

/// Parses a nonnegative whole count. `3` and `3.0` are accepted; `3.5` is not.
fn parse_count(field: &str, line: u64) -> StatsResult<u64> {
    if let Ok(v) = field.parse::<u64>() {
        return Ok(v);
    }
    match field.parse::<f64>() {
        Ok(v) if v.is_finite() && v >= 0.0 && v.fract() == 0.0 && v <= 9_007_199_254_740_992.0 => Ok(v as u64),
        _ => Err(bad(line, format!("{field:?} is not a nonnegative whole count"))),
    }
}

fn header_labels(rdr: &mut csv::Reader<&[u8]>) -> StatsResult<Vec<String>> {
    let headers = rdr.headers().map_err(csv_error)?.clone();
    let labels: Vec<String> = headers.iter().map(str::to_owned).collect();
    if labels.iter().all(String::is_empty) {
        return Err(bad(1, "missing header row of category labels"));
    }
    if labels.iter().any(String::is_empty) {
        return Err(bad(1, "empty category label"));
    }
    Ok(labels)
}

/// Reads exactly one data row after the header.
fn single_row(rdr: &mut csv::Reader<&[u8]>) -> StatsResult<(u64, csv::StringRecord)> {
    let mut records = rdr.records();
    let first = records
        .next()
        .ok_or_else(|| bad(2, "missing row of values"))?
        .map_err(csv_error)?;
    let line = first.position().map_or(2, |p| p.line());
    if let Some(extra) = records.next() {
        let extra = extra.map_err(csv_error)?;
        return Err(bad(
            extra.position().map_or(3, |p| p.line()),
            "only one row of values is allowed",
        ));
    }
    Ok((line, first))
}

pub fn parse_frequency_csv(text: &str) -> StatsResult<FrequencyTable> {
    let mut rdr = reader(text);
    let labels = header_labels(&mut rdr)?;
    let (line, row) = single_row(&mut rdr)?;
    let observed = row
        .iter()
        .map(|f| parse_count(f, line))
        .collect::<StatsResult<Vec<_>>>()?;
    FrequencyTable::new(labels, observed)
}

/// Returns the labels and the expected frequencies.
pub fn parse_expected_csv(text: &str) -> StatsResult<(Vec<String>, Vec<f64>)> {
    let mut rdr = reader(text);
    let labels = header_labels(&mut rdr)?;
    let (line, row) = single_row(&mut rdr)?;
    let expected = row
        .iter()
        .map(|f| match f.parse::<f64>() {
            Ok(v) if v.is_finite() && v > 0.0 => Ok(v),
            _ => Err(bad(line, format!("{f:?} is not a positive number"))),
        })
        .collect::<StatsResult<Vec<_>>>()?;
    Ok((labels, expected))
}

pub fn parse_likert_csv(text: &str) -> StatsResult<LikertCounts> {
    let mut rdr = reader(text);
    let headers = rdr.headers().map_err(csv_error)?.clone();
    let names: Vec<String> = headers.iter().map(str::to_ascii_lowercase).collect();
    if names != ["score", "count"] {
        return Err(bad(1, "header must be `score,count`"));
    }
    let mut seen = [false; 5];
    let mut pairs = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_error)?;
        let line = rec.position().map_or(0, |p| p.line());
        let score: i64 = rec[0]
            .parse()
            .map_err(|_| bad(line, format!("{:?} is not a score", &rec[0])))?;
        if !(1..=5).contains(&score) {
            return Err(StatsError::InvalidScore(score));
        }
        let slot = &mut seen[(score - 1) as usize];
        if *slot {
            return Err(bad(line, format!("score {score} listed twice")));
        }
        *slot = true;
        pairs.push((score, parse_count(&rec[1], line)?));
    }
    if pairs.is_empty() {
        return Err(bad(2, "no score rows"));
    }
    LikertCounts::from_pairs(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frequency_file() {
        let t = parse_frequency_csv("Male,Female\n26,14\n").unwrap();
        assert_eq!(t.labels(), ["Male", "Female"]);
        assert_eq!(t.observed(), [26, 14]);
        let t = parse_frequency_csv("Yes, No, Not Exactly\r\n36, 1.0, 3.0").unwrap();
        assert_eq!(t.observed(), [36, 1, 3]);
        assert_eq!(t.labels()[2], "Not Exactly");
    }

    #[test]
    fn frequency_file_errors() {
        for bad in [
            "",
            "a,b\n",
            "a,b\n1\n",
            "a,b\n1,2,3\n",
            "a,b\n1,-2\n",
            "a,b\n1,2.5\n",
            "a,b\n1,x\n",
            "a,b\n1,2\n3,4\n",
            "a,\n1,2\n",
        ] {
            assert!(parse_frequency_csv(bad).is_err(), "{bad:?}");
        }
    }

    #[test]
    fn error_carries_line() {
        match parse_frequency_csv("a,b\n1,x\n") {
            Err(StatsError::Csv { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn likert_file() {
        let c = parse_likert_csv("score,count\n5,28\n4,11\n3,0\n2,0\n1,1\n").unwrap();
        assert_eq!(c.counts(), [1, 0, 0, 11, 28]);
        assert!(parse_likert_csv("Score,Count\n5,1").is_ok());
    }

    #[test]
    fn likert_file_errors() {
        assert!(parse_likert_csv("count,score\n5,1\n").is_err());
        assert!(parse_likert_csv("score,count\n").is_err());
        assert!(parse_likert_csv("score,count\n5,1\n5,2\n").is_err());
        assert_eq!(parse_likert_csv("score,count\n6,1\n"), Err(StatsError::InvalidScore(6)));
        assert!(parse_likert_csv("score,count\n5\n").is_err());
    }

    #[test]
    fn expected_file() {
        let (labels, e) = parse_expected_csv("1,2\n20,20\n").unwrap();
        assert_eq!(labels, ["1", "2"]);
        assert_eq!(e, [20.0, 20.0]);
        assert!(parse_expected_csv("1,2\n20,0\n").is_err());
        assert!(parse_expected_csv("1,2\n20,inf\n").is_err());
        assert_eq!(parse_expected_csv("a,b\n12.5,27.5\n").unwrap().1, [12.5, 27.5]);
    }
}
