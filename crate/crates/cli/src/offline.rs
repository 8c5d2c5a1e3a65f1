//! Verbs that work on files directly, without a running service.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use drlia_core::identity::IdentitySummary;
use drlia_core::journal::FileJournal;
use drlia_core::stats::{
    chi_report, chi_square_with, frequency_report, likert_report, parse_expected_csv, parse_frequency_csv,
    parse_likert_csv, Report, AGREED_MEAN, DEFAULT_CRITICAL_VALUE,
};
use drlia_core::{journal_audit_entries, verify_journal, Service};

fn read_journal(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).with_context(|| format!("reading {}", path.display()))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

pub fn audit_verify(path: &Path) -> Result<()> {
    let report = verify_journal(&read_journal(path)?);
    match report.first_bad_seq {
        None if report.valid => {
            println!("chain valid, {} entries", report.entries);
            Ok(())
        }
        bad => bail!(
            "chain broken at entry {} ({} entries read)",
            bad.map_or_else(|| "?".into(), |s| s.to_string()),
            report.entries
        ),
    }
}

/// Writes every readable entry, then fails if the chain does not verify.
pub fn audit_export(path: &Path) -> Result<()> {
    let bytes = read_journal(path)?;
    let mut out = io::stdout().lock();
    for e in journal_audit_entries(&bytes) {
        writeln!(out, "{}", e.export_line())?;
    }
    out.flush()?;
    let report = verify_journal(&bytes);
    if !report.valid {
        bail!("chain broken at entry {}", report.first_bad_seq.unwrap_or(0));
    }
    Ok(())
}

pub fn bootstrap_admin(journal: &Path, staff_number: &str) -> Result<IdentitySummary> {
    let sink = FileJournal::open(journal).with_context(|| format!("opening {}", journal.display()))?;
    let svc = Service::builder().open(Box::new(sink))?;
    Ok(svc.bootstrap_admin(staff_number)?)
}

/// Prints every text report, then one JSON document per line.
pub fn stats(input: &Path, likert: bool, chi: Option<&Path>, critical: Option<f64>) -> Result<()> {
    let text = read_text(input)?;
    let mut reports: Vec<Report> = Vec::new();
    if likert {
        reports.push(likert_report(&parse_likert_csv(&text)?, AGREED_MEAN)?);
    } else {
        let table = parse_frequency_csv(&text)?;
        reports.push(frequency_report(&table)?);
        if let Some(chi) = chi {
            let (labels, expected) = parse_expected_csv(&read_text(chi)?)?;
            if labels.len() == table.labels().len() && labels != table.labels() {
                bail!(
                    "expected categories {labels:?} do not match observed {:?}",
                    table.labels()
                );
            }
            let result = chi_square_with(table.observed(), &expected, critical.unwrap_or(DEFAULT_CRITICAL_VALUE))?;
            reports.push(chi_report(table.labels(), &result));
        }
    }
    let mut out = io::stdout().lock();
    for r in &reports {
        writeln!(out, "{}", r.text)?;
    }
    for r in &reports {
        writeln!(out, "{}", r.json)?;
    }
    Ok(())
}
