//! Fuzz target bodies, shared by the libFuzzer binaries and the corpus
//! replay test. Each one panics only when a property of the decoder fails.

use std::sync::Arc;

use drlia_core::auth::{is_code_shaped, MailHandle, SessionId, CODE_LEN};
use drlia_core::clock::ManualClock;
use drlia_core::entropy::SeededEntropy;
use drlia_core::identity::{validate_email, validate_staff_number, RegistrationForm, StaffNumber};
use drlia_core::journal::{decode_frames, encode_frame, scan_frames, MemoryJournal};
use drlia_core::mail::parse_token_body;
use drlia_core::stats::{
    chi_square, frequency_report, likert_report, parse_expected_csv, parse_frequency_csv, parse_likert_csv, StatsError,
    AGREED_MEAN,
};
use drlia_core::vault::{MasterKey, RecordId};
use drlia_core::{verify_journal, Service};

pub fn journal_frames(data: &[u8]) {
    let scan = scan_frames(data);
    assert!(scan.valid_len <= data.len());
    assert_eq!(scan.error.is_none(), scan.valid_len == data.len());

    let prefix = decode_frames(&data[..scan.valid_len]).expect("the valid prefix decodes");
    assert_eq!(prefix, scan.entries);
    match decode_frames(data) {
        Ok(all) => assert_eq!(all, scan.entries),
        Err(e) => assert_eq!(Some(e), scan.error),
    }

    let mut again = Vec::new();
    for e in &scan.entries {
        encode_frame(e, &mut again);
    }
    assert_eq!(decode_frames(&again).expect("re-encoded frames decode"), scan.entries);
}

/// Replay must either refuse the journal or produce a service whose chain
/// verifies, and never panic.
pub fn journal_replay(data: &[u8]) {
    let offline = verify_journal(data);
    let opened = Service::builder()
        .clock(Arc::new(ManualClock::at_epoch()))
        .entropy(Arc::new(SeededEntropy::new(0)))
        .open(Box::new(MemoryJournal::from_bytes(data.to_vec())));
    if let Ok(svc) = opened {
        assert!(offline.valid, "replay accepted a journal that fails verification");
        let online = svc.verify_chain();
        assert!(online.valid);
        assert_eq!(online.entries, offline.entries);
    }
}

pub fn stats_csv(data: &[u8]) {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(table) = parse_frequency_csv(text) {
        assert!(!table.is_empty());
        match frequency_report(&table) {
            Ok(r) => {
                let pct: Vec<f64> = r.json["percentages"]
                    .as_array()
                    .unwrap()
                    .iter()
                    .map(|v| v.as_f64().unwrap())
                    .collect();
                assert!(pct.iter().all(|p| (0.0..=100.0).contains(p)));
                // each cell is rounded to one decimal
                let sum: f64 = pct.iter().sum();
                assert!(
                    (sum - 100.0).abs() <= 0.05 * pct.len() as f64 + 1e-9,
                    "percentages sum to {sum}"
                );
            }
            Err(e) => assert_eq!(e, StatsError::EmptyTable),
        }
    }
    if let Ok((labels, expected)) = parse_expected_csv(text) {
        assert_eq!(labels.len(), expected.len());
        let observed = vec![1u64; expected.len()];
        if let Ok(r) = chi_square(&observed, &expected) {
            assert!(r.statistic >= 0.0, "statistic {}", r.statistic);
            assert_eq!(r.df as usize, expected.len() - 1);
        }
    }
    if let Ok(counts) = parse_likert_csv(text) {
        match likert_report(&counts, AGREED_MEAN) {
            Ok(r) => {
                let mean = r.json["mean"].as_f64().unwrap();
                assert!((1.0..=5.0).contains(&mean), "mean {mean}");
            }
            Err(e) => assert_eq!(e, StatsError::EmptyCounts),
        }
    }
}

pub fn registration_form(data: &[u8]) {
    let Ok(form) = serde_json::from_slice::<RegistrationForm>(data) else {
        return;
    };
    if let Ok(valid) = form.validate() {
        assert!(validate_staff_number(valid.staff_number.as_str()));
        assert!(validate_email(&valid.email));
    }
}

pub fn text_tokens(data: &[u8]) {
    let _ = MasterKey::from_key_material(data);
    let Ok(s) = std::str::from_utf8(data) else {
        return;
    };
    for id in [
        SessionId::parse(s).map(|i| i.as_str().to_owned()),
        MailHandle::parse(s).map(|i| i.as_str().to_owned()),
        RecordId::parse(s).map(|i| i.as_str().to_owned()),
    ]
    .into_iter()
    .flatten()
    {
        assert_eq!(id, s);
    }
    if let Ok(staff) = StaffNumber::parse(s) {
        assert!(validate_staff_number(staff.as_str()));
    }
    if let Some(code) = parse_token_body(s) {
        assert_eq!(code.len(), CODE_LEN);
        assert!(is_code_shaped(code));
    }
}
