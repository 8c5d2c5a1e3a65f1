mod common;

use std::sync::Arc;
use std::thread;

use common::{form, Harness};
use drlia_core::audit::{AuditAction, Outcome};
use drlia_core::identity::{validate_staff_number, Field, Role, Status};
use drlia_core::Error;
use proptest::prelude::*;

#[test]
fn staff_number_pattern() {
    assert!(validate_staff_number("EMP/00008"));
    assert!(!validate_staff_number(""));
    assert!(!validate_staff_number("EMP/123456"));
    assert!(!validate_staff_number("emp/00008"));
}

#[test]
fn registration_defaults_and_audit() {
    let h = Harness::new();
    let reg = h.svc.register(&form(8)).unwrap();
    assert_eq!(reg.identity.staff_number.as_str(), "EMP/00008");
    assert_eq!(reg.identity.status, Status::PendingApproval);
    assert_eq!(reg.identity.role, Role::ReadOnly);
    assert_eq!(reg.mail_password.len(), 12);
    let audit = h.svc.audit_entries();
    assert_eq!(audit.len(), 1);
    assert_eq!(audit[0].action, AuditAction::Register);
    assert_eq!(audit[0].outcome, Outcome::Success);
    assert_eq!(audit[0].staff_number.as_ref().unwrap().as_str(), "EMP/00008");
}

#[test]
fn duplicates_and_malformed_fields() {
    let h = Harness::new();
    h.register(8);
    assert_eq!(h.svc.register(&form(8)).unwrap_err(), Error::DuplicateStaffNumber);

    let mut same_email = form(9);
    same_email.email = form(8).email.to_uppercase();
    assert_eq!(h.svc.register(&same_email).unwrap_err(), Error::DuplicateEmail);

    let mut bad = form(10);
    bad.email = "no-at-sign".into();
    assert_eq!(h.svc.register(&bad).unwrap_err(), Error::MalformedField(Field::Email));

    let mut weak = form(11);
    weak.password = "short".into();
    assert!(matches!(
        h.svc.register(&weak).unwrap_err(),
        Error::WeakPassword { min: 10 }
    ));

    // failed registrations leave no trace
    assert_eq!(h.svc.identity_count(), 1);
    assert_eq!(h.svc.audit_len(), 1);
}

#[test]
fn concurrent_registration_of_one_number_admits_exactly_one() {
    let h = Arc::new(Harness::new());
    let results: Vec<_> = (0..8)
        .map(|i| {
            let h = h.clone();
            thread::spawn(move || {
                let mut f = form(42);
                f.email = format!("racer{i}@eru.example.edu");
                h.svc.register(&f)
            })
        })
        .collect::<Vec<_>>()
        .into_iter()
        .map(|t| t.join().unwrap())
        .collect();
    assert_eq!(results.iter().filter(|r| r.is_ok()).count(), 1);
    assert!(results
        .iter()
        .filter_map(|r| r.as_ref().err())
        .all(|e| *e == Error::DuplicateStaffNumber));
    assert_eq!(h.svc.identity_count(), 1);
}

#[test]
fn grant_privilege_paths() {
    let h = Harness::new();
    let admin = h.admin(1);
    let admin_sid = h.login(&admin);
    let pending = h.register(2);

    let granted = h
        .svc
        .grant_privilege(&admin_sid, &pending.staff_number, Role::Officer)
        .unwrap();
    assert_eq!((granted.status, granted.role), (Status::Active, Role::Officer));
    let last = h.svc.audit_entries().pop().unwrap();
    assert_eq!(last.action, AuditAction::GrantPrivilege);
    assert_eq!(last.staff_number.unwrap().as_str(), "EMP/00001");
    assert!(last.detail.contains("EMP/00002"));

    assert_eq!(
        h.svc
            .grant_privilege(&admin_sid, "EMP/99999", Role::Officer)
            .unwrap_err(),
        Error::UnknownStaff
    );

    let officer_sid = h.login(&pending);
    let before = h.svc.audit_len();
    h.register(3);
    assert_eq!(
        h.svc
            .grant_privilege(&officer_sid, "EMP/00003", Role::Admin)
            .unwrap_err(),
        Error::NotAdmin
    );
    let entries = h.svc.audit_entries();
    assert_eq!(entries.len(), before + 2); // Register + Denied
    let denied = entries.last().unwrap();
    assert_eq!((denied.action, denied.outcome), (AuditAction::Denied, Outcome::Failure));
    assert_eq!(h.svc.identity("EMP/00003").unwrap().status, Status::PendingApproval);
}

#[test]
fn unauthenticated_grant_is_refused() {
    let h = Harness::new();
    h.register(2);
    let sid = h.svc.begin_session().unwrap().session_id;
    assert_eq!(
        h.svc.grant_privilege(&sid, "EMP/00002", Role::Officer).unwrap_err(),
        Error::NotAuthenticated
    );
}

#[test]
fn bootstrap_only_once() {
    let h = Harness::new();
    h.admin(1);
    h.register(2);
    assert!(matches!(
        h.svc.bootstrap_admin("EMP/00002"),
        Err(Error::InvalidInput(_))
    ));
    assert_eq!(
        h.svc.bootstrap_admin("EMP/77777").unwrap_err(),
        Error::InvalidInput("an active administrator already exists")
    );
}

#[test]
fn verify_password_is_status_gated() {
    let h = Harness::new();
    let admin = h.admin(1);
    let sid = h.login(&admin);
    let s = h.register(2);
    assert!(!h.svc.verify_password(&s.staff_number, &s.password));
    h.svc.grant_privilege(&sid, &s.staff_number, Role::ReadOnly).unwrap();
    assert!(h.svc.verify_password(&s.staff_number, &s.password));
    assert!(!h.svc.verify_password(&s.staff_number, "long enough but wrong"));
    assert!(!h.svc.verify_password("EMP/55555", &s.password));
}

#[test]
fn same_password_different_digests_and_no_plaintext_persisted() {
    let h = Harness::new();
    let mut a = form(1);
    let mut b = form(2);
    a.password = "shared password value".into();
    b.password = a.password.clone();
    let ra = h.svc.register(&a).unwrap();
    let rb = h.svc.register(&b).unwrap();
    let snap = h.svc.snapshot();
    assert_ne!(
        snap.identities[0].credential.digest,
        snap.identities[1].credential.digest
    );
    let bytes = h.journal.bytes();
    for needle in [
        a.password.as_str(),
        ra.mail_password.as_str(),
        rb.mail_password.as_str(),
    ] {
        assert!(
            !bytes.windows(needle.len()).any(|w| w == needle.as_bytes()),
            "{needle} leaked"
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn password_round_trip(password in "[ -~]{10,40}", other in "[ -~]{10,40}") {
        let h = Harness::new();
        let admin = h.admin(1);
        let sid = h.login(&admin);
        let mut f = form(2);
        f.password = password.clone();
        h.svc.register(&f).unwrap();
        h.svc.grant_privilege(&sid, "EMP/00002", Role::Officer).unwrap();
        prop_assert!(h.svc.verify_password("EMP/00002", &password));
        prop_assert_eq!(h.svc.verify_password("EMP/00002", &other), other == password);
    }

    #[test]
    fn registry_stays_unique(numbers in proptest::collection::vec(0u32..6, 1..12), emails in proptest::collection::vec(0u32..6, 1..12)) {
        let h = Harness::new();
        for (n, e) in numbers.iter().zip(&emails) {
            let mut f = form(*n);
            f.email = format!("box{e}@eru.example.edu");
            let _ = h.svc.register(&f);
        }
        let ids = h.svc.identities();
        let mut nums: Vec<_> = ids.iter().map(|i| i.staff_number.clone()).collect();
        let mut mails: Vec<_> = ids.iter().map(|i| i.email.clone()).collect();
        nums.sort(); nums.dedup();
        mails.sort(); mails.dedup();
        prop_assert_eq!(nums.len(), ids.len());
        prop_assert_eq!(mails.len(), ids.len());
    }
}
