//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails. Built with `harness = false`.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::sync::{Arc, Barrier};
use std::thread;
use std::time::{Duration, Instant};

use common::{fast_config, Harness, Staff, MASTER_KEY};
use drlia_core::audit::{verify_chain, AuditAction, AuditFilter};
use drlia_core::auth::{SessionId, SessionState};
use drlia_core::clock::ManualClock;
use drlia_core::identity::Role;
use drlia_core::journal::{FileJournal, MemoryJournal};
use drlia_core::mail::parse_token_body;
use drlia_core::stats::{
    agreed_flag, chi_square, decide, likert_mean, likert_sd, percentages, Decision, FrequencyTable, LikertCounts,
    AGREED_MEAN, DEFAULT_CRITICAL_VALUE,
};
use drlia_core::vault::{RecordFilter, RecordId, RecordKind};
use drlia_core::{verify_journal, Error, Service};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

const STAT_TOL: f64 = 1e-9;
const LIKERT_TOL: f64 = 1e-9;
const LIKERT_CASES: usize = 1_000;
const SINGLE_USE_TRIALS: usize = 1_000;
const DFS_DEPTH: usize = 6;
const SIM_OPS: usize = 200;
const SIM_RUNS: u64 = 5;
const REPLAY_OPS: usize = 100;
const REPLAY_RUNS: u64 = 5;

type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)*) => {
        if !$cond {
            return Err(format!($($fmt)*));
        }
    };
}

struct Criterion {
    name: &'static str,
    budget: Option<Duration>,
    run: fn() -> Check,
}

fn main() -> ExitCode {
    let criteria = [
        Criterion {
            name: "chi-square golden",
            budget: Some(Duration::from_secs(1)),
            run: chi_square_golden,
        },
        Criterion {
            name: "percentage golden rows",
            budget: Some(Duration::from_secs(1)),
            run: percentage_golden,
        },
        Criterion {
            name: "agreed-mean benchmark",
            budget: None,
            run: agreed_mean,
        },
        Criterion {
            name: "likert oracle equivalence",
            budget: None,
            run: likert_oracle,
        },
        Criterion {
            name: "no single factor suffices",
            budget: Some(Duration::from_secs(30)),
            run: no_single_factor,
        },
        Criterion {
            name: "token single use and expiry boundary",
            budget: None,
            run: token_single_use,
        },
        Criterion {
            name: "audit soundness",
            budget: None,
            run: audit_soundness,
        },
        Criterion {
            name: "lockdown unreachability",
            budget: None,
            run: lockdown_unreachability,
        },
        Criterion {
            name: "replay determinism",
            budget: None,
            run: replay_determinism,
        },
    ];
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(c.run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let elapsed = start.elapsed();
        let outcome = match (outcome, c.budget) {
            (Ok(_), Some(b)) if elapsed > b => Err(format!("took {elapsed:.2?}, budget {b:?}")),
            (o, _) => o,
        };
        match outcome {
            Ok(note) => println!("PASS  {:<40} {:>9.2?}  {note}", c.name, elapsed),
            Err(why) => {
                failed += 1;
                println!("FAIL  {:<40} {:>9.2?}  {why}", c.name, elapsed);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

// ---------------------------------------------------------------- statistics

fn chi_square_golden() -> Check {
    let r = chi_square(&[39, 1], &[20.0, 20.0]).map_err(|e| e.to_string())?;
    for cell in &r.per_cell {
        ensure!(
            (cell.contribution - 18.05).abs() <= STAT_TOL,
            "cell {} != 18.05",
            cell.contribution
        );
    }
    ensure!(
        (r.statistic - 36.1).abs() <= STAT_TOL,
        "statistic {} != 36.1",
        r.statistic
    );
    ensure!(r.df == 1, "df {}", r.df);
    ensure!(
        decide(36.1, DEFAULT_CRITICAL_VALUE) == Decision::RejectH0,
        "decide(36.1, 5.99) did not reject"
    );
    ensure!(r.decision == Decision::RejectH0, "result decision {:?}", r.decision);
    Ok(format!("X2 = {}, Reject H0", r.statistic))
}

fn percentage_golden() -> Check {
    let rows: [(&str, &[u64], &[f64]); 6] = [
        ("gender", &[26, 14], &[65.0, 35.0]),
        ("three-way 1", &[36, 1, 3], &[90.0, 2.5, 7.5]),
        ("three-way 2", &[33, 4, 3], &[82.5, 10.0, 7.5]),
        ("three-way 3", &[4, 25, 11], &[10.0, 62.5, 27.5]),
        ("three-way 4", &[33, 0, 7], &[82.5, 0.0, 17.5]),
        ("three-way 5", &[2, 27, 11], &[5.0, 67.5, 27.5]),
    ];
    for (name, counts, want) in rows {
        let t = FrequencyTable::from_pairs(counts.iter().enumerate().map(|(i, &c)| (format!("c{i}"), c)));
        let got = percentages(&t).map_err(|e| e.to_string())?;
        ensure!(got == want, "{name}: {got:?} != {want:?}");
    }
    Ok(format!("{} rows exact", rows.len()))
}

fn agreed_mean() -> Check {
    let cases = [(2.3, false), (4.38, true), (4.63, true), (4.65, true)];
    for (mean, want) in cases {
        ensure!(agreed_flag(mean, AGREED_MEAN) == want, "agreed_flag({mean}) != {want}");
    }
    Ok("4 printed means".into())
}

fn likert_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0x11ce7);
    let mut worst = 0f64;
    let mut cases = 0;
    while cases < LIKERT_CASES {
        let counts: [u64; 5] = std::array::from_fn(|_| rng.next_u64() % 60);
        let c = LikertCounts::new(counts);
        if c.total() < 2 {
            continue;
        }
        cases += 1;
        // expanded sample, two-pass variance
        let xs: Vec<f64> = (1..=5u32)
            .flat_map(|s| std::iter::repeat_n(f64::from(s), counts[s as usize - 1] as usize))
            .collect();
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        let dm = (likert_mean(&c).map_err(|e| e.to_string())? - mean).abs();
        let ds = (likert_sd(&c).map_err(|e| e.to_string())? - sd).abs();
        worst = worst.max(dm).max(ds);
        ensure!(
            dm <= LIKERT_TOL && ds <= LIKERT_TOL,
            "counts {counts:?}: mean diff {dm}, sd diff {ds}"
        );
    }
    Ok(format!("{cases} cases, max deviation {worst:.1e}"))
}

// ------------------------------------------------------------ authentication

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Op {
    CredValid,
    CredInvalid,
    RequestToken,
    TokenValid,
    TokenInvalid,
    Terminate,
}

const OPS: [Op; 6] = [
    Op::CredValid,
    Op::CredInvalid,
    Op::RequestToken,
    Op::TokenValid,
    Op::TokenInvalid,
    Op::Terminate,
];

/// Reference model of one session for one active identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Model {
    state: SessionState,
    session_failures: u32,
    identity_failures: u32,
    suspended: bool,
}

impl Model {
    const MAX: u32 = 5;

    fn new() -> Self {
        Self {
            state: SessionState::AwaitingCredentials,
            session_failures: 0,
            identity_failures: 0,
            suspended: false,
        }
    }

    fn fail(&mut self) {
        self.session_failures += 1;
        self.identity_failures += 1;
        if self.identity_failures >= Self::MAX {
            self.suspended = true;
            self.identity_failures = 0;
            self.state = SessionState::Terminated;
        } else if self.session_failures >= Self::MAX {
            self.state = SessionState::Terminated;
        }
    }

    fn step(&mut self, op: Op) {
        use SessionState::*;
        match (op, self.state) {
            (Op::CredValid, AwaitingCredentials) if !self.suspended => {
                self.state = CredentialsVerified;
                self.identity_failures = 0;
            }
            (Op::CredInvalid, AwaitingCredentials) => self.fail(),
            (Op::RequestToken, CredentialsVerified | TokenIssued) => self.state = TokenIssued,
            (Op::TokenValid, TokenIssued) => self.state = Authenticated,
            (Op::TokenInvalid, TokenIssued) => self.fail(),
            (Op::Terminate, _) => self.state = Terminated,
            _ => {}
        }
    }
}

fn apply(svc: &Service, sid: &SessionId, staff: &Staff, op: Op) -> drlia_core::Result<()> {
    match op {
        Op::CredValid => svc
            .submit_credentials(sid, &staff.staff_number, &staff.password)
            .map(drop),
        Op::CredInvalid => svc
            .submit_credentials(sid, &staff.staff_number, "not the password")
            .map(drop),
        Op::RequestToken => svc.request_token(sid).map(drop),
        Op::TokenValid => {
            let code = newest_code(svc, staff).unwrap_or_else(|| "AAAAAAAA".into());
            svc.submit_token(sid, &code).map(drop)
        }
        Op::TokenInvalid => {
            let bad = match newest_code(svc, staff) {
                Some(c) if c.starts_with('A') => format!("B{}", &c[1..]),
                Some(c) => format!("A{}", &c[1..]),
                None => "AAAAAAAA".into(),
            };
            svc.submit_token(sid, &bad).map(drop)
        }
        Op::Terminate => svc.terminate_session(sid).map(drop),
    }
}

fn newest_code(svc: &Service, staff: &Staff) -> Option<String> {
    let handle = svc.login_mailbox(&staff.email, &staff.mail_password).ok()?;
    let inbox = svc.read_inbox(&handle, false).ok()?;
    svc.logout_mailbox(&handle);
    inbox.first().and_then(|m| parse_token_body(&m.body)).map(str::to_owned)
}

struct Explorer {
    clock: ManualClock,
    staff: Staff,
    sid: SessionId,
    sequences: u64,
    reached: u64,
}

impl Explorer {
    fn explore(&mut self, bytes: Vec<u8>, model: Model, path: &mut Vec<Op>) -> Result<(), String> {
        if path.len() == DFS_DEPTH {
            return Ok(());
        }
        for op in OPS {
            let journal = MemoryJournal::from_bytes(bytes.clone());
            let svc = common::open(
                &self.clock,
                3,
                fast_config(),
                Box::new(journal.clone()),
                Some(MASTER_KEY),
            );
            let _ = apply(&svc, &self.sid, &self.staff, op);
            let mut next = model;
            next.step(op);
            path.push(op);
            self.sequences += 1;

            let got = svc.session(&self.sid).map_err(|e| e.to_string())?;
            let suspended = svc.identity(&self.staff.staff_number).map(|i| i.status)
                == Some(drlia_core::identity::Status::Suspended);
            ensure!(
                got.state == next.state && got.failed_attempts == next.session_failures && suspended == next.suspended,
                "after {path:?}: service ({:?}, {}, suspended {suspended}) vs model {next:?}",
                got.state,
                got.failed_attempts
            );
            if got.state == SessionState::Authenticated && model.state != SessionState::Authenticated {
                ensure!(ordered_factors(path), "authenticated without ordered factors: {path:?}");
                self.reached += 1;
            }
            self.explore(journal.bytes(), next, path)?;
            path.pop();
        }
        Ok(())
    }
}

/// True when the last step of `path` submits the valid mailed code and is
/// preceded by valid credentials and then a token request.
fn ordered_factors(path: &[Op]) -> bool {
    let Some((&Op::TokenValid, before)) = path.split_last() else {
        return false;
    };
    let Some(cred) = before.iter().position(|&o| o == Op::CredValid) else {
        return false;
    };
    before[cred..].contains(&Op::RequestToken)
}

fn no_single_factor() -> Check {
    let clock = ManualClock::at_epoch();
    let journal = MemoryJournal::new();
    let svc = common::open(&clock, 3, fast_config(), Box::new(journal.clone()), Some(MASTER_KEY));
    let staff = enroll(&svc, 1);
    svc.bootstrap_admin(&staff.staff_number).map_err(|e| e.to_string())?;
    let sid = svc.begin_session().map_err(|e| e.to_string())?.session_id;
    drop(svc);
    let mut ex = Explorer {
        clock,
        staff,
        sid,
        sequences: 0,
        reached: 0,
    };
    ex.explore(journal.bytes(), Model::new(), &mut Vec::new())?;
    ensure!(ex.reached > 0, "Authenticated never reached");
    Ok(format!(
        "{} sequences, {} reach Authenticated, all via the ordered path",
        ex.sequences, ex.reached
    ))
}

fn enroll(svc: &Service, n: u32) -> Staff {
    let f = common::form(n);
    let reg = svc.register(&f).expect("registration");
    Staff {
        staff_number: f.staff_number,
        email: f.email,
        password: f.password,
        mail_password: reg.mail_password.to_string(),
    }
}

fn token_single_use() -> Check {
    let h = Arc::new(Harness::new());
    let staff = h.admin(1);
    for trial in 0..SINGLE_USE_TRIALS {
        let sid = h.svc.begin_session().map_err(|e| e.to_string())?.session_id;
        h.svc
            .submit_credentials(&sid, &staff.staff_number, &staff.password)
            .map_err(|e| e.to_string())?;
        h.svc.request_token(&sid).map_err(|e| e.to_string())?;
        let code = h.read_code(&staff);
        let barrier = Arc::new(Barrier::new(2));
        let racers: Vec<_> = (0..2)
            .map(|_| {
                let (h, sid, code, barrier) = (h.clone(), sid.clone(), code.clone(), barrier.clone());
                thread::spawn(move || {
                    barrier.wait();
                    h.svc.submit_token(&sid, &code)
                })
            })
            .collect();
        let results: Vec<_> = racers.into_iter().map(|t| t.join().expect("racer")).collect();
        let wins = results.iter().filter(|r| r.is_ok()).count();
        ensure!(wins == 1, "trial {trial}: {wins} submissions succeeded ({results:?})");
        h.svc.terminate_session(&sid).map_err(|e| e.to_string())?;
    }

    let ttl = i64::from(h.config.token_ttl_secs);
    let mut boundary = Vec::new();
    for (offset, want_ok) in [(ttl, true), (ttl + 1, false)] {
        let sid = h.svc.begin_session().map_err(|e| e.to_string())?.session_id;
        h.svc
            .submit_credentials(&sid, &staff.staff_number, &staff.password)
            .map_err(|e| e.to_string())?;
        h.svc.request_token(&sid).map_err(|e| e.to_string())?;
        let code = h.read_code(&staff);
        h.clock.advance_secs(offset);
        let r = h.svc.submit_token(&sid, &code);
        match (want_ok, &r) {
            (true, Ok(_)) | (false, Err(Error::TokenExpired)) => {}
            _ => return Err(format!("submit at ttl+{}: {r:?}", offset - ttl)),
        }
        boundary.push(format!(
            "{}s {}",
            offset,
            if r.is_ok() { "accepted" } else { "expired" }
        ));
    }
    Ok(format!(
        "{SINGLE_USE_TRIALS} trials with one winner each; {}",
        boundary.join(", ")
    ))
}

// ------------------------------------------------------- random simulations

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    AuthAttempt,
    RecordAccess,
    Other,
}

/// Random workload over a small office: an administrator, an officer, a
/// read-only member and one pending registrant.
struct Sim {
    h: Harness,
    rng: ChaCha8Rng,
    staff: Vec<Staff>,
    sessions: Vec<(SessionId, usize)>,
    records: Vec<RecordId>,
    next_staff: u32,
}

impl Sim {
    fn new(seed: u64) -> Self {
        let h = Harness::with_seed(seed);
        let admin = h.admin(1);
        let admin_sid = h.login(&admin);
        let officer = h.member(&admin_sid, 2, Role::Officer);
        let reader = h.member(&admin_sid, 3, Role::ReadOnly);
        let pending = h.register(4);
        Self {
            h,
            rng: ChaCha8Rng::seed_from_u64(seed),
            staff: vec![admin, officer, reader, pending],
            sessions: vec![(admin_sid, 0)],
            records: Vec::new(),
            next_staff: 5,
        }
    }

    fn pick(&mut self, n: usize) -> usize {
        (self.rng.next_u64() % n as u64) as usize
    }

    fn chance(&mut self, percent: u64) -> bool {
        self.rng.next_u64() % 100 < percent
    }

    fn any_session(&mut self) -> Option<(SessionId, usize)> {
        if self.sessions.is_empty() {
            return None;
        }
        let i = self.pick(self.sessions.len());
        Some(self.sessions[i].clone())
    }

    /// Performs one random operation and reports its category and result.
    fn step(&mut self) -> (Kind, Result<(), Error>) {
        match self.pick(12) {
            0 | 1 => {
                let who = self.pick(self.staff.len());
                let r = self.h.svc.begin_session().map(|s| {
                    self.sessions.push((s.session_id, who));
                });
                (Kind::Other, r)
            }
            2 | 3 => {
                let Some((sid, who)) = self.any_session() else {
                    return (Kind::Other, Ok(()));
                };
                let s = self.staff[who].clone();
                let pw = if self.chance(75) {
                    s.password.clone()
                } else {
                    "wrong password!".into()
                };
                (
                    Kind::AuthAttempt,
                    self.h.svc.submit_credentials(&sid, &s.staff_number, &pw).map(drop),
                )
            }
            4 => {
                let Some((sid, _)) = self.any_session() else {
                    return (Kind::Other, Ok(()));
                };
                (Kind::Other, self.h.svc.request_token(&sid).map(drop))
            }
            5 | 6 => {
                let Some((sid, who)) = self.any_session() else {
                    return (Kind::Other, Ok(()));
                };
                let s = self.staff[who].clone();
                let code = if self.chance(80) {
                    newest_code(&self.h.svc, &s).unwrap_or_else(|| "AAAAAAAA".into())
                } else {
                    "ZZZZZZZZ".into()
                };
                (Kind::AuthAttempt, self.h.svc.submit_token(&sid, &code).map(drop))
            }
            7 => {
                let Some((sid, _)) = self.any_session() else {
                    return (Kind::Other, Ok(()));
                };
                let n = self.rng.next_u32() % 1000;
                let r = self.h.svc.seal_record(
                    &sid,
                    &format!("U2019/{n}"),
                    RecordKind::LevelResult,
                    format!("result {n}").as_bytes(),
                );
                if let Ok(m) = &r {
                    self.records.push(m.record_id.clone());
                }
                (Kind::RecordAccess, r.map(drop))
            }
            8 | 9 => {
                let Some((sid, _)) = self.any_session() else {
                    return (Kind::Other, Ok(()));
                };
                let id = if self.records.is_empty() || self.chance(10) {
                    RecordId::parse(&"e".repeat(32)).expect("record id")
                } else {
                    let i = self.pick(self.records.len());
                    self.records[i].clone()
                };
                (Kind::RecordAccess, self.h.svc.open_record(&sid, &id).map(drop))
            }
            10 => {
                let Some((sid, _)) = self.any_session() else {
                    return (Kind::Other, Ok(()));
                };
                if self.chance(50) {
                    (Kind::Other, self.h.svc.terminate_session(&sid).map(drop))
                } else {
                    let who = self.pick(self.staff.len());
                    let r = self
                        .h
                        .svc
                        .deliver(&self.staff[who].email, "notice", "results meeting at noon")
                        .map(drop);
                    (Kind::Other, r)
                }
            }
            _ => {
                if self.chance(20) {
                    let n = self.next_staff;
                    self.next_staff += 1;
                    let s = self.h.register(n);
                    self.staff.push(s);
                } else {
                    let secs = (self.rng.next_u64() % 120) as i64;
                    self.h.clock.advance_secs(secs);
                }
                (Kind::Other, Ok(()))
            }
        }
    }
}

fn audit_soundness() -> Check {
    let mut attempts = 0;
    let mut accesses = 0;
    let mut flips = 0;
    for seed in 0..SIM_RUNS {
        let mut sim = Sim::new(100 + seed);
        for i in 0..SIM_OPS {
            let before = sim.h.svc.audit_len();
            let (kind, result) = sim.step();
            let new = &sim.h.svc.audit_entries()[before..];
            let primary: Vec<_> = new.iter().filter(|e| e.action != AuditAction::Suspend).collect();
            let suspensions = new.len() - primary.len();
            match kind {
                Kind::AuthAttempt => {
                    attempts += 1;
                    ensure!(
                        primary.len() == 1
                            && matches!(primary[0].action, AuditAction::LoginStep1 | AuditAction::AccessGranted),
                        "seed {seed} op {i}: auth attempt wrote {:?}",
                        new.iter().map(|e| e.action).collect::<Vec<_>>()
                    );
                }
                Kind::RecordAccess => {
                    accesses += 1;
                    ensure!(
                        primary.len() == 1
                            && matches!(
                                primary[0].action,
                                AuditAction::RecordSealed | AuditAction::RecordOpened | AuditAction::Denied
                            ),
                        "seed {seed} op {i}: record access wrote {:?}",
                        new.iter().map(|e| e.action).collect::<Vec<_>>()
                    );
                }
                Kind::Other => {}
            }
            ensure!(
                suspensions == 0 || matches!(result, Err(Error::LockedOut)),
                "seed {seed} op {i}: suspension without lockout"
            );
        }
        let report = sim.h.svc.verify_chain();
        ensure!(report.valid, "seed {seed}: chain invalid at {:?}", report.first_bad_seq);

        // in-memory corruption
        let entries = sim.h.svc.audit_entries();
        for _ in 0..50 {
            let k = sim.pick(entries.len());
            let mut forged = entries.clone();
            let bit = sim.pick(256);
            match sim.pick(3) {
                0 => forged[k].entry_hash[bit / 8] ^= 1 << (bit % 8),
                1 => forged[k].prev_hash[bit / 8] ^= 1 << (bit % 8),
                _ => forged[k].seq ^= 1 << (bit % 64),
            }
            let r = verify_chain(&forged);
            ensure!(
                r.first_bad_seq.is_some_and(|s| s <= entries[k].seq),
                "seed {seed}: corruption of seq {} reported as {:?}",
                entries[k].seq,
                r.first_bad_seq
            );
            flips += 1;
        }

        // persisted corruption
        let bytes = sim.h.journal.bytes();
        let bounds = frame_bounds(&bytes);
        for _ in 0..200 {
            let bit = sim.pick(bytes.len() * 8);
            let mut b = bytes.clone();
            b[bit / 8] ^= 1 << (bit % 8);
            let limit = bounds
                .iter()
                .find(|f| f.end > bit / 8)
                .map(|f| f.audits_before + 1)
                .expect("bit inside a frame");
            let r = verify_journal(&b);
            ensure!(
                !r.valid && r.first_bad_seq.is_some_and(|s| s <= limit),
                "seed {seed}: flipped bit {bit} (entry <= {limit}) reported as {:?}",
                r.first_bad_seq
            );
            flips += 1;
        }
    }
    Ok(format!(
        "{SIM_RUNS} runs x {SIM_OPS} ops, {attempts} auth attempts, {accesses} record accesses, {flips} corruptions caught"
    ))
}

struct FrameBound {
    end: usize,
    audits_before: u64,
}

fn frame_bounds(bytes: &[u8]) -> Vec<FrameBound> {
    let entries = drlia_core::journal::decode_frames(bytes).expect("clean journal");
    let mut out = Vec::new();
    let (mut pos, mut audits) = (0usize, 0u64);
    for e in entries {
        let len = u32::from_be_bytes(bytes[pos..pos + 4].try_into().expect("length prefix")) as usize;
        pos += 4 + len + 4;
        out.push(FrameBound {
            end: pos,
            audits_before: audits,
        });
        if matches!(e.record, drlia_core::journal::Record::Audit(_)) {
            audits += 1;
        }
    }
    out
}

fn replay_determinism() -> Check {
    let mut total = 0;
    for seed in 0..REPLAY_RUNS {
        let mut sim = Sim::new(500 + seed);
        for _ in 0..REPLAY_OPS {
            let _ = sim.step();
            total += 1;
        }
        let copy = sim.h.reopen(Some(MASTER_KEY)).map_err(|e| e.to_string())?;
        let (a, b) = (sim.h.svc.snapshot(), copy.snapshot());
        ensure!(a == b, "seed {seed}: snapshots differ");
        let (ja, jb) = (
            serde_json::to_vec(&a).expect("json"),
            serde_json::to_vec(&b).expect("json"),
        );
        ensure!(ja == jb, "seed {seed}: serialized snapshots differ");
        ensure!(
            sim.h.svc.identities() == copy.identities(),
            "seed {seed}: identities differ"
        );
        for (sid, _) in &sim.sessions {
            ensure!(
                sim.h.svc.session(sid) == copy.session(sid),
                "seed {seed}: session {sid:?} differs"
            );
            let (la, lb) = (
                sim.h.svc.list_records(sid, &RecordFilter::default()),
                copy.list_records(sid, &RecordFilter::default()),
            );
            ensure!(la == lb, "seed {seed}: record listing differs");
        }
        ensure!(
            sim.h.svc.snapshot() == copy.snapshot(),
            "seed {seed}: snapshots diverge after identical reads"
        );
    }
    Ok(format!(
        "{REPLAY_RUNS} runs x {REPLAY_OPS} ops ({total} total), snapshots byte-identical"
    ))
}

// ------------------------------------------------------------------ lockdown

fn sentinels() -> Vec<[u8; 32]> {
    (0..8u8)
        .map(|i| {
            let mut m = [0u8; 32];
            let tag = format!("@@SENTINEL-{i:02}-q7Zr9#Wx4!pL0vK@mN3&");
            m.copy_from_slice(&tag.as_bytes()[..32]);
            m
        })
        .collect()
}

fn contains(hay: &[u8], needle: &[u8]) -> bool {
    hay.windows(needle.len()).any(|w| w == needle)
}

fn lockdown_unreachability() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("vault.journal");
    let clock = ManualClock::at_epoch();
    let open_at = |p: &std::path::Path, seed: u64, key: Option<[u8; 32]>| {
        common::try_open(
            &clock,
            seed,
            fast_config(),
            Box::new(FileJournal::open(p).expect("journal file")),
            key,
        )
    };
    let markers = sentinels();
    let mut scans = 0;
    let mut scan = |label: &str| -> Result<(), String> {
        let bytes = std::fs::read(&path).map_err(|e| e.to_string())?;
        scans += 1;
        for m in &markers {
            ensure!(!contains(&bytes, m), "marker found in journal after {label}");
        }
        Ok(())
    };

    let svc = open_at(&path, 1, Some(MASTER_KEY)).map_err(|e| e.to_string())?;
    let admin = enroll(&svc, 1);
    svc.bootstrap_admin(&admin.staff_number).map_err(|e| e.to_string())?;
    let admin_sid = common::login(&svc, &admin);
    let officer = enroll(&svc, 2);
    svc.grant_privilege(&admin_sid, &officer.staff_number, Role::Officer)
        .map_err(|e| e.to_string())?;
    let officer_sid = common::login(&svc, &officer);
    scan("setup")?;

    let mut ids = Vec::new();
    for (i, m) in markers.iter().enumerate() {
        let mut doc = format!("transcript for U2018/{i}: ").into_bytes();
        doc.extend_from_slice(m);
        doc.extend_from_slice(b" end");
        let meta = svc
            .seal_record(
                &officer_sid,
                &format!("U2018/{i}"),
                RecordKind::TranscriptOutgoing,
                &doc,
            )
            .map_err(|e| e.to_string())?;
        ids.push(meta.record_id);
        scan("seal")?;
    }
    for (id, m) in ids.iter().zip(&markers) {
        let (_, plain) = svc.open_record(&officer_sid, id).map_err(|e| e.to_string())?;
        ensure!(contains(&plain, m), "round trip lost marker");
    }
    scan("open")?;

    svc.request_lockdown_code(&admin_sid).map_err(|e| e.to_string())?;
    let code = newest_code(&svc, &admin).ok_or("no lockdown code")?;
    svc.lockdown(&admin_sid, &code).map_err(|e| e.to_string())?;
    scan("lockdown")?;

    let mut refused = 0;
    for id in &ids {
        for sid in [&officer_sid, &admin_sid] {
            ensure!(svc.open_record(sid, id).is_err(), "open succeeded after lockdown");
            refused += 1;
        }
    }
    ensure!(
        svc.seal_record(&officer_sid, "U1", RecordKind::LevelResult, b"late")
            .is_err(),
        "seal succeeded after lockdown"
    );
    scan("post-lockdown access")?;
    drop(svc);

    // copies handed the old key, no key, or a different key
    let copy_path = dir.path().join("copy.journal");
    let mut copies = 0;
    for (seed, key) in [(2, Some(MASTER_KEY)), (3, None), (4, Some([9u8; 32]))] {
        std::fs::copy(&path, &copy_path).map_err(|e| e.to_string())?;
        let copy = match open_at(&copy_path, seed, key) {
            Ok(s) => s,
            Err(e) => {
                copies += 1;
                refused += ids.len();
                ensure!(matches!(e, Error::MasterKeyMismatch), "copy failed to open: {e}");
                continue;
            }
        };
        copies += 1;
        let mut observed = Vec::new();
        for sid in [&officer_sid, &admin_sid] {
            for id in &ids {
                ensure!(copy.open_record(sid, id).is_err(), "copy opened a record");
                refused += 1;
            }
            observed.extend(format!("{:?}", copy.list_records(sid, &RecordFilter::default())).into_bytes());
            observed.extend(format!("{:?}", copy.query_audit(sid, &AuditFilter::default())).into_bytes());
        }
        for s in [&admin, &officer] {
            if let Ok(h) = copy.login_mailbox(&s.email, &s.mail_password) {
                observed.extend(format!("{:?}", copy.read_inbox(&h, false)).into_bytes());
            }
        }
        for e in copy.audit_entries() {
            observed.extend(e.export_line().into_bytes());
        }
        observed.extend(serde_json::to_vec(&copy.snapshot()).map_err(|e| e.to_string())?);
        for m in &markers {
            ensure!(
                !contains(&observed, m),
                "marker reachable through a copy's public operations"
            );
        }
        let bytes = std::fs::read(&copy_path).map_err(|e| e.to_string())?;
        for m in &markers {
            ensure!(!contains(&bytes, m), "marker found in copied journal");
        }
    }
    Ok(format!(
        "{} records, {refused} open attempts refused, {copies} replayed copies, {scans} journal scans clean",
        ids.len()
    ))
}
