#![allow(dead_code)]

use std::sync::Arc;

use drlia_core::auth::SessionId;
use drlia_core::clock::ManualClock;
use drlia_core::entropy::SeededEntropy;
use drlia_core::identity::{KdfParams, RegistrationForm, Role};
use drlia_core::journal::{JournalSink, MemoryJournal};
use drlia_core::mail::parse_token_body;
use drlia_core::vault::MasterKey;
use drlia_core::{Service, ServiceConfig};

pub const MASTER_KEY: [u8; 32] = [0x5a; 32];

pub fn fast_config() -> ServiceConfig {
    ServiceConfig {
        kdf: KdfParams::insecure_fast(),
        ..ServiceConfig::default()
    }
}

/// A registered staff member and the secrets only the test knows.
#[derive(Debug, Clone)]
pub struct Staff {
    pub staff_number: String,
    pub email: String,
    pub password: String,
    pub mail_password: String,
}

pub fn form(n: u32) -> RegistrationForm {
    RegistrationForm {
        name: format!("Staff Member {n}"),
        staff_number: format!("EMP/{n:05}"),
        email: format!("staff{n}@eru.example.edu"),
        contact_number: format!("+23480{n:08}"),
        sex: if n % 2 == 0 { "Female" } else { "Male" }.into(),
        password: format!("long enough password {n}"),
    }
}

pub struct Harness {
    pub svc: Service,
    pub clock: ManualClock,
    pub journal: MemoryJournal,
    pub config: ServiceConfig,
    seed: u64,
}

impl Harness {
    pub fn new() -> Self {
        Self::with_seed(7)
    }

    pub fn with_seed(seed: u64) -> Self {
        Self::build(seed, fast_config(), MemoryJournal::new())
    }

    pub fn with_config(config: ServiceConfig) -> Self {
        Self::build(7, config, MemoryJournal::new())
    }

    pub fn build(seed: u64, config: ServiceConfig, journal: MemoryJournal) -> Self {
        let clock = ManualClock::at_epoch();
        let svc = open(&clock, seed, config, Box::new(journal.clone()), Some(MASTER_KEY));
        Self {
            svc,
            clock,
            journal,
            config,
            seed,
        }
    }

    /// A second service replayed from a copy of this journal.
    pub fn reopen(&self, key: Option<[u8; 32]>) -> drlia_core::Result<Service> {
        try_open(
            &self.clock,
            self.seed.wrapping_add(1),
            self.config,
            Box::new(MemoryJournal::from_bytes(self.journal.bytes())),
            key,
        )
    }

    pub fn register(&self, n: u32) -> Staff {
        let f = form(n);
        let reg = self.svc.register(&f).expect("registration");
        Staff {
            staff_number: f.staff_number,
            email: f.email,
            password: f.password,
            mail_password: reg.mail_password.to_string(),
        }
    }

    /// Registers staff `n` and makes it the first administrator.
    pub fn admin(&self, n: u32) -> Staff {
        let s = self.register(n);
        self.svc.bootstrap_admin(&s.staff_number).expect("bootstrap");
        s
    }

    /// Registers staff `n` and activates it with `role` using `admin`.
    pub fn member(&self, admin: &SessionId, n: u32, role: Role) -> Staff {
        let s = self.register(n);
        self.svc.grant_privilege(admin, &s.staff_number, role).expect("grant");
        s
    }

    /// Newest code in the staff member's mailbox.
    pub fn read_code(&self, staff: &Staff) -> String {
        read_code(&self.svc, staff)
    }

    /// Full three-stage login.
    pub fn login(&self, staff: &Staff) -> SessionId {
        login(&self.svc, staff)
    }
}

pub fn open(
    clock: &ManualClock,
    seed: u64,
    config: ServiceConfig,
    journal: Box<dyn JournalSink>,
    key: Option<[u8; 32]>,
) -> Service {
    try_open(clock, seed, config, journal, key).expect("service opens")
}

pub fn try_open(
    clock: &ManualClock,
    seed: u64,
    config: ServiceConfig,
    journal: Box<dyn JournalSink>,
    key: Option<[u8; 32]>,
) -> drlia_core::Result<Service> {
    Service::builder()
        .config(config)
        .clock(Arc::new(clock.clone()))
        .entropy(Arc::new(SeededEntropy::new(seed)))
        .master_key(key.map(MasterKey::from_bytes))
        .open(journal)
}

pub fn read_code(svc: &Service, staff: &Staff) -> String {
    let handle = svc
        .login_mailbox(&staff.email, &staff.mail_password)
        .expect("mail login");
    let inbox = svc.read_inbox(&handle, false).expect("inbox");
    let newest = inbox.first().expect("a delivered message");
    parse_token_body(&newest.body).expect("token body").to_owned()
}

pub fn login(svc: &Service, staff: &Staff) -> SessionId {
    let session = svc.begin_session().unwrap();
    let sid = session.session_id;
    svc.submit_credentials(&sid, &staff.staff_number, &staff.password)
        .unwrap();
    svc.request_token(&sid).unwrap();
    let code = read_code(svc, staff);
    svc.submit_token(&sid, &code).unwrap();
    sid
}
