#![allow(dead_code)]

use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Body;
use axum::extract::connect_info::MockConnectInfo;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use drlia_core::clock::ManualClock;
use drlia_core::entropy::SeededEntropy;
use drlia_core::identity::KdfParams;
use drlia_core::journal::{JournalSink, MemoryJournal};
use drlia_core::mail::parse_token_body;
use drlia_core::vault::MasterKey;
use drlia_core::{Service, ServiceConfig};
use drlia_gateway::{router, AppState};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

pub const MASTER_KEY: [u8; 32] = [0x3c; 32];

pub fn config() -> ServiceConfig {
    ServiceConfig {
        kdf: KdfParams::insecure_fast(),
        ..ServiceConfig::default()
    }
}

pub fn service(clock: &ManualClock, seed: u64, journal: Box<dyn JournalSink>) -> Service {
    Service::builder()
        .config(config())
        .clock(Arc::new(clock.clone()))
        .entropy(Arc::new(SeededEntropy::new(seed)))
        .master_key(Some(MasterKey::from_bytes(MASTER_KEY)))
        .open(journal)
        .expect("service opens")
}

#[derive(Debug, Clone)]
pub struct Reply {
    pub status: StatusCode,
    pub body: Vec<u8>,
    pub json: Value,
}

/// Drives the router in-process and keeps every response body.
pub struct Api {
    pub app: Router,
    pub svc: Arc<Service>,
    pub clock: ManualClock,
    pub journal: MemoryJournal,
    pub log: Vec<(String, Reply)>,
    pub peer: SocketAddr,
}

#[derive(Debug, Clone)]
pub struct Member {
    pub staff_number: String,
    pub email: String,
    pub password: String,
    pub mail_password: String,
}

pub fn form(n: u32) -> Value {
    json!({
        "name": format!("Staff Member {n}"),
        "staff_number": format!("EMP/{n:05}"),
        "email": format!("staff{n}@eru.example.edu"),
        "contact_number": format!("+23480{n:08}"),
        "sex": if n % 2 == 0 { "Female" } else { "Male" },
        "password": format!("long enough password {n}"),
    })
}

impl Api {
    pub fn new() -> Self {
        let clock = ManualClock::at_epoch();
        let journal = MemoryJournal::new();
        let svc = Arc::new(service(&clock, 21, Box::new(journal.clone())));
        Self::over(svc, clock, journal, 1000)
    }

    pub fn over(svc: Arc<Service>, clock: ManualClock, journal: MemoryJournal, rate_limit: u32) -> Self {
        let app = router(AppState::new(svc.clone(), rate_limit));
        Self {
            app,
            svc,
            clock,
            journal,
            log: Vec::new(),
            peer: "192.0.2.10:40000".parse().unwrap(),
        }
    }

    pub async fn send(&mut self, method: Method, uri: &str, bearer: Option<&str>, body: Option<Value>) -> Reply {
        let raw = body.map(|b| b.to_string().into_bytes());
        self.send_raw(method, uri, bearer, raw).await
    }

    pub async fn send_raw(&mut self, method: Method, uri: &str, bearer: Option<&str>, body: Option<Vec<u8>>) -> Reply {
        let mut req = Request::builder().method(method.clone()).uri(uri);
        if let Some(b) = bearer {
            req = req.header("authorization", format!("Bearer {b}"));
        }
        if body.is_some() {
            req = req.header("content-type", "application/json");
        }
        let req = req.body(body.map_or_else(Body::empty, Body::from)).unwrap();
        let app = self.app.clone().layer(MockConnectInfo(self.peer));
        let resp = app.oneshot(req).await.unwrap();
        let status = resp.status();
        let body = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
        let json = serde_json::from_slice(&body).unwrap_or(Value::Null);
        let reply = Reply { status, body, json };
        self.log.push((format!("{method} {uri}"), reply.clone()));
        reply
    }

    pub async fn register(&mut self, n: u32) -> Member {
        let f = form(n);
        let r = self.send(Method::POST, "/api/register", None, Some(f.clone())).await;
        assert_eq!(r.status, StatusCode::CREATED, "{:?}", r.json);
        Member {
            staff_number: f["staff_number"].as_str().unwrap().into(),
            email: f["email"].as_str().unwrap().into(),
            password: f["password"].as_str().unwrap().into(),
            mail_password: r.json["mail_password"].as_str().unwrap().into(),
        }
    }

    /// Registers `n` and makes it the first administrator (an offline step).
    pub async fn admin(&mut self, n: u32) -> Member {
        let m = self.register(n).await;
        self.svc.bootstrap_admin(&m.staff_number).unwrap();
        m
    }

    pub async fn newest_code(&mut self, m: &Member) -> String {
        let r = self
            .send(
                Method::POST,
                "/api/mail/login",
                None,
                Some(json!({"email": m.email, "password": m.mail_password})),
            )
            .await;
        assert_eq!(r.status, StatusCode::OK, "{:?}", r.json);
        let handle = r.json["handle"].as_str().unwrap().to_owned();
        let inbox = self.send(Method::GET, "/api/mail/inbox", Some(&handle), None).await;
        assert_eq!(inbox.status, StatusCode::OK);
        let body = inbox.json[0]["body"].as_str().expect("a message").to_owned();
        parse_token_body(&body).unwrap().to_owned()
    }

    pub async fn begin(&mut self) -> String {
        let r = self.send(Method::POST, "/api/session", None, None).await;
        assert_eq!(r.status, StatusCode::CREATED);
        r.json["session_id"].as_str().unwrap().to_owned()
    }

    /// Full three-stage login; returns the session id.
    pub async fn login(&mut self, m: &Member) -> String {
        let sid = self.begin().await;
        let r = self
            .send(
                Method::POST,
                &format!("/api/session/{sid}/credentials"),
                None,
                Some(json!({"staff_number": m.staff_number, "password": m.password})),
            )
            .await;
        assert_eq!(r.status, StatusCode::OK, "{:?}", r.json);
        let r = self
            .send(Method::POST, &format!("/api/session/{sid}/token"), None, None)
            .await;
        assert_eq!(r.status, StatusCode::OK, "{:?}", r.json);
        let code = self.newest_code(m).await;
        let r = self
            .send(
                Method::POST,
                &format!("/api/session/{sid}/verify"),
                None,
                Some(json!({"code": code})),
            )
            .await;
        assert_eq!(r.status, StatusCode::OK, "{:?}", r.json);
        assert_eq!(r.json["state"], "Authenticated");
        sid
    }

    pub async fn grant(&mut self, admin_sid: &str, staff: &str, role: &str) -> Reply {
        self.send(
            Method::POST,
            &format!("/api/staff/{staff}/grant"),
            Some(admin_sid),
            Some(json!({ "role": role })),
        )
        .await
    }
}
