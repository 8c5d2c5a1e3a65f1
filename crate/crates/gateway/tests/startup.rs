mod common;

use drlia_core::clock::ManualClock;
use drlia_core::journal::{decode_frames, encode_frame, FileJournal, Record};
use drlia_gateway::{open_service, Gateway, GatewayConfig, GatewayError};
use serde_json::Value;
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::TcpStream;

fn seeded_journal(dir: &std::path::Path, staff: u32) -> std::path::PathBuf {
    let path = dir.join("drlia.journal");
    let clock = ManualClock::at_epoch();
    let svc = common::service(&clock, 1, Box::new(FileJournal::open(&path).unwrap()));
    for n in 0..staff {
        let form: drlia_core::identity::RegistrationForm = serde_json::from_value(common::form(n)).unwrap();
        svc.register(&form).unwrap();
    }
    path
}

fn key_file(dir: &std::path::Path) -> std::path::PathBuf {
    let path = dir.join("master.key");
    std::fs::write(&path, common::MASTER_KEY).unwrap();
    path
}

#[test]
fn empty_journal_starts_with_zero_identities() {
    let dir = tempfile::tempdir().unwrap();
    let svc = open_service(&GatewayConfig::new(dir.path().join("fresh.journal"))).unwrap();
    assert_eq!(svc.identity_count(), 0);
}

#[test]
fn broken_chain_refuses_to_start_and_reports_seq() {
    let dir = tempfile::tempdir().unwrap();
    let path = seeded_journal(dir.path(), 8);
    let mut config = GatewayConfig::new(&path);
    config.master_key_file = Some(key_file(dir.path()));
    assert_eq!(open_service(&config).unwrap().identity_count(), 8);

    let bytes = std::fs::read(&path).unwrap();
    let mut entries = decode_frames(&bytes).unwrap();
    let mut seen = 0;
    for e in &mut entries {
        if let Record::Audit(a) = &mut e.record {
            seen += 1;
            if seen == 5 {
                a.detail = "forged".into();
            }
        }
    }
    let mut forged = Vec::new();
    for e in &entries {
        encode_frame(e, &mut forged);
    }
    std::fs::write(&path, forged).unwrap();
    match open_service(&config) {
        Err(GatewayError::JournalCorrupt { first_bad_seq, .. }) => assert_eq!(first_bad_seq, 5),
        other => panic!("expected JournalCorrupt, got {:?}", other.err()),
    }
}

#[tokio::test]
async fn occupied_port_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let holder = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let mut config = GatewayConfig::new(dir.path().join("j"));
    config.port = holder.local_addr().unwrap().port();
    match Gateway::bind(&config).await {
        Err(GatewayError::PortUnavailable { port, .. }) => assert_eq!(port, config.port),
        Err(e) => panic!("unexpected error {e}"),
        Ok(_) => panic!("bound an occupied port"),
    }
}

#[tokio::test]
async fn serves_health_over_a_socket() {
    let dir = tempfile::tempdir().unwrap();
    let path = seeded_journal(dir.path(), 3);
    let mut config = GatewayConfig::new(&path);
    config.port = 0;
    config.master_key_file = Some(key_file(dir.path()));
    let gw = Gateway::bind(&config).await.unwrap();
    let addr = gw.local_addr().unwrap();
    let (stop, stopped) = tokio::sync::oneshot::channel::<()>();
    let server = tokio::spawn(gw.run(async {
        let _ = stopped.await;
    }));

    let mut s = TcpStream::connect(addr).await.unwrap();
    s.write_all(b"GET /api/health HTTP/1.1\r\nHost: test\r\nConnection: close\r\n\r\n")
        .await
        .unwrap();
    let mut raw = String::new();
    s.read_to_string(&mut raw).await.unwrap();
    assert!(raw.starts_with("HTTP/1.1 200"), "{raw}");
    let body: Value = serde_json::from_str(raw.split("\r\n\r\n").nth(1).unwrap()).unwrap();
    assert_eq!(body["identities"], 3);
    assert_eq!(body["vault"]["state"], "Active");

    stop.send(()).unwrap();
    server.await.unwrap().unwrap();
}
