use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::connect_info::MockConnectInfo;
use axum::extract::{ConnectInfo, DefaultBodyLimit, Path, Query, Request, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use drlia_core::audit::AuditFilter;
use drlia_core::auth::{MailHandle, SessionId, SessionState};
use drlia_core::identity::{RegistrationForm, Role};
use drlia_core::vault::{RecordFilter, RecordId, RecordKind, MAX_DOCUMENT_BYTES};
use drlia_core::{Error, Service};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::json;

use crate::error::ApiError;
use crate::limiter::RateLimiter;

type ApiResult = Result<Response, ApiError>;

#[derive(Clone)]
pub struct AppState {
    pub svc: Arc<Service>,
    pub limiter: Arc<RateLimiter>,
}

impl AppState {
    pub fn new(svc: Arc<Service>, rate_limit: u32) -> Self {
        let limiter = Arc::new(RateLimiter::new(rate_limit, svc.clock().clone()));
        Self { svc, limiter }
    }
}

pub fn router(state: AppState) -> Router {
    // base64 inflates by 4/3; leave room for the JSON around it
    let body_limit = MAX_DOCUMENT_BYTES / 3 * 4 + 64 * 1024;
    Router::new()
        .route("/api/health", get(health))
        .route("/api/register", post(register))
        .route("/api/session", post(begin_session))
        .route("/api/session/{id}", get(get_session).delete(end_session))
        .route("/api/session/{id}/credentials", post(credentials))
        .route("/api/session/{id}/token", post(request_token))
        .route("/api/session/{id}/verify", post(verify))
        .route("/api/staff/{*path}", post(grant))
        .route("/api/records", get(list_records).post(seal_record))
        .route("/api/records/{id}", get(open_record))
        .route("/api/lockdown", post(lockdown))
        .route("/api/audit", get(audit))
        .route("/api/mail/login", post(mail_login))
        .route("/api/mail/session", axum::routing::delete(mail_logout))
        .route("/api/mail/inbox", get(inbox))
        .fallback(|| async { ApiError::NotFound })
        .method_not_allowed_fallback(|| async { ApiError::MethodNotAllowed })
        .layer(middleware::from_fn_with_state(state.clone(), rate_limit))
        .layer(DefaultBodyLimit::max(body_limit))
        .with_state(state)
}

/// Requests that do not carry an authenticated session count against the
/// caller's address.
async fn rate_limit(State(st): State<AppState>, req: Request, next: Next) -> Response {
    if req.uri().path() == "/api/health" {
        return next.run(req).await;
    }
    let authenticated = bearer(req.headers())
        .and_then(SessionId::parse)
        .and_then(|sid| st.svc.session(&sid).ok())
        .is_some_and(|s| s.state == SessionState::Authenticated);
    if !authenticated {
        let ext = req.extensions();
        let addr = ext
            .get::<ConnectInfo<SocketAddr>>()
            .map(|c| c.0)
            .or_else(|| ext.get::<MockConnectInfo<SocketAddr>>().map(|c| c.0))
            .map_or(IpAddr::V4(Ipv4Addr::UNSPECIFIED), |a| a.ip());
        if !st.limiter.admit(addr) {
            return ApiError::RateLimited.into_response();
        }
    }
    next.run(req).await
}

fn bearer(headers: &HeaderMap) -> Option<&str> {
    let value = headers.get(header::AUTHORIZATION)?.to_str().ok()?;
    let (scheme, token) = value.split_once(' ')?;
    scheme.eq_ignore_ascii_case("bearer").then(|| token.trim())
}

fn session_bearer(headers: &HeaderMap) -> Result<SessionId, ApiError> {
    bearer(headers)
        .and_then(SessionId::parse)
        .ok_or(ApiError::Service(Error::NotAuthenticated))
}

fn path_session(id: &str) -> Result<SessionId, ApiError> {
    SessionId::parse(id).ok_or(ApiError::Service(Error::UnknownSession))
}

/// Parses a JSON body; an empty body reads as `{}`.
fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    let raw: &[u8] = if body.iter().all(u8::is_ascii_whitespace) {
        b"{}"
    } else {
        body
    };
    serde_json::from_slice(raw).map_err(|e| ApiError::Malformed(e.to_string()))
}

/// Runs a service call on the blocking pool (password hashing and record
/// encryption are CPU-bound).
async fn call<T, F>(st: &AppState, f: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce(&Service) -> drlia_core::Result<T> + Send + 'static,
{
    let svc = st.svc.clone();
    tokio::task::spawn_blocking(move || f(&svc))
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))?
        .map_err(ApiError::from)
}

fn ok(value: impl serde::Serialize) -> ApiResult {
    Ok(Json(value).into_response())
}

fn created(value: impl serde::Serialize) -> ApiResult {
    Ok((StatusCode::CREATED, Json(value)).into_response())
}

async fn health(State(st): State<AppState>) -> ApiResult {
    ok(json!({
        "status": "ready",
        "identities": st.svc.identity_count(),
        "audit_entries": st.svc.audit_len(),
        "vault": st.svc.vault_status(),
    }))
}

async fn register(State(st): State<AppState>, body: Bytes) -> ApiResult {
    let form: RegistrationForm = parse(&body)?;
    let reg = call(&st, move |svc| svc.register(&form)).await?;
    created(json!({ "identity": reg.identity, "mail_password": reg.mail_password.as_str() }))
}

async fn begin_session(State(st): State<AppState>) -> ApiResult {
    created(call(&st, |svc| svc.begin_session()).await?)
}

async fn get_session(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let sid = path_session(&id)?;
    ok(call(&st, move |svc| svc.session(&sid)).await?)
}

async fn end_session(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let sid = path_session(&id)?;
    ok(call(&st, move |svc| svc.terminate_session(&sid)).await?)
}

#[derive(Deserialize)]
struct Credentials {
    staff_number: String,
    password: String,
}

async fn credentials(State(st): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult {
    let sid = path_session(&id)?;
    let c: Credentials = parse(&body)?;
    ok(call(&st, move |svc| {
        svc.submit_credentials(&sid, &c.staff_number, &c.password)
    })
    .await?)
}

async fn request_token(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let sid = path_session(&id)?;
    ok(call(&st, move |svc| svc.request_token(&sid)).await?)
}

#[derive(Deserialize)]
struct Code {
    code: String,
}

async fn verify(State(st): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult {
    let sid = path_session(&id)?;
    let c: Code = parse(&body)?;
    ok(call(&st, move |svc| svc.submit_token(&sid, &c.code)).await?)
}

#[derive(Deserialize)]
struct Grant {
    role: Role,
}

/// `POST /api/staff/{staff_number}/grant`. Staff numbers contain a slash,
/// so the path is accepted with it either escaped or literal.
async fn grant(State(st): State<AppState>, headers: HeaderMap, Path(path): Path<String>, body: Bytes) -> ApiResult {
    let Some((staff, "grant")) = path.rsplit_once('/') else {
        return Err(ApiError::NotFound);
    };
    let staff = staff.to_owned();
    let sid = session_bearer(&headers)?;
    let g: Grant = parse(&body)?;
    ok(call(&st, move |svc| svc.grant_privilege(&sid, &staff, g.role)).await?)
}

#[derive(Deserialize)]
struct ListQuery {
    student_id: Option<String>,
    kind: Option<RecordKind>,
}

async fn list_records(
    State(st): State<AppState>,
    headers: HeaderMap,
    query: Result<Query<ListQuery>, axum::extract::rejection::QueryRejection>,
) -> ApiResult {
    let sid = session_bearer(&headers)?;
    let Query(q) = query.map_err(|e| ApiError::Malformed(e.body_text()))?;
    let filter = RecordFilter {
        student_id: q.student_id,
        kind: q.kind,
    };
    ok(call(&st, move |svc| svc.list_records(&sid, &filter)).await?)
}

async fn open_record(State(st): State<AppState>, headers: HeaderMap, Path(id): Path<String>) -> ApiResult {
    let sid = session_bearer(&headers)?;
    let rid = RecordId::parse(&id).ok_or(ApiError::Service(Error::UnknownRecord))?;
    let (meta, doc) = call(&st, move |svc| svc.open_record(&sid, &rid)).await?;
    ok(json!({ "metadata": meta, "document": B64.encode(doc.as_slice()) }))
}

#[derive(Deserialize)]
struct SealBody {
    student_id: String,
    kind: RecordKind,
    /// Base64 (standard alphabet, padded).
    document: String,
}

async fn seal_record(State(st): State<AppState>, headers: HeaderMap, body: Bytes) -> ApiResult {
    let sid = session_bearer(&headers)?;
    let b: SealBody = parse(&body)?;
    let doc = B64
        .decode(b.document.as_bytes())
        .map_err(|e| ApiError::Malformed(format!("document: {e}")))?;
    created(call(&st, move |svc| svc.seal_record(&sid, &b.student_id, b.kind, &doc)).await?)
}

#[derive(Deserialize, Default)]
struct LockdownBody {
    confirmation_code: Option<String>,
}

/// Without a code: mails a confirmation code (202). With one: revokes.
async fn lockdown(State(st): State<AppState>, headers: HeaderMap, body: Bytes) -> ApiResult {
    let sid = session_bearer(&headers)?;
    let b: LockdownBody = parse(&body)?;
    match b.confirmation_code {
        None => {
            let receipt = call(&st, move |svc| svc.request_lockdown_code(&sid)).await?;
            Ok((StatusCode::ACCEPTED, Json(receipt)).into_response())
        }
        Some(code) => {
            let status = call(&st, move |svc| svc.lockdown(&sid, &code)).await?;
            ok(json!({ "vault": status }))
        }
    }
}

async fn audit(
    State(st): State<AppState>,
    headers: HeaderMap,
    query: Result<Query<AuditFilter>, axum::extract::rejection::QueryRejection>,
) -> ApiResult {
    let sid = session_bearer(&headers)?;
    let Query(filter) = query.map_err(|e| ApiError::Malformed(e.body_text()))?;
    ok(call(&st, move |svc| svc.query_audit(&sid, &filter)).await?)
}

#[derive(Deserialize)]
struct MailLogin {
    email: String,
    password: String,
}

async fn mail_login(State(st): State<AppState>, body: Bytes) -> ApiResult {
    let m: MailLogin = parse(&body)?;
    let handle = call(&st, move |svc| svc.login_mailbox(&m.email, &m.password)).await?;
    ok(json!({ "handle": handle }))
}

fn mail_bearer(headers: &HeaderMap) -> Result<MailHandle, ApiError> {
    bearer(headers)
        .and_then(MailHandle::parse)
        .ok_or(ApiError::Service(Error::UnknownMailbox))
}

async fn mail_logout(State(st): State<AppState>, headers: HeaderMap) -> ApiResult {
    let handle = mail_bearer(&headers)?;
    st.svc.logout_mailbox(&handle);
    Ok(StatusCode::NO_CONTENT.into_response())
}

#[derive(Deserialize)]
struct InboxQuery {
    #[serde(default)]
    unread_only: bool,
}

async fn inbox(
    State(st): State<AppState>,
    headers: HeaderMap,
    query: Result<Query<InboxQuery>, axum::extract::rejection::QueryRejection>,
) -> ApiResult {
    let handle = mail_bearer(&headers)?;
    let Query(q) = query.map_err(|e| ApiError::Malformed(e.body_text()))?;
    ok(call(&st, move |svc| svc.read_inbox(&handle, q.unread_only)).await?)
}
