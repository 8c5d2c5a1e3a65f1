use std::thread;
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use drlia_core::identity::Role;
use drlia_core::mail::{parse_token_body, TOKEN_SUBJECT};
use reqwest::blocking::{Client as Http, RequestBuilder};
use reqwest::{Method, StatusCode};
use serde_json::{json, Value};

/// The gateway admits ten unauthenticated requests per second per address.
const RATE_LIMIT_RETRIES: u32 = 5;

pub struct Login {
    pub staff_number: String,
    pub email: String,
    pub password: String,
    pub mail_password: String,
}

pub struct Client {
    http: Http,
    base: String,
}

impl Client {
    pub fn new(url: &str) -> Result<Self> {
        let http = Http::builder().timeout(Duration::from_secs(60)).build()?;
        Ok(Self {
            http,
            base: url.trim_end_matches('/').to_owned(),
        })
    }

    fn send(
        &self,
        method: Method,
        path: &str,
        bearer: Option<&str>,
        body: Option<&Value>,
    ) -> Result<(StatusCode, Value)> {
        let url = format!("{}{path}", self.base);
        let build = || -> RequestBuilder {
            let mut req = self.http.request(method.clone(), &url);
            if let Some(b) = bearer {
                req = req.bearer_auth(b);
            }
            if let Some(b) = body {
                req = req.json(b);
            }
            req
        };
        let mut attempt = 0;
        loop {
            let resp = build().send().with_context(|| format!("{method} {url}"))?;
            let status = resp.status();
            if status == StatusCode::TOO_MANY_REQUESTS && attempt < RATE_LIMIT_RETRIES {
                attempt += 1;
                thread::sleep(Duration::from_millis(1100));
                continue;
            }
            let text = resp.text()?;
            let json = if text.is_empty() {
                Value::Null
            } else {
                serde_json::from_str(&text)?
            };
            if !status.is_success() {
                bail!(
                    "{} ({}): {}",
                    json["error_code"].as_str().unwrap_or("Error"),
                    status.as_u16(),
                    json["message"].as_str().unwrap_or(text.as_str())
                );
            }
            return Ok((status, json));
        }
    }

    fn post(&self, path: &str, bearer: Option<&str>, body: Option<&Value>) -> Result<Value> {
        Ok(self.send(Method::POST, path, bearer, body)?.1)
    }

    pub fn register(&self, form: &Value) -> Result<Value> {
        self.post("/api/register", None, Some(form))
    }

    /// Opens a mailbox session, takes the newest unread code (the inbox lists
    /// newest first) and closes the mailbox.
    fn fetch_code(&self, email: &str, mail_password: &str) -> Result<String> {
        let login = self.post(
            "/api/mail/login",
            None,
            Some(&json!({"email": email, "password": mail_password})),
        )?;
        let handle = login["handle"]
            .as_str()
            .ok_or_else(|| anyhow!("mail login returned no handle"))?
            .to_owned();
        let inbox = self.send(Method::GET, "/api/mail/inbox?unread_only=true", Some(&handle), None);
        let _ = self.send(Method::DELETE, "/api/mail/session", Some(&handle), None);
        let (_, inbox) = inbox?;
        inbox
            .as_array()
            .into_iter()
            .flatten()
            .filter(|m| m["subject"] == TOKEN_SUBJECT)
            .find_map(|m| m["body"].as_str().and_then(parse_token_body).map(str::to_owned))
            .ok_or_else(|| anyhow!("no unread code in the mailbox of {email}"))
    }

    /// Runs credentials, code request, mailbox read and code submission.
    /// Returns the authenticated session id.
    pub fn login(&self, l: &Login) -> Result<String> {
        let session = self.post("/api/session", None, None)?;
        let sid = session["session_id"]
            .as_str()
            .ok_or_else(|| anyhow!("no session id"))?
            .to_owned();
        self.post(
            &format!("/api/session/{sid}/credentials"),
            None,
            Some(&json!({"staff_number": l.staff_number, "password": l.password})),
        )?;
        self.post(&format!("/api/session/{sid}/token"), None, None)?;
        let code = self.fetch_code(&l.email, &l.mail_password)?;
        let s = self.post(
            &format!("/api/session/{sid}/verify"),
            None,
            Some(&json!({"code": code})),
        )?;
        if s["state"] != "Authenticated" {
            bail!("session ended in state {}", s["state"]);
        }
        Ok(sid)
    }

    pub fn logout(&self, sid: &str) -> Result<()> {
        self.send(Method::DELETE, &format!("/api/session/{sid}"), None, None)?;
        Ok(())
    }

    pub fn grant(&self, sid: &str, staff_number: &str, role: Role) -> Result<Value> {
        self.post(
            &format!("/api/staff/{staff_number}/grant"),
            Some(sid),
            Some(&json!({"role": role})),
        )
    }

    /// Requests the confirmation code, reads it from the mailbox and confirms.
    pub fn lockdown(&self, sid: &str, l: &Login) -> Result<String> {
        self.post("/api/lockdown", Some(sid), None)?;
        let code = self.fetch_code(&l.email, &l.mail_password)?;
        let v = self.post("/api/lockdown", Some(sid), Some(&json!({"confirmation_code": code})))?;
        let vault = &v["vault"];
        Ok(match vault["state"].as_str() {
            Some("Revoked") => format!(
                "revoked at {} by {}",
                vault["revoked_at"].as_str().unwrap_or("?"),
                vault["revoked_by"].as_str().unwrap_or("?")
            ),
            Some(state) => state.to_owned(),
            None => vault.to_string(),
        })
    }
}
