mod client;
mod offline;

use std::io::IsTerminal;
use std::net::IpAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand};
use drlia_core::identity::Role;
use drlia_gateway::{Gateway, GatewayConfig};
use tracing_subscriber::EnvFilter;

use crate::client::{Client, Login};

const DEFAULT_URL: &str = "http://127.0.0.1:8080";

/// Operator tool for the examination and records unit service.
#[derive(Parser)]
#[command(name = "drlia", version)]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Replay the journal and serve the HTTP API.
    Serve(ServeArgs),
    /// Register a staff identity.
    Register(RegisterArgs),
    /// Grant a role, or bootstrap the first administrator offline.
    Approve(ApproveArgs),
    /// Revoke the vault master key (two-step, confirmed by mailed code).
    Lockdown(LockdownArgs),
    /// Check a journal's audit hash chain offline.
    AuditVerify(JournalArg),
    /// Print a journal's audit log as tab-separated lines.
    AuditExport(JournalArg),
    /// Frequency, chi-square and Likert reports from CSV tables.
    Stats(StatsArgs),
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, env = "DRLIA_PORT", default_value_t = 8080)]
    port: u16,
    #[arg(long, env = "DRLIA_BIND", default_value = "127.0.0.1")]
    bind: IpAddr,
    #[arg(long, env = "DRLIA_JOURNAL")]
    journal: PathBuf,
    /// 32 raw bytes or 64 hex characters.
    #[arg(long, env = "DRLIA_MASTER_KEY_FILE")]
    master_key_file: Option<PathBuf>,
    /// One-time code lifetime in seconds.
    #[arg(long, env = "DRLIA_TOKEN_TTL", default_value_t = 300)]
    token_ttl: u32,
}

#[derive(Args)]
struct UrlArg {
    #[arg(long, env = "DRLIA_URL", default_value = DEFAULT_URL)]
    url: String,
}

#[derive(Args)]
struct RegisterArgs {
    #[command(flatten)]
    url: UrlArg,
    #[arg(long)]
    name: String,
    #[arg(long)]
    staff_number: String,
    #[arg(long)]
    email: String,
    #[arg(long)]
    contact_number: String,
    #[arg(long)]
    sex: String,
    #[arg(long, env = "DRLIA_PASSWORD", hide_env_values = true)]
    password: String,
}

/// An administrator's full sign-in material.
#[derive(Args)]
struct AdminArgs {
    /// Administrator staff number.
    #[arg(long)]
    admin: Option<String>,
    #[arg(long)]
    admin_email: Option<String>,
    #[arg(long, env = "DRLIA_PASSWORD", hide_env_values = true)]
    password: Option<String>,
    #[arg(long, env = "DRLIA_MAIL_PASSWORD", hide_env_values = true)]
    mail_password: Option<String>,
}

impl AdminArgs {
    fn login(&self) -> Result<Login> {
        fn need(v: &Option<String>, flag: &str) -> Result<String> {
            v.clone().with_context(|| format!("{flag} is required"))
        }
        Ok(Login {
            staff_number: need(&self.admin, "--admin")?,
            email: need(&self.admin_email, "--admin-email")?,
            password: need(&self.password, "--password")?,
            mail_password: need(&self.mail_password, "--mail-password")?,
        })
    }
}

#[derive(Args)]
struct ApproveArgs {
    /// Staff number to approve.
    staff_number: String,
    #[arg(long, default_value = "read-only")]
    role: Role,
    /// Bootstrap this identity as the first administrator directly in the
    /// journal. The service must not be running.
    #[arg(long, conflicts_with_all = ["admin", "admin_email", "password", "mail_password"])]
    journal: Option<PathBuf>,
    #[command(flatten)]
    url: UrlArg,
    #[command(flatten)]
    admin: AdminArgs,
}

#[derive(Args)]
struct LockdownArgs {
    #[command(flatten)]
    url: UrlArg,
    #[command(flatten)]
    admin: AdminArgs,
    /// Acknowledge that every sealed record becomes permanently unreadable.
    #[arg(long)]
    yes: bool,
}

#[derive(Args)]
struct JournalArg {
    #[arg(long, env = "DRLIA_JOURNAL")]
    journal: PathBuf,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long)]
    input: PathBuf,
    /// Treat the input as `score,count` Likert responses.
    #[arg(long, conflicts_with = "chi")]
    likert: bool,
    /// Expected frequencies for a goodness-of-fit test.
    #[arg(long)]
    chi: Option<PathBuf>,
    #[arg(long, requires = "chi")]
    critical: Option<f64>,
}

fn init_logging() {
    let filter = EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info"));
    let _ = tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .with_ansi(std::io::stderr().is_terminal())
        .try_init();
}

fn serve(a: ServeArgs) -> Result<()> {
    let config = GatewayConfig {
        bind: a.bind,
        port: a.port,
        master_key_file: a.master_key_file,
        token_ttl_secs: a.token_ttl,
        ..GatewayConfig::new(a.journal)
    };
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async {
        let gw = Gateway::bind(&config).await?;
        println!("listening on http://{}", gw.local_addr()?);
        gw.run(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
        Ok(())
    })
}

fn register(a: RegisterArgs) -> Result<()> {
    let client = Client::new(&a.url.url)?;
    let reply = client.register(&serde_json::json!({
        "name": a.name,
        "staff_number": a.staff_number,
        "email": a.email,
        "contact_number": a.contact_number,
        "sex": a.sex,
        "password": a.password,
    }))?;
    let id = &reply["identity"];
    println!(
        "registered {} ({}), status {}",
        id["staff_number"].as_str().unwrap_or("?"),
        id["name"].as_str().unwrap_or("?"),
        id["status"].as_str().unwrap_or("?")
    );
    println!("mail password: {}", reply["mail_password"].as_str().unwrap_or(""));
    Ok(())
}

fn approve(a: ApproveArgs) -> Result<()> {
    if let Some(journal) = a.journal {
        if a.role != Role::Admin {
            bail!("offline approval only bootstraps the first administrator; pass --role admin");
        }
        let id = offline::bootstrap_admin(&journal, &a.staff_number)?;
        println!("{} is now {}", id.staff_number, id.role);
        return Ok(());
    }
    let client = Client::new(&a.url.url)?;
    let sid = client.login(&a.admin.login()?)?;
    let granted = client.grant(&sid, &a.staff_number, a.role);
    let _ = client.logout(&sid);
    let id = granted?;
    println!(
        "{} is now {}, status {}",
        id["staff_number"].as_str().unwrap_or("?"),
        id["role"].as_str().unwrap_or("?"),
        id["status"].as_str().unwrap_or("?")
    );
    Ok(())
}

fn lockdown(a: LockdownArgs) -> Result<()> {
    if !a.yes {
        let e = Cli::command().error(
            ErrorKind::MissingRequiredArgument,
            "lockdown destroys access to every sealed record; rerun with --yes to proceed",
        );
        usage_error(&e);
    }
    let login = a.admin.login()?;
    let client = Client::new(&a.url.url)?;
    let sid = client.login(&login)?;
    let outcome = client.lockdown(&sid, &login);
    let _ = client.logout(&sid);
    println!("vault {}", outcome?);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.verb {
        Verb::Serve(a) => serve(a),
        Verb::Register(a) => register(a),
        Verb::Approve(a) => approve(a),
        Verb::Lockdown(a) => lockdown(a),
        Verb::AuditVerify(a) => offline::audit_verify(&a.journal),
        Verb::AuditExport(a) => offline::audit_export(&a.journal),
        Verb::Stats(a) => offline::stats(&a.input, a.likert, a.chi.as_deref(), a.critical),
    }
}

/// Prints a clap error with the usage line and exits 2.
fn usage_error(e: &clap::Error) -> ! {
    let _ = e.print();
    if !e.to_string().contains("Usage:") {
        eprintln!("\n{}", Cli::command().render_usage());
    }
    std::process::exit(2)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => usage_error(&e),
        Err(e) => e.exit(),
    };
    init_logging();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
