use std::collections::BTreeSet;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;
use socproto_cli::detect::{detect_kind, validate_value};
use socproto_cli::scenario::{read_json, LoadError};
use socproto_cli::{inspect, render_inspection, render_report, render_scenario, render_substitutes, run_scenario};
use socproto_core::implementation::ImplementedResourceKind;
use socproto_core::{id::is_valid, Id, SocialEnvironment, SocialProcess};
use socproto_service::{serve, ServiceConfig};

const FAILURE: u8 = 1;
const USAGE: u8 = 2;

#[derive(Parser)]
#[command(name = "socproto", version, about = "Run, check and serve social protocols")]
struct Cli {
    /// Print machine-readable JSON instead of tables.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a protocol, process, environment, transaction or scenario file.
    Validate { file: PathBuf },
    /// Run a scenario file against a fresh process.
    Run { scenario: PathBuf },
    /// Show a process's marking, enabled activities and trace.
    Inspect { process: PathBuf },
    /// Rank candidates near `person` in an environment.
    Substitutes {
        environment: PathBuf,
        person: String,
        #[arg(long, default_value_t = 3)]
        depth: usize,
        /// Restrict to a process: its collaborators are excluded.
        #[arg(long)]
        process: Option<PathBuf>,
        /// Role to fill; defaults to the first role `person` holds in the process.
        #[arg(long)]
        role: Option<String>,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        /// Library directory; omitted means in-memory only.
        #[arg(long)]
        store: Option<PathBuf>,
    },
}

/// A failed command: what to print on stderr and which exit code to use.
struct Failure {
    code: u8,
    message: String,
}

impl From<LoadError> for Failure {
    fn from(e: LoadError) -> Self {
        Failure { code: if e.is_validation() { FAILURE } else { USAGE }, message: e.to_string() }
    }
}

impl From<socproto_core::Error> for Failure {
    fn from(e: socproto_core::Error) -> Self {
        Failure { code: FAILURE, message: format!("{}: {e}", e.code()) }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: USAGE, message: message.into() }
}

fn emit<T: Serialize>(json: bool, value: &T, text: impl FnOnce() -> String) {
    if json {
        println!("{}", serde_json::to_string_pretty(value).expect("serializable output"));
    } else {
        print!("{}", text());
    }
}

fn load<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    serde_json::from_value(read_json(path)?).map_err(|e| Failure { code: FAILURE, message: format!("{}: {e}", path.display()) })
}

fn validate(file: &Path, json: bool) -> Result<bool, Failure> {
    let value = read_json(file)?;
    let kind = detect_kind(&value).ok_or_else(|| usage(format!("{}: unrecognized document", file.display())))?;
    let report = validate_value(kind, &value);
    #[derive(Serialize)]
    struct Out<'a> {
        kind: &'static str,
        valid: bool,
        report: &'a socproto_core::ValidationReport,
    }
    emit(json, &Out { kind: kind.as_str(), valid: report.is_valid(), report: &report }, || {
        format!("{}: {}\n{}", file.display(), kind.as_str(), render_report(&report))
    });
    Ok(report.is_valid())
}

fn substitutes(
    environment: &Path,
    person: &str,
    depth: usize,
    process: Option<&Path>,
    role: Option<&str>,
    json: bool,
) -> Result<bool, Failure> {
    if !is_valid(person) {
        return Err(usage(format!("{person:?} is not a valid id")));
    }
    let env: SocialEnvironment = load(environment)?;
    let found = match process {
        Some(path) => {
            let process: SocialProcess = load(path)?;
            let role = match role {
                Some(r) => r.to_string(),
                None => process
                    .assignment
                    .roles_of(person)
                    .first()
                    .map(|r| r.to_string())
                    .ok_or_else(|| usage(format!("{person} holds no role in {}; pass --role", process.id)))?,
            };
            env.find_substitutes_verbose(&role, person, &process, depth)?
        }
        None => {
            let exclude: BTreeSet<Id> = BTreeSet::from([Id::new(person)?]);
            env.nearby(person, depth, ImplementedResourceKind::Person, &exclude)?
        }
    };
    emit(json, &found, || render_substitutes(&found));
    Ok(true)
}

fn execute(cli: Cli) -> Result<bool, Failure> {
    match cli.command {
        Command::Validate { file } => validate(&file, cli.json),
        Command::Run { scenario } => {
            let report = run_scenario(&scenario)?;
            emit(cli.json, &report, || render_scenario(&report));
            if let Some(step) = report.failed_step {
                let s = &report.steps[step];
                eprintln!("step {step} ({} {}): expected {}, got {}", s.actor, s.activity, s.expect, s.outcome);
            }
            Ok(report.passed)
        }
        Command::Inspect { process } => {
            let process: SocialProcess = load(&process)?;
            let inspection = inspect(&process);
            emit(cli.json, &inspection, || render_inspection(&inspection));
            Ok(inspection.report.is_valid())
        }
        Command::Substitutes { environment, person, depth, process, role } => {
            substitutes(&environment, &person, depth, process.as_deref(), role.as_deref(), cli.json)
        }
        Command::Serve { addr, store } => {
            let mut config = ServiceConfig::new(addr);
            if let Some(store) = store {
                config = config.with_store(store);
            }
            let runtime = tokio::runtime::Runtime::new().map_err(|e| usage(e.to_string()))?;
            runtime
                .block_on(serve(config, async {
                    let _ = tokio::signal::ctrl_c().await;
                }))
                .map_err(|e| usage(e.to_string()))?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_env("SOCPROTO_LOG"))
        .with_writer(std::io::stderr)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { USAGE } else { 0 });
        }
    };
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(FAILURE),
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}
