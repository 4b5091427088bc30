//! `microlang`: check, run and call services.

mod script;

use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::{mpsc, Arc, Mutex};
use std::time::Duration;

use clap::{Parser, Subcommand};
use log::error;

use microlang::checker::{check_program, CheckedProgram};
use microlang::lang::{parse_source, ExecutionMode};
use microlang::net::{
    call, decode_json, encode_json, CallError, CallTarget, LocalRegistry, Location, Protocol,
};
use microlang::runtime::{start_service, Event, EventSink, ServiceConfig, ServiceHandle};

/// Exit statuses, one per outcome class.
mod exit {
    pub const OK: u8 = 0;
    pub const FAILED: u8 = 1;
    pub const USAGE: u8 = 2;
    pub const FAULT: u8 = 3;
    pub const TRANSPORT: u8 = 4;
}

#[derive(Parser)]
#[command(name = "microlang", version, about = "Check, run and call microlang services")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and check service files.
    Check {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Run services until interrupted, or until a script finishes.
    Run {
        /// Stream the event log to standard output as JSON lines.
        #[arg(long)]
        trace: bool,
        /// Seed for process ids, `new` and scheduling.
        #[arg(long)]
        seed: Option<u64>,
        /// Rebind an input or output port: `PORT=LOC` or `SERVICE.PORT=LOC`.
        #[arg(long = "bind", value_name = "[SERVICE.]PORT=LOC")]
        binds: Vec<String>,
        /// Override the protocol of a port: `PORT=PROTO` or `SERVICE.PORT=PROTO`.
        #[arg(long = "protocol", value_name = "[SERVICE.]PORT=PROTO")]
        protocols: Vec<String>,
        /// Override the execution mode of every service.
        #[arg(long)]
        execution: Option<ExecutionMode>,
        /// Drive the services with a client script, then exit.
        #[arg(long)]
        script: Option<PathBuf>,
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Invoke one operation and print the response.
    Call {
        location: String,
        protocol: String,
        operation: String,
        /// Request payload as JSON.
        payload: String,
        #[arg(long)]
        oneway: bool,
        /// Timeout in milliseconds.
        #[arg(long, default_value_t = 10_000)]
        timeout: u64,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Check { files } => cmd_check(&files),
        Command::Run {
            trace,
            seed,
            binds,
            protocols,
            execution,
            script,
            files,
        } => cmd_run(RunConfig {
            files,
            binds,
            protocols,
            trace,
            seed,
            execution,
            script,
        }),
        Command::Call {
            location,
            protocol,
            operation,
            payload,
            oneway,
            timeout,
        } => cmd_call(&location, &protocol, &operation, &payload, oneway, timeout),
    };
    ExitCode::from(code)
}

/// Reads, parses and checks one file, printing diagnostics to standard
/// error. `Err` carries the exit status.
fn load(path: &Path) -> Result<CheckedProgram, u8> {
    let name = path.display().to_string();
    let source = std::fs::read_to_string(path).map_err(|e| {
        eprintln!("{name}: error: {e}");
        exit::USAGE
    })?;
    let program = parse_source(&name, &source).map_err(|e| {
        eprintln!("{e}");
        exit::USAGE
    })?;
    let checked = check_program(program);
    for d in &checked.diagnostics {
        eprintln!("{d}");
    }
    Ok(checked)
}

fn cmd_check(files: &[PathBuf]) -> u8 {
    let mut code = exit::OK;
    for f in files {
        match load(f) {
            Ok(c) if !c.is_ok() => code = code.max(exit::FAILED),
            Ok(_) => {}
            Err(e) => code = code.max(e),
        }
    }
    code
}

struct RunConfig {
    files: Vec<PathBuf>,
    binds: Vec<String>,
    protocols: Vec<String>,
    trace: bool,
    seed: Option<u64>,
    execution: Option<ExecutionMode>,
    script: Option<PathBuf>,
}

/// Service name for a file: its name without the `.ml.svc` suffix.
fn service_name(path: &Path) -> String {
    let file = path
        .file_name()
        .map(|f| f.to_string_lossy().into_owned())
        .unwrap_or_default();
    file.strip_suffix(".ml.svc")
        .or_else(|| file.rsplit_once('.').map(|(stem, _)| stem))
        .unwrap_or(&file)
        .to_owned()
}

/// A `[SERVICE.]PORT=VALUE` override.
struct PortOverride<T> {
    service: Option<String>,
    port: String,
    value: T,
}

impl<T> PortOverride<T> {
    fn applies_to(&self, service: &str, program: &CheckedProgram) -> bool {
        self.service.as_ref().is_none_or(|s| s == service) && program.port_interfaces.contains_key(&self.port)
    }
}

fn parse_override<T>(flag: &str, s: &str) -> Result<PortOverride<T>, String>
where
    T: std::str::FromStr,
    T::Err: std::fmt::Display,
{
    let (target, value) = s
        .split_once('=')
        .ok_or_else(|| format!("--{flag} {s}: expected [SERVICE.]PORT=VALUE"))?;
    let value = value.parse().map_err(|e| format!("--{flag} {s}: {e}"))?;
    let (service, port) = match target.split_once('.') {
        Some((svc, port)) => (Some(svc.to_owned()), port.to_owned()),
        None => (None, target.to_owned()),
    };
    Ok(PortOverride { service, port, value })
}

fn trace_sink() -> EventSink {
    let out = Mutex::new(std::io::stdout());
    Arc::new(move |e: &Event| {
        let mut out = out.lock().unwrap();
        let _ = writeln!(out, "{}", e.to_json_line());
        let _ = out.flush();
    })
}

fn cmd_run(cfg: RunConfig) -> u8 {
    let parsed = (
        cfg.binds
            .iter()
            .map(|b| parse_override::<Location>("bind", b))
            .collect::<Result<Vec<_>, _>>(),
        cfg.protocols
            .iter()
            .map(|p| parse_override::<Protocol>("protocol", p))
            .collect::<Result<Vec<_>, _>>(),
    );
    let (binds, protocols) = match parsed {
        (Ok(b), Ok(p)) => (b, p),
        (Err(e), _) | (_, Err(e)) => {
            eprintln!("error: {e}");
            return exit::USAGE;
        }
    };
    let mut programs = Vec::new();
    for f in &cfg.files {
        match load(f) {
            Ok(c) if c.is_ok() => programs.push((service_name(f), c)),
            Ok(_) => return exit::FAILED,
            Err(code) => return code,
        }
    }
    let ports = binds
        .iter()
        .map(|b| &b.port)
        .chain(protocols.iter().map(|p| &p.port));
    let services = binds
        .iter()
        .map(|b| &b.service)
        .chain(protocols.iter().map(|p| &p.service));
    for (port, service) in ports.zip(services) {
        let declared = programs.iter().any(|(name, p)| {
            service.as_ref().is_none_or(|s| s == name) && p.port_interfaces.contains_key(port)
        });
        if !declared {
            eprintln!("error: no declared port {port}");
            return exit::USAGE;
        }
    }

    let registry = LocalRegistry::new();
    let sink = cfg.trace.then(trace_sink);
    let mut services: Vec<ServiceHandle> = Vec::new();
    for (i, (name, program)) in programs.into_iter().enumerate() {
        let mut config = ServiceConfig::new(&name).registry(registry.clone());
        config.seed = cfg.seed.map(|s| s.wrapping_add(i as u64));
        config.execution = cfg.execution;
        config.sink = sink.clone();
        config.bindings = binds
            .iter()
            .filter(|b| b.applies_to(&name, &program))
            .map(|b| (b.port.clone(), b.value.clone()))
            .collect::<HashMap<_, _>>();
        config.protocols = protocols
            .iter()
            .filter(|p| p.applies_to(&name, &program))
            .map(|p| (p.port.clone(), p.value))
            .collect();
        match start_service(program, config) {
            Ok(h) => services.push(h),
            Err(e) => {
                eprintln!("error: {name}: {e}");
                return exit::FAILED;
            }
        }
    }

    if let Some(path) = &cfg.script {
        let code = match std::fs::read_to_string(path) {
            Ok(text) => script::run(&text, &registry, &services),
            Err(e) => {
                eprintln!("{}: error: {e}", path.display());
                exit::USAGE
            }
        };
        for mut s in services {
            s.shutdown();
        }
        return code;
    }

    let (tx, rx) = mpsc::channel();
    if let Err(e) = ctrlc::set_handler(move || {
        let _ = tx.send(());
    }) {
        error!("cannot install interrupt handler: {e}");
    }
    let _ = rx.recv();
    for mut s in services {
        s.shutdown();
    }
    exit::OK
}

/// Outcome of one invocation, already classified by exit status.
pub(crate) struct Invocation {
    pub code: u8,
    /// Text for standard output.
    pub output: Option<String>,
    pub response: Option<microlang::values::ValueNode>,
}

pub(crate) fn invoke(
    registry: &LocalRegistry,
    location: &str,
    protocol: &str,
    op: &str,
    payload: &str,
    oneway: bool,
    timeout: Duration,
) -> Invocation {
    let usage = |msg: String| {
        eprintln!("error: {msg}");
        Invocation {
            code: exit::USAGE,
            output: None,
            response: None,
        }
    };
    let location: Location = match location.parse() {
        Ok(l) => l,
        Err(e) => return usage(e.to_string()),
    };
    let protocol: Protocol = match protocol.parse() {
        Ok(p) => p,
        Err(e) => return usage(e),
    };
    let payload = match decode_json(payload, None) {
        Ok(v) => v,
        Err(e) => return usage(format!("payload: {e}")),
    };
    let kind = if oneway {
        microlang::lang::OpKind::OneWay
    } else {
        microlang::lang::OpKind::RequestResponse
    };
    let target = CallTarget {
        location: &location,
        protocol,
        registry,
        timeout,
    };
    match call(target, op, &payload, kind, None) {
        Ok(v) => Invocation {
            code: exit::OK,
            output: v.as_ref().map(encode_json),
            response: v,
        },
        Err(CallError::Fault(f)) => Invocation {
            code: exit::FAULT,
            output: Some(f.to_json().to_string()),
            response: None,
        },
        Err(e @ CallError::Transport(_)) => {
            eprintln!("error: {e}");
            Invocation {
                code: exit::TRANSPORT,
                output: None,
                response: None,
            }
        }
    }
}

fn cmd_call(location: &str, protocol: &str, op: &str, payload: &str, oneway: bool, timeout: u64) -> u8 {
    let registry = LocalRegistry::new();
    let inv = invoke(
        &registry,
        location,
        protocol,
        op,
        payload,
        oneway,
        Duration::from_millis(timeout),
    );
    if let Some(out) = inv.output {
        println!("{out}");
    }
    inv.code
}
