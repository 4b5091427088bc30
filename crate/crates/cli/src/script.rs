//! Client scripts for `run --script`.
//!
//! One command per line; blank lines and `#` comments are skipped.
//!
//! ```text
//! sid = call local://shop sodep-lite login {}
//! call local://shop sodep-lite addToCart {"sid":"${sid}","item":"book"}
//! call local://shop sodep-lite logout {"sid":"${sid}"} --oneway
//! sleep 50
//! idle
//! ```
//!
//! `NAME = call ...` stores the response root for later `${NAME}`
//! substitution. Fault replies are printed and do not stop the script.

use std::collections::HashMap;
use std::thread;
use std::time::{Duration, Instant};

use microlang::net::LocalRegistry;
use microlang::runtime::ServiceHandle;
use microlang::values::BasicValue;

use crate::{exit, invoke};

const CALL_TIMEOUT: Duration = Duration::from_secs(10);
const IDLE_TIMEOUT: Duration = Duration::from_secs(10);

fn substitute(line: &str, vars: &HashMap<String, String>) -> Result<String, String> {
    let mut out = String::new();
    let mut rest = line;
    while let Some(start) = rest.find("${") {
        out.push_str(&rest[..start]);
        let end = rest[start..]
            .find('}')
            .ok_or_else(|| "unterminated ${".to_owned())?;
        let name = &rest[start + 2..start + end];
        let value = vars.get(name).ok_or_else(|| format!("unknown variable {name}"))?;
        out.push_str(value);
        rest = &rest[start + end + 1..];
    }
    out.push_str(rest);
    Ok(out)
}

/// Runs `text` against already started services. Returns the exit status.
pub fn run(text: &str, registry: &LocalRegistry, services: &[ServiceHandle]) -> u8 {
    let mut vars = HashMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fail = |msg: String| {
            eprintln!("script:{}: error: {msg}", n + 1);
            exit::USAGE
        };
        let line = match substitute(line, &vars) {
            Ok(l) => l,
            Err(e) => return fail(e),
        };
        let (store, command) = match line.split_once(" = ") {
            Some((name, cmd)) if !name.contains(char::is_whitespace) => (Some(name.to_owned()), cmd),
            _ => (None, line.as_str()),
        };
        let (verb, args) = command.split_once(' ').unwrap_or((command, ""));
        match verb {
            "sleep" => match args.trim().parse() {
                Ok(ms) => thread::sleep(Duration::from_millis(ms)),
                Err(_) => return fail(format!("bad duration {args:?}")),
            },
            "idle" => {
                let end = Instant::now() + IDLE_TIMEOUT;
                for s in services {
                    if !s.wait_idle(end.saturating_duration_since(Instant::now())) {
                        return fail(format!("service {} did not become idle", s.name()));
                    }
                }
            }
            "call" => {
                let mut parts = args.splitn(4, ' ');
                let (Some(loc), Some(proto), Some(op), Some(rest)) =
                    (parts.next(), parts.next(), parts.next(), parts.next())
                else {
                    return fail("expected call LOC PROTO OP JSON [--oneway]".into());
                };
                let (payload, oneway) = match rest.trim_end().strip_suffix("--oneway") {
                    Some(p) => (p.trim_end(), true),
                    None => (rest.trim_end(), false),
                };
                let inv = invoke(registry, loc, proto, op, payload, oneway, CALL_TIMEOUT);
                match inv.code {
                    exit::OK | exit::FAULT => {}
                    code => return code,
                }
                eprintln!("{op} -> {}", inv.output.as_deref().unwrap_or("ok"));
                if let (Some(name), Some(v)) = (&store, &inv.response) {
                    let text = match v.root() {
                        BasicValue::String(s) => s.clone(),
                        other => format!("{other}"),
                    };
                    vars.insert(name.clone(), text);
                }
            }
            other => return fail(format!("unknown command {other:?}")),
        }
    }
    exit::OK
}
