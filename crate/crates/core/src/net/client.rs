//! Outbound invocations over either protocol.

use std::io::BufReader;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use thiserror::Error;

use super::fault::{Fault, FaultKind};
use super::http;
use super::json::{decode_json, encode_json};
use super::sodep::{read_frame, write_frame, MessageKind, WireMessage};
use super::{dial, LocalRegistry, Location, Protocol};
use crate::lang::OpKind;
use crate::values::{TypeEnv, TypeExpr, ValueNode};

static NEXT_CORR_ID: AtomicU64 = AtomicU64::new(1);

/// Where and how to send.
#[derive(Clone, Copy)]
pub struct CallTarget<'a> {
    pub location: &'a Location,
    pub protocol: Protocol,
    pub registry: &'a LocalRegistry,
    pub timeout: Duration,
}

#[derive(Debug, Error)]
pub enum CallError {
    /// The remote side answered with a fault.
    #[error("fault reply: {0}")]
    Fault(Fault),
    /// No answer could be obtained.
    #[error("transport failure: {0}")]
    Transport(String),
}

impl CallError {
    /// The fault a calling process sees.
    pub fn as_fault(&self) -> Fault {
        match self {
            CallError::Fault(f) => f.clone(),
            CallError::Transport(_) => Fault::new(FaultKind::IOFault),
        }
    }
}

fn transport(e: impl std::fmt::Display) -> CallError {
    CallError::Transport(e.to_string())
}

/// Performs one invocation. One-way calls return `Ok(None)` once the
/// receiver has acknowledged routing; request-response calls return the
/// response value, read with `response_type` when given.
pub fn call(
    target: CallTarget<'_>,
    op: &str,
    payload: &ValueNode,
    kind: OpKind,
    response_type: Option<(&TypeExpr, &TypeEnv)>,
) -> Result<Option<ValueNode>, CallError> {
    match target.protocol {
        Protocol::SodepLite => call_sodep(target, op, payload, kind),
        Protocol::Http => call_http(target, op, payload, kind, response_type),
    }
}

fn call_sodep(
    target: CallTarget<'_>,
    op: &str,
    payload: &ValueNode,
    kind: OpKind,
) -> Result<Option<ValueNode>, CallError> {
    let mut conn = dial(target.location, target.registry, target.timeout).map_err(transport)?;
    let corr_id = NEXT_CORR_ID.fetch_add(1, Ordering::Relaxed);
    write_frame(&mut conn, &WireMessage::request(corr_id, op, payload.clone())).map_err(transport)?;
    let mut reader = BufReader::new(conn);
    loop {
        let msg = read_frame(&mut reader)
            .map_err(transport)?
            .ok_or_else(|| transport("connection closed before reply"))?;
        if msg.corr_id != corr_id {
            continue;
        }
        return match msg.kind {
            MessageKind::Response => Ok(match kind {
                OpKind::OneWay => None,
                OpKind::RequestResponse => Some(msg.payload),
            }),
            MessageKind::Fault => Err(CallError::Fault(
                Fault::from_value(&msg.payload).ok_or_else(|| transport("malformed fault frame"))?,
            )),
            MessageKind::Request => Err(transport("unexpected request frame in reply")),
        };
    }
}

fn call_http(
    target: CallTarget<'_>,
    op: &str,
    payload: &ValueNode,
    kind: OpKind,
    response_type: Option<(&TypeExpr, &TypeEnv)>,
) -> Result<Option<ValueNode>, CallError> {
    let mut conn = dial(target.location, target.registry, target.timeout).map_err(transport)?;
    let host = match target.location {
        Location::Socket { host, port } => format!("{host}:{port}"),
        Location::Local { name } => name.clone(),
    };
    let body = encode_json(payload);
    http::write_request(&mut conn, &host, &format!("/{op}"), body.as_bytes()).map_err(transport)?;
    let resp = http::read_response(&mut BufReader::new(conn)).map_err(transport)?;
    let text = String::from_utf8(resp.body).map_err(transport)?;
    match resp.status {
        200 => decode_json(&text, response_type)
            .map(Some)
            .map_err(|e| CallError::Fault(Fault::at(FaultKind::TypeMismatch, e.path.to_string()))),
        202 if kind == OpKind::OneWay => Ok(None),
        status => {
            let fault = serde_json::from_str(&text)
                .ok()
                .and_then(|v| Fault::from_json(&v))
                .or_else(|| {
                    FaultKind::ALL
                        .into_iter()
                        .find(|k| k.http_status() == status)
                        .map(Fault::new)
                });
            match fault {
                Some(f) => Err(CallError::Fault(f)),
                None => Err(transport(format!("unexpected HTTP status {status}"))),
            }
        }
    }
}
