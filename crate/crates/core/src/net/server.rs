//! Serving an input port: accept connections, decode requests, hand them to
//! the service, and write replies back in the port's protocol.

use std::io::{BufReader, Write};
use std::sync::mpsc::{self, Receiver, Sender};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};

use log::{debug, warn};

use super::fault::{Fault, FaultKind};
use super::http;
use super::json::{decode_json, encode_json};
use super::sodep::{read_frame, write_frame, MessageKind, WireMessage};
use super::{Conn, Listener, Location, Protocol};
use crate::lang::OpKind;
use crate::values::{TypeEnv, TypeExpr, ValueNode};

/// Outcome sent back on a request-response reply channel.
pub type Reply = Result<ValueNode, Fault>;

/// What the transport layer needs to know about an operation.
#[derive(Debug, Clone)]
pub struct OpInfo {
    pub kind: OpKind,
    pub request: TypeExpr,
}

/// The receiving side of an input port.
pub trait Inbound: Send + Sync + 'static {
    fn operation(&self, op: &str) -> Option<OpInfo>;

    fn types(&self) -> &TypeEnv;

    /// Routes one request. An `Err` is returned to the caller at once; for
    /// request-response operations the reply arrives later on `reply`.
    fn deliver(
        &self,
        op: &str,
        payload: ValueNode,
        reply: Option<Sender<Reply>>,
        origin: &str,
    ) -> Result<(), Fault>;
}

/// A running accept loop for one input port.
pub struct PortServer {
    listener: Arc<Listener>,
    thread: Option<JoinHandle<()>>,
}

impl PortServer {
    pub fn location(&self) -> &Location {
        self.listener.location()
    }

    /// Closes the listener and waits for the accept loop to exit. Open
    /// connections finish their current exchange.
    pub fn shutdown(&mut self) {
        self.listener.close();
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for PortServer {
    fn drop(&mut self) {
        self.shutdown();
    }
}

pub fn serve(listener: Listener, protocol: Protocol, handler: Arc<dyn Inbound>) -> PortServer {
    let listener = Arc::new(listener);
    let l = listener.clone();
    let thread = thread::Builder::new()
        .name(format!("accept {}", listener.location()))
        .spawn(move || loop {
            match l.accept() {
                Ok(Some(conn)) => {
                    let handler = handler.clone();
                    let _ = thread::Builder::new().name("conn".into()).spawn(move || {
                        let peer = conn.peer();
                        let result = match protocol {
                            Protocol::SodepLite => serve_sodep(conn, &*handler),
                            Protocol::Http => serve_http(conn, &*handler),
                        };
                        if let Err(e) = result {
                            debug!("connection {peer} closed: {e}");
                        }
                    });
                }
                Ok(None) => break,
                Err(e) => {
                    warn!("accept failed on {}: {e}", l.location());
                    break;
                }
            }
        })
        .expect("spawn accept thread");
    PortServer {
        listener,
        thread: Some(thread),
    }
}

/// Outcome of routing a decoded request.
enum Routed {
    Failed(Fault),
    Accepted,
    Pending(Receiver<Reply>),
}

fn route(handler: &dyn Inbound, op: &str, kind: OpKind, payload: ValueNode, origin: &str) -> Routed {
    let (tx, rx) = match kind {
        OpKind::RequestResponse => {
            let (tx, rx) = mpsc::channel();
            (Some(tx), Some(rx))
        }
        OpKind::OneWay => (None, None),
    };
    match handler.deliver(op, payload, tx, origin) {
        Err(f) => Routed::Failed(f),
        Ok(()) => rx.map_or(Routed::Accepted, Routed::Pending),
    }
}

fn await_reply(rx: &Receiver<Reply>) -> Reply {
    rx.recv()
        .unwrap_or_else(|_| Err(Fault::new(FaultKind::RuntimeFault)))
}

fn serve_sodep(conn: Box<dyn Conn>, handler: &dyn Inbound) -> std::io::Result<()> {
    let origin = conn.peer();
    let writer: Arc<Mutex<Box<dyn Conn>>> = Arc::new(Mutex::new(conn.try_clone_conn()?));
    let mut reader = BufReader::new(conn);
    let send = |w: &Mutex<Box<dyn Conn>>, corr_id: u64, op: &str, reply: Reply| {
        let msg = match reply {
            Ok(payload) => WireMessage {
                kind: MessageKind::Response,
                corr_id,
                operation: op.to_owned(),
                payload,
            },
            Err(f) => WireMessage {
                kind: MessageKind::Fault,
                corr_id,
                operation: op.to_owned(),
                payload: f.to_value(),
            },
        };
        let mut w = w.lock().unwrap();
        write_frame(&mut *w, &msg)
    };
    let mut pending = Vec::new();
    while let Some(msg) = read_frame(&mut reader)? {
        if msg.kind != MessageKind::Request {
            debug!("ignoring non-request frame from {origin}");
            continue;
        }
        let Some(info) = handler.operation(&msg.operation) else {
            send(
                &writer,
                msg.corr_id,
                &msg.operation,
                Err(FaultKind::UnknownOperation.into()),
            )?;
            continue;
        };
        // Routing happens here, in arrival order; only the wait for the
        // response runs on its own thread.
        match route(handler, &msg.operation, info.kind, msg.payload, &origin) {
            Routed::Failed(f) => send(&writer, msg.corr_id, &msg.operation, Err(f))?,
            Routed::Accepted => send(&writer, msg.corr_id, &msg.operation, Ok(ValueNode::void()))?,
            Routed::Pending(rx) => {
                let writer = writer.clone();
                pending.push(thread::spawn(move || {
                    let reply = await_reply(&rx);
                    let _ = send(&writer, msg.corr_id, &msg.operation, reply);
                }));
            }
        }
    }
    for p in pending {
        let _ = p.join();
    }
    Ok(())
}

fn fault_response(w: &mut impl Write, f: &Fault) -> std::io::Result<()> {
    http::write_response(w, f.kind.http_status(), f.to_json().to_string().as_bytes())
}

fn serve_http(conn: Box<dyn Conn>, handler: &dyn Inbound) -> std::io::Result<()> {
    let origin = conn.peer();
    let mut writer = conn.try_clone_conn()?;
    let mut reader = BufReader::new(conn);
    let Some(req) = http::read_request(&mut reader)? else {
        return Ok(());
    };
    if req.method != "POST" {
        return http::write_response(&mut writer, 405, b"");
    }
    let op = req.target.trim_start_matches('/');
    let op = op.split('?').next().unwrap_or_default();
    let Some(info) = handler.operation(op) else {
        return fault_response(&mut writer, &Fault::new(FaultKind::UnknownOperation));
    };
    let text = if req.body.iter().all(u8::is_ascii_whitespace) {
        "{}".to_owned()
    } else {
        match String::from_utf8(req.body) {
            Ok(t) => t,
            Err(_) => return fault_response(&mut writer, &Fault::new(FaultKind::TypeMismatch)),
        }
    };
    let payload = match decode_json(&text, Some((&info.request, handler.types()))) {
        Ok(v) => v,
        Err(e) => {
            return fault_response(
                &mut writer,
                &Fault::at(FaultKind::TypeMismatch, e.path.to_string()),
            )
        }
    };
    match route(handler, op, info.kind, payload, &origin) {
        Routed::Failed(f) => fault_response(&mut writer, &f),
        Routed::Accepted => http::write_response(&mut writer, 202, b""),
        Routed::Pending(rx) => match await_reply(&rx) {
            Ok(v) => http::write_response(&mut writer, 200, encode_json(&v).as_bytes()),
            Err(f) => fault_response(&mut writer, &f),
        },
    }
}
