//! Transports (TCP sockets, in-process `local://` registry) and data
//! protocols (HTTP with JSON bodies, `sodep-lite` binary frames).

mod client;
mod fault;
pub mod http;
mod json;
mod local;
mod location;
mod server;
mod sodep;

use std::fmt;
use std::io::{self, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use thiserror::Error;

pub use client::{call, CallError, CallTarget};
pub use fault::{Fault, FaultKind};
pub use json::{decode_json, encode_json, from_json, to_json, JsonDecodeError};
pub use local::{LocalListener, LocalRegistry, LocalStream};
pub use location::{Location, LocationError};
pub use server::{serve, Inbound, OpInfo, PortServer, Reply};
pub use sodep::{
    decode_frame, decode_sodep_lite, encode_sodep_lite, read_frame, write_frame, DecodeError, MessageKind,
    WireMessage,
};

/// Data protocol spoken on a port.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Protocol {
    Http,
    SodepLite,
}

impl Protocol {
    pub fn name(self) -> &'static str {
        match self {
            Protocol::Http => "http",
            Protocol::SodepLite => "sodep-lite",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Protocol {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "http" => Ok(Protocol::Http),
            "sodep-lite" => Ok(Protocol::SodepLite),
            "https" => Err("protocol https is not supported (no TLS); use http".into()),
            other => Err(format!(
                "unknown protocol {other}; supported protocols are http and sodep-lite"
            )),
        }
    }
}

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("no listener registered at local://{0}")]
    UnknownLocal(String),
    #[error("address already in use: {0}")]
    AddressInUse(String),
    #[error("{location}: {source}")]
    Io {
        location: String,
        #[source]
        source: io::Error,
    },
}

/// A bidirectional byte stream over either transport.
pub trait Conn: Read + Write + Send {
    fn try_clone_conn(&self) -> io::Result<Box<dyn Conn>>;
    fn set_timeout(&self, t: Option<Duration>) -> io::Result<()>;
    /// Human-readable identifier of the connection, for logs.
    fn peer(&self) -> String;
}

impl Conn for TcpStream {
    fn try_clone_conn(&self) -> io::Result<Box<dyn Conn>> {
        Ok(Box::new(self.try_clone()?))
    }

    fn set_timeout(&self, t: Option<Duration>) -> io::Result<()> {
        self.set_read_timeout(t)?;
        self.set_write_timeout(t)
    }

    fn peer(&self) -> String {
        self.peer_addr()
            .map_or_else(|_| "socket".into(), |a| format!("socket:{a}"))
    }
}

impl Conn for LocalStream {
    fn try_clone_conn(&self) -> io::Result<Box<dyn Conn>> {
        Ok(Box::new(self.clone()))
    }

    fn set_timeout(&self, t: Option<Duration>) -> io::Result<()> {
        self.set_read_timeout(t);
        Ok(())
    }

    fn peer(&self) -> String {
        "local".into()
    }
}

enum ListenerKind {
    Tcp(TcpListener, SocketAddr),
    Local(LocalListener),
}

/// A bound input location.
pub struct Listener {
    kind: ListenerKind,
    location: Location,
    closed: Arc<AtomicBool>,
}

impl Listener {
    /// The bound location; for `socket://host:0` the port is the one chosen.
    pub fn location(&self) -> &Location {
        &self.location
    }

    /// Blocks for the next connection; `Ok(None)` after [`close`](Self::close).
    pub fn accept(&self) -> io::Result<Option<Box<dyn Conn>>> {
        loop {
            if self.closed.load(Ordering::SeqCst) {
                return Ok(None);
            }
            match &self.kind {
                ListenerKind::Tcp(l, _) => {
                    let (s, _) = l.accept()?;
                    if self.closed.load(Ordering::SeqCst) {
                        return Ok(None);
                    }
                    s.set_nodelay(true)?;
                    return Ok(Some(Box::new(s)));
                }
                ListenerKind::Local(l) => match l.accept_timeout(Duration::from_millis(100)) {
                    Ok(Some(s)) => return Ok(Some(Box::new(s))),
                    Ok(None) => continue,
                    Err(_) => return Ok(None),
                },
            }
        }
    }

    /// Stops accepting and wakes a blocked [`accept`](Self::accept).
    pub fn close(&self) {
        if self.closed.swap(true, Ordering::SeqCst) {
            return;
        }
        match &self.kind {
            ListenerKind::Tcp(_, addr) => {
                let mut wake = *addr;
                if wake.ip().is_unspecified() {
                    wake.set_ip([127, 0, 0, 1].into());
                }
                let _ = TcpStream::connect_timeout(&wake, Duration::from_millis(200));
            }
            ListenerKind::Local(l) => l.close(),
        }
    }
}

impl Drop for Listener {
    fn drop(&mut self) {
        self.close();
    }
}

/// Starts listening at `location`.
pub fn bind(location: &Location, registry: &LocalRegistry) -> Result<Listener, TransportError> {
    let kind = match location {
        Location::Local { name } => ListenerKind::Local(registry.listen(name)?),
        Location::Socket { host, port } => {
            let l = TcpListener::bind((host.as_str(), *port)).map_err(|e| {
                if e.kind() == io::ErrorKind::AddrInUse {
                    TransportError::AddressInUse(location.to_string())
                } else {
                    TransportError::Io {
                        location: location.to_string(),
                        source: e,
                    }
                }
            })?;
            let addr = l.local_addr().map_err(|e| TransportError::Io {
                location: location.to_string(),
                source: e,
            })?;
            ListenerKind::Tcp(l, addr)
        }
    };
    let location = match (&kind, location) {
        (ListenerKind::Tcp(_, addr), Location::Socket { host, .. }) => Location::Socket {
            host: host.clone(),
            port: addr.port(),
        },
        _ => location.clone(),
    };
    Ok(Listener {
        kind,
        location,
        closed: Arc::new(AtomicBool::new(false)),
    })
}

/// Opens a connection to `location`.
pub fn dial(
    location: &Location,
    registry: &LocalRegistry,
    timeout: Duration,
) -> Result<Box<dyn Conn>, TransportError> {
    let io_err = |e| TransportError::Io {
        location: location.to_string(),
        source: e,
    };
    match location {
        Location::Local { name } => {
            let s = registry.dial(name)?;
            s.set_read_timeout(Some(timeout));
            Ok(Box::new(s))
        }
        Location::Socket { host, port } => {
            let addrs: Vec<_> = (host.as_str(), *port)
                .to_socket_addrs()
                .map_err(io_err)?
                .collect();
            let mut last = io::Error::new(io::ErrorKind::NotFound, "host resolved to no address");
            for addr in addrs {
                match TcpStream::connect_timeout(&addr, timeout) {
                    Ok(s) => {
                        s.set_nodelay(true).map_err(io_err)?;
                        s.set_timeout(Some(timeout)).map_err(io_err)?;
                        return Ok(Box::new(s));
                    }
                    Err(e) => last = e,
                }
            }
            Err(io_err(last))
        }
    }
}
