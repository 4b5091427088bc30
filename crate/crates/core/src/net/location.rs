use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Where a port listens or where an output port sends.
///
/// Printed and parsed as `socket://host:port` or `local://name`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Location {
    Socket { host: String, port: u16 },
    Local { name: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid location {input:?}: {reason}")]
pub struct LocationError {
    pub input: String,
    pub reason: String,
}

impl Location {
    pub fn socket(host: impl Into<String>, port: u16) -> Self {
        Location::Socket {
            host: host.into(),
            port,
        }
    }

    pub fn local(name: impl Into<String>) -> Self {
        Location::Local { name: name.into() }
    }

    pub fn scheme(&self) -> &'static str {
        match self {
            Location::Socket { .. } => "socket",
            Location::Local { .. } => "local",
        }
    }
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Socket { host, port } if host.contains(':') => {
                write!(f, "socket://[{host}]:{port}")
            }
            Location::Socket { host, port } => write!(f, "socket://{host}:{port}"),
            Location::Local { name } => write!(f, "local://{name}"),
        }
    }
}

impl FromStr for Location {
    type Err = LocationError;

    fn from_str(input: &str) -> Result<Self, Self::Err> {
        let err = |reason: &str| LocationError {
            input: input.to_owned(),
            reason: reason.to_owned(),
        };
        if let Some(rest) = input.strip_prefix("socket://") {
            let (host, port) = if let Some(v6) = rest.strip_prefix('[') {
                let (host, tail) = v6.split_once(']').ok_or_else(|| err("unclosed `[`"))?;
                let port = tail.strip_prefix(':').ok_or_else(|| err("missing port"))?;
                (host, port)
            } else {
                rest.rsplit_once(':').ok_or_else(|| err("missing port"))?
            };
            if host.is_empty() {
                return Err(err("missing host"));
            }
            if host.contains(['/', ' ']) {
                return Err(err("malformed host"));
            }
            let port = port
                .parse()
                .map_err(|_| err("port is not a number in 0..=65535"))?;
            Ok(Location::Socket {
                host: host.to_owned(),
                port,
            })
        } else if let Some(name) = input.strip_prefix("local://") {
            if name.is_empty() || name.contains(char::is_whitespace) {
                return Err(err("local name must be non-empty and contain no whitespace"));
            }
            Ok(Location::Local {
                name: name.to_owned(),
            })
        } else {
            Err(err("scheme must be socket:// or local://"))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_forms_round_trip() {
        for s in [
            "socket://www.myonlineshop.it:8000",
            "socket://127.0.0.1:0",
            "socket://[::1]:9000",
            "local://shop",
        ] {
            let loc: Location = s.parse().unwrap();
            assert_eq!(loc.to_string(), s);
        }
        assert_eq!(
            "socket://www.myonlineshop.it:8000".parse::<Location>().unwrap(),
            Location::socket("www.myonlineshop.it", 8000)
        );
    }

    #[test]
    fn rejects_malformed() {
        for s in [
            "http://x:1",
            "socket://x",
            "socket://:80",
            "socket://x:99999",
            "local://",
            "shop",
        ] {
            assert!(s.parse::<Location>().is_err(), "{s}");
        }
    }
}
