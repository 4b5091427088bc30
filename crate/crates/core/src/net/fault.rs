use std::fmt;
use std::str::FromStr;

use serde_json::{json, Value};

use crate::values::ValueNode;

/// Wire-visible failure classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FaultKind {
    /// No process matches and the operation cannot start one.
    CorrelationError,
    /// A payload does not conform to the declared type.
    TypeMismatch,
    /// Transport failure on an outbound call.
    IOFault,
    /// The operation is not offered by the port.
    UnknownOperation,
    /// The serving process failed while computing a response.
    RuntimeFault,
}

impl FaultKind {
    pub const ALL: [FaultKind; 5] = [
        FaultKind::CorrelationError,
        FaultKind::TypeMismatch,
        FaultKind::IOFault,
        FaultKind::UnknownOperation,
        FaultKind::RuntimeFault,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FaultKind::CorrelationError => "CorrelationError",
            FaultKind::TypeMismatch => "TypeMismatch",
            FaultKind::IOFault => "IOFault",
            FaultKind::UnknownOperation => "UnknownOperation",
            FaultKind::RuntimeFault => "RuntimeFault",
        }
    }

    /// HTTP status used to report this fault.
    pub fn http_status(self) -> u16 {
        match self {
            FaultKind::CorrelationError => 409,
            FaultKind::TypeMismatch => 400,
            FaultKind::IOFault => 502,
            FaultKind::UnknownOperation => 404,
            FaultKind::RuntimeFault => 500,
        }
    }
}

impl fmt::Display for FaultKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FaultKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FaultKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown fault {s}"))
    }
}

/// A fault reply: its kind plus, for type mismatches, where it happened.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fault {
    pub kind: FaultKind,
    pub path: Option<String>,
}

impl Fault {
    pub fn new(kind: FaultKind) -> Self {
        Fault { kind, path: None }
    }

    pub fn at(kind: FaultKind, path: impl Into<String>) -> Self {
        Fault {
            kind,
            path: Some(path.into()),
        }
    }

    /// Payload of a fault frame: the name at the root, `path` as a child.
    pub fn to_value(&self) -> ValueNode {
        let mut v = ValueNode::leaf(self.kind.name());
        if let Some(p) = &self.path {
            v.push_child("path", ValueNode::leaf(p.as_str()));
        }
        v
    }

    pub fn from_value(v: &ValueNode) -> Option<Fault> {
        let kind = v.root().as_str()?.parse().ok()?;
        let path = v
            .child("path")
            .and_then(|p| p[0].root().as_str().map(str::to_owned));
        Some(Fault { kind, path })
    }

    /// `{"fault": name, "path": ...}`
    pub fn to_json(&self) -> Value {
        match &self.path {
            Some(p) => json!({ "fault": self.kind.name(), "path": p }),
            None => json!({ "fault": self.kind.name() }),
        }
    }

    pub fn from_json(v: &Value) -> Option<Fault> {
        let kind = v.get("fault")?.as_str()?.parse().ok()?;
        let path = v.get("path").and_then(Value::as_str).map(str::to_owned);
        Some(Fault { kind, path })
    }
}

impl fmt::Display for Fault {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.path {
            Some(p) => write!(f, "{} at {p}", self.kind),
            None => write!(f, "{}", self.kind),
        }
    }
}

impl std::error::Error for Fault {}

impl From<FaultKind> for Fault {
    fn from(kind: FaultKind) -> Self {
        Fault::new(kind)
    }
}
