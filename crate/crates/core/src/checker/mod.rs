//! Static checks over a parsed program: interface resolution, port and
//! operation routing, correlation aliases, type references, and the set of
//! operations that may start a new process.

mod interface;
mod start;

use std::collections::{HashMap, HashSet};
use std::fmt;

use indexmap::IndexMap;

pub use interface::{resolve_interface, InterfaceEnv, InterfaceError, ResolvedInterface, ResolvedOp};
pub use start::{start_info, starting_operations, StartInfo};

use crate::lang::{
    Behavior, BehaviorKind, InputBranch, OpKind, PortDecl, PortDirection, Program, Signature, SourceSpan,
};
use crate::net::Location;
use crate::values::{BasicKind, Path, TypeEnv, TypeExpr};

/// Data protocols a port may speak.
pub const PROTOCOLS: [&str; 2] = ["http", "sodep-lite"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Severity {
    Warning,
    Error,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Warning => "warning",
            Severity::Error => "error",
        })
    }
}

/// Machine-readable category of a diagnostic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DiagnosticCode {
    DuplicateName,
    UnknownType,
    CyclicType,
    UnknownInterface,
    ConflictingSignature,
    DuplicateOperation,
    InvalidLocation,
    MissingLocation,
    MissingProtocol,
    UnsupportedProtocol,
    UnknownProtocolParameter,
    UnknownPort,
    NotAnOutputPort,
    OperationNotProvided,
    OperationNotOnPort,
    KindMismatch,
    AliasUnknownOperation,
    DuplicateAlias,
    UnknownProcedure,
    RecursiveProcedure,
    DuplicateGuard,
    EmptyStartSet,
    SendBeforeReceive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub code: DiagnosticCode,
    pub message: String,
    pub span: SourceSpan,
    /// Secondary locations, e.g. the other side of a conflict.
    pub related: Vec<SourceSpan>,
}

impl Diagnostic {
    fn error(code: DiagnosticCode, span: &SourceSpan, message: impl Into<String>) -> Self {
        Diagnostic {
            severity: Severity::Error,
            code,
            message: message.into(),
            span: span.clone(),
            related: Vec::new(),
        }
    }

    fn warning(code: DiagnosticCode, span: &SourceSpan, message: impl Into<String>) -> Self {
        Diagnostic {
            severity: Severity::Warning,
            ..Diagnostic::error(code, span, message)
        }
    }

    fn with_related(mut self, span: &SourceSpan) -> Self {
        self.related.push(span.clone());
        self
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}: {}", self.span, self.severity, self.message)
    }
}

/// Where an input operation is served.
#[derive(Debug, Clone, PartialEq)]
pub struct InputRoute {
    pub signature: Signature,
    pub ports: Vec<String>,
    pub span: SourceSpan,
}

/// A correlation alias seen from the operation side.
#[derive(Debug, Clone, PartialEq)]
pub struct AliasRef {
    pub var: String,
    pub path: Path,
}

/// A program together with everything the runtime needs from static analysis.
#[derive(Debug, Clone)]
pub struct CheckedProgram {
    pub program: Program,
    pub types: TypeEnv,
    /// Resolved interface per port name, input and output.
    pub port_interfaces: IndexMap<String, ResolvedInterface>,
    /// Input operation name to its signature and serving ports.
    pub routing: IndexMap<String, InputRoute>,
    /// Operation name to the cset variables it carries.
    pub aliases: IndexMap<String, Vec<AliasRef>>,
    pub starting_ops: Vec<String>,
    pub diagnostics: Vec<Diagnostic>,
}

impl CheckedProgram {
    /// True when no diagnostic is an error; warnings do not fail a check.
    pub fn is_ok(&self) -> bool {
        !self.diagnostics.iter().any(Diagnostic::is_error)
    }

    pub fn errors(&self) -> impl Iterator<Item = &Diagnostic> {
        self.diagnostics.iter().filter(|d| d.is_error())
    }

    pub fn is_starting(&self, op: &str) -> bool {
        self.starting_ops.iter().any(|o| o == op)
    }

    pub fn cset_vars(&self) -> Vec<&str> {
        self.program.csets.iter().map(|c| c.var.as_str()).collect()
    }

    pub fn output_signature(&self, port: &str, op: &str) -> Option<&Signature> {
        self.port_interfaces.get(port)?.get(op)
    }
}

/// Runs every static check and computes routing and starting operations.
pub fn check_program(program: Program) -> CheckedProgram {
    let mut cx = Checker {
        program: &program,
        diags: Vec::new(),
        types: TypeEnv::new(),
        port_interfaces: IndexMap::new(),
        routing: IndexMap::new(),
        aliases: IndexMap::new(),
    };
    cx.check_types();
    let mut env = InterfaceEnv::new(&program.interfaces);
    cx.check_interfaces(&mut env);
    cx.check_ports(&mut env);
    cx.check_csets();
    cx.check_procedures();
    cx.walk(&program.main);
    for p in &program.procedures {
        cx.walk(&p.body);
    }
    let info = start_info(&program.main, &program.procedures);
    if info.nullable {
        cx.diags.push(Diagnostic::warning(
            DiagnosticCode::EmptyStartSet,
            &program.main.span,
            "main can terminate without receiving any message",
        ));
    }
    for span in &info.early_sends {
        cx.diags.push(Diagnostic::warning(
            DiagnosticCode::SendBeforeReceive,
            span,
            "main sends before its first receive; the send runs in every spawned process",
        ));
    }
    let Checker {
        diags,
        types,
        port_interfaces,
        routing,
        aliases,
        ..
    } = cx;
    CheckedProgram {
        starting_ops: info.ops.into_iter().collect(),
        program,
        types,
        port_interfaces,
        routing,
        aliases,
        diagnostics: diags,
    }
}

struct Checker<'a> {
    program: &'a Program,
    diags: Vec<Diagnostic>,
    types: TypeEnv,
    port_interfaces: IndexMap<String, ResolvedInterface>,
    routing: IndexMap<String, InputRoute>,
    aliases: IndexMap<String, Vec<AliasRef>>,
}

impl Checker<'_> {
    fn err(&mut self, code: DiagnosticCode, span: &SourceSpan, msg: impl Into<String>) {
        self.diags.push(Diagnostic::error(code, span, msg));
    }

    fn check_types(&mut self) {
        let mut seen: HashMap<&str, &SourceSpan> = HashMap::new();
        for t in &self.program.types {
            if BasicKind::from_name(&t.name).is_some() {
                self.err(
                    DiagnosticCode::DuplicateName,
                    &t.span,
                    format!("type {} redefines a built-in type", t.name),
                );
                continue;
            }
            if let Some(prev) = seen.insert(&t.name, &t.span) {
                let d = Diagnostic::error(
                    DiagnosticCode::DuplicateName,
                    &t.span,
                    format!("type {} is defined more than once", t.name),
                )
                .with_related(prev);
                self.diags.push(d);
                continue;
            }
            self.types.insert(t.name.clone(), t.ty.clone());
        }
        for t in &self.program.types {
            for r in t.ty.references() {
                if !self.types.contains_key(r) {
                    self.err(DiagnosticCode::UnknownType, &t.span, format!("unknown type {r}"));
                }
            }
            if let Some(name) = alias_cycle(&t.name, &self.types) {
                self.err(
                    DiagnosticCode::CyclicType,
                    &t.span,
                    format!("type {name} is an alias of itself"),
                );
            }
        }
    }

    fn check_type_refs(&mut self, ty: &TypeExpr, span: &SourceSpan) {
        for r in ty.references() {
            if !self.types.contains_key(r) {
                self.err(DiagnosticCode::UnknownType, span, format!("unknown type {r}"));
            }
        }
    }

    fn check_interfaces(&mut self, env: &mut InterfaceEnv) {
        let mut seen: HashMap<&str, &SourceSpan> = HashMap::new();
        for decl in &self.program.interfaces {
            if let Some(prev) = seen.insert(&decl.name, &decl.span) {
                let d = Diagnostic::error(
                    DiagnosticCode::DuplicateName,
                    &decl.span,
                    format!("interface {} is defined more than once", decl.name),
                )
                .with_related(prev);
                self.diags.push(d);
                continue;
            }
            if let crate::lang::InterfaceExpr::Literal(ops) = &decl.expr {
                for op in ops {
                    self.check_type_refs(op.signature.request(), &op.span);
                    if let Some(resp) = op.signature.response() {
                        self.check_type_refs(resp, &op.span);
                    }
                }
            }
            if let Err(e) = env.lookup(&decl.name, &decl.span) {
                // Reported once, at the interface whose own expression fails.
                if !matches!(
                    &e,
                    InterfaceError::UnknownInterface { .. } | InterfaceError::Cycle { .. }
                ) || decl_mentions(&decl.expr, &e)
                {
                    self.diags.push(interface_diag(&e));
                }
            }
        }
    }

    fn check_ports(&mut self, env: &mut InterfaceEnv) {
        let mut seen: HashMap<&str, &SourceSpan> = HashMap::new();
        let mut locations: HashMap<String, &SourceSpan> = HashMap::new();
        for port in self.program.ports() {
            if let Some(prev) = seen.insert(&port.name, &port.span) {
                let d = Diagnostic::error(
                    DiagnosticCode::DuplicateName,
                    &port.span,
                    format!("port {} is declared more than once", port.name),
                )
                .with_related(prev);
                self.diags.push(d);
                continue;
            }
            self.check_port_binding(port, &mut locations);
            let resolved = self.port_interface(port, env);
            if port.direction == PortDirection::Input {
                self.add_routes(port, &resolved);
            }
            self.port_interfaces.insert(port.name.clone(), resolved);
        }
    }

    fn check_port_binding<'p>(
        &mut self,
        port: &'p PortDecl,
        locations: &mut HashMap<String, &'p SourceSpan>,
    ) {
        let input = port.direction == PortDirection::Input;
        match &port.location {
            Some(loc) => match loc.parse::<Location>() {
                Ok(l) if input => {
                    if let Some(prev) = locations.insert(l.to_string(), &port.span) {
                        let d = Diagnostic::error(
                            DiagnosticCode::DuplicateName,
                            &port.span,
                            format!("location {l} is used by more than one input port"),
                        )
                        .with_related(prev);
                        self.diags.push(d);
                    }
                }
                Ok(_) => {}
                Err(e) => self.err(DiagnosticCode::InvalidLocation, &port.span, e.to_string()),
            },
            None if input => self.err(
                DiagnosticCode::MissingLocation,
                &port.span,
                format!("input port {} has no Location", port.name),
            ),
            None => {}
        }
        match &port.protocol {
            Some(p) if p.name == "https" => self.err(
                DiagnosticCode::UnsupportedProtocol,
                &p.span,
                "protocol https is not supported (no TLS); use http",
            ),
            Some(p) if !PROTOCOLS.contains(&p.name.as_str()) => self.err(
                DiagnosticCode::UnsupportedProtocol,
                &p.span,
                format!(
                    "unknown protocol {}; supported protocols are http and sodep-lite",
                    p.name
                ),
            ),
            Some(p) => {
                for (key, _) in &p.params {
                    if key != "timeout" {
                        self.diags.push(Diagnostic::warning(
                            DiagnosticCode::UnknownProtocolParameter,
                            &p.span,
                            format!("unknown protocol parameter {key} is ignored"),
                        ));
                    }
                }
            }
            None if input => self.err(
                DiagnosticCode::MissingProtocol,
                &port.span,
                format!("input port {} has no Protocol", port.name),
            ),
            None => {}
        }
    }

    fn port_interface(&mut self, port: &PortDecl, env: &mut InterfaceEnv) -> ResolvedInterface {
        let mut acc = ResolvedInterface {
            name: port.name.clone(),
            ops: IndexMap::new(),
        };
        for iface in &port.interfaces {
            let next = match env.lookup(&iface.name, &iface.span) {
                Ok(r) => r,
                Err(InterfaceError::UnknownInterface { name, .. }) if name == iface.name => {
                    self.err(
                        DiagnosticCode::UnknownInterface,
                        &iface.span,
                        format!("unknown interface {name}"),
                    );
                    continue;
                }
                // Already reported at the interface declaration.
                Err(_) => continue,
            };
            match acc.union(&next) {
                Ok(mut u) => {
                    u.name = port.name.clone();
                    acc = u;
                }
                Err(e) => self.diags.push(interface_diag(&e)),
            }
        }
        acc
    }

    fn add_routes(&mut self, port: &PortDecl, iface: &ResolvedInterface) {
        for (name, op) in &iface.ops {
            match self.routing.get_mut(name) {
                Some(route) if route.signature == op.signature => route.ports.push(port.name.clone()),
                Some(route) => {
                    let d = Diagnostic::error(
                        DiagnosticCode::ConflictingSignature,
                        &op.span,
                        format!(
                            "operation {name} on input port {} conflicts with its signature on port {}",
                            port.name, route.ports[0]
                        ),
                    )
                    .with_related(&route.span);
                    self.diags.push(d);
                }
                None => {
                    self.routing.insert(
                        name.clone(),
                        InputRoute {
                            signature: op.signature.clone(),
                            ports: vec![port.name.clone()],
                            span: op.span.clone(),
                        },
                    );
                }
            }
        }
    }

    fn check_csets(&mut self) {
        let mut vars: HashMap<&str, &SourceSpan> = HashMap::new();
        for cset in &self.program.csets {
            if let Some(prev) = vars.insert(&cset.var, &cset.span) {
                let d = Diagnostic::error(
                    DiagnosticCode::DuplicateName,
                    &cset.span,
                    format!("correlation variable {} is declared more than once", cset.var),
                )
                .with_related(prev);
                self.diags.push(d);
                continue;
            }
            let mut ops: HashSet<&str> = HashSet::new();
            for alias in &cset.aliases {
                if !ops.insert(&alias.operation) {
                    self.err(
                        DiagnosticCode::DuplicateAlias,
                        &alias.span,
                        format!(
                            "operation {} has more than one alias for {}",
                            alias.operation, cset.var
                        ),
                    );
                    continue;
                }
                if !self.routing.contains_key(&alias.operation) {
                    self.err(
                        DiagnosticCode::AliasUnknownOperation,
                        &alias.span,
                        format!(
                            "correlation alias names operation {} which no input port provides",
                            alias.operation
                        ),
                    );
                    continue;
                }
                self.aliases
                    .entry(alias.operation.clone())
                    .or_default()
                    .push(AliasRef {
                        var: cset.var.clone(),
                        path: alias.path.clone(),
                    });
            }
        }
    }

    fn check_procedures(&mut self) {
        let mut seen: HashMap<&str, &SourceSpan> = HashMap::new();
        for p in &self.program.procedures {
            if let Some(prev) = seen.insert(&p.name, &p.span) {
                let d = Diagnostic::error(
                    DiagnosticCode::DuplicateName,
                    &p.span,
                    format!("procedure {} is defined more than once", p.name),
                )
                .with_related(prev);
                self.diags.push(d);
            }
        }
        for p in &self.program.procedures {
            let mut stack = vec![p.name.as_str()];
            if reaches(self.program, &p.body, &p.name, &mut stack) {
                self.err(
                    DiagnosticCode::RecursiveProcedure,
                    &p.span,
                    format!("procedure {} calls itself", p.name),
                );
            }
        }
    }

    fn walk(&mut self, b: &Behavior) {
        match &b.kind {
            BehaviorKind::Nil | BehaviorKind::Assign { .. } | BehaviorKind::Sleep(_) => {}
            BehaviorKind::Sequence(x, y) | BehaviorKind::Parallel(x, y) => {
                self.walk(x);
                self.walk(y);
            }
            BehaviorKind::If { then, otherwise, .. } => {
                self.walk(then);
                if let Some(o) = otherwise {
                    self.walk(o);
                }
            }
            BehaviorKind::While { body, .. } => self.walk(body),
            BehaviorKind::Call(name) => {
                if self.program.procedure(name).is_none() {
                    self.err(
                        DiagnosticCode::UnknownProcedure,
                        &b.span,
                        format!("unknown procedure {name}"),
                    );
                }
            }
            BehaviorKind::InputChoice(branches) => self.branches(branches.iter()),
            BehaviorKind::ProvideUntil { provide, until } => self.branches(provide.iter().chain(until)),
            BehaviorKind::SolicitResponse { port, operation, .. } => {
                self.check_send(b, port, operation, OpKind::RequestResponse)
            }
            BehaviorKind::Notify { port, operation, .. } => {
                self.check_send(b, port, operation, OpKind::OneWay)
            }
            BehaviorKind::Rebind { port, .. } => {
                self.output_port(b, port);
            }
        }
    }

    fn branches<'b>(&mut self, branches: impl Iterator<Item = &'b InputBranch>) {
        let mut guards: HashMap<&str, &SourceSpan> = HashMap::new();
        for br in branches {
            if let Some(prev) = guards.insert(&br.operation, &br.span) {
                let d = Diagnostic::error(
                    DiagnosticCode::DuplicateGuard,
                    &br.span,
                    format!(
                        "operation {} guards more than one branch of the same choice",
                        br.operation
                    ),
                )
                .with_related(prev);
                self.diags.push(d);
            }
            match self.routing.get(&br.operation) {
                None => self.err(
                    DiagnosticCode::OperationNotProvided,
                    &br.span,
                    format!("operation {} not provided by any input port", br.operation),
                ),
                Some(route) if route.signature.kind() != br.kind.op_kind() => {
                    let msg = format!(
                        "operation {} is {} but is received as {}",
                        br.operation,
                        route.signature.kind(),
                        br.kind.op_kind()
                    );
                    let d = Diagnostic::error(DiagnosticCode::KindMismatch, &br.span, msg)
                        .with_related(&route.span);
                    self.diags.push(d);
                }
                Some(_) => {}
            }
            self.walk(&br.body);
        }
    }

    fn output_port(&mut self, b: &Behavior, port: &str) -> bool {
        match self.program.ports().find(|p| p.name == port) {
            None => {
                self.err(
                    DiagnosticCode::UnknownPort,
                    &b.span,
                    format!("unknown port {port}"),
                );
                false
            }
            Some(p) if p.direction == PortDirection::Input => {
                self.err(
                    DiagnosticCode::NotAnOutputPort,
                    &b.span,
                    format!("{port} is an input port; sends need an output port"),
                );
                false
            }
            Some(_) => true,
        }
    }

    fn check_send(&mut self, b: &Behavior, port: &str, op: &str, kind: OpKind) {
        if !self.output_port(b, port) {
            return;
        }
        let Some(iface) = self.port_interfaces.get(port) else {
            return;
        };
        match iface.ops.get(op) {
            None => self.err(
                DiagnosticCode::OperationNotOnPort,
                &b.span,
                format!("operation {op} is not part of output port {port}"),
            ),
            Some(decl) if decl.signature.kind() != kind => {
                let msg = format!(
                    "operation {op} on port {port} is {} but is invoked as {kind}",
                    decl.signature.kind()
                );
                let d =
                    Diagnostic::error(DiagnosticCode::KindMismatch, &b.span, msg).with_related(&decl.span);
                self.diags.push(d);
            }
            Some(_) => {}
        }
    }
}

fn interface_diag(e: &InterfaceError) -> Diagnostic {
    let code = match e {
        InterfaceError::UnknownInterface { .. } => DiagnosticCode::UnknownInterface,
        InterfaceError::ConflictingSignature { .. } => DiagnosticCode::ConflictingSignature,
        InterfaceError::DuplicateOperation { .. } => DiagnosticCode::DuplicateOperation,
        InterfaceError::Cycle { .. } => DiagnosticCode::CyclicType,
    };
    let d = Diagnostic::error(code, e.span(), e.to_string());
    match e {
        InterfaceError::ConflictingSignature { first, .. } => d.with_related(&first.span),
        InterfaceError::DuplicateOperation { first, .. } => d.with_related(first),
        _ => d,
    }
}

/// Whether an unknown-name or cycle error originates from a reference
/// written directly inside `expr` (rather than deeper in another decl).
fn decl_mentions(expr: &crate::lang::InterfaceExpr, e: &InterfaceError) -> bool {
    use crate::lang::InterfaceExpr as I;
    let (InterfaceError::UnknownInterface { span, .. } | InterfaceError::Cycle { span, .. }) = e else {
        return false;
    };
    match expr {
        I::Literal(_) => false,
        I::Ref { span: s, .. } => s.same_range(span),
        I::Union(a, b) | I::Intersection(a, b) => decl_mentions(a, e) || decl_mentions(b, e),
    }
}

/// Follows a chain of bare name aliases from `start`; returns the name that
/// closes a cycle, if any.
fn alias_cycle(start: &str, env: &TypeEnv) -> Option<String> {
    let mut seen = HashSet::new();
    let mut cur = start;
    loop {
        if !seen.insert(cur) {
            return (cur == start).then(|| start.to_owned());
        }
        match env.get(cur) {
            Some(TypeExpr::Named(next)) => cur = next,
            _ => return None,
        }
    }
}

/// Whether `b` can reach a call to `target` through procedure bodies.
fn reaches<'p>(program: &'p Program, b: &'p Behavior, target: &str, stack: &mut Vec<&'p str>) -> bool {
    let mut found = false;
    visit_calls(b, &mut |name| {
        if found {
            return;
        }
        if name == target {
            found = true;
            return;
        }
        if stack.contains(&name) {
            return;
        }
        if let Some(p) = program.procedure(name) {
            stack.push(&p.name);
            found = reaches(program, &p.body, target, stack);
            stack.pop();
        }
    });
    found
}

fn visit_calls<'b>(b: &'b Behavior, f: &mut impl FnMut(&'b str)) {
    match &b.kind {
        BehaviorKind::Call(name) => f(name),
        BehaviorKind::Sequence(x, y) | BehaviorKind::Parallel(x, y) => {
            visit_calls(x, f);
            visit_calls(y, f);
        }
        BehaviorKind::If { then, otherwise, .. } => {
            visit_calls(then, f);
            if let Some(o) = otherwise {
                visit_calls(o, f);
            }
        }
        BehaviorKind::While { body, .. } => visit_calls(body, f),
        BehaviorKind::InputChoice(bs) => bs.iter().for_each(|br| visit_calls(&br.body, f)),
        BehaviorKind::ProvideUntil { provide, until } => provide
            .iter()
            .chain(until)
            .for_each(|br| visit_calls(&br.body, f)),
        _ => {}
    }
}
