//! Canonical formatting of programs.
//!
//! Declarations are printed in a fixed order (types, interfaces, input ports,
//! output ports, correlation sets, execution mode, procedures, main), so
//! printing is a normal form: `parse(print(parse(s))) == parse(s)`.

use std::fmt::Write;

use super::ast::*;
use crate::values::{BasicValue, Cardinality, TypeExpr};

const INDENT: &str = "  ";

pub fn pretty_print(program: &Program) -> String {
    let mut p = Printer::default();
    p.program(program);
    p.out
}

/// Prints a single behavior at top level (used in diagnostics and tests).
pub fn print_behavior(b: &Behavior) -> String {
    let mut p = Printer::default();
    p.behavior(b, 0);
    p.out
}

pub fn print_expr(e: &Expr) -> String {
    let mut p = Printer::default();
    p.expr(e);
    p.out
}

#[derive(Default)]
struct Printer {
    out: String,
}

pub(crate) fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            c if c.is_control() => {
                let _ = write!(out, "\\u{{{:x}}}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn literal(v: &BasicValue) -> String {
    match v {
        BasicValue::Void => "void".to_owned(),
        BasicValue::Bool(b) => b.to_string(),
        BasicValue::Int(i) => i.to_string(),
        BasicValue::Double(d) => format!("{d:?}"),
        BasicValue::String(s) => quote(s),
    }
}

fn is_numeric_literal(e: &Expr) -> bool {
    matches!(
        e.kind,
        ExprKind::Literal(BasicValue::Int(_) | BasicValue::Double(_))
    )
}

impl Printer {
    fn line(&mut self, depth: usize, text: &str) {
        for _ in 0..depth {
            self.out.push_str(INDENT);
        }
        self.out.push_str(text);
        self.out.push('\n');
    }

    fn indent(&mut self, depth: usize) {
        for _ in 0..depth {
            self.out.push_str(INDENT);
        }
    }

    fn program(&mut self, p: &Program) {
        for t in &p.types {
            self.out.push_str(&format!("type {}: ", t.name));
            self.type_expr(&t.ty, 0);
            self.out.push_str("\n\n");
        }
        for i in &p.interfaces {
            self.out.push_str(&format!("interface {}", i.name));
            match &i.expr {
                InterfaceExpr::Literal(ops) => {
                    self.out.push(' ');
                    self.iface_literal(ops, 0);
                }
                other => {
                    self.out.push_str(" = ");
                    self.iface_expr(other, 0);
                }
            }
            self.out.push_str("\n\n");
        }
        for port in p.input_ports.iter().chain(&p.output_ports) {
            self.port(port);
        }
        for c in &p.csets {
            let aliases: Vec<String> = c
                .aliases
                .iter()
                .map(|a| format!("{}.{}", a.operation, a.path))
                .collect();
            self.line(0, &format!("cset {{ {}: {} }}", c.var, aliases.join(" ")));
            self.out.push('\n');
        }
        if p.execution != ExecutionMode::default() {
            self.line(0, &format!("execution {{ {} }}", p.execution.as_str()));
            self.out.push('\n');
        }
        for proc in &p.procedures {
            self.out.push_str(&format!("define {} ", proc.name));
            self.block(&proc.body, 0);
            self.out.push_str("\n\n");
        }
        self.out.push_str("main ");
        self.block(&p.main, 0);
        self.out.push('\n');
    }

    fn type_expr(&mut self, t: &TypeExpr, depth: usize) {
        match t {
            TypeExpr::Basic(k) => self.out.push_str(k.name()),
            TypeExpr::Named(n) => self.out.push_str(n),
            TypeExpr::Node { root, fields } => {
                self.out.push_str(root.name());
                if fields.is_empty() {
                    self.out.push_str(" { }");
                    return;
                }
                self.out.push_str(" {\n");
                for (name, f) in fields {
                    self.indent(depth + 1);
                    self.out.push_str(name);
                    self.out.push_str(&cardinality(f.card));
                    self.out.push_str(": ");
                    self.type_expr(&f.ty, depth + 1);
                    self.out.push('\n');
                }
                self.indent(depth);
                self.out.push('}');
            }
        }
    }

    fn iface_literal(&mut self, ops: &[OperationDecl], depth: usize) {
        if ops.is_empty() {
            self.out.push_str("{ }");
            return;
        }
        self.out.push_str("{\n");
        // Consecutive operations of the same kind share one section header.
        let mut i = 0;
        while i < ops.len() {
            let kind = ops[i].signature.kind();
            let mut j = i;
            while j < ops.len() && ops[j].signature.kind() == kind {
                j += 1;
            }
            let header = match kind {
                OpKind::OneWay => "OneWay: ",
                OpKind::RequestResponse => "RequestResponse: ",
            };
            self.indent(depth + 1);
            self.out.push_str(header);
            for (n, op) in ops[i..j].iter().enumerate() {
                if n > 0 {
                    self.out.push_str(",\n");
                    self.indent(depth + 1);
                    self.out.push_str(&" ".repeat(header.len()));
                }
                self.out.push_str(&op.name);
                self.out.push('(');
                self.type_expr(op.signature.request(), depth + 2);
                self.out.push(')');
                if let Some(resp) = op.signature.response() {
                    self.out.push('(');
                    self.type_expr(resp, depth + 2);
                    self.out.push(')');
                }
            }
            self.out.push('\n');
            i = j;
        }
        self.indent(depth);
        self.out.push('}');
    }

    fn iface_expr(&mut self, e: &InterfaceExpr, depth: usize) {
        match e {
            InterfaceExpr::Ref { name, .. } => self.out.push_str(name),
            InterfaceExpr::Literal(ops) => self.iface_literal(ops, depth),
            InterfaceExpr::Union(a, b) => {
                self.iface_expr(a, depth);
                self.out.push_str(" | ");
                self.iface_operand(b, matches!(**b, InterfaceExpr::Union(..)), depth);
            }
            InterfaceExpr::Intersection(a, b) => {
                self.iface_operand(a, matches!(**a, InterfaceExpr::Union(..)), depth);
                self.out.push_str(" & ");
                self.iface_operand(
                    b,
                    matches!(**b, InterfaceExpr::Union(..) | InterfaceExpr::Intersection(..)),
                    depth,
                );
            }
        }
    }

    fn iface_operand(&mut self, e: &InterfaceExpr, parens: bool, depth: usize) {
        if parens {
            self.out.push('(');
            self.iface_expr(e, depth);
            self.out.push(')');
        } else {
            self.iface_expr(e, depth);
        }
    }

    fn port(&mut self, port: &PortDecl) {
        let kw = match port.direction {
            PortDirection::Input => "inputPort",
            PortDirection::Output => "outputPort",
        };
        self.line(0, &format!("{kw} {} {{", port.name));
        if let Some(loc) = &port.location {
            self.line(1, &format!("Location: {}", quote(loc)));
        }
        if let Some(proto) = &port.protocol {
            let mut text = format!("Protocol: {}", proto.name);
            if !proto.params.is_empty() {
                let params: Vec<String> = proto
                    .params
                    .iter()
                    .map(|(k, v)| format!("{k} = {}", literal(v)))
                    .collect();
                let _ = write!(text, " {{ {} }}", params.join(", "));
            }
            self.line(1, &text);
        }
        if !port.interfaces.is_empty() {
            let names: Vec<&str> = port.interfaces.iter().map(|n| n.name.as_str()).collect();
            self.line(1, &format!("Interfaces: {}", names.join(", ")));
        }
        self.line(0, "}");
        self.out.push('\n');
    }

    /// `{ ... }` with the closing brace at `depth`; no trailing newline.
    fn block(&mut self, b: &Behavior, depth: usize) {
        if matches!(b.kind, BehaviorKind::Nil) {
            self.out.push_str("{ nil }");
            return;
        }
        self.out.push_str("{\n");
        self.indent(depth + 1);
        self.behavior(b, depth + 1);
        self.out.push('\n');
        self.indent(depth);
        self.out.push('}');
    }

    /// Prints `b` as a statement wrapped in braces.
    fn braced(&mut self, b: &Behavior, depth: usize) {
        self.block(b, depth);
    }

    fn behavior(&mut self, b: &Behavior, depth: usize) {
        match &b.kind {
            BehaviorKind::Parallel(l, r) => {
                if matches!(l.kind, BehaviorKind::Parallel(..)) {
                    self.braced(l, depth);
                } else {
                    self.behavior(l, depth);
                }
                self.out.push('\n');
                self.indent(depth);
                self.out.push_str("|\n");
                self.indent(depth);
                self.behavior(r, depth);
            }
            BehaviorKind::Sequence(l, r) => {
                if matches!(l.kind, BehaviorKind::Parallel(..) | BehaviorKind::Sequence(..)) {
                    self.braced(l, depth);
                } else {
                    self.statement(l, depth);
                }
                self.out.push_str(";\n");
                self.indent(depth);
                if matches!(r.kind, BehaviorKind::Parallel(..)) {
                    self.braced(r, depth);
                } else {
                    self.behavior(r, depth);
                }
            }
            _ => self.statement(b, depth),
        }
    }

    fn statement(&mut self, b: &Behavior, depth: usize) {
        match &b.kind {
            BehaviorKind::Nil => self.out.push_str("nil"),
            BehaviorKind::Sequence(..) | BehaviorKind::Parallel(..) => self.braced(b, depth),
            BehaviorKind::Assign { target, value } => {
                self.path(target);
                self.out.push_str(" = ");
                self.expr(value);
            }
            BehaviorKind::If {
                cond,
                then,
                otherwise,
            } => {
                self.out.push_str("if (");
                self.expr(cond);
                self.out.push_str(") ");
                self.block(then, depth);
                if let Some(other) = otherwise {
                    self.out.push_str(" else ");
                    if matches!(other.kind, BehaviorKind::If { .. }) {
                        self.statement(other, depth);
                    } else {
                        self.block(other, depth);
                    }
                }
            }
            BehaviorKind::While { cond, body } => {
                self.out.push_str("while (");
                self.expr(cond);
                self.out.push_str(") ");
                self.block(body, depth);
            }
            BehaviorKind::Call(name) => self.out.push_str(name),
            BehaviorKind::InputChoice(branches) => {
                if let [single] = branches.as_slice() {
                    self.branch(single, depth);
                } else {
                    self.branches(branches, depth);
                }
            }
            BehaviorKind::ProvideUntil { provide, until } => {
                self.out.push_str("provide\n");
                self.indent(depth + 1);
                self.branches(provide, depth + 1);
                self.out.push('\n');
                self.indent(depth);
                self.out.push_str("until\n");
                self.indent(depth + 1);
                self.branches(until, depth + 1);
            }
            BehaviorKind::SolicitResponse {
                port,
                operation,
                request,
                response,
            } => {
                self.out.push_str(&format!("{operation}@{port}("));
                if let Some(r) = request {
                    self.expr(r);
                }
                self.out.push_str(")(");
                if let Some(r) = response {
                    self.path(r);
                }
                self.out.push(')');
            }
            BehaviorKind::Notify {
                port,
                operation,
                request,
            } => {
                self.out.push_str(&format!("{operation}@{port}("));
                if let Some(r) = request {
                    self.expr(r);
                }
                self.out.push(')');
            }
            BehaviorKind::Rebind {
                port,
                location,
                protocol,
            } => {
                self.out.push_str(&format!("rebind {port} "));
                self.expr(location);
                self.out.push(' ');
                // A leading minus would continue the location as a subtraction.
                let text = print_expr(protocol);
                if text.starts_with('-') {
                    self.out.push_str(&format!("({text})"));
                } else {
                    self.out.push_str(&text);
                }
            }
            BehaviorKind::Sleep(e) => {
                self.out.push_str("sleep(");
                self.expr(e);
                self.out.push(')');
            }
        }
    }

    fn branches(&mut self, branches: &[InputBranch], depth: usize) {
        for (i, br) in branches.iter().enumerate() {
            if i > 0 {
                self.out.push('\n');
                self.indent(depth);
            }
            self.out.push_str("[ ");
            self.branch(br, depth);
            self.out.push_str(" ]");
        }
    }

    fn branch(&mut self, br: &InputBranch, depth: usize) {
        self.out.push_str(&br.operation);
        self.out.push('(');
        if let Some(req) = &br.request {
            self.path(req);
        }
        self.out.push(')');
        if let BranchKind::RequestResponse { response } = &br.kind {
            self.out.push('(');
            if let Some(resp) = response {
                self.expr(resp);
            }
            self.out.push(')');
        }
        if !matches!(br.body.kind, BehaviorKind::Nil) {
            self.out.push(' ');
            self.block(&br.body, depth);
        }
    }

    fn path(&mut self, p: &PathExpr) {
        for (i, seg) in p.segments.iter().enumerate() {
            if i > 0 {
                self.out.push('.');
            }
            self.out.push_str(&seg.name);
            if let Some(idx) = &seg.index {
                self.out.push('[');
                self.expr(idx);
                self.out.push(']');
            }
        }
    }

    fn expr(&mut self, e: &Expr) {
        match &e.kind {
            ExprKind::Literal(v) => self.out.push_str(&literal(v)),
            ExprKind::Path(p) => self.path(p),
            ExprKind::New => self.out.push_str("new"),
            ExprKind::Count(p) => {
                self.out.push('#');
                self.path(p);
            }
            ExprKind::Unary(op, inner) => {
                self.out.push(match op {
                    UnaryOp::Neg => '-',
                    UnaryOp::Not => '!',
                });
                // `-5` would read back as a negative literal.
                let parens = matches!(inner.kind, ExprKind::Binary(..))
                    || (*op == UnaryOp::Neg && is_numeric_literal(inner));
                self.operand(inner, parens);
            }
            ExprKind::Binary(op, l, r) => {
                let prec = op.precedence();
                self.operand(l, binary_prec(l).is_some_and(|p| p < prec));
                self.out.push(' ');
                self.out.push_str(op.symbol());
                self.out.push(' ');
                self.operand(r, binary_prec(r).is_some_and(|p| p <= prec));
            }
        }
    }

    fn operand(&mut self, e: &Expr, parens: bool) {
        if parens {
            self.out.push('(');
            self.expr(e);
            self.out.push(')');
        } else {
            self.expr(e);
        }
    }
}

fn binary_prec(e: &Expr) -> Option<u8> {
    match &e.kind {
        ExprKind::Binary(op, ..) => Some(op.precedence()),
        _ => None,
    }
}

fn cardinality(c: Cardinality) -> String {
    match c {
        Cardinality::ONE => String::new(),
        Cardinality::OPTIONAL => "?".to_owned(),
        Cardinality::MANY => "*".to_owned(),
        other => other.to_string(),
    }
}
