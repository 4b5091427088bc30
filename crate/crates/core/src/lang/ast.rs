//! Abstract syntax tree of a service program.
//!
//! Every node carries a [`SourceSpan`]; spans compare equal unconditionally,
//! so `==` on AST values is structural equality.

use std::fmt;

use super::span::SourceSpan;
use crate::values::{BasicValue, Path, TypeExpr};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExecutionMode {
    #[default]
    Concurrent,
    Sequential,
}

impl ExecutionMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ExecutionMode::Concurrent => "concurrent",
            ExecutionMode::Sequential => "sequential",
        }
    }
}

impl std::str::FromStr for ExecutionMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "concurrent" => Ok(ExecutionMode::Concurrent),
            "sequential" => Ok(ExecutionMode::Sequential),
            other => Err(format!(
                "unknown execution mode `{other}` (expected concurrent or sequential)"
            )),
        }
    }
}

/// One source file: a single service.
#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    pub types: Vec<TypeDecl>,
    pub interfaces: Vec<InterfaceDecl>,
    pub input_ports: Vec<PortDecl>,
    pub output_ports: Vec<PortDecl>,
    pub csets: Vec<CsetDecl>,
    pub execution: ExecutionMode,
    pub procedures: Vec<Procedure>,
    pub main: Behavior,
    pub span: SourceSpan,
}

impl Program {
    /// A program with no declarations and the given `main`.
    pub fn with_main(main: Behavior) -> Self {
        Program {
            types: Vec::new(),
            interfaces: Vec::new(),
            input_ports: Vec::new(),
            output_ports: Vec::new(),
            csets: Vec::new(),
            execution: ExecutionMode::default(),
            procedures: Vec::new(),
            main,
            span: SourceSpan::default(),
        }
    }

    pub fn procedure(&self, name: &str) -> Option<&Procedure> {
        self.procedures.iter().find(|p| p.name == name)
    }

    pub fn ports(&self) -> impl Iterator<Item = &PortDecl> {
        self.input_ports.iter().chain(&self.output_ports)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TypeDecl {
    pub name: String,
    pub ty: TypeExpr,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterfaceDecl {
    pub name: String,
    pub expr: InterfaceExpr,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InterfaceExpr {
    Literal(Vec<OperationDecl>),
    Ref { name: String, span: SourceSpan },
    Union(Box<InterfaceExpr>, Box<InterfaceExpr>),
    Intersection(Box<InterfaceExpr>, Box<InterfaceExpr>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OpKind {
    OneWay,
    RequestResponse,
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OpKind::OneWay => "one-way",
            OpKind::RequestResponse => "request-response",
        })
    }
}

/// Operation signature: request type, plus response type for request-response.
#[derive(Debug, Clone, PartialEq)]
pub enum Signature {
    OneWay { request: TypeExpr },
    RequestResponse { request: TypeExpr, response: TypeExpr },
}

impl Signature {
    pub fn kind(&self) -> OpKind {
        match self {
            Signature::OneWay { .. } => OpKind::OneWay,
            Signature::RequestResponse { .. } => OpKind::RequestResponse,
        }
    }

    pub fn request(&self) -> &TypeExpr {
        match self {
            Signature::OneWay { request } | Signature::RequestResponse { request, .. } => request,
        }
    }

    pub fn response(&self) -> Option<&TypeExpr> {
        match self {
            Signature::OneWay { .. } => None,
            Signature::RequestResponse { response, .. } => Some(response),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OperationDecl {
    pub name: String,
    pub signature: Signature,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PortDirection {
    Input,
    Output,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolDecl {
    pub name: String,
    pub params: Vec<(String, BasicValue)>,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NameRef {
    pub name: String,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PortDecl {
    pub name: String,
    pub direction: PortDirection,
    /// Raw location literal, validated by the checker.
    pub location: Option<String>,
    pub protocol: Option<ProtocolDecl>,
    pub interfaces: Vec<NameRef>,
    pub span: SourceSpan,
}

/// `cset { var: Op.path ... }`: one correlation variable and its aliases.
#[derive(Debug, Clone, PartialEq)]
pub struct CsetDecl {
    pub var: String,
    pub aliases: Vec<CsetAlias>,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsetAlias {
    pub operation: String,
    pub path: Path,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Procedure {
    pub name: String,
    pub body: Behavior,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Behavior {
    pub kind: BehaviorKind,
    pub span: SourceSpan,
}

impl Behavior {
    pub fn new(kind: BehaviorKind) -> Self {
        Behavior {
            kind,
            span: SourceSpan::default(),
        }
    }

    pub fn nil() -> Self {
        Behavior::new(BehaviorKind::Nil)
    }

    pub fn seq(a: Behavior, b: Behavior) -> Self {
        Behavior::new(BehaviorKind::Sequence(Box::new(a), Box::new(b)))
    }

    pub fn par(a: Behavior, b: Behavior) -> Self {
        Behavior::new(BehaviorKind::Parallel(Box::new(a), Box::new(b)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BehaviorKind {
    Nil,
    Assign {
        target: PathExpr,
        value: Expr,
    },
    Sequence(Box<Behavior>, Box<Behavior>),
    Parallel(Box<Behavior>, Box<Behavior>),
    If {
        cond: Expr,
        then: Box<Behavior>,
        otherwise: Option<Box<Behavior>>,
    },
    While {
        cond: Expr,
        body: Box<Behavior>,
    },
    Call(String),
    InputChoice(Vec<InputBranch>),
    ProvideUntil {
        provide: Vec<InputBranch>,
        until: Vec<InputBranch>,
    },
    SolicitResponse {
        port: String,
        operation: String,
        request: Option<Expr>,
        response: Option<PathExpr>,
    },
    Notify {
        port: String,
        operation: String,
        request: Option<Expr>,
    },
    Rebind {
        port: String,
        location: Expr,
        protocol: Expr,
    },
    Sleep(Expr),
}

/// A guarded branch of an input choice: `op(req)` or `op(req)(resp) { body }`.
#[derive(Debug, Clone, PartialEq)]
pub struct InputBranch {
    pub operation: String,
    pub request: Option<PathExpr>,
    pub kind: BranchKind,
    pub body: Behavior,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, PartialEq)]
pub enum BranchKind {
    OneWay,
    /// The response expression is evaluated after the body completes.
    RequestResponse {
        response: Option<Expr>,
    },
}

impl BranchKind {
    pub fn op_kind(&self) -> OpKind {
        match self {
            BranchKind::OneWay => OpKind::OneWay,
            BranchKind::RequestResponse { .. } => OpKind::RequestResponse,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathExpr {
    pub segments: Vec<PathSegment>,
    pub span: SourceSpan,
}

impl PathExpr {
    /// A path with only literal-free segments (index 0 everywhere).
    pub fn simple(names: &[&str]) -> Self {
        PathExpr {
            segments: names
                .iter()
                .map(|n| PathSegment {
                    name: (*n).to_owned(),
                    index: None,
                })
                .collect(),
            span: SourceSpan::default(),
        }
    }

    /// The static path when no segment carries an index expression other than
    /// an integer literal.
    pub fn as_static(&self) -> Option<Path> {
        let mut out = Path::root();
        for seg in &self.segments {
            let index = match &seg.index {
                None => 0,
                Some(e) => match &e.kind {
                    ExprKind::Literal(BasicValue::Int(i)) if *i >= 0 => *i as usize,
                    _ => return None,
                },
            };
            out.push(seg.name.clone(), index);
        }
        Some(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathSegment {
    pub name: String,
    pub index: Option<Box<Expr>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: SourceSpan,
}

impl Expr {
    pub fn new(kind: ExprKind) -> Self {
        Expr {
            kind,
            span: SourceSpan::default(),
        }
    }

    pub fn literal(v: impl Into<BasicValue>) -> Self {
        Expr::new(ExprKind::Literal(v.into()))
    }

    pub fn path(p: PathExpr) -> Self {
        Expr::new(ExprKind::Path(p))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    Literal(BasicValue),
    Path(PathExpr),
    /// `new`: a fresh session token.
    New,
    /// `#path`: number of elements in the vector at `path`.
    Count(PathExpr),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Or,
    And,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Add,
    Sub,
    Mul,
    Div,
    Rem,
}

impl BinaryOp {
    /// Binding strength; higher binds tighter. All levels are left-associative.
    pub fn precedence(self) -> u8 {
        match self {
            BinaryOp::Or => 1,
            BinaryOp::And => 2,
            BinaryOp::Eq | BinaryOp::Ne => 3,
            BinaryOp::Lt | BinaryOp::Le | BinaryOp::Gt | BinaryOp::Ge => 4,
            BinaryOp::Add | BinaryOp::Sub => 5,
            BinaryOp::Mul | BinaryOp::Div | BinaryOp::Rem => 6,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Or => "||",
            BinaryOp::And => "&&",
            BinaryOp::Eq => "==",
            BinaryOp::Ne => "!=",
            BinaryOp::Lt => "<",
            BinaryOp::Le => "<=",
            BinaryOp::Gt => ">",
            BinaryOp::Ge => ">=",
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Rem => "%",
        }
    }
}
