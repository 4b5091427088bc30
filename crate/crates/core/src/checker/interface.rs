//! Interface algebra: resolving interface expressions built from literals,
//! references, union (`|`) and intersection (`&`).

use std::collections::HashMap;

use indexmap::IndexMap;
use thiserror::Error;

use crate::lang::{InterfaceDecl, InterfaceExpr, OperationDecl, Signature, SourceSpan};

/// A signature together with the declaration it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedOp {
    pub signature: Signature,
    pub span: SourceSpan,
}

/// A flattened interface: operation name to signature.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResolvedInterface {
    pub name: String,
    pub ops: IndexMap<String, ResolvedOp>,
}

impl ResolvedInterface {
    pub fn from_ops(name: impl Into<String>, ops: &[OperationDecl]) -> Result<Self, InterfaceError> {
        let mut out = ResolvedInterface {
            name: name.into(),
            ops: IndexMap::new(),
        };
        for op in ops {
            if let Some(prev) = out.ops.get(&op.name) {
                return Err(InterfaceError::DuplicateOperation {
                    op: op.name.clone(),
                    first: prev.span.clone(),
                    second: op.span.clone(),
                });
            }
            out.ops.insert(
                op.name.clone(),
                ResolvedOp {
                    signature: op.signature.clone(),
                    span: op.span.clone(),
                },
            );
        }
        Ok(out)
    }

    pub fn get(&self, op: &str) -> Option<&Signature> {
        self.ops.get(op).map(|o| &o.signature)
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    /// Set union of the operation maps; a name present on both sides must
    /// carry identical signatures.
    pub fn union(&self, other: &ResolvedInterface) -> Result<ResolvedInterface, InterfaceError> {
        let mut ops = self.ops.clone();
        for (name, op) in &other.ops {
            match ops.get(name) {
                Some(mine) => check_same(name, mine, op)?,
                None => {
                    ops.insert(name.clone(), op.clone());
                }
            }
        }
        Ok(ResolvedInterface {
            name: format!("{} | {}", self.name, other.name),
            ops,
        })
    }

    /// Operations present on both sides, with the same conflict rule as
    /// [`union`](Self::union).
    pub fn intersection(&self, other: &ResolvedInterface) -> Result<ResolvedInterface, InterfaceError> {
        let mut ops = IndexMap::new();
        for (name, mine) in &self.ops {
            if let Some(theirs) = other.ops.get(name) {
                check_same(name, mine, theirs)?;
                ops.insert(name.clone(), mine.clone());
            }
        }
        Ok(ResolvedInterface {
            name: format!("{} & {}", self.name, other.name),
            ops,
        })
    }
}

fn check_same(name: &str, a: &ResolvedOp, b: &ResolvedOp) -> Result<(), InterfaceError> {
    if a.signature == b.signature {
        Ok(())
    } else {
        Err(InterfaceError::ConflictingSignature {
            op: name.to_owned(),
            first: Box::new(a.clone()),
            second: Box::new(b.clone()),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InterfaceError {
    #[error("unknown interface {name}")]
    UnknownInterface { name: String, span: SourceSpan },
    #[error("conflicting signatures for operation {op} (declared at {} and {})", first.span, second.span)]
    ConflictingSignature {
        op: String,
        first: Box<ResolvedOp>,
        second: Box<ResolvedOp>,
    },
    #[error("operation {op} is declared twice in the same interface (at {first} and {second})")]
    DuplicateOperation {
        op: String,
        first: SourceSpan,
        second: SourceSpan,
    },
    #[error("interface {name} is defined in terms of itself")]
    Cycle { name: String, span: SourceSpan },
}

impl InterfaceError {
    pub fn span(&self) -> &SourceSpan {
        match self {
            InterfaceError::UnknownInterface { span, .. } | InterfaceError::Cycle { span, .. } => span,
            InterfaceError::ConflictingSignature { second, .. } => &second.span,
            InterfaceError::DuplicateOperation { second, .. } => second,
        }
    }
}

/// Named interface declarations, resolved lazily with memoization.
pub struct InterfaceEnv<'a> {
    decls: HashMap<&'a str, &'a InterfaceDecl>,
    resolved: HashMap<String, Result<ResolvedInterface, InterfaceError>>,
    in_progress: Vec<String>,
}

impl<'a> InterfaceEnv<'a> {
    pub fn new(decls: impl IntoIterator<Item = &'a InterfaceDecl>) -> Self {
        let mut map = HashMap::new();
        for d in decls {
            map.entry(d.name.as_str()).or_insert(d);
        }
        InterfaceEnv {
            decls: map,
            resolved: HashMap::new(),
            in_progress: Vec::new(),
        }
    }

    /// Resolves the declaration called `name`.
    pub fn lookup(&mut self, name: &str, span: &SourceSpan) -> Result<ResolvedInterface, InterfaceError> {
        if let Some(r) = self.resolved.get(name) {
            return r.clone();
        }
        let Some(decl) = self.decls.get(name).copied() else {
            return Err(InterfaceError::UnknownInterface {
                name: name.to_owned(),
                span: span.clone(),
            });
        };
        if self.in_progress.iter().any(|n| n == name) {
            return Err(InterfaceError::Cycle {
                name: name.to_owned(),
                span: span.clone(),
            });
        }
        self.in_progress.push(name.to_owned());
        let result = self.resolve(&decl.expr).map(|mut r| {
            r.name = name.to_owned();
            r
        });
        self.in_progress.pop();
        self.resolved.insert(name.to_owned(), result.clone());
        result
    }

    pub fn resolve(&mut self, expr: &InterfaceExpr) -> Result<ResolvedInterface, InterfaceError> {
        match expr {
            InterfaceExpr::Literal(ops) => ResolvedInterface::from_ops("{...}", ops),
            InterfaceExpr::Ref { name, span } => self.lookup(name, span),
            InterfaceExpr::Union(a, b) => {
                let a = self.resolve(a)?;
                let b = self.resolve(b)?;
                a.union(&b)
            }
            InterfaceExpr::Intersection(a, b) => {
                let a = self.resolve(a)?;
                let b = self.resolve(b)?;
                a.intersection(&b)
            }
        }
    }
}

/// Resolves `expr` against the named declarations in `env`.
pub fn resolve_interface(
    expr: &InterfaceExpr,
    env: &[InterfaceDecl],
) -> Result<ResolvedInterface, InterfaceError> {
    InterfaceEnv::new(env).resolve(expr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse_source;
    use crate::values::{BasicKind, TypeExpr};

    fn decls(src: &str) -> Vec<InterfaceDecl> {
        parse_source("t", &format!("{src}\nmain {{ nil }}"))
            .unwrap()
            .interfaces
    }

    fn r(name: &str) -> InterfaceExpr {
        InterfaceExpr::Ref {
            name: name.into(),
            span: SourceSpan::default(),
        }
    }

    #[test]
    fn disjoint_union() {
        let env = decls(
            "interface A { OneWay: f(void) }
             interface B { RequestResponse: g(int)(int) }",
        );
        let u = resolve_interface(&InterfaceExpr::Union(Box::new(r("A")), Box::new(r("B"))), &env).unwrap();
        assert_eq!(u.len(), 2);
        assert_eq!(
            u.get("g"),
            Some(&Signature::RequestResponse {
                request: TypeExpr::Basic(BasicKind::Int),
                response: TypeExpr::Basic(BasicKind::Int),
            })
        );
    }

    #[test]
    fn kind_mismatch_conflicts() {
        let env = decls(
            "interface A { OneWay: f(void) }
             interface B { RequestResponse: f(void)(void) }",
        );
        let err =
            resolve_interface(&InterfaceExpr::Union(Box::new(r("A")), Box::new(r("B"))), &env).unwrap_err();
        let InterfaceError::ConflictingSignature { op, first, second } = err else {
            panic!("expected conflict");
        };
        assert_eq!(op, "f");
        assert_eq!(first.span.start.line, 1);
        assert_eq!(second.span.start.line, 2);
    }

    #[test]
    fn identical_signatures_merge() {
        let env = decls(
            "interface A { OneWay: f(void) }
             interface B { OneWay: f(void), g(string) }",
        );
        let u = resolve_interface(&InterfaceExpr::Union(Box::new(r("A")), Box::new(r("B"))), &env).unwrap();
        assert_eq!(u.len(), 2);
        let i = resolve_interface(
            &InterfaceExpr::Intersection(Box::new(r("A")), Box::new(r("B"))),
            &env,
        )
        .unwrap();
        assert_eq!(i.ops.keys().collect::<Vec<_>>(), vec!["f"]);
    }

    #[test]
    fn unknown_and_cyclic_references() {
        let env = decls("interface A = B  interface B = A");
        assert!(matches!(
            resolve_interface(&r("A"), &env),
            Err(InterfaceError::Cycle { .. })
        ));
        assert!(matches!(
            resolve_interface(&r("Z"), &env),
            Err(InterfaceError::UnknownInterface { name, .. }) if name == "Z"
        ));
    }

    #[test]
    fn duplicate_in_literal() {
        let env = decls("interface A { OneWay: f(void), f(int) }");
        assert!(matches!(
            resolve_interface(&r("A"), &env),
            Err(InterfaceError::DuplicateOperation { .. })
        ));
    }
}
