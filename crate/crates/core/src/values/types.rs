use std::collections::HashSet;
use std::fmt;

use indexmap::IndexMap;
use thiserror::Error;

use super::{Path, ValueNode};

/// Root kinds usable in type expressions. `Any` accepts every root value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BasicKind {
    Void,
    Bool,
    Int,
    Double,
    String,
    Any,
}

impl BasicKind {
    pub const ALL: [BasicKind; 6] = [
        BasicKind::Void,
        BasicKind::Bool,
        BasicKind::Int,
        BasicKind::Double,
        BasicKind::String,
        BasicKind::Any,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BasicKind::Void => "void",
            BasicKind::Bool => "bool",
            BasicKind::Int => "int",
            BasicKind::Double => "double",
            BasicKind::String => "string",
            BasicKind::Any => "any",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }

    fn accepts(self, found: BasicKind) -> bool {
        self == BasicKind::Any || self == found
    }
}

impl fmt::Display for BasicKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Allowed number of elements in a child vector: `lo..=hi`, `hi = None` is unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Cardinality {
    pub lo: u32,
    pub hi: Option<u32>,
}

impl Cardinality {
    pub const ONE: Cardinality = Cardinality { lo: 1, hi: Some(1) };
    pub const OPTIONAL: Cardinality = Cardinality { lo: 0, hi: Some(1) };
    pub const MANY: Cardinality = Cardinality { lo: 0, hi: None };

    pub fn new(lo: u32, hi: Option<u32>) -> Self {
        Cardinality { lo, hi }
    }

    pub fn contains(&self, n: usize) -> bool {
        n >= self.lo as usize && self.hi.is_none_or(|hi| n <= hi as usize)
    }

    pub fn is_valid(&self) -> bool {
        self.hi.is_none_or(|hi| self.lo <= hi)
    }
}

impl Default for Cardinality {
    fn default() -> Self {
        Cardinality::ONE
    }
}

impl fmt::Display for Cardinality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.hi {
            Some(hi) => write!(f, "[{},{}]", self.lo, hi),
            None => write!(f, "[{},*]", self.lo),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldType {
    pub ty: TypeExpr,
    pub card: Cardinality,
}

/// A message or variable type.
///
/// `Basic(k)` is shorthand for a node type with root `k` and no fields.
#[derive(Debug, Clone, PartialEq)]
pub enum TypeExpr {
    Basic(BasicKind),
    Named(String),
    Node {
        root: BasicKind,
        fields: IndexMap<String, FieldType>,
    },
}

impl TypeExpr {
    pub fn node(root: BasicKind) -> Self {
        TypeExpr::Node {
            root,
            fields: IndexMap::new(),
        }
    }

    /// Builder: adds a field to a node type (converting a basic type first).
    pub fn field(self, name: impl Into<String>, ty: TypeExpr, card: Cardinality) -> Self {
        let (root, mut fields) = match self {
            TypeExpr::Node { root, fields } => (root, fields),
            TypeExpr::Basic(root) => (root, IndexMap::new()),
            TypeExpr::Named(_) => panic!("cannot add fields to a named type reference"),
        };
        fields.insert(name.into(), FieldType { ty, card });
        TypeExpr::Node { root, fields }
    }

    /// Names of every type referenced from this expression (not transitively).
    pub fn references(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_refs(&mut out);
        out
    }

    fn collect_refs<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            TypeExpr::Basic(_) => {}
            TypeExpr::Named(n) => out.push(n),
            TypeExpr::Node { fields, .. } => {
                for f in fields.values() {
                    f.ty.collect_refs(out);
                }
            }
        }
    }
}

/// Named type definitions.
pub type TypeEnv = IndexMap<String, TypeExpr>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConformError {
    #[error("unknown type {0}")]
    Unresolved(String),
    #[error("type {0} is defined in terms of itself")]
    Cyclic(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ViolationReason {
    WrongRootKind { expected: BasicKind, found: BasicKind },
    Cardinality { found: usize, allowed: Cardinality },
    UnexpectedChild,
}

/// A single place where a value does not conform to its type.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub path: Path,
    pub reason: ViolationReason,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.reason {
            ViolationReason::WrongRootKind { .. } => write!(f, "wrong root kind at {}", self.path),
            ViolationReason::Cardinality { found, allowed } => {
                write!(f, "cardinality {found} not in {allowed} at {}", self.path)
            }
            ViolationReason::UnexpectedChild => write!(f, "unexpected child at {}", self.path),
        }
    }
}

/// Resolves a chain of named references down to a basic or node type.
pub(crate) fn resolve<'a>(ty: &'a TypeExpr, env: &'a TypeEnv) -> Result<&'a TypeExpr, ConformError> {
    let mut cur = ty;
    let mut seen = HashSet::new();
    while let TypeExpr::Named(name) = cur {
        if !seen.insert(name.as_str()) {
            return Err(ConformError::Cyclic(name.clone()));
        }
        cur = env
            .get(name)
            .ok_or_else(|| ConformError::Unresolved(name.clone()))?;
    }
    Ok(cur)
}

/// Checks every name reachable from `ty` resolves, and that no name is an
/// alias cycle.
fn validate(ty: &TypeExpr, env: &TypeEnv) -> Result<(), ConformError> {
    let mut visited: HashSet<&str> = HashSet::new();
    let mut stack = vec![ty];
    while let Some(t) = stack.pop() {
        let resolved = resolve(t, env)?;
        if let TypeExpr::Named(n) = t {
            if !visited.insert(n) {
                continue;
            }
        }
        if let TypeExpr::Node { fields, .. } = resolved {
            stack.extend(fields.values().map(|f| &f.ty));
        }
    }
    Ok(())
}

/// Structural conformance of `value` against `ty`.
///
/// Returns the (possibly empty) list of violations; an empty list means the
/// value conforms. Node types are closed: children not declared by the type
/// are reported as violations.
pub fn type_conforms(
    value: &ValueNode,
    ty: &TypeExpr,
    env: &TypeEnv,
) -> Result<Vec<Violation>, ConformError> {
    validate(ty, env)?;
    let mut out = Vec::new();
    check(value, ty, env, &Path::root(), &mut out)?;
    Ok(out)
}

fn check(
    value: &ValueNode,
    ty: &TypeExpr,
    env: &TypeEnv,
    at: &Path,
    out: &mut Vec<Violation>,
) -> Result<(), ConformError> {
    let empty = IndexMap::new();
    let (root, fields) = match resolve(ty, env)? {
        TypeExpr::Basic(k) => (*k, &empty),
        TypeExpr::Node { root, fields } => (*root, fields),
        TypeExpr::Named(_) => unreachable!("resolve strips names"),
    };
    let found = value.root().kind();
    if !root.accepts(found) {
        out.push(Violation {
            path: at.clone(),
            reason: ViolationReason::WrongRootKind {
                expected: root,
                found,
            },
        });
    }
    for (name, field) in fields {
        let elems = value.child(name).unwrap_or(&[]);
        if !field.card.contains(elems.len()) {
            out.push(Violation {
                path: at.child(name.clone(), 0),
                reason: ViolationReason::Cardinality {
                    found: elems.len(),
                    allowed: field.card,
                },
            });
        }
        for (i, elem) in elems.iter().enumerate() {
            check(elem, &field.ty, env, &at.child(name.clone(), i), out)?;
        }
    }
    for name in value.children().keys() {
        if !fields.contains_key(name) {
            out.push(Violation {
                path: at.child(name.clone(), 0),
                reason: ViolationReason::UnexpectedChild,
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::values::BasicValue;

    fn env() -> TypeEnv {
        TypeEnv::new()
    }

    #[test]
    fn double_accepts_double() {
        let v = ValueNode::leaf(2.75);
        assert!(type_conforms(&v, &TypeExpr::Basic(BasicKind::Double), &env())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn void_value_against_void_and_double() {
        let v = ValueNode::void();
        assert!(type_conforms(&v, &TypeExpr::Basic(BasicKind::Void), &env())
            .unwrap()
            .is_empty());
        let viol = type_conforms(&v, &TypeExpr::Basic(BasicKind::Double), &env()).unwrap();
        assert_eq!(viol.len(), 1);
        assert_eq!(viol[0].to_string(), "wrong root kind at (root)");
    }

    #[test]
    fn cardinality_enumeration_against_exactly_one() {
        let ty =
            TypeExpr::node(BasicKind::Void).field("id", TypeExpr::Basic(BasicKind::String), Cardinality::ONE);
        for n in 0..=3usize {
            let mut v = ValueNode::void();
            for i in 0..n {
                v.push_child("id", ValueNode::leaf(format!("p{i}")));
            }
            let viol = type_conforms(&v, &ty, &env()).unwrap();
            // Brute force over the range [1,1].
            let ok = (1..=1).contains(&n);
            assert_eq!(viol.is_empty(), ok, "n={n}");
            if !ok {
                assert_eq!(viol[0].to_string(), format!("cardinality {n} not in [1,1] at id"));
            }
        }
    }

    #[test]
    fn closed_world_and_any() {
        let v = ValueNode::leaf("s").with_child("extra", ValueNode::leaf(1));
        let viol = type_conforms(&v, &TypeExpr::Basic(BasicKind::Any), &env()).unwrap();
        assert_eq!(viol.len(), 1);
        assert_eq!(viol[0].reason, ViolationReason::UnexpectedChild);
        assert_eq!(viol[0].to_string(), "unexpected child at extra");
        for root in [
            BasicValue::Void,
            BasicValue::Bool(true),
            BasicValue::Int(1),
            BasicValue::Double(0.5),
            BasicValue::from("x"),
        ] {
            let v = ValueNode::leaf(root);
            assert!(type_conforms(&v, &TypeExpr::Basic(BasicKind::Any), &env())
                .unwrap()
                .is_empty());
        }
    }

    #[test]
    fn named_and_recursive_types() {
        let mut env = TypeEnv::new();
        env.insert(
            "List".into(),
            TypeExpr::node(BasicKind::Int).field(
                "next",
                TypeExpr::Named("List".into()),
                Cardinality::OPTIONAL,
            ),
        );
        let v =
            ValueNode::leaf(1).with_child("next", ValueNode::leaf(2).with_child("next", ValueNode::leaf(3)));
        let ty = TypeExpr::Named("List".into());
        assert!(type_conforms(&v, &ty, &env).unwrap().is_empty());
        let bad = ValueNode::leaf(1).with_child("next", ValueNode::leaf("x"));
        let viol = type_conforms(&bad, &ty, &env).unwrap();
        assert_eq!(viol[0].to_string(), "wrong root kind at next");
    }

    #[test]
    fn unresolved_is_an_error_not_a_violation() {
        let ty =
            TypeExpr::node(BasicKind::Void).field("x", TypeExpr::Named("Missing".into()), Cardinality::MANY);
        assert_eq!(
            type_conforms(&ValueNode::void(), &ty, &env()),
            Err(ConformError::Unresolved("Missing".into()))
        );
    }

    #[test]
    fn alias_cycle_is_reported() {
        let mut env = TypeEnv::new();
        env.insert("A".into(), TypeExpr::Named("B".into()));
        env.insert("B".into(), TypeExpr::Named("A".into()));
        assert!(matches!(
            type_conforms(&ValueNode::void(), &TypeExpr::Named("A".into()), &env),
            Err(ConformError::Cyclic(_))
        ));
    }
}
