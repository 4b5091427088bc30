//! Interfaces drawn from a fixed pool of operations.

use std::collections::BTreeSet;

use proptest::prelude::*;

use microlang::checker::ResolvedInterface;
use microlang::lang::{OperationDecl, Signature, SourceSpan};
use microlang::values::{BasicKind, Cardinality, TypeExpr};

pub const POOL: usize = 8;

/// Each pool name has one fixed signature, so interfaces built from the
/// pool never conflict.
pub fn canonical(i: usize) -> Signature {
    let basic = |k| TypeExpr::Basic(k);
    match i % 4 {
        0 => Signature::OneWay {
            request: basic(BasicKind::String),
        },
        1 => Signature::RequestResponse {
            request: basic(BasicKind::Int),
            response: basic(BasicKind::Bool),
        },
        2 => Signature::RequestResponse {
            request: TypeExpr::node(BasicKind::Void).field("sid", basic(BasicKind::String), Cardinality::ONE),
            response: basic(BasicKind::Void),
        },
        _ => Signature::OneWay {
            request: basic(BasicKind::Double),
        },
    }
}

/// Same name as `canonical(i)`, different signature.
pub fn clashing(i: usize) -> Signature {
    match canonical(i) {
        Signature::OneWay { request } => Signature::RequestResponse {
            response: request.clone(),
            request,
        },
        Signature::RequestResponse { request, .. } => Signature::OneWay { request },
    }
}

pub fn op(i: usize, signature: Signature) -> OperationDecl {
    OperationDecl {
        name: format!("op{i}"),
        signature,
        span: SourceSpan::default(),
    }
}

pub fn iface(name: &str, members: &BTreeSet<usize>) -> ResolvedInterface {
    let ops: Vec<_> = members.iter().map(|&i| op(i, canonical(i))).collect();
    ResolvedInterface::from_ops(name, &ops).unwrap()
}

pub fn members() -> impl Strategy<Value = BTreeSet<usize>> {
    prop::collection::btree_set(0..POOL, 0..=POOL)
}

/// Operation names with their signatures, ignoring insertion order.
pub fn content(i: &ResolvedInterface) -> Vec<(String, Signature)> {
    let mut v: Vec<_> = i
        .ops
        .iter()
        .map(|(n, o)| (n.clone(), o.signature.clone()))
        .collect();
    v.sort_by(|a, b| a.0.cmp(&b.0));
    v
}

pub fn names(i: &ResolvedInterface) -> BTreeSet<String> {
    i.ops.keys().cloned().collect()
}
