mod common;

use proptest::prelude::*;

use common::gen;
use microlang::values::{
    path_get, path_set, type_conforms, BasicKind, BasicValue, Cardinality, Path, TypeEnv, TypeExpr, ValueNode,
};

fn path() -> impl Strategy<Value = Path> {
    prop::collection::vec((gen::name(), 0usize..3), 1..=3).prop_map(|segs| {
        let mut p = Path::root();
        for (n, i) in segs {
            p.push(n, i);
        }
        p
    })
}

fn related(a: &Path, b: &Path) -> bool {
    a.is_prefix_of(b) || b.is_prefix_of(a)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn get_after_set_returns_the_value(s in gen::value(), p in path(), v in gen::value()) {
        prop_assert_eq!(path_get(&path_set(s, &p, v.clone()), &p), v);
    }

    #[test]
    fn set_leaves_unrelated_paths_alone(s in gen::value(), p in path(), q in path(), v in gen::value()) {
        prop_assume!(!related(&p, &q));
        let before = path_get(&s, &q);
        prop_assert_eq!(path_get(&path_set(s, &p, v), &q), before);
    }

    #[test]
    fn clones_are_deep(s in gen::value(), p in path(), v in gen::value()) {
        let original = s.clone();
        let mut copy = s.clone();
        copy.set(&p, v);
        prop_assert_eq!(s, original);
    }

    #[test]
    fn equality_is_an_equivalence(a in gen::value(), b in gen::value()) {
        prop_assert_eq!(&a, &a.clone());
        prop_assert_eq!(a == b, b == a);
    }
}

/// A flat record type: fields of basic kinds with cardinalities.
#[derive(Debug, Clone)]
struct Flat {
    root: BasicKind,
    fields: Vec<(String, BasicKind, u32, Option<u32>)>,
}

impl Flat {
    fn ty(&self) -> TypeExpr {
        let mut t = TypeExpr::node(self.root);
        for (name, kind, lo, hi) in &self.fields {
            t = t.field(name.clone(), TypeExpr::Basic(*kind), Cardinality::new(*lo, *hi));
        }
        t
    }

    /// Independent conformance oracle for flat records.
    fn accepts(&self, v: &ValueNode) -> bool {
        let kind_ok = |k: BasicKind, b: &BasicValue| k == BasicKind::Any || b.kind() == k;
        if !kind_ok(self.root, v.root()) {
            return false;
        }
        if v.children()
            .keys()
            .any(|k| !self.fields.iter().any(|f| &f.0 == k))
        {
            return false;
        }
        self.fields.iter().all(|(name, kind, lo, hi)| {
            let elems = v.child(name).unwrap_or(&[]);
            let n = elems.len() as u32;
            n >= *lo
                && hi.is_none_or(|h| n <= h)
                && elems
                    .iter()
                    .all(|e| kind_ok(*kind, e.root()) && !e.has_children())
        })
    }
}

fn kind() -> impl Strategy<Value = BasicKind> {
    prop::sample::select(vec![
        BasicKind::Void,
        BasicKind::Bool,
        BasicKind::Int,
        BasicKind::Double,
        BasicKind::String,
        BasicKind::Any,
    ])
}

fn flat() -> impl Strategy<Value = Flat> {
    let field = (kind(), 0u32..2, prop::option::of(1u32..3));
    (kind(), prop::collection::btree_map(gen::name(), field, 0..3)).prop_map(|(root, fields)| Flat {
        root,
        fields: fields
            .into_iter()
            .map(|(n, (k, lo, hi))| (n, k, lo, hi.map(|h| h.max(lo))))
            .collect(),
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn conformance_matches_oracle(t in flat(), v in gen::value()) {
        let env = TypeEnv::new();
        let first = type_conforms(&v, &t.ty(), &env).unwrap();
        let second = type_conforms(&v, &t.ty(), &env).unwrap();
        prop_assert_eq!(&first, &second);
        prop_assert_eq!(first.is_empty(), t.accepts(&v));
    }
}

fn sample(kind: BasicKind, seed: i64) -> BasicValue {
    match kind {
        BasicKind::Void => BasicValue::Void,
        BasicKind::Bool => BasicValue::Bool(seed % 2 == 0),
        BasicKind::Int | BasicKind::Any => BasicValue::Int(seed),
        BasicKind::Double => BasicValue::Double(seed as f64 / 4.0),
        BasicKind::String => BasicValue::String(format!("s{seed}")),
    }
}

proptest! {
    #[test]
    fn values_built_from_the_type_conform(t in flat(), seed in any::<i64>(), extra in 0u32..2) {
        let mut v = ValueNode::leaf(sample(t.root, seed));
        for (name, kind, lo, hi) in &t.fields {
            let n = hi.map_or(lo + extra, |h| (lo + extra).min(h));
            for i in 0..n {
                v.push_child(name.clone(), ValueNode::leaf(sample(*kind, seed.wrapping_add(i as i64))));
            }
        }
        prop_assert!(t.accepts(&v));
        prop_assert_eq!(type_conforms(&v, &t.ty(), &TypeEnv::new()).unwrap(), vec![]);
    }
}
