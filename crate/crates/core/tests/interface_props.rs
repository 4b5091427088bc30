mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;

use common::algebra::{canonical, clashing, content, iface, members, names, op, POOL};
use microlang::checker::{
    check_program, resolve_interface, starting_operations, InterfaceError, ResolvedInterface,
};
use microlang::lang::{parse_source, InterfaceDecl, InterfaceExpr, SourceSpan};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn union_and_intersection_are_commutative(a in members(), b in members()) {
        let (x, y) = (iface("A", &a), iface("B", &b));
        prop_assert_eq!(content(&x.union(&y).unwrap()), content(&y.union(&x).unwrap()));
        prop_assert_eq!(content(&x.intersection(&y).unwrap()), content(&y.intersection(&x).unwrap()));
    }

    #[test]
    fn union_and_intersection_are_associative(a in members(), b in members(), c in members()) {
        let (x, y, z) = (iface("A", &a), iface("B", &b), iface("C", &c));
        prop_assert_eq!(
            content(&x.union(&y).unwrap().union(&z).unwrap()),
            content(&x.union(&y.union(&z).unwrap()).unwrap())
        );
        prop_assert_eq!(
            content(&x.intersection(&y).unwrap().intersection(&z).unwrap()),
            content(&x.intersection(&y.intersection(&z).unwrap()).unwrap())
        );
    }

    #[test]
    fn union_and_intersection_are_idempotent(a in members()) {
        let x = iface("A", &a);
        prop_assert_eq!(content(&x.union(&x).unwrap()), content(&x));
        prop_assert_eq!(content(&x.intersection(&x).unwrap()), content(&x));
    }

    #[test]
    fn sizes_obey_inclusion_exclusion(a in members(), b in members()) {
        let (x, y) = (iface("A", &a), iface("B", &b));
        let u = x.union(&y).unwrap();
        let i = x.intersection(&y).unwrap();
        prop_assert_eq!(u.len() + i.len(), x.len() + y.len());
        // Against plain set operations on the member indices.
        let want_u: BTreeSet<String> = a.union(&b).map(|i| format!("op{i}")).collect();
        let want_i: BTreeSet<String> = a.intersection(&b).map(|i| format!("op{i}")).collect();
        prop_assert_eq!(names(&u), want_u);
        prop_assert_eq!(names(&i), want_i);
    }

    #[test]
    fn a_shared_name_with_another_signature_conflicts(a in members(), b in members(), shared in 0..POOL) {
        let mut a = a;
        a.insert(shared);
        let mut b = b;
        b.remove(&shared);
        let x = iface("A", &a);
        let mut ops: Vec<_> = b.iter().map(|&i| op(i, canonical(i))).collect();
        ops.push(op(shared, clashing(shared)));
        let y = ResolvedInterface::from_ops("B", &ops).unwrap();

        let is_conflict = |r: Result<ResolvedInterface, InterfaceError>| {
            matches!(r, Err(InterfaceError::ConflictingSignature { ref op, .. }) if *op == format!("op{shared}"))
        };
        prop_assert!(is_conflict(x.union(&y)));
        prop_assert!(is_conflict(y.union(&x)));
        prop_assert!(is_conflict(x.intersection(&y)));
        prop_assert!(is_conflict(y.intersection(&x)));

        let decls = vec![
            InterfaceDecl { name: "A".into(), expr: InterfaceExpr::Literal(a.iter().map(|&i| op(i, canonical(i))).collect()), span: SourceSpan::default() },
            InterfaceDecl { name: "B".into(), expr: InterfaceExpr::Literal(ops.clone()), span: SourceSpan::default() },
        ];
        let r = |n: &str| Box::new(InterfaceExpr::Ref { name: n.into(), span: SourceSpan::default() });
        prop_assert!(is_conflict(resolve_interface(&InterfaceExpr::Union(r("A"), r("B")), &decls)));
        prop_assert!(is_conflict(resolve_interface(&InterfaceExpr::Intersection(r("A"), r("B")), &decls)));
    }
}

#[test]
fn starting_operations_are_received_operations() {
    for name in [
        "shop.ml.svc",
        "backoffice.ml.svc",
        "buffering.ml.svc",
        "relay.ml.svc",
        "listings.ml.svc",
    ] {
        let checked = common::load(name);
        let received: BTreeSet<String> = checked.routing.keys().cloned().collect();
        let starting = starting_operations(&checked.program.main, &checked.program.procedures);
        assert!(!starting.is_empty(), "{name}");
        assert!(
            starting.is_subset(&received),
            "{name}: {starting:?} vs {received:?}"
        );
        assert_eq!(
            checked.starting_ops.iter().cloned().collect::<BTreeSet<_>>(),
            starting
        );
    }
}

#[test]
fn checking_is_deterministic() {
    let src = common::source("shop.ml.svc");
    let broken = src.replacen("sodep-lite", "https", 1);
    for text in [src, broken] {
        let run = || {
            let c = check_program(parse_source("shop.ml.svc", &text).unwrap());
            (
                c.diagnostics.iter().map(|d| d.to_string()).collect::<Vec<_>>(),
                c.starting_ops.clone(),
                c.routing.keys().cloned().collect::<Vec<_>>(),
            )
        };
        assert_eq!(run(), run());
    }
}
