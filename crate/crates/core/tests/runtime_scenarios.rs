mod common;

use std::sync::mpsc;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{item, items, load, session, ShopRig};
use microlang::checker::{check_program, CheckedProgram};
use microlang::lang::{parse_behavior, parse_source};
use microlang::net::{FaultKind, LocalRegistry};
use microlang::runtime::{
    run_isolated, start_service, EventKind, MessageEnvelope, RoutingOutcome, ServiceConfig, ServiceHandle,
};
use microlang::values::{Path, ValueNode};

fn compile(src: &str) -> CheckedProgram {
    let c = check_program(parse_source("inline.ml.svc", src).unwrap_or_else(|e| panic!("{e}")));
    assert!(c.is_ok(), "{:?}", c.diagnostics);
    c
}

fn start(src: &str, seed: u64) -> ServiceHandle {
    start_service(compile(src), ServiceConfig::new("svc").seed(seed)).unwrap()
}

/// Delivers a request-response message and waits for its reply.
fn ask(h: &ServiceHandle, op: &str, payload: ValueNode) -> (RoutingOutcome, Result<ValueNode, FaultKind>) {
    let (tx, rx) = mpsc::channel();
    let port = "In";
    let out = h.deliver(MessageEnvelope::new(port, op, payload).with_reply(tx));
    let reply = rx
        .recv_timeout(Duration::from_secs(5))
        .expect("reply")
        .map_err(|f| f.kind);
    (out, reply)
}

#[test]
fn cold_start_then_spawn_on_first_message() {
    let rig = ShopRig::local(1);
    assert_eq!(rig.shop.process_count(), 0);
    rig.login();
    assert_eq!(rig.shop.process_count(), 1);
}

#[test]
fn correlation_matches_the_owning_process() {
    let rig = ShopRig::local(3);
    let mut owners = Vec::new();
    for _ in 0..3 {
        let (tx, rx) = mpsc::channel();
        let out = rig
            .shop
            .deliver(MessageEnvelope::new("Customers", "login", ValueNode::void()).with_reply(tx));
        let RoutingOutcome::SpawnedNew(pid) = out else {
            panic!("{out:?}")
        };
        let sid = rx.recv().unwrap().unwrap().root().as_str().unwrap().to_owned();
        owners.push((sid, pid));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let sid = if rng.gen_bool(0.8) {
            owners[rng.gen_range(0..3)].0.clone()
        } else {
            format!("{:032x}", rng.gen::<u128>())
        };
        // Linear scan over the stored tuples.
        let expected = owners.iter().find(|(s, _)| *s == sid).map(|(_, p)| p.clone());
        let (tx, _rx) = mpsc::channel();
        let out = rig
            .shop
            .deliver(MessageEnvelope::new("Customers", "getCart", session(&sid)).with_reply(tx));
        match expected {
            Some(pid) => assert_eq!(out, RoutingOutcome::DeliveredTo(pid)),
            None => assert_eq!(out, RoutingOutcome::Fault(FaultKind::CorrelationError.into())),
        }
    }
}

const LATE: &str = r#"
type Req: void { sid: string }
interface I {
  RequestResponse: start( void )( void ), get( Req )( string )
  OneWay: tag( Req )
}
inputPort In { Location: "local://late" Protocol: sodep-lite Interfaces: I }
cset { sid: tag.sid get.sid }
main { start()(); tag( t ); get( g )( csets.sid ) }
"#;

#[test]
fn unset_cset_adopts_the_first_matching_value() {
    let h = start(LATE, 5);
    let (spawned, _) = ask(&h, "start", ValueNode::void());
    let pid = spawned.pid().unwrap().to_owned();
    let out = h.deliver(MessageEnvelope::new("In", "tag", session("abc")));
    assert!(matches!(out, RoutingOutcome::DeliveredTo(p) | RoutingOutcome::Buffered(p) if p == pid));
    let (out, _) = {
        let (tx, _rx) = mpsc::channel();
        (
            h.deliver(MessageEnvelope::new("In", "get", session("zzz")).with_reply(tx)),
            (),
        )
    };
    assert_eq!(out, RoutingOutcome::Fault(FaultKind::CorrelationError.into()));
    let (out, reply) = ask(&h, "get", session("abc"));
    assert_eq!(out.pid(), Some(pid.as_str()));
    assert_eq!(reply.unwrap(), ValueNode::leaf("abc"));
}

#[test]
fn duplicate_cset_tuple_is_a_fault() {
    let src = r#"
interface I { RequestResponse: login( void )( string ) OneWay: bye( S ) }
type S: void { sid: string }
inputPort In { Location: "local://dup" Protocol: sodep-lite Interfaces: I }
cset { sid: bye.sid }
main { login()( csets.sid ) { csets.sid = "same" }; bye( b ) }
"#;
    let h = start(src, 1);
    assert_eq!(
        ask(&h, "login", ValueNode::void()).1.unwrap(),
        ValueNode::leaf("same")
    );
    assert!(ask(&h, "login", ValueNode::void()).1.is_err());
    assert_eq!(h.process_count(), 1);
}

#[test]
fn buffered_messages_are_consumed_in_arrival_order() {
    let registry = LocalRegistry::new();
    let h = start_service(
        load("buffering.ml.svc"),
        ServiceConfig::new("inbox").seed(2).registry(registry),
    )
    .unwrap();
    let (_, sid) = ask(&h, "open", ValueNode::void());
    let sid = sid.unwrap().root().as_str().unwrap().to_owned();
    for n in [1i64, 2] {
        let note = session(&sid).with_child("n", ValueNode::leaf(n));
        let out = h.deliver(MessageEnvelope::new("Inbox", "note", note));
        assert!(matches!(out, RoutingOutcome::Buffered(_)), "{out:?}");
    }
    let (_, log) = ask(&h, "collect", session(&sid));
    let log = log.unwrap();
    assert_eq!(
        log.child("n").unwrap(),
        &[ValueNode::leaf(1i64), ValueNode::leaf(2i64)]
    );
}

#[test]
fn response_follows_the_branch_body() {
    let rig = ShopRig::local(4);
    let sid = rig.login();
    rig.rr("addToCart", item(&sid, "a")).unwrap();
    rig.rr("checkout", session(&sid)).unwrap();
    let ev = rig.shop.events();
    let pos = |kind: EventKind, op: &str| {
        ev.iter()
            .position(|e| e.kind == kind && e.op.as_deref() == Some(op))
            .unwrap()
    };
    assert!(pos(EventKind::Recv, "dispatch") < pos(EventKind::Send, "checkout"));
    assert!(pos(EventKind::Recv, "charge") < pos(EventKind::Send, "dispatch"));
}

#[test]
fn failed_solicit_faults_the_caller_and_ends_the_process() {
    // No backoffice is running, so the charge call fails.
    let config = ServiceConfig::new("shop").seed(9);
    let shop = start_service(load("shop.ml.svc"), config).unwrap();
    let (_, sid) = ask(&shop, "login", ValueNode::void());
    let sid = sid.unwrap().root().as_str().unwrap().to_owned();
    let (_, reply) = ask(&shop, "checkout", session(&sid));
    assert_eq!(reply.unwrap_err(), FaultKind::IOFault);
    assert!(shop.wait_idle(Duration::from_secs(5)));
    assert!(shop
        .events()
        .iter()
        .any(|e| e.kind == EventKind::Fault && e.fault.as_deref() == Some("IOFault")));
}

#[test]
fn faulting_body_replies_with_a_fault() {
    let src = r#"
interface I { RequestResponse: boom( int )( int ) }
inputPort In { Location: "local://boom" Protocol: sodep-lite Interfaces: I }
main { boom( x )( r ) { r = 1 / x } }
"#;
    let h = start(src, 1);
    assert_eq!(
        ask(&h, "boom", ValueNode::leaf(0i64)).1.unwrap_err(),
        FaultKind::RuntimeFault
    );
    assert_eq!(
        ask(&h, "boom", ValueNode::leaf(1i64)).1.unwrap(),
        ValueNode::leaf(1i64)
    );
}

#[test]
fn ill_typed_request_is_rejected_with_its_path() {
    let rig = ShopRig::local(2);
    let sid = rig.login();
    let bad = session(&sid).with_child("item", ValueNode::leaf(4i64));
    let fault = rig.rr("addToCart", bad).unwrap_err().as_fault();
    assert_eq!(fault.kind, FaultKind::TypeMismatch);
    assert_eq!(fault.path.as_deref(), Some("item"));
}

#[test]
fn isolated_runs() {
    let run = |src: &str| run_isolated(&parse_behavior(src).unwrap(), &[], 1).unwrap();
    let s = run("x = 1; while (false) { x = 2 }");
    assert_eq!(s.get(&Path::root().child("x", 0)), ValueNode::leaf(1i64));
    let s = run("a = 1 | b = 2");
    assert_eq!(s.get(&Path::root().child("a", 0)), ValueNode::leaf(1i64));
    assert_eq!(s.get(&Path::root().child("b", 0)), ValueNode::leaf(2i64));
}

#[test]
fn rebind_redirects_later_sends() {
    let registry = LocalRegistry::new();
    let cfg = |name: &str| ServiceConfig::new(name).seed(1).registry(registry.clone());
    let _one = start_service(load("quote_one.ml.svc"), cfg("one")).unwrap();
    let _two = start_service(load("quote_two.ml.svc"), cfg("two")).unwrap();
    let relay = start_service(load("relay.ml.svc"), cfg("relay")).unwrap();
    let (_, answers) = ask(&relay, "ask", ValueNode::void());
    let answers = answers.unwrap();
    assert_eq!(answers.child("first").unwrap()[0], ValueNode::leaf("one"));
    assert_eq!(answers.child("second").unwrap()[0], ValueNode::leaf("two"));
}

#[test]
fn carts_stay_private() {
    let rig = ShopRig::local(8);
    let a = rig.login();
    let b = rig.login();
    rig.rr("addToCart", item(&a, "apple")).unwrap();
    rig.rr("addToCart", item(&b, "pear")).unwrap();
    assert_eq!(items(&rig.rr("getCart", session(&a)).unwrap()), ["apple"]);
    assert_eq!(items(&rig.rr("getCart", session(&b)).unwrap()), ["pear"]);
}
