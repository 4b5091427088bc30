use super::*;
use crate::lang::{parse_behavior, parse_source, OpKind};

fn load(name: &str) -> CheckedProgram {
    let path = format!("{}/../../programs/{name}", env!("CARGO_MANIFEST_DIR"));
    let src = std::fs::read_to_string(&path).unwrap();
    let checked = check_program(parse_source(&path, &src).unwrap());
    assert!(checked.is_ok(), "{:?}", checked.diagnostics);
    checked
}

fn isolated(src: &str) -> Result<ValueNode, Fault> {
    run_isolated(&parse_behavior(src).unwrap(), &[], 7)
}

fn int(state: &ValueNode, name: &str) -> i64 {
    match state.child(name).unwrap()[0].root() {
        crate::values::BasicValue::Int(i) => *i,
        other => panic!("{name} = {other:?}"),
    }
}

#[test]
fn sequential_statements_update_state() {
    let s = isolated("i = 0; while (i < 5) { i = i + 1 }; if (i == 5) { ok = true } else { ok = false }")
        .unwrap();
    assert_eq!(int(&s, "i"), 5);
    assert_eq!(s.child("ok").unwrap()[0], ValueNode::leaf(true));
}

#[test]
fn parallel_branches_join() {
    let s = isolated("{ a = 1; a = a + 1 } | { b = 10 }; c = a + b").unwrap();
    assert_eq!(int(&s, "c"), 12);
}

#[test]
fn sleep_suspends_only_its_branch() {
    let s = isolated("{ sleep(30); late = order } | { order = 1 }").unwrap();
    assert_eq!(int(&s, "late"), 1);
}

#[test]
fn runtime_errors_fault_the_process() {
    let f = isolated("x = 1 / 0").unwrap_err();
    assert_eq!(f.kind, FaultKind::RuntimeFault);
}

#[test]
fn blocked_receive_is_reported() {
    let f = isolated("[ ping() ]").unwrap_err();
    assert_eq!(f.kind, FaultKind::RuntimeFault);
}

struct Shop {
    registry: LocalRegistry,
    shop: ServiceHandle,
    _backoffice: ServiceHandle,
}

fn start_shop(mode: Option<ExecutionMode>) -> Shop {
    let registry = LocalRegistry::new();
    let backoffice = start_service(
        load("backoffice.ml.svc"),
        ServiceConfig::new("backoffice")
            .seed(1)
            .registry(registry.clone()),
    )
    .unwrap();
    let mut config = ServiceConfig::new("shop").seed(2).registry(registry.clone());
    config.execution = mode;
    let shop = start_service(load("shop.ml.svc"), config).unwrap();
    Shop {
        registry,
        shop,
        _backoffice: backoffice,
    }
}

impl Shop {
    fn call(&self, op: &str, payload: ValueNode, kind: OpKind) -> Result<Option<ValueNode>, net::CallError> {
        let location: Location = "local://shop".parse().unwrap();
        let target = CallTarget {
            location: &location,
            protocol: Protocol::SodepLite,
            registry: &self.registry,
            timeout: Duration::from_secs(5),
        };
        call(target, op, &payload, kind, None)
    }

    fn login(&self) -> String {
        let sid = self
            .call("login", ValueNode::void(), OpKind::RequestResponse)
            .unwrap()
            .unwrap();
        sid.root().as_str().unwrap().to_owned()
    }
}

fn item(sid: &str, item: &str) -> ValueNode {
    ValueNode::void()
        .with_child("sid", ValueNode::leaf(sid))
        .with_child("item", ValueNode::leaf(item))
}

fn session(sid: &str) -> ValueNode {
    ValueNode::void().with_child("sid", ValueNode::leaf(sid))
}

#[test]
fn shop_session_end_to_end() {
    let s = start_shop(None);
    let sid = s.login();
    let rr = OpKind::RequestResponse;
    s.call("addToCart", item(&sid, "book"), rr).unwrap();
    let cart = s.call("addToCart", item(&sid, "pen"), rr).unwrap().unwrap();
    assert_eq!(cart.child("item").unwrap().len(), 2);
    let cart = s.call("removeFromCart", item(&sid, "book"), rr).unwrap().unwrap();
    assert_eq!(cart.child("item").unwrap(), &[ValueNode::leaf("pen")]);
    let receipt = s.call("checkout", session(&sid), rr).unwrap().unwrap();
    assert_eq!(receipt.child("items").unwrap()[0], ValueNode::leaf(1i64));
    assert_eq!(receipt.child("paid").unwrap()[0], ValueNode::leaf(true));
    assert_eq!(
        receipt.child("tracking").unwrap()[0],
        ValueNode::leaf(format!("parcel-{sid}"))
    );
    assert!(s.shop.wait_idle(Duration::from_secs(5)));
    // The session is gone: its messages no longer correlate.
    let err = s.call("getCart", session(&sid), rr).unwrap_err();
    assert_eq!(err.as_fault().kind, FaultKind::CorrelationError);
}

#[test]
fn sessions_are_isolated() {
    let s = start_shop(None);
    let a = s.login();
    let b = s.login();
    assert_ne!(a, b);
    let rr = OpKind::RequestResponse;
    s.call("addToCart", item(&a, "x"), rr).unwrap();
    let cart_b = s.call("getCart", session(&b), rr).unwrap().unwrap();
    assert!(cart_b.child("item").is_none());
    assert_eq!(s.shop.process_count(), 2);
}

#[test]
fn routing_faults() {
    let s = start_shop(None);
    let out = s
        .shop
        .deliver(MessageEnvelope::new("Customers", "nosuch", ValueNode::void()));
    assert_eq!(out, RoutingOutcome::Fault(FaultKind::UnknownOperation.into()));
    let bad = ValueNode::void().with_child("sid", ValueNode::leaf(3i64));
    let out = s.shop.deliver(MessageEnvelope::new("Customers", "getCart", bad));
    assert_eq!(
        out,
        RoutingOutcome::Fault(Fault::at(FaultKind::TypeMismatch, "sid"))
    );
    let out = s
        .shop
        .deliver(MessageEnvelope::new("Customers", "getCart", session("nobody")));
    assert_eq!(out, RoutingOutcome::Fault(FaultKind::CorrelationError.into()));
}

#[test]
fn sequential_mode_queues_new_sessions() {
    let s = start_shop(Some(ExecutionMode::Sequential));
    let (tx, rx) = mpsc::channel();
    let first = s
        .shop
        .deliver(MessageEnvelope::new("Customers", "login", ValueNode::void()).with_reply(tx));
    assert!(matches!(first, RoutingOutcome::SpawnedNew(_)));
    let sid = rx.recv().unwrap().unwrap();
    let sid = sid.root().as_str().unwrap().to_owned();

    let (tx2, rx2) = mpsc::channel();
    let second = s
        .shop
        .deliver(MessageEnvelope::new("Customers", "login", ValueNode::void()).with_reply(tx2));
    assert!(matches!(second, RoutingOutcome::Buffered(_)));
    assert!(rx2.recv_timeout(Duration::from_millis(50)).is_err());
    assert_eq!(s.shop.process_count(), 1);

    s.shop
        .deliver(MessageEnvelope::new("Customers", "logout", session(&sid)));
    let sid2 = rx2.recv_timeout(Duration::from_secs(5)).unwrap().unwrap();
    assert_ne!(sid2.root().as_str().unwrap(), sid);
    let spawned: Vec<_> = s
        .shop
        .events()
        .into_iter()
        .filter(|e| e.kind == EventKind::Spawn)
        .map(|e| e.pid.unwrap())
        .collect();
    assert_eq!(spawned[1], second.pid().unwrap());
}

#[test]
fn bind_conflict_is_reported() {
    let registry = LocalRegistry::new();
    let config = || ServiceConfig::new("b").registry(registry.clone());
    let _first = start_service(load("backoffice.ml.svc"), config()).unwrap();
    let err = start_service(load("backoffice.ml.svc"), config()).err().unwrap();
    assert!(matches!(err, RuntimeError::Bind { .. }), "{err}");
}
