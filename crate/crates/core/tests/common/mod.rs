//! Helpers shared by the integration tests.
#![allow(dead_code)]

use std::io::{BufReader, Write};
use std::net::TcpStream;
use std::path::PathBuf;
use std::time::Duration;

use microlang::checker::{check_program, CheckedProgram};
use microlang::lang::{parse_source, ExecutionMode, OpKind};
use microlang::net::{call, http, CallError, CallTarget, LocalRegistry, Location, Protocol};
use microlang::runtime::{start_service, Event, ServiceConfig, ServiceHandle};
use microlang::values::ValueNode;

pub fn program_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../programs")
        .join(name)
}

pub fn source(name: &str) -> String {
    std::fs::read_to_string(program_path(name)).unwrap()
}

pub fn load(name: &str) -> CheckedProgram {
    let checked = check_program(parse_source(name, &source(name)).unwrap_or_else(|e| panic!("{e}")));
    assert!(checked.is_ok(), "{name}: {:?}", checked.diagnostics);
    checked
}

pub fn item(sid: &str, item: &str) -> ValueNode {
    ValueNode::void()
        .with_child("sid", ValueNode::leaf(sid))
        .with_child("item", ValueNode::leaf(item))
}

pub fn session(sid: &str) -> ValueNode {
    ValueNode::void().with_child("sid", ValueNode::leaf(sid))
}

pub fn items(cart: &ValueNode) -> Vec<String> {
    cart.child("item")
        .unwrap_or(&[])
        .iter()
        .map(|v| v.root().as_str().unwrap().to_owned())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Transport {
    Local,
    Socket,
}

/// The shop and its backoffice, wired to each other.
pub struct ShopRig {
    pub registry: LocalRegistry,
    pub protocol: Protocol,
    pub customers: Location,
    pub shop: ServiceHandle,
    pub backoffice: ServiceHandle,
}

impl ShopRig {
    pub fn start(seed: u64, protocol: Protocol, transport: Transport, mode: Option<ExecutionMode>) -> Self {
        let registry = LocalRegistry::new();
        let any_port = || Location::socket("127.0.0.1", 0);
        let mut bo = ServiceConfig::new("backoffice")
            .seed(seed)
            .registry(registry.clone())
            .protocol("Backoffice", protocol);
        if transport == Transport::Socket {
            bo = bo.bind("Backoffice", any_port());
        }
        let backoffice = start_service(load("backoffice.ml.svc"), bo).unwrap();
        let bo_location = backoffice.location("Backoffice").unwrap().clone();

        let mut config = ServiceConfig::new("shop")
            .seed(seed.wrapping_add(1))
            .registry(registry.clone())
            .protocol("Customers", protocol)
            .protocol("Bank", protocol)
            .protocol("Shipper", protocol)
            .bind("Bank", bo_location.clone())
            .bind("Shipper", bo_location);
        if transport == Transport::Socket {
            config = config.bind("Customers", any_port());
        }
        config.execution = mode;
        let shop = start_service(load("shop.ml.svc"), config).unwrap();
        let customers = shop.location("Customers").unwrap().clone();
        ShopRig {
            registry,
            protocol,
            customers,
            shop,
            backoffice,
        }
    }

    pub fn local(seed: u64) -> Self {
        Self::start(seed, Protocol::SodepLite, Transport::Local, None)
    }

    pub fn call(&self, op: &str, payload: ValueNode, kind: OpKind) -> Result<Option<ValueNode>, CallError> {
        let target = CallTarget {
            location: &self.customers,
            protocol: self.protocol,
            registry: &self.registry,
            timeout: Duration::from_secs(5),
        };
        call(target, op, &payload, kind, None)
    }

    pub fn rr(&self, op: &str, payload: ValueNode) -> Result<ValueNode, CallError> {
        self.call(op, payload, OpKind::RequestResponse)
            .map(|v| v.unwrap_or_else(ValueNode::void))
    }

    pub fn login(&self) -> String {
        let sid = self.rr("login", ValueNode::void()).unwrap();
        sid.root().as_str().unwrap().to_owned()
    }
}

/// Events of one service without timing and transport details.
pub fn normalized(events: &[Event]) -> Vec<Event> {
    events.iter().map(Event::normalized).collect()
}

pub mod algebra;
pub mod oracle;

/// Sends one raw HTTP POST and returns status and body.
pub fn post(loc: &Location, path: &str, body: &str) -> (u16, String) {
    let Location::Socket { host, port } = loc else {
        panic!()
    };
    let mut s = TcpStream::connect((host.as_str(), *port)).unwrap();
    s.set_read_timeout(Some(Duration::from_secs(5))).unwrap();
    write!(
        s,
        "POST {path} HTTP/1.1\r\nHost: {host}\r\nContent-Type: application/json\r\nContent-Length: {}\r\n\r\n{body}",
        body.len()
    )
    .unwrap();
    let resp = http::read_response(&mut BufReader::new(s.try_clone().unwrap())).unwrap();
    (resp.status, String::from_utf8(resp.body).unwrap())
}

pub mod gen {
    use microlang::net::{MessageKind, WireMessage};
    use microlang::values::{BasicValue, ValueNode};
    use proptest::prelude::*;

    pub fn name() -> impl Strategy<Value = String> {
        prop::sample::select(vec!["a", "b", "item", "sid", "x_1", "données"]).prop_map(str::to_owned)
    }

    pub fn basic() -> impl Strategy<Value = BasicValue> {
        prop_oneof![
            Just(BasicValue::Void),
            any::<bool>().prop_map(BasicValue::Bool),
            any::<i64>().prop_map(BasicValue::Int),
            prop::num::f64::NORMAL.prop_map(BasicValue::Double),
            Just(BasicValue::Double(0.0)),
            "[a-z0-9 é\"\\\\]{0,8}".prop_map(BasicValue::String),
        ]
    }

    /// Trees up to depth 4 with up to three names of up to three elements.
    pub fn value() -> impl Strategy<Value = ValueNode> {
        let leaf = basic().prop_map(ValueNode::leaf);
        leaf.prop_recursive(4, 48, 3, |inner| {
            (
                basic(),
                prop::collection::vec((name(), prop::collection::vec(inner, 1..=3)), 0..=3),
            )
                .prop_map(|(root, kids)| {
                    let mut v = ValueNode::leaf(root);
                    for (n, elems) in kids {
                        v.set_children(n, elems);
                    }
                    v
                })
        })
    }

    use microlang::lang::{
        Behavior, BehaviorKind, BinaryOp, BranchKind, CsetAlias, CsetDecl, ExecutionMode, Expr, ExprKind,
        InputBranch, InterfaceDecl, InterfaceExpr, NameRef, OperationDecl, PathExpr, PathSegment, PortDecl,
        PortDirection, Procedure, Program, ProtocolDecl, Signature, SourceSpan, TypeDecl, UnaryOp,
    };
    use microlang::values::{BasicKind, Cardinality, FieldType, Path, TypeExpr};

    const VARS: [&str; 7] = ["a", "b", "cart", "item", "sid", "req", "x1"];
    const OPS: [&str; 3] = ["login", "add", "ping"];
    const PORTS: [&str; 2] = ["In", "Out"];
    const PROCS: [&str; 2] = ["step", "pay"];

    fn pick(names: &'static [&'static str]) -> impl Strategy<Value = String> + Clone {
        prop::sample::select(names).prop_map(str::to_owned)
    }

    fn expr_of(kind: ExprKind) -> Expr {
        Expr {
            kind,
            span: SourceSpan::default(),
        }
    }

    fn literal() -> impl Strategy<Value = BasicValue> {
        prop_oneof![
            Just(BasicValue::Void),
            any::<bool>().prop_map(BasicValue::Bool),
            any::<i64>().prop_map(BasicValue::Int),
            prop_oneof![
                prop::num::f64::NORMAL,
                prop::num::f64::ZERO,
                Just(1e300),
                Just(0.5)
            ]
            .prop_map(BasicValue::Double),
            "[a-z \"\\\\\n\té]{0,6}".prop_map(BasicValue::String),
        ]
    }

    /// Paths of one to three segments; indexes are literals or plain names.
    pub fn path_expr() -> impl Strategy<Value = PathExpr> {
        let index = prop_oneof![
            3 => Just(None),
            1 => (0i64..4).prop_map(|i| Some(Box::new(expr_of(ExprKind::Literal(BasicValue::Int(i)))))),
            1 => pick(&VARS).prop_map(|n| Some(Box::new(expr_of(ExprKind::Path(PathExpr {
                segments: vec![PathSegment { name: n, index: None }],
                span: SourceSpan::default(),
            }))))),
        ];
        prop::collection::vec((pick(&VARS), index), 1..=3).prop_map(|segs| PathExpr {
            segments: segs
                .into_iter()
                .map(|(name, index)| PathSegment { name, index })
                .collect(),
            span: SourceSpan::default(),
        })
    }

    pub fn expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            3 => literal().prop_map(ExprKind::Literal),
            3 => path_expr().prop_map(ExprKind::Path),
            1 => Just(ExprKind::New),
            1 => path_expr().prop_map(ExprKind::Count),
        ]
        .prop_map(expr_of);
        leaf.prop_recursive(3, 24, 2, |inner| {
            let unary = prop_oneof![Just(UnaryOp::Neg), Just(UnaryOp::Not)];
            let binary = prop::sample::select(vec![
                BinaryOp::Or,
                BinaryOp::And,
                BinaryOp::Eq,
                BinaryOp::Ne,
                BinaryOp::Lt,
                BinaryOp::Le,
                BinaryOp::Gt,
                BinaryOp::Ge,
                BinaryOp::Add,
                BinaryOp::Sub,
                BinaryOp::Mul,
                BinaryOp::Div,
                BinaryOp::Rem,
            ]);
            prop_oneof![
                (unary, inner.clone()).prop_map(|(op, e)| expr_of(ExprKind::Unary(op, Box::new(e)))),
                (binary, inner.clone(), inner).prop_map(|(op, l, r)| expr_of(ExprKind::Binary(
                    op,
                    Box::new(l),
                    Box::new(r)
                ))),
            ]
        })
    }

    fn branch(body: BoxedStrategy<Behavior>) -> impl Strategy<Value = InputBranch> {
        let kind = prop_oneof![
            Just(BranchKind::OneWay),
            prop::option::of(expr()).prop_map(|response| BranchKind::RequestResponse { response }),
        ];
        (pick(&OPS), prop::option::of(path_expr()), kind, body).prop_map(
            |(operation, request, kind, body)| InputBranch {
                operation,
                request,
                kind,
                body,
                span: SourceSpan::default(),
            },
        )
    }

    pub fn behavior() -> impl Strategy<Value = Behavior> {
        let nil = Just(Behavior::nil()).boxed();
        let leaf = prop_oneof![
            1 => Just(BehaviorKind::Nil),
            4 => (path_expr(), expr()).prop_map(|(target, value)| BehaviorKind::Assign { target, value }),
            1 => pick(&PROCS).prop_map(BehaviorKind::Call),
            2 => branch(nil).prop_map(|b| BehaviorKind::InputChoice(vec![b])),
            1 => (pick(&PORTS), pick(&OPS), prop::option::of(expr()), prop::option::of(path_expr())).prop_map(
                |(port, operation, request, response)| BehaviorKind::SolicitResponse { port, operation, request, response }
            ),
            1 => (pick(&PORTS), pick(&OPS), prop::option::of(expr()))
                .prop_map(|(port, operation, request)| BehaviorKind::Notify { port, operation, request }),
            1 => (pick(&PORTS), expr(), expr())
                .prop_map(|(port, location, protocol)| BehaviorKind::Rebind { port, location, protocol }),
            1 => expr().prop_map(BehaviorKind::Sleep),
        ]
        .prop_map(Behavior::new);
        leaf.prop_recursive(4, 32, 3, |inner| {
            let boxed = inner.clone().boxed();
            prop_oneof![
                3 => (inner.clone(), inner.clone()).prop_map(|(a, b)| Behavior::seq(a, b)),
                2 => (inner.clone(), inner.clone()).prop_map(|(a, b)| Behavior::par(a, b)),
                1 => (expr(), inner.clone(), prop::option::of(inner.clone())).prop_map(|(cond, then, otherwise)| {
                    Behavior::new(BehaviorKind::If { cond, then: Box::new(then), otherwise: otherwise.map(Box::new) })
                }),
                1 => (expr(), inner.clone())
                    .prop_map(|(cond, body)| Behavior::new(BehaviorKind::While { cond, body: Box::new(body) })),
                1 => prop::collection::vec(branch(boxed.clone()), 2..=3)
                    .prop_map(|bs| Behavior::new(BehaviorKind::InputChoice(bs))),
                1 => (prop::collection::vec(branch(boxed.clone()), 1..=2), prop::collection::vec(branch(boxed), 1..=2))
                    .prop_map(|(provide, until)| Behavior::new(BehaviorKind::ProvideUntil { provide, until })),
            ]
        })
    }

    fn cardinality() -> impl Strategy<Value = Cardinality> {
        prop_oneof![
            Just(Cardinality::ONE),
            Just(Cardinality::OPTIONAL),
            Just(Cardinality::MANY),
            (0u32..4, 0u32..4).prop_map(|(lo, extra)| Cardinality::new(lo, Some(lo + extra))),
            (0u32..4).prop_map(|lo| Cardinality::new(lo, None)),
        ]
    }

    fn basic_kind() -> impl Strategy<Value = BasicKind> {
        prop::sample::select(BasicKind::ALL.to_vec())
    }

    pub fn type_expr() -> impl Strategy<Value = TypeExpr> {
        let leaf = prop_oneof![
            basic_kind().prop_map(TypeExpr::Basic),
            Just(TypeExpr::Named("T0".into())),
        ];
        leaf.prop_recursive(3, 12, 3, |inner| {
            (
                basic_kind(),
                prop::collection::vec((pick(&VARS), cardinality(), inner), 0..=3),
            )
                .prop_map(|(root, fields)| TypeExpr::Node {
                    root,
                    fields: fields
                        .into_iter()
                        .map(|(n, card, ty)| (n, FieldType { ty, card }))
                        .collect(),
                })
        })
    }

    fn signature() -> impl Strategy<Value = Signature> {
        prop_oneof![
            type_expr().prop_map(|request| Signature::OneWay { request }),
            (type_expr(), type_expr())
                .prop_map(|(request, response)| Signature::RequestResponse { request, response }),
        ]
    }

    fn interface_expr() -> impl Strategy<Value = InterfaceExpr> {
        let ops = prop::collection::vec((pick(&OPS), signature()), 0..=3).prop_map(|ops| {
            InterfaceExpr::Literal(
                ops.into_iter()
                    .map(|(name, signature)| OperationDecl {
                        name,
                        signature,
                        span: SourceSpan::default(),
                    })
                    .collect(),
            )
        });
        let leaf = prop_oneof![
            ops,
            pick(&["I0", "I1"]).prop_map(|name| InterfaceExpr::Ref {
                name,
                span: SourceSpan::default()
            }),
        ];
        leaf.prop_recursive(2, 6, 2, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone())
                    .prop_map(|(a, b)| InterfaceExpr::Union(Box::new(a), Box::new(b))),
                (inner.clone(), inner)
                    .prop_map(|(a, b)| InterfaceExpr::Intersection(Box::new(a), Box::new(b))),
            ]
        })
    }

    fn port(direction: PortDirection) -> impl Strategy<Value = PortDecl> {
        let protocol = (
            pick(&["sodep-lite", "http"]),
            prop::collection::vec((pick(&VARS), literal()), 0..=2),
        )
            .prop_map(|(name, params)| ProtocolDecl {
                name,
                params,
                span: SourceSpan::default(),
            });
        (
            pick(&PORTS),
            prop::option::of("[a-z]{1,5}://[a-z0-9:]{0,8}"),
            prop::option::of(protocol),
            prop::collection::vec(pick(&["I0", "I1"]), 0..=2),
        )
            .prop_map(move |(name, location, protocol, ifaces)| PortDecl {
                name,
                direction,
                location,
                protocol,
                interfaces: ifaces
                    .into_iter()
                    .map(|name| NameRef {
                        name,
                        span: SourceSpan::default(),
                    })
                    .collect(),
                span: SourceSpan::default(),
            })
    }

    fn cset() -> impl Strategy<Value = CsetDecl> {
        (
            pick(&VARS),
            prop::collection::vec((pick(&OPS), prop::collection::vec(pick(&VARS), 1..=2)), 1..=3),
        )
            .prop_map(|(var, aliases)| CsetDecl {
                var,
                aliases: aliases
                    .into_iter()
                    .map(|(operation, segs)| CsetAlias {
                        operation,
                        path: segs.iter().fold(Path::root(), |p, s| p.child(s, 0)),
                        span: SourceSpan::default(),
                    })
                    .collect(),
                span: SourceSpan::default(),
            })
    }

    /// Syntactically valid programs; they need not pass the checker.
    pub fn program() -> impl Strategy<Value = Program> {
        let types = prop::collection::vec(type_expr(), 0..=2).prop_map(|ts| {
            ts.into_iter()
                .enumerate()
                .map(|(i, ty)| TypeDecl {
                    name: format!("T{i}"),
                    ty,
                    span: SourceSpan::default(),
                })
                .collect::<Vec<_>>()
        });
        let interfaces = prop::collection::vec(interface_expr(), 0..=2).prop_map(|es| {
            es.into_iter()
                .enumerate()
                .map(|(i, expr)| InterfaceDecl {
                    name: format!("I{i}"),
                    expr,
                    span: SourceSpan::default(),
                })
                .collect::<Vec<_>>()
        });
        let procedures = prop::collection::vec(behavior(), 0..=2).prop_map(|bs| {
            bs.into_iter()
                .zip(PROCS)
                .map(|(body, name)| Procedure {
                    name: name.into(),
                    body,
                    span: SourceSpan::default(),
                })
                .collect::<Vec<_>>()
        });
        let execution = prop_oneof![Just(ExecutionMode::Concurrent), Just(ExecutionMode::Sequential)];
        (
            types,
            interfaces,
            prop::collection::vec(port(PortDirection::Input), 0..=1),
            prop::collection::vec(port(PortDirection::Output), 0..=1),
            prop::collection::vec(cset(), 0..=1),
            execution,
            procedures,
            behavior(),
        )
            .prop_map(
                |(types, interfaces, input_ports, output_ports, csets, execution, procedures, main)| {
                    Program {
                        types,
                        interfaces,
                        input_ports,
                        output_ports,
                        csets,
                        execution,
                        procedures,
                        main,
                        span: SourceSpan::default(),
                    }
                },
            )
    }

    fn message_kind() -> impl Strategy<Value = MessageKind> {
        prop_oneof![
            Just(MessageKind::Request),
            Just(MessageKind::Response),
            Just(MessageKind::Fault)
        ]
    }

    pub fn message() -> impl Strategy<Value = WireMessage> {
        (message_kind(), any::<u64>(), "[a-zA-Z]{1,12}", value()).prop_map(
            |(kind, corr_id, operation, payload)| WireMessage {
                kind,
                corr_id,
                operation,
                payload,
            },
        )
    }
}
