//! Running services: one scheduler thread per service, port servers feeding
//! it requests, and worker threads carrying out sends.

mod engine;
mod eval;
mod event;
mod ir;

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc::{self, RecvTimeoutError, Sender};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use indexmap::IndexMap;
use log::debug;
use thiserror::Error;

use crate::checker::{check_program, CheckedProgram};
use crate::lang::{Behavior, ExecutionMode, Procedure, Program};
use crate::net::{
    self, call, CallTarget, Fault, FaultKind, Inbound, LocalRegistry, Location, OpInfo, PortServer, Protocol,
    Reply, TransportError,
};
use crate::values::{TypeEnv, ValueNode};

use engine::{Engine, Outbound, OutputBinding};
pub use eval::EvalError;
pub use event::{Event, EventKind, EventSink};

/// Steps run before the scheduler looks at new commands again.
const BUDGET: usize = 10_000;

/// An incoming request as the router sees it.
#[derive(Debug)]
pub struct MessageEnvelope {
    pub operation: String,
    pub payload: ValueNode,
    /// Present exactly when the operation is request-response.
    pub reply: Option<Sender<Reply>>,
    /// Where the message came from, for the trace.
    pub origin: String,
    /// Input port it arrived on.
    pub port: String,
}

impl MessageEnvelope {
    pub fn new(port: impl Into<String>, operation: impl Into<String>, payload: ValueNode) -> Self {
        MessageEnvelope {
            operation: operation.into(),
            payload,
            reply: None,
            origin: "direct".into(),
            port: port.into(),
        }
    }

    pub fn with_reply(mut self, reply: Sender<Reply>) -> Self {
        self.reply = Some(reply);
        self
    }
}

/// Where the router put a message.
#[derive(Debug, Clone, PartialEq)]
pub enum RoutingOutcome {
    /// Handed to a process with a task waiting for the operation.
    DeliveredTo(String),
    /// Queued for a process that is not waiting for it yet.
    Buffered(String),
    /// A new process was started for it.
    SpawnedNew(String),
    Fault(Fault),
}

impl RoutingOutcome {
    pub fn pid(&self) -> Option<&str> {
        match self {
            RoutingOutcome::DeliveredTo(p) | RoutingOutcome::Buffered(p) | RoutingOutcome::SpawnedNew(p) => {
                Some(p)
            }
            RoutingOutcome::Fault(_) => None,
        }
    }
}

#[derive(Debug, Error)]
pub enum RuntimeError {
    #[error("program has errors:\n{}", .0.join("\n"))]
    NotChecked(Vec<String>),
    #[error("cannot bind port {port} at {location}: {source}")]
    Bind {
        port: String,
        location: Location,
        #[source]
        source: TransportError,
    },
    #[error("port {port}: {reason}")]
    Port { port: String, reason: String },
}

pub struct ServiceConfig {
    pub name: String,
    /// Seed for process ids, `new` and scheduling; random when absent.
    pub seed: Option<u64>,
    /// Location overrides by port name.
    pub bindings: HashMap<String, Location>,
    /// Protocol overrides by port name.
    pub protocols: HashMap<String, Protocol>,
    /// Overrides the program's execution mode.
    pub execution: Option<ExecutionMode>,
    pub registry: LocalRegistry,
    pub sink: Option<EventSink>,
    pub call_timeout: Duration,
}

impl ServiceConfig {
    pub fn new(name: impl Into<String>) -> Self {
        ServiceConfig {
            name: name.into(),
            seed: None,
            bindings: HashMap::new(),
            protocols: HashMap::new(),
            execution: None,
            registry: LocalRegistry::new(),
            sink: None,
            call_timeout: Duration::from_secs(10),
        }
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn bind(mut self, port: impl Into<String>, location: Location) -> Self {
        self.bindings.insert(port.into(), location);
        self
    }

    pub fn protocol(mut self, port: impl Into<String>, protocol: Protocol) -> Self {
        self.protocols.insert(port.into(), protocol);
        self
    }

    pub fn execution(mut self, mode: ExecutionMode) -> Self {
        self.execution = Some(mode);
        self
    }

    pub fn registry(mut self, registry: LocalRegistry) -> Self {
        self.registry = registry;
        self
    }

    pub fn sink(mut self, sink: EventSink) -> Self {
        self.sink = Some(sink);
        self
    }
}

enum Command {
    Deliver(MessageEnvelope, Option<Sender<RoutingOutcome>>),
    SendDone {
        pid: String,
        task: usize,
        result: Reply,
    },
    NotifyFailed {
        pid: String,
        op: String,
        port: String,
        fault: Fault,
    },
    Shutdown,
}

/// A running service.
pub struct ServiceHandle {
    name: String,
    tx: Sender<Command>,
    thread: Option<JoinHandle<()>>,
    servers: Vec<(String, PortServer)>,
    events: Arc<Mutex<Vec<Event>>>,
    live: Arc<AtomicUsize>,
}

impl ServiceHandle {
    pub fn name(&self) -> &str {
        &self.name
    }

    /// Routes a message as if it had arrived on one of the input ports.
    pub fn deliver(&self, envelope: MessageEnvelope) -> RoutingOutcome {
        let (tx, rx) = mpsc::channel();
        if self.tx.send(Command::Deliver(envelope, Some(tx))).is_err() {
            return RoutingOutcome::Fault(FaultKind::RuntimeFault.into());
        }
        rx.recv()
            .unwrap_or(RoutingOutcome::Fault(FaultKind::RuntimeFault.into()))
    }

    /// Live processes, not counting queued starts.
    pub fn process_count(&self) -> usize {
        self.live.load(Ordering::SeqCst)
    }

    pub fn events(&self) -> Vec<Event> {
        self.events.lock().unwrap().clone()
    }

    /// The location an input port is actually listening on.
    pub fn location(&self, port: &str) -> Option<&Location> {
        self.servers
            .iter()
            .find(|(p, _)| p == port)
            .map(|(_, s)| s.location())
    }

    /// Polls until `pred` holds for the events so far, or `timeout` passes.
    pub fn wait_for(&self, timeout: Duration, pred: impl Fn(&[Event]) -> bool) -> bool {
        let end = Instant::now() + timeout;
        loop {
            if pred(&self.events.lock().unwrap()) {
                return true;
            }
            if Instant::now() >= end {
                return false;
            }
            thread::sleep(Duration::from_millis(2));
        }
    }

    /// Waits until no process is live.
    pub fn wait_idle(&self, timeout: Duration) -> bool {
        let end = Instant::now() + timeout;
        while self.process_count() > 0 {
            if Instant::now() >= end {
                return false;
            }
            thread::sleep(Duration::from_millis(2));
        }
        true
    }

    /// Closes the ports and terminates all processes.
    pub fn shutdown(&mut self) {
        for (_, s) in &mut self.servers {
            s.shutdown();
        }
        self.servers.clear();
        let _ = self.tx.send(Command::Shutdown);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for ServiceHandle {
    fn drop(&mut self) {
        self.shutdown();
    }
}

/// Routing entry point for one input port; only that port's operations are
/// visible through it.
struct PortInbound {
    port: String,
    ops: IndexMap<String, OpInfo>,
    types: TypeEnv,
    tx: Mutex<Sender<Command>>,
}

impl Inbound for PortInbound {
    fn operation(&self, op: &str) -> Option<OpInfo> {
        self.ops.get(op).cloned()
    }

    fn types(&self) -> &TypeEnv {
        &self.types
    }

    fn deliver(
        &self,
        op: &str,
        payload: ValueNode,
        reply: Option<Sender<Reply>>,
        origin: &str,
    ) -> Result<(), Fault> {
        let env = MessageEnvelope {
            operation: op.to_owned(),
            payload,
            reply,
            origin: origin.to_owned(),
            port: self.port.clone(),
        };
        let (tx, rx) = mpsc::channel();
        let sent = self.tx.lock().unwrap().send(Command::Deliver(env, Some(tx)));
        if sent.is_err() {
            return Err(FaultKind::RuntimeFault.into());
        }
        match rx.recv() {
            Ok(RoutingOutcome::Fault(f)) => Err(f),
            Ok(_) => Ok(()),
            Err(_) => Err(FaultKind::RuntimeFault.into()),
        }
    }
}

fn port_location(
    port: &str,
    declared: Option<&String>,
    bindings: &HashMap<String, Location>,
) -> Result<Option<Location>, RuntimeError> {
    if let Some(l) = bindings.get(port) {
        return Ok(Some(l.clone()));
    }
    declared
        .map(|s| {
            s.parse().map_err(|e: net::LocationError| RuntimeError::Port {
                port: port.to_owned(),
                reason: e.to_string(),
            })
        })
        .transpose()
}

fn port_protocol(
    port: &str,
    decl: Option<&crate::lang::ProtocolDecl>,
    overrides: &HashMap<String, Protocol>,
) -> Result<Protocol, RuntimeError> {
    if let Some(p) = overrides.get(port) {
        return Ok(*p);
    }
    match decl {
        Some(d) => d.name.parse().map_err(|reason| RuntimeError::Port {
            port: port.to_owned(),
            reason,
        }),
        None => Err(RuntimeError::Port {
            port: port.to_owned(),
            reason: "no protocol".into(),
        }),
    }
}

/// Binds the input ports of `program` and starts serving them.
pub fn start_service(program: CheckedProgram, config: ServiceConfig) -> Result<ServiceHandle, RuntimeError> {
    if !program.is_ok() {
        return Err(RuntimeError::NotChecked(
            program.errors().map(ToString::to_string).collect(),
        ));
    }
    let program = Arc::new(program);
    let p = &program.program;

    let mut listeners = Vec::new();
    for decl in &p.input_ports {
        let location =
            port_location(&decl.name, decl.location.as_ref(), &config.bindings)?.ok_or_else(|| {
                RuntimeError::Port {
                    port: decl.name.clone(),
                    reason: "no location".into(),
                }
            })?;
        let protocol = port_protocol(&decl.name, decl.protocol.as_ref(), &config.protocols)?;
        let listener = net::bind(&location, &config.registry).map_err(|source| RuntimeError::Bind {
            port: decl.name.clone(),
            location: location.clone(),
            source,
        })?;
        listeners.push((decl.name.clone(), listener, protocol));
    }

    let mut outputs = IndexMap::new();
    for decl in &p.output_ports {
        outputs.insert(
            decl.name.clone(),
            OutputBinding {
                location: port_location(&decl.name, decl.location.as_ref(), &config.bindings)?,
                protocol: port_protocol(&decl.name, decl.protocol.as_ref(), &config.protocols)?,
            },
        );
    }

    let log = event::EventLog::new(&config.name, config.sink.clone());
    let events = log.shared();
    let live = Arc::new(AtomicUsize::new(0));
    let main = ir::compile(&p.main, &p.procedures);
    let mode = config.execution.unwrap_or(p.execution);
    let seed = config.seed.unwrap_or_else(rand::random);
    let engine = Engine::new(program.clone(), main, mode, outputs, seed, log, live.clone());

    let (tx, rx) = mpsc::channel::<Command>();
    let dispatcher = Dispatcher {
        tx: tx.clone(),
        registry: config.registry.clone(),
        timeout: config.call_timeout,
        types: Arc::new(program.types.clone()),
    };
    let thread = thread::Builder::new()
        .name(format!("service {}", config.name))
        .spawn(move || drive(engine, rx, dispatcher))
        .expect("spawn scheduler thread");

    let mut servers = Vec::new();
    for (port, listener, protocol) in listeners {
        let ops = program
            .routing
            .iter()
            .filter(|(_, r)| r.ports.contains(&port))
            .map(|(op, r)| {
                (
                    op.clone(),
                    OpInfo {
                        kind: r.signature.kind(),
                        request: r.signature.request().clone(),
                    },
                )
            })
            .collect();
        let inbound = PortInbound {
            port: port.clone(),
            ops,
            types: program.types.clone(),
            tx: Mutex::new(tx.clone()),
        };
        servers.push((port, net::serve(listener, protocol, Arc::new(inbound))));
    }

    Ok(ServiceHandle {
        name: config.name,
        tx,
        thread: Some(thread),
        servers,
        events,
        live,
    })
}

struct Dispatcher {
    tx: Sender<Command>,
    registry: LocalRegistry,
    timeout: Duration,
    types: Arc<TypeEnv>,
}

impl Dispatcher {
    fn dispatch(&self, out: Outbound) {
        let tx = self.tx.clone();
        let registry = self.registry.clone();
        let timeout = self.timeout;
        let types = self.types.clone();
        thread::spawn(move || {
            let target = CallTarget {
                location: &out.location,
                protocol: out.protocol,
                registry: &registry,
                timeout,
            };
            let response_type = out.response_type.as_ref().map(|t| (t, &*types));
            let result = call(target, &out.op, &out.payload, out.kind, response_type);
            if let Err(e) = &result {
                debug!("{}@{} to {}: {e}", out.op, out.port, out.location);
            }
            let cmd = match (out.task, result) {
                (Some(task), r) => Command::SendDone {
                    pid: out.pid,
                    task,
                    result: r
                        .map(|v| v.unwrap_or_else(ValueNode::void))
                        .map_err(|e| e.as_fault()),
                },
                (None, Ok(_)) => return,
                (None, Err(e)) => Command::NotifyFailed {
                    pid: out.pid,
                    op: out.op,
                    port: out.port,
                    fault: e.as_fault(),
                },
            };
            let _ = tx.send(cmd);
        });
    }
}

fn handle(engine: &mut Engine, cmd: Command) -> bool {
    match cmd {
        Command::Deliver(env, outcome) => {
            let o = engine.deliver(env);
            if let Some(tx) = outcome {
                let _ = tx.send(o);
            }
        }
        Command::SendDone { pid, task, result } => engine.send_done(&pid, task, result),
        Command::NotifyFailed { pid, op, port, fault } => engine.notify_failed(&pid, &op, &port, &fault),
        Command::Shutdown => {
            engine.shutdown();
            return false;
        }
    }
    true
}

/// Scheduler loop: run to quiescence, then block for the next command or
/// timer.
fn drive(mut engine: Engine, rx: mpsc::Receiver<Command>, dispatcher: Dispatcher) {
    loop {
        engine.wake_timers(Instant::now());
        while engine.run(BUDGET) {
            for out in engine.take_outbox() {
                dispatcher.dispatch(out);
            }
            engine.wake_timers(Instant::now());
        }
        for out in engine.take_outbox() {
            dispatcher.dispatch(out);
        }
        let cmd = match engine.next_deadline() {
            Some(d) => match rx.recv_timeout(d.saturating_duration_since(Instant::now())) {
                Ok(c) => c,
                Err(RecvTimeoutError::Timeout) => continue,
                Err(RecvTimeoutError::Disconnected) => break,
            },
            None => match rx.recv() {
                Ok(c) => c,
                Err(_) => break,
            },
        };
        if !handle(&mut engine, cmd) {
            return;
        }
    }
    engine.shutdown();
}

/// Runs `behavior` as a lone process with no ports and returns its final
/// state. Sends fail with `IOFault`; a receive that can never be satisfied
/// is a `RuntimeFault`.
pub fn run_isolated(behavior: &Behavior, procedures: &[Procedure], seed: u64) -> Result<ValueNode, Fault> {
    let mut program = Program::with_main(behavior.clone());
    program.procedures = procedures.to_vec();
    let main = ir::compile(&program.main, &program.procedures);
    let checked = Arc::new(check_program(program));
    let log = event::EventLog::new("isolated", None);
    let mut engine = Engine::new(
        checked,
        main,
        ExecutionMode::Concurrent,
        IndexMap::new(),
        seed,
        log,
        Arc::new(AtomicUsize::new(0)),
    );
    engine.finished = Some(Vec::new());
    let pid = engine.spawn_bare();
    loop {
        engine.wake_timers(Instant::now());
        engine.run(usize::MAX);
        for out in engine.take_outbox() {
            if let Some(task) = out.task {
                engine.send_done(&pid, task, Err(FaultKind::IOFault.into()));
            }
        }
        if engine.process_count() == 0 {
            break;
        }
        if let Some(d) = engine.next_deadline() {
            thread::sleep(d.saturating_duration_since(Instant::now()));
        } else if !engine.has_pending_work() {
            engine.terminate(&pid, Some(FaultKind::RuntimeFault.into()), "blocked on a receive");
        }
    }
    let done = engine
        .finished
        .take()
        .unwrap_or_default()
        .pop()
        .expect("process finished");
    match done.fault {
        Some(f) => Err(f),
        None => Ok(done.state),
    }
}

#[cfg(test)]
mod tests;
