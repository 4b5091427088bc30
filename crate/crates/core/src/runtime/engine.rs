//! Process scheduler for one service: routing, correlation, spawning and
//! small-step execution of workflow statements.
//!
//! The engine is single-threaded and driven from outside: the service
//! thread feeds it deliveries, send completions and timer ticks, and runs
//! ready tasks until the service is quiescent.

use std::collections::VecDeque;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc::Sender;
use std::sync::Arc;
use std::time::{Duration, Instant};

use indexmap::IndexMap;
use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::eval::{condition, eval, resolve_path, EvalError, Fresh};
use super::event::{EventKind, EventLog};
use super::ir::{Branch, Stmt};
use super::{MessageEnvelope, RoutingOutcome};
use crate::checker::CheckedProgram;
use crate::lang::{ExecutionMode, Expr, OpKind, PathExpr};
use crate::net::{Fault, FaultKind, Location, Protocol, Reply};
use crate::values::{type_conforms, BasicValue, Path, TokenSource, TypeExpr, ValueNode};

/// Where sends on an output port currently go.
#[derive(Debug, Clone)]
pub(crate) struct OutputBinding {
    pub location: Option<Location>,
    pub protocol: Protocol,
}

/// A send the driver must perform on the engine's behalf.
#[derive(Debug)]
pub(crate) struct Outbound {
    pub pid: String,
    /// Task waiting for the response; `None` for one-way sends.
    pub task: Option<usize>,
    pub port: String,
    pub op: String,
    pub payload: ValueNode,
    pub kind: OpKind,
    pub location: Location,
    pub protocol: Protocol,
    pub response_type: Option<TypeExpr>,
}

struct Msg {
    op: String,
    port: String,
    payload: ValueNode,
    reply: Option<Sender<Reply>>,
    origin: String,
}

enum Frame {
    Exec(Arc<Stmt>),
    /// Sends the response of a request-response branch once its body is done.
    Reply {
        op: String,
        port: String,
        reply: Option<Sender<Reply>>,
        response: Option<Expr>,
    },
}

#[derive(Debug, Clone, PartialEq)]
enum Status {
    Ready,
    Awaiting(Vec<String>),
    Sleeping(Instant),
    Sending {
        port: String,
        op: String,
        response: Option<PathExpr>,
    },
    Joining(usize),
}

struct Task {
    frames: Vec<Frame>,
    status: Status,
    parent: Option<usize>,
}

struct Process {
    pid: String,
    state: ValueNode,
    mailbox: VecDeque<Msg>,
    /// Slab of tasks; index 0 is the root. Slots are never reused.
    tasks: Vec<Option<Task>>,
}

impl Process {
    fn new(pid: String, main: Arc<Stmt>) -> Self {
        Process {
            pid,
            state: ValueNode::void(),
            mailbox: VecDeque::new(),
            tasks: vec![Some(Task {
                frames: vec![Frame::Exec(main)],
                status: Status::Ready,
                parent: None,
            })],
        }
    }

    fn task(&mut self, t: usize) -> &mut Task {
        self.tasks[t].as_mut().expect("live task")
    }

    fn awaits(&self, op: &str) -> bool {
        self.tasks.iter().flatten().any(|t| match &t.status {
            Status::Awaiting(ops) => ops.iter().any(|o| o == op),
            _ => false,
        })
    }

    /// Marks tasks waiting on `op` runnable.
    fn wake_for(&mut self, op: &str) {
        for t in self.tasks.iter_mut().flatten() {
            if matches!(&t.status, Status::Awaiting(ops) if ops.iter().any(|o| o == op)) {
                t.status = Status::Ready;
            }
        }
    }

    fn cset_value(&self, var: &str) -> BasicValue {
        self.state
            .get(&Path::root().child("csets", 0).child(var, 0))
            .root()
            .clone()
    }
}

/// What a single step asks the engine to do next.
enum StepOutcome {
    Continue,
    CsetsChanged,
    Finished,
    Fault(Fault, String),
}

struct Ctx {
    program: Arc<CheckedProgram>,
    log: EventLog,
    tokens: TokenSource,
    outputs: IndexMap<String, OutputBinding>,
    outbox: Vec<Outbound>,
}

impl Fresh for TokenSource {
    fn fresh(&mut self) -> String {
        self.next_token()
    }
}

/// A process that ended, kept when the engine is asked to remember them.
#[derive(Debug, Clone)]
pub(crate) struct Finished {
    pub state: ValueNode,
    pub fault: Option<Fault>,
}

pub(crate) struct Engine {
    cx: Ctx,
    main: Arc<Stmt>,
    mode: ExecutionMode,
    procs: IndexMap<String, Process>,
    pending_starts: VecDeque<(String, Msg)>,
    rng: ChaCha8Rng,
    live: Arc<AtomicUsize>,
    pub finished: Option<Vec<Finished>>,
}

fn eval_fault(e: EvalError) -> StepOutcome {
    StepOutcome::Fault(Fault::new(FaultKind::RuntimeFault), e.to_string())
}

impl Engine {
    pub fn new(
        program: Arc<CheckedProgram>,
        main: Arc<Stmt>,
        mode: ExecutionMode,
        outputs: IndexMap<String, OutputBinding>,
        seed: u64,
        log: EventLog,
        live: Arc<AtomicUsize>,
    ) -> Self {
        Engine {
            cx: Ctx {
                program,
                log,
                tokens: TokenSource::seeded(seed),
                outputs,
                outbox: Vec::new(),
            },
            main,
            mode,
            procs: IndexMap::new(),
            pending_starts: VecDeque::new(),
            rng: ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5eed_5eed_5eed),
            live,
            finished: None,
        }
    }

    pub fn process_count(&self) -> usize {
        self.procs.len()
    }

    pub fn take_outbox(&mut self) -> Vec<Outbound> {
        std::mem::take(&mut self.cx.outbox)
    }

    fn sync_count(&self) {
        self.live.store(self.procs.len(), Ordering::SeqCst);
    }

    // ---- routing ----

    pub fn deliver(&mut self, env: MessageEnvelope) -> RoutingOutcome {
        let MessageEnvelope {
            operation: op,
            payload,
            reply,
            origin,
            port,
        } = env;
        let program = self.cx.program.clone();
        let (op_at, port_at, origin_at) = (op.clone(), port.clone(), origin.clone());
        let fail = |cx: &Ctx, reply: Option<Sender<Reply>>, fault: Fault| {
            cx.log.record(
                None,
                EventKind::Fault,
                Some(&op_at),
                Some(&port_at),
                Some(&origin_at),
                Some(fault.kind.name().to_owned()),
            );
            if let Some(r) = reply {
                let _ = r.send(Err(fault.clone()));
            }
            RoutingOutcome::Fault(fault)
        };
        let Some(route) = program.routing.get(&op) else {
            return fail(&self.cx, reply, FaultKind::UnknownOperation.into());
        };
        match type_conforms(&payload, route.signature.request(), &program.types) {
            Ok(v) if v.is_empty() => {}
            Ok(v) => {
                return fail(
                    &self.cx,
                    reply,
                    Fault::at(FaultKind::TypeMismatch, v[0].path.to_string()),
                )
            }
            Err(e) => {
                warn!("request type of {op} does not resolve: {e}");
                return fail(&self.cx, reply, FaultKind::TypeMismatch.into());
            }
        }
        let msg = Msg {
            op: op.clone(),
            port,
            payload,
            reply,
            origin,
        };
        if let Some((pid, adopt)) = self.correlate(&op, &msg.payload) {
            return self.enqueue(&pid, adopt, msg);
        }
        if !program.is_starting(&op) {
            return fail(&self.cx, msg.reply, FaultKind::CorrelationError.into());
        }
        let pid = self.cx.tokens.next_token();
        if self.mode == ExecutionMode::Sequential && !self.procs.is_empty() {
            self.record(&pid, EventKind::Buffer, &msg);
            self.pending_starts.push_back((pid.clone(), msg));
            return RoutingOutcome::Buffered(pid);
        }
        self.spawn(pid.clone(), msg);
        RoutingOutcome::SpawnedNew(pid)
    }

    fn record(&self, pid: &str, kind: EventKind, msg: &Msg) {
        self.cx.log.record(
            Some(pid),
            kind,
            Some(&msg.op),
            Some(&msg.port),
            Some(&msg.origin),
            None,
        );
    }

    /// Finds the live process `payload` belongs to, plus the cset values it
    /// adopts by late binding.
    fn correlate(&self, op: &str, payload: &ValueNode) -> Option<(String, Vec<(String, BasicValue)>)> {
        let aliases = self.cx.program.aliases.get(op)?;
        let candidates: Vec<(&str, BasicValue)> = aliases
            .iter()
            .map(|a| (a.var.as_str(), payload.get(&a.path).root().clone()))
            .filter(|(_, v)| !v.is_void())
            .collect();
        if candidates.is_empty() {
            return None;
        }
        let mut late = None;
        for p in self.procs.values() {
            let mut exact = true;
            let mut adopt = Vec::new();
            let matches = candidates.iter().all(|(var, want)| {
                let have = p.cset_value(var);
                if have.is_void() {
                    exact = false;
                    adopt.push(((*var).to_owned(), want.clone()));
                    true
                } else {
                    have == *want
                }
            });
            if !matches {
                continue;
            }
            if exact {
                return Some((p.pid.clone(), Vec::new()));
            }
            if late.is_none() {
                late = Some((p.pid.clone(), adopt));
            }
        }
        late
    }

    fn enqueue(&mut self, pid: &str, adopt: Vec<(String, BasicValue)>, msg: Msg) -> RoutingOutcome {
        let adopted = !adopt.is_empty();
        let p = self.procs.get_mut(pid).expect("correlated process is live");
        for (var, value) in adopt {
            p.state.set(
                &Path::root().child("csets", 0).child(var, 0),
                ValueNode::leaf(value),
            );
        }
        let outcome = if p.awaits(&msg.op) {
            p.wake_for(&msg.op);
            RoutingOutcome::DeliveredTo(pid.to_owned())
        } else {
            self.record(pid, EventKind::Buffer, &msg);
            RoutingOutcome::Buffered(pid.to_owned())
        };
        self.procs[pid].mailbox.push_back(msg);
        if adopted {
            self.check_collision(pid);
        }
        outcome
    }

    fn spawn(&mut self, pid: String, msg: Msg) {
        self.record(&pid, EventKind::Spawn, &msg);
        let mut p = Process::new(pid.clone(), self.main.clone());
        p.mailbox.push_back(msg);
        self.procs.insert(pid, p);
        self.sync_count();
    }

    /// Starts a process with no triggering message.
    pub fn spawn_bare(&mut self) -> String {
        let pid = self.cx.tokens.next_token();
        self.cx
            .log
            .record(Some(&pid), EventKind::Spawn, None, None, None, None);
        self.procs
            .insert(pid.clone(), Process::new(pid.clone(), self.main.clone()));
        self.sync_count();
        pid
    }

    /// Faults `pid` if its cset tuple is now fully defined and equal to
    /// another live process's.
    fn check_collision(&mut self, pid: &str) {
        let vars = self.cx.program.cset_vars();
        if vars.is_empty() {
            return;
        }
        let tuple = |p: &Process| -> Option<Vec<BasicValue>> {
            vars.iter()
                .map(|v| Some(p.cset_value(v)).filter(|x| !x.is_void()))
                .collect()
        };
        let Some(mine) = tuple(&self.procs[pid]) else {
            return;
        };
        let clash = self
            .procs
            .values()
            .any(|p| p.pid != pid && tuple(p).as_ref() == Some(&mine));
        if clash {
            self.terminate(
                pid,
                Some(Fault::new(FaultKind::CorrelationError)),
                "correlation values already owned by another process",
            );
        }
    }

    // ---- completion of outbound calls ----

    pub fn send_done(&mut self, pid: &str, task: usize, result: Reply) {
        let Some(p) = self.procs.get_mut(pid) else {
            return;
        };
        let Some(Some(t)) = p.tasks.get_mut(task) else {
            return;
        };
        let Status::Sending { port, op, response } = t.status.clone() else {
            return;
        };
        let value = match result {
            Ok(v) => v,
            Err(f) => {
                let detail = format!("{op}@{port} failed: {f}");
                self.terminate(pid, Some(f), &detail);
                return;
            }
        };
        let program = self.cx.program.clone();
        if let Some(ty) = program.output_signature(&port, &op).and_then(|s| s.response()) {
            match type_conforms(&value, ty, &program.types) {
                Ok(v) if v.is_empty() => {}
                Ok(v) => {
                    let f = Fault::at(FaultKind::TypeMismatch, v[0].path.to_string());
                    self.terminate(pid, Some(f), &format!("response of {op}@{port} is ill-typed"));
                    return;
                }
                Err(e) => {
                    self.terminate(pid, Some(FaultKind::TypeMismatch.into()), &e.to_string());
                    return;
                }
            }
        }
        self.cx
            .log
            .record(Some(pid), EventKind::Recv, Some(&op), Some(&port), None, None);
        let p = &mut self.procs[pid];
        if let Some(path) = response {
            match resolve_path(&path, &p.state, &mut self.cx.tokens) {
                Ok(path) => p.state.set(&path, value),
                Err(e) => {
                    self.terminate(pid, Some(FaultKind::RuntimeFault.into()), &e.to_string());
                    return;
                }
            }
            if path_is_cset(&path) {
                p.task(task).status = Status::Ready;
                self.check_collision(pid);
                return;
            }
        }
        p.task(task).status = Status::Ready;
    }

    /// Records a failed one-way send; the sender is not affected.
    pub fn notify_failed(&mut self, pid: &str, op: &str, port: &str, fault: &Fault) {
        self.cx.log.record(
            Some(pid),
            EventKind::Fault,
            Some(op),
            Some(port),
            None,
            Some(fault.kind.name().to_owned()),
        );
    }

    // ---- timers ----

    pub fn next_deadline(&self) -> Option<Instant> {
        self.procs
            .values()
            .flat_map(|p| p.tasks.iter().flatten())
            .filter_map(|t| match t.status {
                Status::Sleeping(d) => Some(d),
                _ => None,
            })
            .min()
    }

    pub fn wake_timers(&mut self, now: Instant) {
        for p in self.procs.values_mut() {
            for t in p.tasks.iter_mut().flatten() {
                if matches!(t.status, Status::Sleeping(d) if d <= now) {
                    t.status = Status::Ready;
                }
            }
        }
    }

    /// True when some task waits for a timer or an outbound call.
    pub fn has_pending_work(&self) -> bool {
        self.procs.values().any(|p| {
            p.tasks
                .iter()
                .flatten()
                .any(|t| matches!(t.status, Status::Sleeping(_) | Status::Sending { .. }))
        })
    }

    // ---- execution ----

    /// Runs up to `budget` steps, choosing among ready tasks at random.
    /// Returns true if ready tasks remain.
    pub fn run(&mut self, budget: usize) -> bool {
        let mut ready = Vec::new();
        for _ in 0..budget {
            ready.clear();
            for (pi, p) in self.procs.values().enumerate() {
                for (ti, t) in p.tasks.iter().enumerate() {
                    if matches!(t, Some(t) if t.status == Status::Ready) {
                        ready.push((pi, ti));
                    }
                }
            }
            if ready.is_empty() {
                return false;
            }
            let (pi, ti) = ready[self.rng.gen_range(0..ready.len())];
            let pid = self.procs.get_index(pi).unwrap().0.clone();
            let outcome = step(&mut self.procs[pi], ti, &mut self.cx);
            match outcome {
                StepOutcome::Continue => {}
                StepOutcome::CsetsChanged => self.check_collision(&pid),
                StepOutcome::Finished => self.terminate(&pid, None, ""),
                StepOutcome::Fault(f, detail) => self.terminate(&pid, Some(f), &detail),
            }
        }
        true
    }

    /// Ends a process, failing whatever still waits on it.
    pub fn terminate(&mut self, pid: &str, fault: Option<Fault>, detail: &str) {
        let Some(p) = self.procs.shift_remove(pid) else {
            return;
        };
        // Everything is logged and the count published before any reply goes
        // out, so a caller woken by a reply or by the count sees the full log.
        if let Some(f) = &fault {
            warn!("process {pid} failed: {f}: {detail}");
            self.cx.log.record(
                Some(pid),
                EventKind::Fault,
                None,
                None,
                None,
                Some(f.kind.name().to_owned()),
            );
        }
        for msg in &p.mailbox {
            self.cx.log.record(
                Some(pid),
                EventKind::Fault,
                Some(&msg.op),
                Some(&msg.port),
                Some(&msg.origin),
                Some(FaultKind::CorrelationError.name().to_owned()),
            );
        }
        self.cx
            .log
            .record(Some(pid), EventKind::Terminate, None, None, None, None);
        if self.procs.is_empty() {
            if let Some((pid, msg)) = self.pending_starts.pop_front() {
                self.spawn(pid, msg);
            }
        }
        self.sync_count();

        let reply_fault = fault.clone().unwrap_or(Fault::new(FaultKind::RuntimeFault));
        for t in p.tasks.into_iter().flatten() {
            for frame in t.frames {
                if let Frame::Reply { reply: Some(tx), .. } = frame {
                    let _ = tx.send(Err(reply_fault.clone()));
                }
            }
        }
        for msg in p.mailbox {
            if let Some(tx) = msg.reply {
                let _ = tx.send(Err(FaultKind::CorrelationError.into()));
            }
        }
        if let Some(done) = &mut self.finished {
            done.push(Finished {
                state: p.state,
                fault,
            });
        }
    }

    /// Terminates every process and refuses queued starts.
    pub fn shutdown(&mut self) {
        for (_, msg) in std::mem::take(&mut self.pending_starts) {
            if let Some(tx) = msg.reply {
                let _ = tx.send(Err(FaultKind::RuntimeFault.into()));
            }
        }
        let pids: Vec<String> = self.procs.keys().cloned().collect();
        for pid in pids {
            self.terminate(&pid, None, "");
        }
    }
}

fn path_is_cset(p: &PathExpr) -> bool {
    p.segments.first().is_some_and(|s| s.name == "csets")
}

/// Executes frames of task `t` until one observable statement has run or the
/// task blocks.
fn step(p: &mut Process, t: usize, cx: &mut Ctx) -> StepOutcome {
    loop {
        let Some(frame) = p.task(t).frames.pop() else {
            return finish_task(p, t);
        };
        let stmt = match frame {
            Frame::Exec(s) => s,
            Frame::Reply {
                op,
                port,
                reply,
                response,
            } => return send_reply(p, cx, op, port, reply, response),
        };
        match &*stmt {
            Stmt::Nil => continue,
            Stmt::Seq(a, b) => {
                let frames = &mut p.task(t).frames;
                frames.push(Frame::Exec(b.clone()));
                frames.push(Frame::Exec(a.clone()));
                continue;
            }
            Stmt::Assign(target, value) => {
                let v = match eval(value, &p.state, &mut cx.tokens) {
                    Ok(v) => v,
                    Err(e) => return eval_fault(e),
                };
                let path = match resolve_path(target, &p.state, &mut cx.tokens) {
                    Ok(path) => path,
                    Err(e) => return eval_fault(e),
                };
                p.state.set(&path, v);
                return if path_is_cset(target) {
                    StepOutcome::CsetsChanged
                } else {
                    StepOutcome::Continue
                };
            }
            Stmt::Par(a, b) => {
                for s in [a, b] {
                    p.tasks.push(Some(Task {
                        frames: vec![Frame::Exec(s.clone())],
                        status: Status::Ready,
                        parent: Some(t),
                    }));
                }
                p.task(t).status = Status::Joining(2);
                return StepOutcome::Continue;
            }
            Stmt::If(cond, then, otherwise) => {
                let c = match eval(cond, &p.state, &mut cx.tokens).and_then(|v| condition(&v)) {
                    Ok(c) => c,
                    Err(e) => return eval_fault(e),
                };
                let next = if c { Some(then) } else { otherwise.as_ref() };
                if let Some(n) = next {
                    p.task(t).frames.push(Frame::Exec(n.clone()));
                }
                return StepOutcome::Continue;
            }
            Stmt::While(cond, body) => {
                let c = match eval(cond, &p.state, &mut cx.tokens).and_then(|v| condition(&v)) {
                    Ok(c) => c,
                    Err(e) => return eval_fault(e),
                };
                if c {
                    let frames = &mut p.task(t).frames;
                    frames.push(Frame::Exec(stmt.clone()));
                    frames.push(Frame::Exec(body.clone()));
                }
                return StepOutcome::Continue;
            }
            Stmt::Choice(branches) => {
                return receive(p, t, cx, &stmt, branches, &[]);
            }
            Stmt::ProvideUntil { provide, until } => {
                return receive(p, t, cx, &stmt, until, provide);
            }
            Stmt::Solicit {
                port,
                op,
                request,
                response,
            } => {
                return send(p, t, cx, port, op, request.as_ref(), Some(response.clone()));
            }
            Stmt::Notify { port, op, request } => {
                return send(p, t, cx, port, op, request.as_ref(), None);
            }
            Stmt::Rebind {
                port,
                location,
                protocol,
            } => return rebind(p, cx, port, location, protocol),
            Stmt::Sleep(ms) => {
                let ms = match eval(ms, &p.state, &mut cx.tokens) {
                    Ok(v) => match v.root() {
                        BasicValue::Int(i) if *i >= 0 => *i as u64,
                        other => {
                            return StepOutcome::Fault(
                                FaultKind::RuntimeFault.into(),
                                format!("sleep needs a non-negative int, found {other:?}"),
                            )
                        }
                    },
                    Err(e) => return eval_fault(e),
                };
                p.task(t).status = Status::Sleeping(Instant::now() + Duration::from_millis(ms));
                return StepOutcome::Continue;
            }
        }
    }
}

fn finish_task(p: &mut Process, t: usize) -> StepOutcome {
    let task = p.tasks[t].take().expect("live task");
    match task.parent {
        None => StepOutcome::Finished,
        Some(parent) => {
            let pt = p.task(parent);
            if let Status::Joining(n) = pt.status {
                pt.status = if n <= 1 {
                    Status::Ready
                } else {
                    Status::Joining(n - 1)
                };
            }
            StepOutcome::Continue
        }
    }
}

/// Input choice over `exits` and `repeats`; a `repeats` branch re-enters
/// `stmt` after its body.
fn receive(
    p: &mut Process,
    t: usize,
    cx: &mut Ctx,
    stmt: &Arc<Stmt>,
    exits: &[Branch],
    repeats: &[Branch],
) -> StepOutcome {
    let branch_for = |op: &str| {
        repeats
            .iter()
            .map(|b| (b, true))
            .chain(exits.iter().map(|b| (b, false)))
            .find(|(b, _)| b.op == op)
    };
    let found = p.mailbox.iter().position(|m| branch_for(&m.op).is_some());
    let Some(idx) = found else {
        let ops = repeats.iter().chain(exits).map(|b| b.op.clone()).collect();
        let task = p.task(t);
        task.frames.push(Frame::Exec(stmt.clone()));
        task.status = Status::Awaiting(ops);
        return StepOutcome::Continue;
    };
    let msg = p.mailbox.remove(idx).expect("index in range");
    let (branch, repeat) = branch_for(&msg.op).expect("guard matched");
    cx.log.record(
        Some(&p.pid),
        EventKind::Recv,
        Some(&msg.op),
        Some(&msg.port),
        Some(&msg.origin),
        None,
    );
    if let Some(target) = &branch.request {
        match resolve_path(target, &p.state, &mut cx.tokens) {
            Ok(path) => p.state.set(&path, msg.payload),
            Err(e) => {
                if let Some(tx) = msg.reply {
                    let _ = tx.send(Err(FaultKind::RuntimeFault.into()));
                }
                return eval_fault(e);
            }
        }
    }
    let frames = &mut p.task(t).frames;
    if repeat {
        frames.push(Frame::Exec(stmt.clone()));
    }
    if let Some(response) = &branch.response {
        frames.push(Frame::Reply {
            op: msg.op,
            port: msg.port,
            reply: msg.reply,
            response: response.clone(),
        });
    }
    frames.push(Frame::Exec(branch.body.clone()));
    match &branch.request {
        Some(target) if path_is_cset(target) => StepOutcome::CsetsChanged,
        _ => StepOutcome::Continue,
    }
}

fn send_reply(
    p: &mut Process,
    cx: &mut Ctx,
    op: String,
    port: String,
    reply: Option<Sender<Reply>>,
    response: Option<Expr>,
) -> StepOutcome {
    let value = match response.map(|e| eval(&e, &p.state, &mut cx.tokens)) {
        None => ValueNode::void(),
        Some(Ok(v)) => v,
        Some(Err(e)) => {
            if let Some(tx) = reply {
                let _ = tx.send(Err(FaultKind::RuntimeFault.into()));
            }
            return eval_fault(e);
        }
    };
    let program = cx.program.clone();
    if let Some(ty) = program.routing.get(&op).and_then(|r| r.signature.response()) {
        let violation = match type_conforms(&value, ty, &program.types) {
            Ok(v) => v.into_iter().next().map(|v| v.path.to_string()),
            Err(_) => Some(String::new()),
        };
        if let Some(path) = violation {
            let fault = if path.is_empty() {
                Fault::new(FaultKind::TypeMismatch)
            } else {
                Fault::at(FaultKind::TypeMismatch, path)
            };
            if let Some(tx) = reply {
                let _ = tx.send(Err(fault.clone()));
            }
            return StepOutcome::Fault(fault, format!("response of {op} does not match its type"));
        }
    }
    cx.log
        .record(Some(&p.pid), EventKind::Send, Some(&op), Some(&port), None, None);
    if let Some(tx) = reply {
        let _ = tx.send(Ok(value));
    }
    StepOutcome::Continue
}

fn send(
    p: &mut Process,
    t: usize,
    cx: &mut Ctx,
    port: &str,
    op: &str,
    request: Option<&Expr>,
    response: Option<Option<PathExpr>>,
) -> StepOutcome {
    let payload = match request.map(|e| eval(e, &p.state, &mut cx.tokens)) {
        None => ValueNode::void(),
        Some(Ok(v)) => v,
        Some(Err(e)) => return eval_fault(e),
    };
    let Some(binding) = cx.outputs.get(port) else {
        return StepOutcome::Fault(FaultKind::IOFault.into(), format!("unknown output port {port}"));
    };
    let Some(location) = binding.location.clone() else {
        return StepOutcome::Fault(
            FaultKind::IOFault.into(),
            format!("output port {port} has no location"),
        );
    };
    cx.log
        .record(Some(&p.pid), EventKind::Send, Some(op), Some(port), None, None);
    let kind = if response.is_some() {
        OpKind::RequestResponse
    } else {
        OpKind::OneWay
    };
    let response_type = cx
        .program
        .output_signature(port, op)
        .and_then(|s| s.response())
        .cloned();
    cx.outbox.push(Outbound {
        pid: p.pid.clone(),
        task: response.is_some().then_some(t),
        port: port.to_owned(),
        op: op.to_owned(),
        payload,
        kind,
        location,
        protocol: binding.protocol,
        response_type,
    });
    if let Some(response) = response {
        p.task(t).status = Status::Sending {
            port: port.to_owned(),
            op: op.to_owned(),
            response,
        };
    }
    StepOutcome::Continue
}

fn rebind(p: &mut Process, cx: &mut Ctx, port: &str, location: &Expr, protocol: &Expr) -> StepOutcome {
    let text = |e: &Expr, cx: &mut Ctx| -> Result<String, String> {
        let v = eval(e, &p.state, &mut cx.tokens).map_err(|e| e.to_string())?;
        v.root()
            .as_str()
            .map(str::to_owned)
            .ok_or_else(|| format!("rebind needs strings, found {:?}", v.root()))
    };
    let parsed = text(location, cx).and_then(|l| l.parse::<Location>().map_err(|e| e.to_string()));
    let location = match parsed {
        Ok(l) => l,
        Err(e) => return StepOutcome::Fault(FaultKind::RuntimeFault.into(), e),
    };
    let protocol = match text(protocol, cx).and_then(|s| s.parse::<Protocol>()) {
        Ok(pr) => pr,
        Err(e) => return StepOutcome::Fault(FaultKind::RuntimeFault.into(), e),
    };
    match cx.outputs.get_mut(port) {
        Some(b) => {
            b.location = Some(location);
            b.protocol = protocol;
            StepOutcome::Continue
        }
        None => StepOutcome::Fault(
            FaultKind::RuntimeFault.into(),
            format!("unknown output port {port}"),
        ),
    }
}
