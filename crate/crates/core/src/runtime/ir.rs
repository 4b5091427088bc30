//! Executable form of behaviors: shared nodes so that continuations can be
//! pushed and re-entered cheaply, with procedure calls inlined.

use std::sync::Arc;

use crate::lang::{Behavior, BehaviorKind, BranchKind, Expr, InputBranch, PathExpr, Procedure};

#[derive(Debug)]
pub(crate) enum Stmt {
    Nil,
    Assign(PathExpr, Expr),
    Seq(Arc<Stmt>, Arc<Stmt>),
    Par(Arc<Stmt>, Arc<Stmt>),
    If(Expr, Arc<Stmt>, Option<Arc<Stmt>>),
    While(Expr, Arc<Stmt>),
    Choice(Arc<[Branch]>),
    ProvideUntil {
        provide: Arc<[Branch]>,
        until: Arc<[Branch]>,
    },
    Solicit {
        port: String,
        op: String,
        request: Option<Expr>,
        response: Option<PathExpr>,
    },
    Notify {
        port: String,
        op: String,
        request: Option<Expr>,
    },
    Rebind {
        port: String,
        location: Expr,
        protocol: Expr,
    },
    Sleep(Expr),
}

#[derive(Debug)]
pub(crate) struct Branch {
    pub op: String,
    pub request: Option<PathExpr>,
    /// `None` for one-way branches; `Some(None)` replies void.
    pub response: Option<Option<Expr>>,
    pub body: Arc<Stmt>,
}

/// Compiles `b`, inlining calls. Unknown or recursive calls compile to
/// `nil`; the checker rejects both before a program can run.
pub(crate) fn compile(b: &Behavior, procs: &[Procedure]) -> Arc<Stmt> {
    compile_in(b, procs, &mut Vec::new())
}

fn compile_in<'a>(b: &'a Behavior, procs: &'a [Procedure], stack: &mut Vec<&'a str>) -> Arc<Stmt> {
    let mut c = |x: &'a Behavior| compile_in(x, procs, stack);
    Arc::new(match &b.kind {
        BehaviorKind::Nil => Stmt::Nil,
        BehaviorKind::Assign { target, value } => Stmt::Assign(target.clone(), value.clone()),
        BehaviorKind::Sequence(x, y) => {
            let x = c(x);
            Stmt::Seq(x, c(y))
        }
        BehaviorKind::Parallel(x, y) => {
            let x = c(x);
            Stmt::Par(x, c(y))
        }
        BehaviorKind::If {
            cond,
            then,
            otherwise,
        } => {
            let t = c(then);
            Stmt::If(cond.clone(), t, otherwise.as_deref().map(c))
        }
        BehaviorKind::While { cond, body } => Stmt::While(cond.clone(), c(body)),
        BehaviorKind::Call(name) => {
            if stack.contains(&name.as_str()) {
                return Arc::new(Stmt::Nil);
            }
            match procs.iter().find(|p| &p.name == name) {
                Some(p) => {
                    stack.push(&p.name);
                    let body = compile_in(&p.body, procs, stack);
                    stack.pop();
                    return body;
                }
                None => Stmt::Nil,
            }
        }
        BehaviorKind::InputChoice(bs) => Stmt::Choice(branches(bs, procs, stack)),
        BehaviorKind::ProvideUntil { provide, until } => Stmt::ProvideUntil {
            provide: branches(provide, procs, stack),
            until: branches(until, procs, stack),
        },
        BehaviorKind::SolicitResponse {
            port,
            operation,
            request,
            response,
        } => Stmt::Solicit {
            port: port.clone(),
            op: operation.clone(),
            request: request.clone(),
            response: response.clone(),
        },
        BehaviorKind::Notify {
            port,
            operation,
            request,
        } => Stmt::Notify {
            port: port.clone(),
            op: operation.clone(),
            request: request.clone(),
        },
        BehaviorKind::Rebind {
            port,
            location,
            protocol,
        } => Stmt::Rebind {
            port: port.clone(),
            location: location.clone(),
            protocol: protocol.clone(),
        },
        BehaviorKind::Sleep(ms) => Stmt::Sleep(ms.clone()),
    })
}

fn branches<'a>(bs: &'a [InputBranch], procs: &'a [Procedure], stack: &mut Vec<&'a str>) -> Arc<[Branch]> {
    bs.iter()
        .map(|br| Branch {
            op: br.operation.clone(),
            request: br.request.clone(),
            response: match &br.kind {
                BranchKind::OneWay => None,
                BranchKind::RequestResponse { response } => Some(response.clone()),
            },
            body: compile_in(&br.body, procs, stack),
        })
        .collect()
}
