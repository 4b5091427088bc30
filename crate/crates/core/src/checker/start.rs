//! First-receive analysis: which operations can create a process.

use std::collections::BTreeSet;

use crate::lang::{Behavior, BehaviorKind, Procedure, SourceSpan};

/// Result of walking a behavior from its entry up to the first receives.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StartInfo {
    /// Operations whose receive can be the first communication.
    pub ops: BTreeSet<String>,
    /// The behavior can complete without receiving anything.
    pub nullable: bool,
    /// Sends reachable before any receive.
    pub early_sends: Vec<SourceSpan>,
}

impl StartInfo {
    fn empty() -> Self {
        StartInfo {
            nullable: true,
            ..Default::default()
        }
    }
}

/// Operations that may start a process running `main`.
pub fn starting_operations(main: &Behavior, procedures: &[Procedure]) -> BTreeSet<String> {
    start_info(main, procedures).ops
}

pub fn start_info(main: &Behavior, procedures: &[Procedure]) -> StartInfo {
    first(main, procedures, &mut Vec::new())
}

fn first<'a>(b: &'a Behavior, procs: &'a [Procedure], stack: &mut Vec<&'a str>) -> StartInfo {
    match &b.kind {
        BehaviorKind::Nil
        | BehaviorKind::Assign { .. }
        | BehaviorKind::Sleep(_)
        | BehaviorKind::Rebind { .. } => StartInfo::empty(),
        BehaviorKind::Notify { .. } | BehaviorKind::SolicitResponse { .. } => StartInfo {
            early_sends: vec![b.span.clone()],
            ..StartInfo::empty()
        },
        BehaviorKind::Sequence(x, y) => {
            let mut fx = first(x, procs, stack);
            if fx.nullable {
                let fy = first(y, procs, stack);
                fx.ops.extend(fy.ops);
                fx.early_sends.extend(fy.early_sends);
                fx.nullable = fy.nullable;
            }
            fx
        }
        BehaviorKind::Parallel(x, y) => {
            let mut fx = first(x, procs, stack);
            let fy = first(y, procs, stack);
            fx.ops.extend(fy.ops);
            fx.early_sends.extend(fy.early_sends);
            fx.nullable &= fy.nullable;
            fx
        }
        BehaviorKind::If { then, otherwise, .. } => {
            let mut ft = first(then, procs, stack);
            let fe = match otherwise {
                Some(o) => first(o, procs, stack),
                None => StartInfo::empty(),
            };
            ft.ops.extend(fe.ops);
            ft.early_sends.extend(fe.early_sends);
            ft.nullable |= fe.nullable;
            ft
        }
        // The loop may run zero times, so it never blocks its continuation.
        BehaviorKind::While { body, .. } => StartInfo {
            nullable: true,
            ..first(body, procs, stack)
        },
        BehaviorKind::Call(name) => {
            if stack.contains(&name.as_str()) {
                return StartInfo::empty();
            }
            match procs.iter().find(|p| &p.name == name) {
                Some(p) => {
                    stack.push(&p.name);
                    let out = first(&p.body, procs, stack);
                    stack.pop();
                    out
                }
                None => StartInfo::empty(),
            }
        }
        BehaviorKind::InputChoice(branches) => StartInfo {
            ops: branches.iter().map(|br| br.operation.clone()).collect(),
            ..Default::default()
        },
        BehaviorKind::ProvideUntil { provide, until } => StartInfo {
            ops: provide
                .iter()
                .chain(until)
                .map(|br| br.operation.clone())
                .collect(),
            ..Default::default()
        },
    }
}
