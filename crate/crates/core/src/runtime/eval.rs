//! Expression evaluation over a process state.

use thiserror::Error;

use crate::lang::{BinaryOp, Expr, ExprKind, PathExpr, UnaryOp};
use crate::values::{BasicValue, Path, ValueNode};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("index at {path} is not a non-negative int")]
    BadIndex { path: String },
    #[error("operator {op} cannot be applied to {left} and {right}")]
    BadOperands {
        op: &'static str,
        left: &'static str,
        right: &'static str,
    },
    #[error("operator {op} cannot be applied to {operand}")]
    BadOperand { op: &'static str, operand: &'static str },
    #[error("integer overflow in {0}")]
    Overflow(&'static str),
    #[error("division by zero")]
    DivisionByZero,
    #[error("expected {expected}, found {found}")]
    Expected {
        expected: &'static str,
        found: &'static str,
    },
}

/// Source of fresh tokens for `new`.
pub(crate) trait Fresh {
    fn fresh(&mut self) -> String;
}

/// Resolves index expressions to a concrete path.
pub(crate) fn resolve_path(
    p: &PathExpr,
    state: &ValueNode,
    fresh: &mut dyn Fresh,
) -> Result<Path, EvalError> {
    let mut out = Path::root();
    for seg in &p.segments {
        let index = match &seg.index {
            None => 0,
            Some(e) => match eval(e, state, fresh)?.root() {
                BasicValue::Int(i) if *i >= 0 => *i as usize,
                _ => {
                    return Err(EvalError::BadIndex {
                        path: out.child(seg.name.clone(), 0).to_string(),
                    })
                }
            },
        };
        out.push(seg.name.clone(), index);
    }
    Ok(out)
}

fn kind_name(v: &BasicValue) -> &'static str {
    v.kind().name()
}

pub(crate) fn eval(e: &Expr, state: &ValueNode, fresh: &mut dyn Fresh) -> Result<ValueNode, EvalError> {
    Ok(match &e.kind {
        ExprKind::Literal(v) => ValueNode::leaf(v.clone()),
        ExprKind::Path(p) => state.get(&resolve_path(p, state, fresh)?),
        ExprKind::New => ValueNode::leaf(fresh.fresh()),
        ExprKind::Count(p) => {
            let path = resolve_path(p, state, fresh)?;
            ValueNode::leaf(state.count(&path) as i64)
        }
        ExprKind::Unary(op, x) => {
            let v = eval(x, state, fresh)?;
            ValueNode::leaf(unary(*op, v.root())?)
        }
        ExprKind::Binary(BinaryOp::And, a, b) => {
            if !truth(&eval(a, state, fresh)?, "&&")? {
                return Ok(ValueNode::leaf(false));
            }
            ValueNode::leaf(truth(&eval(b, state, fresh)?, "&&")?)
        }
        ExprKind::Binary(BinaryOp::Or, a, b) => {
            if truth(&eval(a, state, fresh)?, "||")? {
                return Ok(ValueNode::leaf(true));
            }
            ValueNode::leaf(truth(&eval(b, state, fresh)?, "||")?)
        }
        ExprKind::Binary(op, a, b) => {
            let a = eval(a, state, fresh)?;
            let b = eval(b, state, fresh)?;
            ValueNode::leaf(binary(*op, &a, &b)?)
        }
    })
}

/// A condition value: must have a bool root.
pub(crate) fn condition(v: &ValueNode) -> Result<bool, EvalError> {
    match v.root() {
        BasicValue::Bool(b) => Ok(*b),
        other => Err(EvalError::Expected {
            expected: "bool",
            found: kind_name(other),
        }),
    }
}

fn truth(v: &ValueNode, op: &'static str) -> Result<bool, EvalError> {
    match v.root() {
        BasicValue::Bool(b) => Ok(*b),
        other => Err(EvalError::BadOperand {
            op,
            operand: kind_name(other),
        }),
    }
}

fn unary(op: UnaryOp, v: &BasicValue) -> Result<BasicValue, EvalError> {
    match (op, v) {
        (UnaryOp::Neg, BasicValue::Int(i)) => i
            .checked_neg()
            .map(BasicValue::Int)
            .ok_or(EvalError::Overflow("-")),
        (UnaryOp::Neg, BasicValue::Double(d)) => Ok(BasicValue::Double(-d)),
        (UnaryOp::Not, BasicValue::Bool(b)) => Ok(BasicValue::Bool(!b)),
        (UnaryOp::Neg, other) => Err(EvalError::BadOperand {
            op: "-",
            operand: kind_name(other),
        }),
        (UnaryOp::Not, other) => Err(EvalError::BadOperand {
            op: "!",
            operand: kind_name(other),
        }),
    }
}

fn binary(op: BinaryOp, a: &ValueNode, b: &ValueNode) -> Result<BasicValue, EvalError> {
    use BasicValue::{Double as D, Int as I, String as S};
    match op {
        BinaryOp::Eq => return Ok(BasicValue::Bool(a == b)),
        BinaryOp::Ne => return Ok(BasicValue::Bool(a != b)),
        _ => {}
    }
    let sym = op.symbol();
    let bad = || EvalError::BadOperands {
        op: sym,
        left: kind_name(a.root()),
        right: kind_name(b.root()),
    };
    let int = |r: Option<i64>| r.map(I).ok_or(EvalError::Overflow(sym));
    Ok(match (op, a.root(), b.root()) {
        (BinaryOp::Add, I(x), I(y)) => int(x.checked_add(*y))?,
        (BinaryOp::Sub, I(x), I(y)) => int(x.checked_sub(*y))?,
        (BinaryOp::Mul, I(x), I(y)) => int(x.checked_mul(*y))?,
        (BinaryOp::Div | BinaryOp::Rem, I(_), I(0)) => return Err(EvalError::DivisionByZero),
        (BinaryOp::Div, I(x), I(y)) => int(x.checked_div(*y))?,
        (BinaryOp::Rem, I(x), I(y)) => int(x.checked_rem(*y))?,
        (BinaryOp::Add, D(x), D(y)) => D(x + y),
        (BinaryOp::Sub, D(x), D(y)) => D(x - y),
        (BinaryOp::Mul, D(x), D(y)) => D(x * y),
        (BinaryOp::Div, D(x), D(y)) => D(x / y),
        (BinaryOp::Rem, D(x), D(y)) => D(x % y),
        (BinaryOp::Add, S(x), S(y)) => S(format!("{x}{y}")),
        (BinaryOp::Lt | BinaryOp::Le | BinaryOp::Gt | BinaryOp::Ge, x, y) => {
            let ord = match (x, y) {
                (I(x), I(y)) => x.partial_cmp(y),
                (D(x), D(y)) => x.partial_cmp(y),
                (S(x), S(y)) => x.partial_cmp(y),
                _ => return Err(bad()),
            };
            let r = match ord {
                None => false,
                Some(o) => match op {
                    BinaryOp::Lt => o.is_lt(),
                    BinaryOp::Le => o.is_le(),
                    BinaryOp::Gt => o.is_gt(),
                    _ => o.is_ge(),
                },
            };
            BasicValue::Bool(r)
        }
        _ => return Err(bad()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::{parse_behavior, BehaviorKind};

    struct Counter(u32);

    impl Fresh for Counter {
        fn fresh(&mut self) -> String {
            self.0 += 1;
            format!("t{}", self.0)
        }
    }

    fn ev(src: &str, state: &ValueNode) -> Result<ValueNode, EvalError> {
        let b = parse_behavior(&format!("x = {src}")).unwrap();
        let BehaviorKind::Assign { value, .. } = b.kind else {
            panic!()
        };
        eval(&value, state, &mut Counter(0))
    }

    #[test]
    fn arithmetic_without_coercion() {
        let s = ValueNode::void();
        assert_eq!(ev("1 + 2 * 3", &s).unwrap(), ValueNode::leaf(7i64));
        assert_eq!(ev("7 % 3 - -1", &s).unwrap(), ValueNode::leaf(2i64));
        assert_eq!(ev("1.5 * 2.0", &s).unwrap(), ValueNode::leaf(3.0));
        assert_eq!(ev("\"a\" + \"b\"", &s).unwrap(), ValueNode::leaf("ab"));
        assert!(matches!(ev("1 + 1.0", &s), Err(EvalError::BadOperands { .. })));
        assert_eq!(ev("1 / 0", &s), Err(EvalError::DivisionByZero));
        assert_eq!(ev("9223372036854775807 + 1", &s), Err(EvalError::Overflow("+")));
    }

    #[test]
    fn paths_counts_and_equality() {
        let s = ValueNode::void()
            .with_child("a", ValueNode::leaf(1i64))
            .with_child("a", ValueNode::leaf(2i64));
        assert_eq!(ev("#a", &s).unwrap(), ValueNode::leaf(2i64));
        assert_eq!(ev("a[1]", &s).unwrap(), ValueNode::leaf(2i64));
        assert_eq!(ev("a[#a - 1] == 2", &s).unwrap(), ValueNode::leaf(true));
        assert_eq!(ev("missing", &s).unwrap(), ValueNode::void());
        assert!(matches!(ev("a[-1]", &s), Err(EvalError::BadIndex { .. })));
        assert_eq!(ev("new", &s).unwrap(), ValueNode::leaf("t1"));
    }

    #[test]
    fn short_circuit() {
        let s = ValueNode::void();
        assert_eq!(ev("false && 1", &s).unwrap(), ValueNode::leaf(false));
        assert_eq!(ev("true || 1", &s).unwrap(), ValueNode::leaf(true));
        assert!(ev("true && 1", &s).is_err());
        assert!(condition(&ValueNode::leaf(1i64)).is_err());
    }
}
