use std::collections::BTreeMap;

use crate::dsl::{BinOp, Expr, Literal};
use crate::label::Label;
use crate::value::{CapValue, Data};

/// Evaluates without the program counter; callers join pc afterwards.
///
/// Failures (type mismatch, overflow, bad index, unbound name) come back as
/// error results whose label covers every operand that was inspected.
pub(crate) fn eval_raw(expr: &Expr, env: &BTreeMap<String, CapValue>) -> CapValue {
    match expr {
        Expr::Literal(lit) => match lit {
            Literal::Int(v) => CapValue::int(*v, Label::bottom()),
            Literal::Bool(b) => CapValue::bool(*b, Label::bottom()),
            Literal::Text(t) => CapValue::text(t.clone(), Label::bottom()),
        },
        Expr::Var(name) => match env.get(name) {
            Some(v) => v.clone(),
            None => CapValue::error("UnboundVariable", format!("`{name}` is not bound"), Label::bottom()),
        },
        Expr::Not(inner) => {
            let v = eval_raw(inner, env);
            match v.data {
                Data::Bool(b) => CapValue::bool(!b, v.label),
                _ => type_error("not", "bool", &v, v.label.clone()),
            }
        }
        Expr::Binary { op, lhs, rhs } => {
            let l = eval_raw(lhs, env);
            let r = eval_raw(rhs, env);
            binary(*op, &l, &r)
        }
        Expr::Index { target, index } => {
            let v = eval_raw(target, env);
            let label = v.label.clone();
            match &v.data {
                Data::List(items) => {
                    let len = items.len() as i64;
                    let i = if *index < 0 { len + index } else { *index };
                    if (0..len).contains(&i) {
                        items[i as usize].clone().raised(&label)
                    } else {
                        CapValue::error("IndexOutOfBounds", format!("index {index} on list of length {len}"), label)
                    }
                }
                _ => type_error("index", "list", &v, label),
            }
        }
        Expr::Field { target, name } => {
            let v = eval_raw(target, env);
            let label = v.label.clone();
            match &v.data {
                Data::Record(fields) => match fields.get(name) {
                    Some(f) => f.clone().raised(&label),
                    None => CapValue::error("NoSuchField", format!("record has no field `{name}`"), label),
                },
                _ => type_error("field access", "record", &v, label),
            }
        }
        Expr::List(items) => {
            let items = items.iter().map(|e| eval_raw(e, env)).collect();
            CapValue::list(items, Label::bottom())
        }
    }
}

fn type_error(op: &str, expected: &str, v: &CapValue, label: Label) -> CapValue {
    CapValue::error(
        "TypeMismatch",
        format!("{op} expects {expected}, got {}", v.type_name()),
        label,
    )
}

fn binary(op: BinOp, l: &CapValue, r: &CapValue) -> CapValue {
    let label = l.label.join(&r.label);
    let mismatch = || {
        CapValue::error(
            "TypeMismatch",
            format!("`{}` on {} and {}", op.symbol(), l.type_name(), r.type_name()),
            label.clone(),
        )
    };
    let overflow = || CapValue::error("Overflow", format!("`{}` overflowed", op.symbol()), label.clone());
    match (op, &l.data, &r.data) {
        (BinOp::Add, Data::Int(a), Data::Int(b)) => a.checked_add(*b).map_or_else(overflow, |v| CapValue::int(v, label.clone())),
        (BinOp::Sub, Data::Int(a), Data::Int(b)) => a.checked_sub(*b).map_or_else(overflow, |v| CapValue::int(v, label.clone())),
        (BinOp::Mul, Data::Int(a), Data::Int(b)) => a.checked_mul(*b).map_or_else(overflow, |v| CapValue::int(v, label.clone())),
        (BinOp::Lt, Data::Int(a), Data::Int(b)) => CapValue::bool(a < b, label),
        (BinOp::Le, Data::Int(a), Data::Int(b)) => CapValue::bool(a <= b, label),
        (BinOp::Lt, Data::Text(a), Data::Text(b)) => CapValue::bool(a < b, label),
        (BinOp::Le, Data::Text(a), Data::Text(b)) => CapValue::bool(a <= b, label),
        (BinOp::Eq, a, b) => CapValue::bool(same(a, b), label),
        (BinOp::Ne, a, b) => CapValue::bool(!same(a, b), label),
        (BinOp::And, Data::Bool(a), Data::Bool(b)) => CapValue::bool(*a && *b, label),
        (BinOp::Or, Data::Bool(a), Data::Bool(b)) => CapValue::bool(*a || *b, label),
        (BinOp::Concat, Data::List(a), Data::List(b)) => {
            let items = a.iter().chain(b).cloned().collect();
            CapValue::list(items, label)
        }
        (BinOp::Concat, Data::Text(_), Data::List(_) | Data::Record(_) | Data::Result(_))
        | (BinOp::Concat, Data::List(_) | Data::Record(_) | Data::Result(_), Data::Text(_)) => mismatch(),
        (BinOp::Concat, Data::Text(_), _) | (BinOp::Concat, _, Data::Text(_)) => {
            CapValue::text(format!("{l}{r}"), label)
        }
        _ => mismatch(),
    }
}

/// Structural equality on data, ignoring labels.
fn same(a: &Data, b: &Data) -> bool {
    match (a, b) {
        (Data::List(x), Data::List(y)) => x.len() == y.len() && x.iter().zip(y).all(|(p, q)| same(&p.data, &q.data)),
        (Data::Record(x), Data::Record(y)) => {
            x.len() == y.len() && x.iter().zip(y).all(|((k1, v1), (k2, v2))| k1 == k2 && same(&v1.data, &v2.data))
        }
        _ => a == b,
    }
}
