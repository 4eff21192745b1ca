use std::collections::BTreeSet;

use serde::Serialize;

/// 1-based source position of the first token of a statement.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Span {
    pub line: u32,
    pub column: u32,
}

impl std::fmt::Display for Span {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Plan {
    pub statements: Vec<Stmt>,
}

/// A statement with its source span. Equality is structural and ignores
/// the span, so a re-parsed pretty print compares equal.
#[derive(Debug, Clone, Eq, Serialize)]
pub struct Stmt {
    #[serde(flatten)]
    pub kind: StmtKind,
    pub span: Span,
}

impl PartialEq for Stmt {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

impl Stmt {
    pub fn new(kind: StmtKind, span: Span) -> Self {
        Stmt { kind, span }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "stmt", rename_all = "snake_case")]
pub enum StmtKind {
    Let {
        name: String,
        value: Expr,
    },
    If {
        cond: Expr,
        then_branch: Vec<Stmt>,
        else_branch: Vec<Stmt>,
    },
    ForRange {
        var: String,
        bound: Expr,
        body: Vec<Stmt>,
    },
    ForEach {
        var: String,
        list: Expr,
        body: Vec<Stmt>,
    },
    Call {
        tool: String,
        args: Vec<Expr>,
        bind: Option<String>,
    },
    Match {
        scrutinee: Expr,
        ok_arm: Arm,
        err_arm: Arm,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Arm {
    pub binding: String,
    pub body: Vec<Stmt>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Expr {
    Literal(Literal),
    Var(String),
    Binary {
        op: BinOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    Not(Box<Expr>),
    Index {
        target: Box<Expr>,
        index: i64,
    },
    Field {
        target: Box<Expr>,
        name: String,
    },
    List(Vec<Expr>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Literal {
    Int(i64),
    Bool(bool),
    Text(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Eq,
    Ne,
    Lt,
    Le,
    And,
    Or,
    Concat,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::And => "and",
            BinOp::Or => "or",
            BinOp::Concat => "++",
        }
    }
}

impl Expr {
    pub fn int(v: i64) -> Expr {
        Expr::Literal(Literal::Int(v))
    }

    pub fn text(v: impl Into<String>) -> Expr {
        Expr::Literal(Literal::Text(v.into()))
    }

    pub fn var(name: impl Into<String>) -> Expr {
        Expr::Var(name.into())
    }

    pub fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary {
            op,
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
        }
    }

    /// Variables read by this expression, in evaluation order.
    pub fn free_vars<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Expr::Literal(_) => {}
            Expr::Var(name) => out.push(name),
            Expr::Binary { lhs, rhs, .. } => {
                lhs.free_vars(out);
                rhs.free_vars(out);
            }
            Expr::Not(e) => e.free_vars(out),
            Expr::Index { target, .. } | Expr::Field { target, .. } => target.free_vars(out),
            Expr::List(items) => items.iter().for_each(|i| i.free_vars(out)),
        }
    }
}

/// Names a block may assign, including loop variables and match bindings.
pub fn assigned_vars(block: &[Stmt]) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    collect_assigned(block, &mut out);
    out
}

fn collect_assigned(block: &[Stmt], out: &mut BTreeSet<String>) {
    for stmt in block {
        match &stmt.kind {
            StmtKind::Let { name, .. } => {
                out.insert(name.clone());
            }
            StmtKind::Call { bind, .. } => {
                if let Some(b) = bind {
                    out.insert(b.clone());
                }
            }
            StmtKind::If {
                then_branch,
                else_branch,
                ..
            } => {
                collect_assigned(then_branch, out);
                collect_assigned(else_branch, out);
            }
            StmtKind::ForRange { var, body, .. } | StmtKind::ForEach { var, body, .. } => {
                out.insert(var.clone());
                collect_assigned(body, out);
            }
            StmtKind::Match { ok_arm, err_arm, .. } => {
                for arm in [ok_arm, err_arm] {
                    out.insert(arm.binding.clone());
                    collect_assigned(&arm.body, out);
                }
            }
        }
    }
}

/// Every call statement in the block, depth-first in source order.
pub fn call_sites(block: &[Stmt]) -> Vec<&Stmt> {
    let mut out = Vec::new();
    collect_calls(block, &mut out);
    out
}

fn collect_calls<'a>(block: &'a [Stmt], out: &mut Vec<&'a Stmt>) {
    for stmt in block {
        match &stmt.kind {
            StmtKind::Let { .. } => {}
            StmtKind::Call { .. } => out.push(stmt),
            StmtKind::If {
                then_branch,
                else_branch,
                ..
            } => {
                collect_calls(then_branch, out);
                collect_calls(else_branch, out);
            }
            StmtKind::ForRange { body, .. } | StmtKind::ForEach { body, .. } => {
                collect_calls(body, out)
            }
            StmtKind::Match { ok_arm, err_arm, .. } => {
                collect_calls(&ok_arm.body, out);
                collect_calls(&err_arm.body, out);
            }
        }
    }
}
