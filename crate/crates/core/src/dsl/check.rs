use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::ast::*;

#[derive(Debug, Clone)]
pub struct CheckConfig {
    /// Maximum loop nesting depth.
    pub max_loop_depth: usize,
    /// Names bound before the plan starts (initial environment).
    pub predeclared: BTreeSet<String>,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig {
            max_loop_depth: 3,
            predeclared: BTreeSet::new(),
        }
    }
}

impl CheckConfig {
    pub fn with_names<I, S>(names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        CheckConfig {
            predeclared: names.into_iter().map(Into::into).collect(),
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ViolationKind {
    UnboundVariable { name: String },
    UnknownTool { tool: String },
    ArityMismatch { tool: String, expected: usize, found: usize },
    NestingTooDeep { depth: usize, max: usize },
    NegativeBound { value: i64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    #[serde(flatten)]
    pub kind: ViolationKind,
    pub span: Span,
}

/// Static well-formedness check. Violations are data; an empty list means the
/// plan may be executed.
pub fn static_check(
    plan: &Plan,
    signatures: &BTreeMap<String, usize>,
    config: &CheckConfig,
) -> Vec<Violation> {
    let mut checker = Checker {
        signatures,
        config,
        out: Vec::new(),
    };
    checker.block(&plan.statements, config.predeclared.clone(), 0);
    checker.out
}

struct Checker<'a> {
    signatures: &'a BTreeMap<String, usize>,
    config: &'a CheckConfig,
    out: Vec<Violation>,
}

impl Checker<'_> {
    fn push(&mut self, kind: ViolationKind, span: Span) {
        self.out.push(Violation { kind, span });
    }

    fn expr(&mut self, e: &Expr, bound: &BTreeSet<String>, span: Span) {
        let mut vars = Vec::new();
        e.free_vars(&mut vars);
        for v in vars {
            if !bound.contains(v) {
                self.push(
                    ViolationKind::UnboundVariable {
                        name: v.to_string(),
                    },
                    span,
                );
            }
        }
    }

    /// Returns the names definitely bound after the block.
    fn block(
        &mut self,
        block: &[Stmt],
        mut bound: BTreeSet<String>,
        loop_depth: usize,
    ) -> BTreeSet<String> {
        for stmt in block {
            let span = stmt.span;
            match &stmt.kind {
                StmtKind::Let { name, value } => {
                    self.expr(value, &bound, span);
                    bound.insert(name.clone());
                }
                StmtKind::Call { tool, args, bind } => {
                    for a in args {
                        self.expr(a, &bound, span);
                    }
                    match self.signatures.get(tool) {
                        None => self.push(ViolationKind::UnknownTool { tool: tool.clone() }, span),
                        Some(&expected) if expected != args.len() => self.push(
                            ViolationKind::ArityMismatch {
                                tool: tool.clone(),
                                expected,
                                found: args.len(),
                            },
                            span,
                        ),
                        Some(_) => {}
                    }
                    if let Some(b) = bind {
                        bound.insert(b.clone());
                    }
                }
                StmtKind::If {
                    cond,
                    then_branch,
                    else_branch,
                } => {
                    self.expr(cond, &bound, span);
                    let a = self.block(then_branch, bound.clone(), loop_depth);
                    let b = self.block(else_branch, bound.clone(), loop_depth);
                    bound = a.intersection(&b).cloned().collect();
                }
                StmtKind::ForRange { var, bound: e, body } => {
                    self.expr(e, &bound, span);
                    if let Expr::Literal(Literal::Int(v)) = e {
                        if *v < 0 {
                            self.push(ViolationKind::NegativeBound { value: *v }, span);
                        }
                    }
                    self.loop_body(var, body, &bound, loop_depth, span);
                }
                StmtKind::ForEach { var, list, body } => {
                    self.expr(list, &bound, span);
                    self.loop_body(var, body, &bound, loop_depth, span);
                }
                StmtKind::Match {
                    scrutinee,
                    ok_arm,
                    err_arm,
                } => {
                    self.expr(scrutinee, &bound, span);
                    let mut with_ok = bound.clone();
                    with_ok.insert(ok_arm.binding.clone());
                    let mut with_err = bound.clone();
                    with_err.insert(err_arm.binding.clone());
                    let a = self.block(&ok_arm.body, with_ok, loop_depth);
                    let b = self.block(&err_arm.body, with_err, loop_depth);
                    bound = a.intersection(&b).cloned().collect();
                }
            }
        }
        bound
    }

    fn loop_body(
        &mut self,
        var: &str,
        body: &[Stmt],
        bound: &BTreeSet<String>,
        loop_depth: usize,
        span: Span,
    ) {
        let depth = loop_depth + 1;
        if depth > self.config.max_loop_depth {
            self.push(
                ViolationKind::NestingTooDeep {
                    depth,
                    max: self.config.max_loop_depth,
                },
                span,
            );
        }
        let mut inner = bound.clone();
        inner.insert(var.to_string());
        // the body may run zero times, so nothing it binds survives
        self.block(body, inner, depth);
    }
}
