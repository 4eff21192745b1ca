//! The plan language: brace-delimited, first-order, exception-free.
//!
//! Plans bind values with `let`, branch with `if`, loop with bounded `for`,
//! invoke registered tools with `call NAME(args)` and inspect results only
//! through `match`. There are no user functions, no computed call targets
//! and no raise/throw construct.

mod ast;
mod check;
mod lexer;
mod parser;
mod printer;

use serde::Serialize;
use thiserror::Error;

pub use ast::{assigned_vars, call_sites, Arm, BinOp, Expr, Literal, Plan, Span, Stmt, StmtKind};
pub use check::{static_check, CheckConfig, Violation, ViolationKind};
pub use parser::parse;
pub use printer::{print_expr, print_plan};

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
#[error("{line}:{column}: {message}")]
pub struct ParseError {
    pub line: u32,
    pub column: u32,
    pub message: String,
}
