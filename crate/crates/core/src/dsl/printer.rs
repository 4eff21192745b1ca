//! Canonical pretty printer. Binary expressions are fully parenthesized so the
//! output re-parses to the same tree.

use std::fmt::Write;

use super::ast::*;
use super::lexer::Tok;

pub fn print_plan(plan: &Plan) -> String {
    let mut out = String::new();
    for stmt in &plan.statements {
        print_stmt(stmt, 0, &mut out);
    }
    out
}

fn indent(level: usize, out: &mut String) {
    for _ in 0..level {
        out.push_str("    ");
    }
}

fn print_block(block: &[Stmt], level: usize, out: &mut String) {
    out.push_str("{\n");
    for s in block {
        print_stmt(s, level + 1, out);
    }
    indent(level, out);
    out.push('}');
}

fn print_stmt(stmt: &Stmt, level: usize, out: &mut String) {
    indent(level, out);
    match &stmt.kind {
        StmtKind::Let { name, value } => {
            let _ = write!(out, "let {name} = {}", print_expr(value));
        }
        StmtKind::Call { tool, args, bind } => {
            if let Some(b) = bind {
                let _ = write!(out, "let {b} = ");
            }
            let args: Vec<String> = args.iter().map(print_expr).collect();
            let _ = write!(out, "call {tool}({})", args.join(", "));
        }
        StmtKind::If {
            cond,
            then_branch,
            else_branch,
        } => {
            let _ = write!(out, "if {} ", print_expr(cond));
            print_block(then_branch, level, out);
            if !else_branch.is_empty() {
                out.push_str(" else ");
                print_block(else_branch, level, out);
            }
        }
        StmtKind::ForRange { var, bound, body } => {
            let _ = write!(out, "for {var} in range({}) ", print_expr(bound));
            print_block(body, level, out);
        }
        StmtKind::ForEach { var, list, body } => {
            let _ = write!(out, "for {var} in {} ", print_expr(list));
            print_block(body, level, out);
        }
        StmtKind::Match {
            scrutinee,
            ok_arm,
            err_arm,
        } => {
            let _ = writeln!(out, "match {} {{", print_expr(scrutinee));
            for (tag, arm) in [("ok", ok_arm), ("err", err_arm)] {
                indent(level + 1, out);
                let _ = write!(out, "{tag}({}) => ", arm.binding);
                print_block(&arm.body, level + 1, out);
                out.push('\n');
            }
            indent(level, out);
            out.push('}');
        }
    }
    out.push('\n');
}

pub fn print_expr(e: &Expr) -> String {
    match e {
        Expr::Literal(Literal::Int(v)) => v.to_string(),
        Expr::Literal(Literal::Bool(b)) => b.to_string(),
        Expr::Literal(Literal::Text(s)) => quote(s),
        Expr::Var(name) => name.clone(),
        Expr::Binary { op, lhs, rhs } => {
            format!("({} {} {})", print_expr(lhs), op.symbol(), print_expr(rhs))
        }
        Expr::Not(inner) => format!("(not {})", print_expr(inner)),
        Expr::Index { target, index } => format!("{}[{index}]", postfix_target(target)),
        Expr::Field { target, name } => format!("{}.{name}", postfix_target(target)),
        Expr::List(items) => {
            let items: Vec<String> = items.iter().map(print_expr).collect();
            format!("[{}]", items.join(", "))
        }
    }
}

fn postfix_target(e: &Expr) -> String {
    match e {
        Expr::Literal(Literal::Int(v)) if *v < 0 => format!("({v})"),
        _ => print_expr(e),
    }
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

pub(crate) fn token_text(t: &Tok) -> &'static str {
    match t {
        Tok::Let => "let",
        Tok::If => "if",
        Tok::Else => "else",
        Tok::For => "for",
        Tok::In => "in",
        Tok::Range => "range",
        Tok::Call => "call",
        Tok::Match => "match",
        Tok::True => "true",
        Tok::False => "false",
        Tok::And => "and",
        Tok::Or => "or",
        Tok::Not => "not",
        Tok::LBrace => "{",
        Tok::RBrace => "}",
        Tok::LParen => "(",
        Tok::RParen => ")",
        Tok::LBracket => "[",
        Tok::RBracket => "]",
        Tok::Comma => ",",
        Tok::Dot => ".",
        Tok::Semi => ";",
        Tok::Assign => "=",
        Tok::FatArrow => "=>",
        Tok::EqEq => "==",
        Tok::NotEq => "!=",
        Tok::Lt => "<",
        Tok::Le => "<=",
        Tok::Plus => "+",
        Tok::PlusPlus => "++",
        Tok::Minus => "-",
        Tok::Star => "*",
        Tok::Ident(_) | Tok::Int(_) | Tok::Str(_) | Tok::Eof => "?",
    }
}
