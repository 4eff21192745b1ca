//! Recursive-descent parser for `.plan` sources.
//!
//! Grammar (braces delimit blocks, `;` is optional):
//!
//! ```text
//! stmt  := "let" IDENT "=" ( "call" call | expr )
//!        | "call" call
//!        | "if" expr block ( "else" ( block | if-stmt ) )?
//!        | "for" IDENT "in" ( "range" "(" expr ")" | expr ) block
//!        | "match" expr "{" arm arm "}"
//! call  := IDENT "(" ( expr ( "," expr )* )? ")"
//! arm   := ( "ok" | "err" ) "(" IDENT ")" "=>" block
//! expr  := or ;  or := and ("or" and)* ; and := not ("and" not)*
//! not   := "not" not | cmp ; cmp := add (("=="|"!="|"<"|"<=") add)?
//! add   := mul (("+"|"-"|"++") mul)* ; mul := unary ("*" unary)*
//! unary := "-" unary | postfix ; postfix := primary ("[" "-"? INT "]" | "." IDENT)*
//! primary := INT | STRING | "true" | "false" | IDENT | "(" expr ")" | "[" exprs "]"
//! ```

use super::ast::*;
use super::lexer::{lex, Tok, Token};
use super::ParseError;

const MAX_DEPTH: usize = 200;

pub fn parse(source: &str) -> Result<Plan, ParseError> {
    let tokens = lex(source)?;
    let mut p = Parser {
        tokens,
        pos: 0,
        depth: 0,
    };
    let mut statements = Vec::new();
    while !p.at(&Tok::Eof) {
        if p.eat(&Tok::Semi) {
            continue;
        }
        statements.push(p.stmt()?);
    }
    Ok(Plan { statements })
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    depth: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos.min(self.tokens.len() - 1)]
    }

    fn peek_at(&self, ahead: usize) -> &Tok {
        &self.tokens[(self.pos + ahead).min(self.tokens.len() - 1)].tok
    }

    fn at(&self, t: &Tok) -> bool {
        &self.peek().tok == t
    }

    fn advance(&mut self) -> Token {
        let t = self.peek().clone();
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.at(t) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn error_here(&self, message: impl Into<String>) -> ParseError {
        let span = self.peek().span;
        ParseError {
            line: span.line,
            column: span.column,
            message: message.into(),
        }
    }

    fn expect(&mut self, t: Tok, what: &str) -> Result<Span, ParseError> {
        if self.at(&t) {
            Ok(self.advance().span)
        } else {
            Err(self.error_here(format!("expected {what}, found {}", describe(&self.peek().tok))))
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, ParseError> {
        match &self.peek().tok {
            Tok::Ident(name) => {
                let name = name.clone();
                self.advance();
                Ok(name)
            }
            other => Err(self.error_here(format!("expected {what}, found {}", describe(other)))),
        }
    }

    fn enter(&mut self) -> Result<(), ParseError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(self.error_here("nesting too deep"));
        }
        Ok(())
    }

    fn leave(&mut self) {
        self.depth -= 1;
    }

    fn block(&mut self) -> Result<Vec<Stmt>, ParseError> {
        self.expect(Tok::LBrace, "`{`")?;
        self.enter()?;
        let mut out = Vec::new();
        loop {
            if self.eat(&Tok::Semi) {
                continue;
            }
            if self.at(&Tok::RBrace) {
                break;
            }
            if self.at(&Tok::Eof) {
                return Err(self.error_here("unbalanced block: missing `}`"));
            }
            out.push(self.stmt()?);
        }
        self.advance();
        self.leave();
        Ok(out)
    }

    fn stmt(&mut self) -> Result<Stmt, ParseError> {
        let span = self.peek().span;
        let kind = match self.peek().tok.clone() {
            Tok::Let => {
                self.advance();
                let name = self.ident("variable name")?;
                self.expect(Tok::Assign, "`=`")?;
                if self.eat(&Tok::Call) {
                    let (tool, args) = self.call_tail()?;
                    StmtKind::Call {
                        tool,
                        args,
                        bind: Some(name),
                    }
                } else {
                    StmtKind::Let {
                        name,
                        value: self.expr()?,
                    }
                }
            }
            Tok::Call => {
                self.advance();
                let (tool, args) = self.call_tail()?;
                StmtKind::Call {
                    tool,
                    args,
                    bind: None,
                }
            }
            Tok::If => return self.if_stmt(),
            Tok::For => {
                self.advance();
                let var = self.ident("loop variable")?;
                self.expect(Tok::In, "`in`")?;
                if self.eat(&Tok::Range) {
                    self.expect(Tok::LParen, "`(`")?;
                    let bound = self.expr()?;
                    self.expect(Tok::RParen, "`)`")?;
                    let body = self.block()?;
                    StmtKind::ForRange { var, bound, body }
                } else {
                    let list = self.expr()?;
                    let body = self.block()?;
                    StmtKind::ForEach { var, list, body }
                }
            }
            Tok::Match => {
                self.advance();
                let scrutinee = self.expr()?;
                self.expect(Tok::LBrace, "`{`")?;
                let mut ok_arm = None;
                let mut err_arm = None;
                for _ in 0..2 {
                    let which = self.ident("`ok` or `err` arm")?;
                    self.expect(Tok::LParen, "`(`")?;
                    let binding = self.ident("arm binding")?;
                    self.expect(Tok::RParen, "`)`")?;
                    self.expect(Tok::FatArrow, "`=>`")?;
                    let body = self.block()?;
                    let slot = match which.as_str() {
                        "ok" => &mut ok_arm,
                        "err" => &mut err_arm,
                        other => {
                            return Err(self.error_here(format!("unknown match arm `{other}`")))
                        }
                    };
                    if slot.is_some() {
                        return Err(self.error_here(format!("duplicate `{which}` arm")));
                    }
                    *slot = Some(Arm { binding, body });
                    self.eat(&Tok::Comma);
                }
                self.expect(Tok::RBrace, "`}` closing match")?;
                StmtKind::Match {
                    scrutinee,
                    ok_arm: ok_arm.expect("two distinct arms parsed"),
                    err_arm: err_arm.expect("two distinct arms parsed"),
                }
            }
            Tok::Ident(word) => {
                return Err(self.error_here(format!(
                    "unknown keyword `{word}`: statements start with let, call, if, for or match"
                )))
            }
            Tok::RBrace => return Err(self.error_here("unbalanced block: unexpected `}`")),
            other => {
                return Err(self.error_here(format!("expected statement, found {}", describe(&other))))
            }
        };
        Ok(Stmt::new(kind, span))
    }

    fn if_stmt(&mut self) -> Result<Stmt, ParseError> {
        let span = self.expect(Tok::If, "`if`")?;
        self.enter()?;
        let cond = self.expr()?;
        let then_branch = self.block()?;
        let else_branch = if self.eat(&Tok::Else) {
            if self.at(&Tok::If) {
                vec![self.if_stmt()?]
            } else {
                self.block()?
            }
        } else {
            Vec::new()
        };
        self.leave();
        Ok(Stmt::new(
            StmtKind::If {
                cond,
                then_branch,
                else_branch,
            },
            span,
        ))
    }

    fn call_tail(&mut self) -> Result<(String, Vec<Expr>), ParseError> {
        let tool = match &self.peek().tok {
            Tok::Ident(name) => name.clone(),
            Tok::LParen | Tok::LBracket => {
                return Err(self.error_here("computed call target: tool must be a plain name"))
            }
            other => {
                return Err(self.error_here(format!("expected tool name, found {}", describe(other))))
            }
        };
        self.advance();
        if matches!(self.peek().tok, Tok::Dot | Tok::LBracket) {
            return Err(self.error_here("computed call target: tool must be a plain name"));
        }
        self.expect(Tok::LParen, "`(` after tool name")?;
        let args = self.expr_list(Tok::RParen)?;
        Ok((tool, args))
    }

    fn expr_list(&mut self, close: Tok) -> Result<Vec<Expr>, ParseError> {
        let mut out = Vec::new();
        while !self.at(&close) {
            out.push(self.expr()?);
            if !self.eat(&Tok::Comma) {
                break;
            }
        }
        self.expect(close, "closing delimiter")?;
        Ok(out)
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        self.enter()?;
        let e = self.or_expr();
        self.leave();
        e
    }

    fn or_expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.and_expr()?;
        while self.eat(&Tok::Or) {
            let rhs = self.and_expr()?;
            lhs = Expr::binary(BinOp::Or, lhs, rhs);
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.not_expr()?;
        while self.eat(&Tok::And) {
            let rhs = self.not_expr()?;
            lhs = Expr::binary(BinOp::And, lhs, rhs);
        }
        Ok(lhs)
    }

    fn not_expr(&mut self) -> Result<Expr, ParseError> {
        if self.eat(&Tok::Not) {
            self.enter()?;
            let inner = self.not_expr()?;
            self.leave();
            return Ok(Expr::Not(Box::new(inner)));
        }
        self.cmp_expr()
    }

    fn cmp_expr(&mut self) -> Result<Expr, ParseError> {
        let lhs = self.add_expr()?;
        let op = match self.peek().tok {
            Tok::EqEq => BinOp::Eq,
            Tok::NotEq => BinOp::Ne,
            Tok::Lt => BinOp::Lt,
            Tok::Le => BinOp::Le,
            _ => return Ok(lhs),
        };
        self.advance();
        let rhs = self.add_expr()?;
        Ok(Expr::binary(op, lhs, rhs))
    }

    fn add_expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.mul_expr()?;
        loop {
            let op = match self.peek().tok {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                Tok::PlusPlus => BinOp::Concat,
                _ => return Ok(lhs),
            };
            self.advance();
            let rhs = self.mul_expr()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn mul_expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        while self.eat(&Tok::Star) {
            let rhs = self.unary()?;
            lhs = Expr::binary(BinOp::Mul, lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.at(&Tok::Minus) {
            self.advance();
            // `-INT` not followed by a postfix operator is a negative literal
            if let Tok::Int(v) = *self.peek_at(0) {
                if !matches!(self.peek_at(1), Tok::LBracket | Tok::Dot) {
                    self.advance();
                    return negate(v).map(Expr::int).ok_or_else(|| self.error_here("integer literal out of range"));
                }
            }
            self.enter()?;
            let inner = self.unary()?;
            self.leave();
            return Ok(Expr::binary(BinOp::Sub, Expr::int(0), inner));
        }
        self.postfix()
    }

    fn postfix(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.primary()?;
        loop {
            if self.eat(&Tok::LBracket) {
                let neg = self.eat(&Tok::Minus);
                let index = match self.peek().tok {
                    Tok::Int(v) => {
                        self.advance();
                        if neg {
                            negate(v)
                        } else {
                            i64::try_from(v).ok()
                        }
                        .ok_or_else(|| self.error_here("index out of range"))?
                    }
                    _ => return Err(self.error_here("list index must be an integer literal")),
                };
                self.expect(Tok::RBracket, "`]`")?;
                e = Expr::Index {
                    target: Box::new(e),
                    index,
                };
            } else if self.eat(&Tok::Dot) {
                let name = self.ident("field name")?;
                e = Expr::Field {
                    target: Box::new(e),
                    name,
                };
            } else {
                return Ok(e);
            }
        }
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let tok = self.peek().tok.clone();
        let e = match tok {
            Tok::Int(v) => Expr::int(
                i64::try_from(v).map_err(|_| self.error_here("integer literal out of range"))?,
            ),
            Tok::Str(s) => Expr::text(s),
            Tok::True => Expr::Literal(Literal::Bool(true)),
            Tok::False => Expr::Literal(Literal::Bool(false)),
            Tok::Ident(name) => {
                if self.peek_at(1) == &Tok::LParen {
                    return Err(self.error_here(format!(
                        "`{name}(...)` is not an expression: tool calls must use `call`"
                    )));
                }
                Expr::Var(name)
            }
            Tok::LParen => {
                self.advance();
                let inner = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                return Ok(inner);
            }
            Tok::LBracket => {
                self.advance();
                self.enter()?;
                let items = self.expr_list(Tok::RBracket)?;
                self.leave();
                return Ok(Expr::List(items));
            }
            Tok::Call => return Err(self.error_here("`call` is only allowed as a statement")),
            other => {
                return Err(self.error_here(format!("expected expression, found {}", describe(&other))))
            }
        };
        self.advance();
        Ok(e)
    }
}

fn negate(v: u64) -> Option<i64> {
    if v == i64::MIN.unsigned_abs() {
        Some(i64::MIN)
    } else {
        i64::try_from(v).ok().map(|v| -v)
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(n) => format!("identifier `{n}`"),
        Tok::Int(v) => format!("integer `{v}`"),
        Tok::Str(_) => "string literal".into(),
        Tok::Eof => "end of input".into(),
        other => format!("`{}`", super::printer::token_text(other)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(src: &str) -> StmtKind {
        let plan = parse(src).unwrap();
        assert_eq!(plan.statements.len(), 1);
        plan.statements.into_iter().next().unwrap().kind
    }

    #[test]
    fn empty_source_is_empty_plan() {
        assert_eq!(parse("").unwrap(), Plan::default());
        assert_eq!(parse("  # only a comment\n").unwrap(), Plan::default());
    }

    #[test]
    fn loop_over_secret_range() {
        let k = single("for i in range(secret) { call fetch(\"ping\") }");
        let StmtKind::ForRange { var, bound, body } = k else {
            panic!("expected ForRange")
        };
        assert_eq!(var, "i");
        assert_eq!(bound, Expr::var("secret"));
        assert_eq!(
            body[0].kind,
            StmtKind::Call {
                tool: "fetch".into(),
                args: vec![Expr::text("ping")],
                bind: None
            }
        );
    }

    #[test]
    fn precedence_with_parens() {
        let k = single("let x = (1 + 2) * 3");
        assert_eq!(
            k,
            StmtKind::Let {
                name: "x".into(),
                value: Expr::binary(
                    BinOp::Mul,
                    Expr::binary(BinOp::Add, Expr::int(1), Expr::int(2)),
                    Expr::int(3)
                )
            }
        );
        let k = single("let y = 1 + 2 * 3 == 7 and not a or b");
        let StmtKind::Let { value, .. } = k else { panic!() };
        let Expr::Binary { op: BinOp::Or, lhs, .. } = value else {
            panic!("or binds loosest")
        };
        assert!(matches!(*lhs, Expr::Binary { op: BinOp::And, .. }));
    }

    #[test]
    fn match_arms_in_either_order() {
        let a = single("match r { ok(v) => { let x = v } err(e) => { } }");
        let b = single("match r { err(e) => { } ok(v) => { let x = v } }");
        assert_eq!(a, b);
    }

    #[test]
    fn negative_literals_and_index() {
        let k = single("let x = xs[-1] - -3");
        assert_eq!(
            k,
            StmtKind::Let {
                name: "x".into(),
                value: Expr::binary(
                    BinOp::Sub,
                    Expr::Index {
                        target: Box::new(Expr::var("xs")),
                        index: -1
                    },
                    Expr::int(-3)
                )
            }
        );
        assert_eq!(
            single("let m = -9223372036854775808"),
            StmtKind::Let {
                name: "m".into(),
                value: Expr::int(i64::MIN)
            }
        );
    }

    #[test]
    fn else_if_chains() {
        let k = single("if a { } else if b { let x = 1 } else { let x = 2 }");
        let StmtKind::If { else_branch, .. } = k else { panic!() };
        assert!(matches!(else_branch[0].kind, StmtKind::If { .. }));
    }

    #[test]
    fn errors_carry_positions() {
        let e = parse("let x = 1\nwhile x { }").unwrap_err();
        assert_eq!((e.line, e.column), (2, 1));
        assert!(e.message.contains("unknown keyword"));

        let e = parse("if x { let y = 1").unwrap_err();
        assert!(e.message.contains("unbalanced"));

        let e = parse("}").unwrap_err();
        assert!(e.message.contains("unbalanced"));

        let e = parse("call tools.send(1)").unwrap_err();
        assert!(e.message.contains("computed call target"));
        let e = parse("call (f)(1)").unwrap_err();
        assert!(e.message.contains("computed call target"));
        let e = parse("call xs[0](1)").unwrap_err();
        assert!(e.message.contains("computed call target"));

        assert!(parse("frobnicate x").unwrap_err().message.contains("unknown keyword"));
        assert!(parse("let x = f(1)").is_err());
        assert!(parse("let x = 1 + call f()").is_err());
    }

    #[test]
    fn deep_nesting_is_an_error_not_a_crash() {
        let src = format!("let x = {}1{}", "(".repeat(5000), ")".repeat(5000));
        assert!(parse(&src).unwrap_err().message.contains("nesting too deep"));
        let src = format!("let x = {}1", "-".repeat(5000));
        assert!(parse(&src).is_err());
    }

    #[test]
    fn spans_point_at_statement_starts() {
        let plan = parse("let a = 1\n  call f(a)").unwrap();
        assert_eq!(plan.statements[1].span, Span { line: 2, column: 3 });
    }
}
