use super::ast::Span;
use super::ParseError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Int(u64),
    Str(String),
    // keywords
    Let,
    If,
    Else,
    For,
    In,
    Range,
    Call,
    Match,
    True,
    False,
    And,
    Or,
    Not,
    // punctuation
    LBrace,
    RBrace,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Dot,
    Semi,
    Assign,
    FatArrow,
    EqEq,
    NotEq,
    Lt,
    Le,
    Plus,
    PlusPlus,
    Minus,
    Star,
    Eof,
}

/// Words that exist in general-purpose languages but have no meaning here.
/// Hitting one is reported as an unknown keyword rather than a plain identifier.
const UNSUPPORTED: &[&str] = &[
    "while", "loop", "def", "fn", "func", "function", "lambda", "return", "try", "catch",
    "except", "finally", "raise", "throw", "import", "from", "eval", "exec", "class", "yield",
    "async", "await", "break", "continue", "global", "del", "with", "getattr", "setattr",
];

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

pub fn lex(source: &str) -> Result<Vec<Token>, ParseError> {
    let mut lexer = Lexer {
        chars: source.chars().collect(),
        pos: 0,
        line: 1,
        col: 1,
        after_dot: false,
    };
    let mut out = Vec::new();
    loop {
        let t = lexer.next_token()?;
        lexer.after_dot = t.tok == Tok::Dot;
        let done = t.tok == Tok::Eof;
        out.push(t);
        if done {
            return Ok(out);
        }
    }
}

struct Lexer {
    chars: Vec<char>,
    pos: usize,
    line: u32,
    col: u32,
    /// The previous token was `.`, so the next word is a field name.
    after_dot: bool,
}

impl Lexer {
    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.get(self.pos).copied()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn span(&self) -> Span {
        Span {
            line: self.line,
            column: self.col,
        }
    }

    fn err(&self, span: Span, message: impl Into<String>) -> ParseError {
        ParseError {
            line: span.line,
            column: span.column,
            message: message.into(),
        }
    }

    fn skip_trivia(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.bump();
            } else if c == '#' {
                while let Some(c) = self.peek() {
                    if c == '\n' {
                        break;
                    }
                    self.bump();
                }
            } else {
                break;
            }
        }
    }

    fn next_token(&mut self) -> Result<Token, ParseError> {
        self.skip_trivia();
        let span = self.span();
        let Some(c) = self.bump() else {
            return Ok(Token {
                tok: Tok::Eof,
                span,
            });
        };
        let tok = match c {
            '{' => Tok::LBrace,
            '}' => Tok::RBrace,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '[' => Tok::LBracket,
            ']' => Tok::RBracket,
            ',' => Tok::Comma,
            '.' => Tok::Dot,
            ';' => Tok::Semi,
            '*' => Tok::Star,
            '-' => Tok::Minus,
            '+' => {
                if self.peek() == Some('+') {
                    self.bump();
                    Tok::PlusPlus
                } else {
                    Tok::Plus
                }
            }
            '=' => match self.peek() {
                Some('=') => {
                    self.bump();
                    Tok::EqEq
                }
                Some('>') => {
                    self.bump();
                    Tok::FatArrow
                }
                _ => Tok::Assign,
            },
            '!' if self.peek() == Some('=') => {
                self.bump();
                Tok::NotEq
            }
            '<' => {
                if self.peek() == Some('=') {
                    self.bump();
                    Tok::Le
                } else {
                    Tok::Lt
                }
            }
            '"' => Tok::Str(self.string(span)?),
            c if c.is_ascii_digit() => {
                let mut digits = String::from(c);
                while let Some(d) = self.peek().filter(char::is_ascii_digit) {
                    digits.push(d);
                    self.bump();
                }
                if self.peek().is_some_and(|c| c.is_alphabetic() || c == '_') {
                    return Err(self.err(span, "malformed number"));
                }
                // u64 so that i64::MIN survives negation in the parser
                let v = digits
                    .parse::<u64>()
                    .map_err(|_| self.err(span, "integer literal out of range"))?;
                Tok::Int(v)
            }
            c if c.is_alphabetic() || c == '_' => {
                let mut word = String::from(c);
                while let Some(d) = self.peek().filter(|c| c.is_alphanumeric() || *c == '_') {
                    word.push(d);
                    self.bump();
                }
                match keyword(&word) {
                    Some(k) => k,
                    None if !self.after_dot && UNSUPPORTED.contains(&word.as_str()) => {
                        return Err(self.err(span, format!("unknown keyword `{word}`")))
                    }
                    None => Tok::Ident(word),
                }
            }
            other => return Err(self.err(span, format!("unexpected character `{other}`"))),
        };
        Ok(Token { tok, span })
    }

    fn string(&mut self, start: Span) -> Result<String, ParseError> {
        let mut s = String::new();
        loop {
            match self.bump() {
                None => return Err(self.err(start, "unterminated string literal")),
                Some('"') => return Ok(s),
                Some('\\') => {
                    let esc = match self.bump() {
                        Some('n') => '\n',
                        Some('t') => '\t',
                        Some('r') => '\r',
                        Some('"') => '"',
                        Some('\\') => '\\',
                        Some(other) => {
                            return Err(self.err(self.span(), format!("unknown escape `\\{other}`")))
                        }
                        None => return Err(self.err(start, "unterminated string literal")),
                    };
                    s.push(esc);
                }
                Some(c) => s.push(c),
            }
        }
    }
}

fn keyword(word: &str) -> Option<Tok> {
    Some(match word {
        "let" => Tok::Let,
        "if" => Tok::If,
        "else" => Tok::Else,
        "for" => Tok::For,
        "in" => Tok::In,
        "range" => Tok::Range,
        "call" => Tok::Call,
        "match" => Tok::Match,
        "true" => Tok::True,
        "false" => Tok::False,
        "and" => Tok::And,
        "or" => Tok::Or,
        "not" => Tok::Not,
        _ => return None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<Tok> {
        lex(src).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn operators_and_keywords() {
        assert_eq!(
            kinds("let x = a ++ \"b\" <= 3"),
            vec![
                Tok::Let,
                Tok::Ident("x".into()),
                Tok::Assign,
                Tok::Ident("a".into()),
                Tok::PlusPlus,
                Tok::Str("b".into()),
                Tok::Le,
                Tok::Int(3),
                Tok::Eof
            ]
        );
    }

    #[test]
    fn comments_and_positions() {
        let toks = lex("# header\n  call f()").unwrap();
        assert_eq!(toks[0].tok, Tok::Call);
        assert_eq!(toks[0].span, Span { line: 2, column: 3 });
    }

    #[test]
    fn rejects_unsupported_words() {
        let e = lex("raise x").unwrap_err();
        assert!(e.message.contains("unknown keyword"));
        assert!(lex("\"open").is_err());
        assert!(lex("99999999999999999999").is_err());
    }

    #[test]
    fn unsupported_words_allowed_as_field_names() {
        let toks = lex("m.from").unwrap();
        assert_eq!(toks[2].tok, Tok::Ident("from".into()));
        assert!(lex("from").is_err());
        assert!(lex("m. while").is_ok());
    }
}
