//! Recursive-descent parser for the document subset accepted by extraction:
//! objects, arrays, strings, integers and booleans.

use std::fmt;

pub const MAX_DEPTH: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Doc {
    Object(Vec<(String, Doc)>),
    Array(Vec<Doc>),
    Str(String),
    Int(i64),
    Bool(bool),
}

impl Doc {
    pub fn kind(&self) -> &'static str {
        match self {
            Doc::Object(_) => "object",
            Doc::Array(_) => "array",
            Doc::Str(_) => "string",
            Doc::Int(_) => "integer",
            Doc::Bool(_) => "boolean",
        }
    }

    pub fn get(&self, key: &str) -> Option<&Doc> {
        match self {
            Doc::Object(entries) => entries.iter().find(|(k, _)| k == key).map(|(_, v)| v),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    /// Byte offset.
    pub at: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at byte {}", self.message, self.at)
    }
}

pub fn parse(text: &str) -> Result<Doc, ParseError> {
    let mut p = Parser { src: text.as_bytes(), pos: 0 };
    p.skip_ws();
    let doc = p.value(0)?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.err("trailing characters"));
    }
    Ok(doc)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn err(&self, message: impl Into<String>) -> ParseError {
        ParseError {
            at: self.pos,
            message: message.into(),
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(b' ' | b'\t' | b'\n' | b'\r')) {
            self.pos += 1;
        }
    }

    fn expect(&mut self, b: u8) -> Result<(), ParseError> {
        if self.peek() == Some(b) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(format!("expected `{}`", b as char)))
        }
    }

    fn keyword(&mut self, word: &str) -> bool {
        if self.src[self.pos..].starts_with(word.as_bytes()) {
            self.pos += word.len();
            true
        } else {
            false
        }
    }

    fn value(&mut self, depth: usize) -> Result<Doc, ParseError> {
        if depth >= MAX_DEPTH {
            return Err(self.err("nesting too deep"));
        }
        match self.peek() {
            None => Err(self.err("unexpected end of input")),
            Some(b'{') => self.object(depth),
            Some(b'[') => self.array(depth),
            Some(b'"') => self.string().map(Doc::Str),
            Some(b'-' | b'0'..=b'9') => self.integer(),
            Some(b't') if self.keyword("true") => Ok(Doc::Bool(true)),
            Some(b'f') if self.keyword("false") => Ok(Doc::Bool(false)),
            Some(b'n') if self.keyword("null") => Err(ParseError {
                at: self.pos - 4,
                message: "null is not supported".into(),
            }),
            Some(_) => Err(self.err("unexpected character")),
        }
    }

    fn object(&mut self, depth: usize) -> Result<Doc, ParseError> {
        self.expect(b'{')?;
        let mut entries: Vec<(String, Doc)> = Vec::new();
        self.skip_ws();
        if self.peek() == Some(b'}') {
            self.pos += 1;
            return Ok(Doc::Object(entries));
        }
        loop {
            self.skip_ws();
            let key_at = self.pos;
            if self.peek() != Some(b'"') {
                return Err(self.err("expected string key"));
            }
            let key = self.string()?;
            if entries.iter().any(|(k, _)| *k == key) {
                return Err(ParseError {
                    at: key_at,
                    message: format!("duplicate key `{key}`"),
                });
            }
            self.skip_ws();
            self.expect(b':')?;
            self.skip_ws();
            let v = self.value(depth + 1)?;
            entries.push((key, v));
            self.skip_ws();
            match self.peek() {
                Some(b',') => self.pos += 1,
                Some(b'}') => {
                    self.pos += 1;
                    return Ok(Doc::Object(entries));
                }
                _ => return Err(self.err("expected `,` or `}`")),
            }
        }
    }

    fn array(&mut self, depth: usize) -> Result<Doc, ParseError> {
        self.expect(b'[')?;
        let mut items = Vec::new();
        self.skip_ws();
        if self.peek() == Some(b']') {
            self.pos += 1;
            return Ok(Doc::Array(items));
        }
        loop {
            self.skip_ws();
            items.push(self.value(depth + 1)?);
            self.skip_ws();
            match self.peek() {
                Some(b',') => self.pos += 1,
                Some(b']') => {
                    self.pos += 1;
                    return Ok(Doc::Array(items));
                }
                _ => return Err(self.err("expected `,` or `]`")),
            }
        }
    }

    fn integer(&mut self) -> Result<Doc, ParseError> {
        let start = self.pos;
        if self.peek() == Some(b'-') {
            self.pos += 1;
        }
        let digits = self.pos;
        while matches!(self.peek(), Some(b'0'..=b'9')) {
            self.pos += 1;
        }
        if self.pos == digits {
            return Err(self.err("expected digits"));
        }
        if self.src[digits] == b'0' && self.pos - digits > 1 {
            return Err(ParseError {
                at: digits,
                message: "leading zero".into(),
            });
        }
        if matches!(self.peek(), Some(b'.' | b'e' | b'E')) {
            return Err(self.err("floating-point numbers are not supported"));
        }
        // Only ASCII digits and an optional sign were consumed.
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii digits");
        text.parse::<i64>().map(Doc::Int).map_err(|_| ParseError {
            at: start,
            message: "integer out of range".into(),
        })
    }

    fn string(&mut self) -> Result<String, ParseError> {
        self.expect(b'"')?;
        let mut out = String::new();
        loop {
            let run = self.pos;
            while let Some(b) = self.peek() {
                if b == b'"' || b == b'\\' || b < 0x20 {
                    break;
                }
                self.pos += 1;
            }
            // The input is a &str and the run stops on ASCII, so it is valid UTF-8.
            out.push_str(std::str::from_utf8(&self.src[run..self.pos]).expect("utf-8 run"));
            match self.peek() {
                None => return Err(self.err("unterminated string")),
                Some(b'"') => {
                    self.pos += 1;
                    return Ok(out);
                }
                Some(b'\\') => {
                    self.pos += 1;
                    out.push(self.escape()?);
                }
                Some(_) => return Err(self.err("control character in string")),
            }
        }
    }

    fn escape(&mut self) -> Result<char, ParseError> {
        let Some(b) = self.peek() else {
            return Err(self.err("unterminated escape"));
        };
        self.pos += 1;
        Ok(match b {
            b'"' => '"',
            b'\\' => '\\',
            b'/' => '/',
            b'b' => '\u{8}',
            b'f' => '\u{c}',
            b'n' => '\n',
            b'r' => '\r',
            b't' => '\t',
            b'u' => {
                let hi = self.hex4()?;
                if (0xD800..0xDC00).contains(&hi) {
                    if !self.keyword("\\u") {
                        return Err(self.err("unpaired surrogate"));
                    }
                    let lo = self.hex4()?;
                    if !(0xDC00..0xE000).contains(&lo) {
                        return Err(self.err("unpaired surrogate"));
                    }
                    let c = 0x10000 + ((hi - 0xD800) << 10) + (lo - 0xDC00);
                    char::from_u32(c).ok_or_else(|| self.err("bad code point"))?
                } else {
                    char::from_u32(hi).ok_or_else(|| self.err("unpaired surrogate"))?
                }
            }
            _ => return Err(self.err("unknown escape")),
        })
    }

    fn hex4(&mut self) -> Result<u32, ParseError> {
        let end = self.pos + 4;
        let digits = self.src.get(self.pos..end).ok_or_else(|| self.err("short \\u escape"))?;
        let mut v = 0u32;
        for &d in digits {
            let n = (d as char).to_digit(16).ok_or_else(|| self.err("bad hex digit"))?;
            v = v * 16 + n;
        }
        self.pos = end;
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_subset() {
        let d = parse(r#" {"a": [1, -2, true, false], "b": {"c": "x\"yé"}} "#).unwrap();
        assert_eq!(
            d,
            Doc::Object(vec![
                ("a".into(), Doc::Array(vec![Doc::Int(1), Doc::Int(-2), Doc::Bool(true), Doc::Bool(false)])),
                ("b".into(), Doc::Object(vec![("c".into(), Doc::Str("x\"yé".into()))])),
            ])
        );
    }

    #[test]
    fn rejects_outside_subset() {
        for bad in ["1.5", "1e3", "null", "{\"a\":null}", "01", "[1,]", "{\"a\":1,}", "\"x", "{} x", "", "-", "tru"] {
            assert!(parse(bad).is_err(), "{bad:?}");
        }
    }

    #[test]
    fn duplicate_keys_rejected() {
        let e = parse(r#"{"a":1,"a":2}"#).unwrap_err();
        assert!(e.message.contains("duplicate"));
        assert_eq!(e.at, 7);
    }

    #[test]
    fn surrogate_pairs() {
        assert_eq!(parse(r#""😀""#).unwrap(), Doc::Str("😀".into()));
        assert!(parse(r#""\ud83d""#).is_err());
        assert!(parse(r#""\ude00""#).is_err());
    }

    #[test]
    fn depth_limited() {
        let deep = "[".repeat(MAX_DEPTH + 1) + &"]".repeat(MAX_DEPTH + 1);
        assert!(parse(&deep).unwrap_err().message.contains("deep"));
        let ok = "[".repeat(MAX_DEPTH) + &"]".repeat(MAX_DEPTH);
        assert!(parse(&ok).is_ok());
    }

    #[test]
    fn integer_bounds() {
        assert_eq!(parse("-9223372036854775808").unwrap(), Doc::Int(i64::MIN));
        assert!(parse("9223372036854775808").is_err());
    }

    #[test]
    fn agrees_with_serde_on_valid_documents() {
        let src = r#"{"k": ["a\n", 3, {"z": false}], "e": "\\/"}"#;
        let ours = parse(src).unwrap();
        let theirs: serde_json::Value = serde_json::from_str(src).unwrap();
        fn conv(v: &serde_json::Value) -> Doc {
            match v {
                serde_json::Value::Object(m) => Doc::Object(m.iter().map(|(k, v)| (k.clone(), conv(v))).collect()),
                serde_json::Value::Array(a) => Doc::Array(a.iter().map(conv).collect()),
                serde_json::Value::String(s) => Doc::Str(s.clone()),
                serde_json::Value::Number(n) => Doc::Int(n.as_i64().unwrap()),
                serde_json::Value::Bool(b) => Doc::Bool(*b),
                serde_json::Value::Null => unreachable!(),
            }
        }
        let mut a = ours;
        let mut b = conv(&theirs);
        fn sort(d: &mut Doc) {
            match d {
                Doc::Object(e) => {
                    e.sort_by(|x, y| x.0.cmp(&y.0));
                    e.iter_mut().for_each(|(_, v)| sort(v));
                }
                Doc::Array(a) => a.iter_mut().for_each(sort),
                _ => {}
            }
        }
        sort(&mut a);
        sort(&mut b);
        assert_eq!(a, b);
    }
}
