//! Labeled runtime values.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::label::{join_all, Label};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Data {
    Int(i64),
    Bool(bool),
    Text(String),
    List(Vec<CapValue>),
    Record(BTreeMap<String, CapValue>),
    Result(ResultValue),
}

/// Structured success/failure. The only way to inspect one in a plan is `match`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResultValue {
    Ok(Box<CapValue>),
    Error { code: String, message: String },
}

impl ResultValue {
    pub fn ok(v: CapValue) -> Self {
        ResultValue::Ok(Box::new(v))
    }

    pub fn error(code: impl Into<String>, message: impl Into<String>) -> Self {
        ResultValue::Error {
            code: code.into(),
            message: message.into(),
        }
    }

    pub fn is_ok(&self) -> bool {
        matches!(self, ResultValue::Ok(_))
    }

    pub fn error_code(&self) -> Option<&str> {
        match self {
            ResultValue::Ok(_) => None,
            ResultValue::Error { code, .. } => Some(code),
        }
    }
}

/// A value paired with its capability label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CapValue {
    pub data: Data,
    pub label: Label,
}

impl CapValue {
    pub fn new(data: Data, label: Label) -> Self {
        CapValue { data, label }
    }

    pub fn int(v: i64, label: Label) -> Self {
        CapValue::new(Data::Int(v), label)
    }

    pub fn bool(v: bool, label: Label) -> Self {
        CapValue::new(Data::Bool(v), label)
    }

    pub fn text(v: impl Into<String>, label: Label) -> Self {
        CapValue::new(Data::Text(v.into()), label)
    }

    /// The list's own label is raised to cover every element.
    pub fn list(items: Vec<CapValue>, label: Label) -> Self {
        let label = label.join(&join_all(items.iter().map(|i| &i.label)));
        CapValue::new(Data::List(items), label)
    }

    pub fn record(fields: BTreeMap<String, CapValue>, label: Label) -> Self {
        let label = label.join(&join_all(fields.values().map(|v| &v.label)));
        CapValue::new(Data::Record(fields), label)
    }

    pub fn result(r: ResultValue, label: Label) -> Self {
        let label = match &r {
            ResultValue::Ok(inner) => label.join(&inner.label),
            ResultValue::Error { .. } => label,
        };
        CapValue::new(Data::Result(r), label)
    }

    pub fn error(code: &str, message: impl Into<String>, label: Label) -> Self {
        CapValue::new(Data::Result(ResultValue::error(code, message)), label)
    }

    /// Copy with the label joined against `extra`.
    pub fn raised(mut self, extra: &Label) -> Self {
        self.label = self.label.join(extra);
        self
    }

    pub fn as_int(&self) -> Option<i64> {
        match self.data {
            Data::Int(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match &self.data {
            Data::Text(t) => Some(t),
            _ => None,
        }
    }

    pub fn type_name(&self) -> &'static str {
        self.data.type_name()
    }

    /// Every text leaf whose label is secret, depth-first.
    pub fn secret_texts(&self, out: &mut Vec<String>) {
        match &self.data {
            Data::Text(t) if self.label.is_secret() => out.push(t.clone()),
            Data::List(items) => items.iter().for_each(|i| i.secret_texts(out)),
            Data::Record(fields) => fields.values().for_each(|v| v.secret_texts(out)),
            Data::Result(ResultValue::Ok(inner)) => inner.secret_texts(out),
            _ => {}
        }
    }

    /// Builds a value from plain JSON. Nested values all take `label`.
    pub fn from_json(v: &serde_json::Value, label: &Label) -> Option<CapValue> {
        use serde_json::Value as J;
        let data = match v {
            J::Bool(b) => Data::Bool(*b),
            J::Number(n) => Data::Int(n.as_i64()?),
            J::String(s) => Data::Text(s.clone()),
            J::Array(items) => Data::List(
                items
                    .iter()
                    .map(|i| CapValue::from_json(i, label))
                    .collect::<Option<_>>()?,
            ),
            J::Object(map) => Data::Record(
                map.iter()
                    .map(|(k, v)| Some((k.clone(), CapValue::from_json(v, label)?)))
                    .collect::<Option<_>>()?,
            ),
            J::Null => return None,
        };
        Some(CapValue::new(data, label.clone()))
    }
}

impl Data {
    pub fn type_name(&self) -> &'static str {
        match self {
            Data::Int(_) => "int",
            Data::Bool(_) => "bool",
            Data::Text(_) => "text",
            Data::List(_) => "list",
            Data::Record(_) => "record",
            Data::Result(_) => "result",
        }
    }
}

impl fmt::Display for CapValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.data {
            Data::Int(v) => write!(f, "{v}"),
            Data::Bool(v) => write!(f, "{v}"),
            Data::Text(t) => write!(f, "{t}"),
            Data::List(items) => {
                write!(f, "[")?;
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{item}")?;
                }
                write!(f, "]")
            }
            Data::Record(fields) => {
                write!(f, "{{")?;
                for (i, (k, v)) in fields.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{k}: {v}")?;
                }
                write!(f, "}}")
            }
            Data::Result(ResultValue::Ok(v)) => write!(f, "ok({v})"),
            Data::Result(ResultValue::Error { code, message }) => {
                write!(f, "err({code}: {message})")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::label::{Provenance, Readers};

    #[test]
    fn list_label_covers_elements() {
        let secret = Label::new([Provenance::User], Readers::only(["alice"]).unwrap());
        let l = CapValue::list(
            vec![CapValue::int(1, Label::bottom()), CapValue::int(2, secret.clone())],
            Label::bottom(),
        );
        assert!(l.label.dominates(&secret));
    }

    #[test]
    fn error_result_has_no_payload() {
        let r = ResultValue::error("NotFound", "missing");
        assert!(!r.is_ok());
        assert_eq!(r.error_code(), Some("NotFound"));
        assert_eq!(ResultValue::ok(CapValue::int(1, Label::bottom())).error_code(), None);
    }

    #[test]
    fn secret_texts_walks_nested_values() {
        let secret = Label::new([], Readers::only(["alice"]).unwrap());
        let mut fields = BTreeMap::new();
        fields.insert("acct".into(), CapValue::text("12345678", secret));
        fields.insert("memo".into(), CapValue::text("hello", Label::bottom()));
        let rec = CapValue::record(fields, Label::bottom());
        let mut out = Vec::new();
        rec.secret_texts(&mut out);
        // the record itself is secret now, but only leaves are collected
        assert_eq!(out, vec!["12345678".to_string()]);
    }
}
