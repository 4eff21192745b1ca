//! Deterministic extraction of structured values from untrusted documents.
//!
//! Every extracted value is labeled with exactly its origin and is always
//! untrusted: validation constrains form, not intent.

pub mod json;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::label::{Label, Provenance, Readers};
use crate::value::CapValue;

use json::Doc;

pub const MAX_DOCUMENT_BYTES: usize = 1 << 20;

/// Field name used in errors that concern the whole document.
pub const DOCUMENT: &str = "$document";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldType {
    Text { max_length: usize },
    Integer { min: i64, max: i64 },
    /// Integer minor units between 0 and `max`.
    Money { currency: String, max: i64 },
    Email,
    Url,
}

impl FieldType {
    fn name(&self) -> &'static str {
        match self {
            FieldType::Text { .. } => "text",
            FieldType::Integer { .. } => "integer",
            FieldType::Money { .. } => "money",
            FieldType::Email => "email",
            FieldType::Url => "url",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldSpec {
    pub name: String,
    #[serde(flatten)]
    pub ty: FieldType,
    #[serde(default)]
    pub required: bool,
    /// Readers allowed to see this field. Absent means public.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidential: Option<Vec<String>>,
}

impl FieldSpec {
    pub fn new(name: &str, ty: FieldType, required: bool) -> Self {
        FieldSpec {
            name: name.to_string(),
            ty,
            required,
            confidential: None,
        }
    }

    pub fn confidential_to<S: Into<String>>(mut self, readers: impl IntoIterator<Item = S>) -> Self {
        self.confidential = Some(readers.into_iter().map(Into::into).collect());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Schema {
    fields: Vec<FieldSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid schema: {0}")]
pub struct InvalidSchema(pub String);

impl Schema {
    pub fn new(fields: Vec<FieldSpec>) -> Result<Self, InvalidSchema> {
        let mut seen = BTreeSet::new();
        for f in &fields {
            if f.name.is_empty() || f.name == DOCUMENT {
                return Err(InvalidSchema(format!("bad field name `{}`", f.name)));
            }
            if !seen.insert(f.name.as_str()) {
                return Err(InvalidSchema(format!("duplicate field `{}`", f.name)));
            }
            match &f.ty {
                FieldType::Text { max_length } if *max_length == 0 => {
                    return Err(InvalidSchema(format!("`{}`: max_length must be positive", f.name)))
                }
                FieldType::Integer { min, max } if min > max => {
                    return Err(InvalidSchema(format!("`{}`: empty range {min}..={max}", f.name)))
                }
                FieldType::Money { max, .. } if *max <= 0 => {
                    return Err(InvalidSchema(format!("`{}`: money max must be positive", f.name)))
                }
                FieldType::Money { currency, .. }
                    if currency.len() != 3 || !currency.bytes().all(|b| b.is_ascii_uppercase()) =>
                {
                    return Err(InvalidSchema(format!("`{}`: currency `{currency}` is not a 3-letter code", f.name)))
                }
                _ => {}
            }
            if let Some(r) = &f.confidential {
                if Readers::only(r.iter().cloned()).is_err() {
                    return Err(InvalidSchema(format!("`{}`: confidential reader list is empty or blank", f.name)));
                }
            }
        }
        Ok(Schema { fields })
    }

    pub fn empty() -> Self {
        Schema { fields: Vec::new() }
    }

    /// `{"fields": [{"name": .., "type": .., ...}]}`
    pub fn from_json(text: &str) -> Result<Self, InvalidSchema> {
        serde_json::from_str(text).map_err(|e| InvalidSchema(e.to_string()))
    }

    pub fn fields(&self) -> &[FieldSpec] {
        &self.fields
    }
}

impl<'de> Deserialize<'de> for Schema {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct File {
            fields: Vec<FieldSpec>,
        }
        let file = File::deserialize(d)?;
        Schema::new(file.fields).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum SchemaErrorKind {
    Missing,
    TypeMismatch { expected: String, found: String },
    OutOfRange { min: i64, max: i64, value: i64 },
    TooLong { max: usize, length: usize },
    CurrencyMismatch { expected: String, found: String },
    BadFormat { detail: String },
    Malformed { detail: String },
    TooLarge { bytes: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Error)]
pub struct SchemaError {
    pub field: String,
    #[serde(flatten)]
    pub kind: SchemaErrorKind,
}

impl fmt::Display for SchemaError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: ", self.field)?;
        match &self.kind {
            SchemaErrorKind::Missing => write!(f, "required field missing"),
            SchemaErrorKind::TypeMismatch { expected, found } => write!(f, "expected {expected}, found {found}"),
            SchemaErrorKind::OutOfRange { min, max, value } => write!(f, "{value} outside {min}..={max}"),
            SchemaErrorKind::TooLong { max, length } => write!(f, "{length} characters exceeds {max}"),
            SchemaErrorKind::CurrencyMismatch { expected, found } => write!(f, "currency {found}, expected {expected}"),
            SchemaErrorKind::BadFormat { detail } | SchemaErrorKind::Malformed { detail } => write!(f, "{detail}"),
            SchemaErrorKind::TooLarge { bytes } => write!(f, "document of {bytes} bytes exceeds {MAX_DOCUMENT_BYTES}"),
        }
    }
}

impl SchemaError {
    fn new(field: &str, kind: SchemaErrorKind) -> Self {
        SchemaError {
            field: field.to_string(),
            kind,
        }
    }

    fn mismatch(field: &str, expected: &str, found: &Doc) -> Self {
        SchemaError::new(
            field,
            SchemaErrorKind::TypeMismatch {
                expected: expected.to_string(),
                found: found.kind().to_string(),
            },
        )
    }

    fn format(field: &str, detail: impl Into<String>) -> Self {
        SchemaError::new(field, SchemaErrorKind::BadFormat { detail: detail.into() })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Extraction {
    /// A record with one entry per schema field present in the document.
    pub value: CapValue,
    pub origin: Provenance,
    pub warnings: Vec<String>,
}

/// Validates `raw` against `schema` and labels the result with `origin`.
pub fn extract(schema: &Schema, raw: &str, origin: &Provenance) -> Result<Extraction, SchemaError> {
    if raw.len() > MAX_DOCUMENT_BYTES {
        return Err(SchemaError::new(DOCUMENT, SchemaErrorKind::TooLarge { bytes: raw.len() }));
    }
    let doc = json::parse(raw).map_err(|e| SchemaError::new(DOCUMENT, SchemaErrorKind::Malformed { detail: e.to_string() }))?;
    let Doc::Object(entries) = &doc else {
        return Err(SchemaError::mismatch(DOCUMENT, "object", &doc));
    };

    let base = Label::public([origin.clone()]).untrusted();
    let mut record = BTreeMap::new();
    let mut record_label = base.clone();
    for spec in schema.fields() {
        let Some(found) = doc.get(&spec.name) else {
            if spec.required {
                return Err(SchemaError::new(&spec.name, SchemaErrorKind::Missing));
            }
            continue;
        };
        let label = match &spec.confidential {
            Some(readers) => Label::restricted([origin.clone()], readers.iter().cloned()).untrusted(),
            None => base.clone(),
        };
        let v = validate(spec, found, label)?;
        // Field access raises by the record label, so the record must be at
        // least as confidential as its most confidential field.
        record_label = record_label.join(&v.label);
        record.insert(spec.name.clone(), v);
    }
    let warnings = entries
        .iter()
        .filter(|(k, _)| !schema.fields().iter().any(|f| f.name == *k))
        .map(|(k, _)| format!("unknown field `{k}` ignored"))
        .collect();
    Ok(Extraction {
        value: CapValue::record(record, record_label),
        origin: origin.clone(),
        warnings,
    })
}

/// Element-wise [`extract`]. One failure does not affect the other items;
/// the whole batch counts as a single quarantine invocation.
pub fn extract_batch(schema: &Schema, items: &[(String, Provenance)]) -> Vec<Result<Extraction, SchemaError>> {
    items.iter().map(|(raw, origin)| extract(schema, raw, origin)).collect()
}

fn validate(spec: &FieldSpec, found: &Doc, label: Label) -> Result<CapValue, SchemaError> {
    let name = spec.name.as_str();
    match (&spec.ty, found) {
        (FieldType::Text { max_length }, Doc::Str(s)) => {
            let length = s.chars().count();
            if length > *max_length {
                return Err(SchemaError::new(name, SchemaErrorKind::TooLong { max: *max_length, length }));
            }
            Ok(CapValue::text(s.clone(), label))
        }
        (FieldType::Integer { min, max }, Doc::Int(n)) => {
            in_range(name, *n, *min, *max)?;
            Ok(CapValue::int(*n, label))
        }
        (FieldType::Money { max, .. }, Doc::Int(n)) => {
            in_range(name, *n, 0, *max)?;
            Ok(CapValue::int(*n, label))
        }
        (FieldType::Money { currency, max }, Doc::Object(_)) => {
            let amount = match found.get("amount") {
                Some(Doc::Int(n)) => *n,
                Some(other) => return Err(SchemaError::mismatch(name, "integer amount", other)),
                None => return Err(SchemaError::format(name, "money object needs `amount`")),
            };
            match found.get("currency") {
                Some(Doc::Str(c)) if c == currency => {}
                Some(Doc::Str(c)) => {
                    return Err(SchemaError::new(
                        name,
                        SchemaErrorKind::CurrencyMismatch {
                            expected: currency.clone(),
                            found: c.clone(),
                        },
                    ))
                }
                Some(other) => return Err(SchemaError::mismatch(name, "currency code", other)),
                None => return Err(SchemaError::format(name, "money object needs `currency`")),
            }
            in_range(name, amount, 0, *max)?;
            Ok(CapValue::int(amount, label))
        }
        (FieldType::Email, Doc::Str(s)) => {
            check_email(s).map_err(|d| SchemaError::format(name, d))?;
            Ok(CapValue::text(s.clone(), label))
        }
        (FieldType::Url, Doc::Str(s)) => {
            check_url(s).map_err(|d| SchemaError::format(name, d))?;
            Ok(CapValue::text(s.clone(), label))
        }
        (ty, other) => Err(SchemaError::mismatch(name, ty.name(), other)),
    }
}

fn in_range(field: &str, value: i64, min: i64, max: i64) -> Result<(), SchemaError> {
    if (min..=max).contains(&value) {
        Ok(())
    } else {
        Err(SchemaError::new(field, SchemaErrorKind::OutOfRange { min, max, value }))
    }
}

fn is_host(host: &str) -> bool {
    let labels: Vec<&str> = host.split('.').collect();
    labels.len() >= 2
        && labels.iter().all(|l| {
            !l.is_empty()
                && l.len() <= 63
                && l.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-')
                && !l.starts_with('-')
                && !l.ends_with('-')
        })
}

/// `local@domain` with exactly one `@`.
pub fn check_email(s: &str) -> Result<(), String> {
    let mut parts = s.split('@');
    let (Some(local), Some(domain), None) = (parts.next(), parts.next(), parts.next()) else {
        return Err("email needs exactly one `@`".into());
    };
    if local.is_empty() || !local.bytes().all(|b| b.is_ascii_graphic() && !b"()<>[]\\,;:\"".contains(&b)) {
        return Err(format!("bad local part `{local}`"));
    }
    if !is_host(domain) {
        return Err(format!("bad domain `{domain}`"));
    }
    Ok(())
}

/// `http` or `https` URL with a host.
pub fn check_url(s: &str) -> Result<(), String> {
    if s.bytes().any(|b| b.is_ascii_whitespace() || b.is_ascii_control()) {
        return Err("url contains whitespace".into());
    }
    let lower = s.to_ascii_lowercase();
    let rest = lower.strip_prefix("https://").or_else(|| lower.strip_prefix("http://"));
    if rest.is_some_and(|r| r.starts_with('/')) {
        return Err("url has no host".into());
    }
    let parsed = url::Url::parse(s).map_err(|e| format!("bad url: {e}"))?;
    if !matches!(parsed.scheme(), "http" | "https") {
        return Err(format!("scheme `{}` not allowed", parsed.scheme()));
    }
    match parsed.host_str() {
        Some(h) if !h.is_empty() => Ok(()),
        _ => Err("url has no host".into()),
    }
}
