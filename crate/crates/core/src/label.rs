//! Capability labels: provenance, confidentiality (readers) and integrity.
//!
//! Labels form a join-semilattice. `join` unions provenance, intersects the
//! reader sets (with [`Readers::Public`] as the universal set) and taints
//! integrity. A disjoint reader intersection collapses to
//! [`Readers::Unreadable`] so label arithmetic stays total; sinks deny it.

use std::collections::BTreeSet;
use std::fmt;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LabelError {
    #[error("reader set must not be empty")]
    EmptyReaders,
    #[error("provenance identifier must not be empty")]
    EmptyIdentifier,
    #[error("label claims trusted integrity but has untrusted sources")]
    InconsistentIntegrity,
    #[error("unknown provenance `{0}`")]
    BadProvenance(String),
}

/// Where a value came from.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Provenance {
    User,
    System,
    Tool(String),
    UserUpload(String),
    External(String),
}

/// Discriminant of [`Provenance`], used by policy predicates and grant exceptions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    User,
    System,
    Tool,
    UserUpload,
    External,
}

impl Provenance {
    pub fn tool(name: impl Into<String>) -> Self {
        Provenance::Tool(name.into())
    }

    pub fn upload(id: impl Into<String>) -> Self {
        Provenance::UserUpload(id.into())
    }

    pub fn external(id: impl Into<String>) -> Self {
        Provenance::External(id.into())
    }

    pub fn kind(&self) -> SourceKind {
        match self {
            Provenance::User => SourceKind::User,
            Provenance::System => SourceKind::System,
            Provenance::Tool(_) => SourceKind::Tool,
            Provenance::UserUpload(_) => SourceKind::UserUpload,
            Provenance::External(_) => SourceKind::External,
        }
    }

    pub fn id(&self) -> Option<&str> {
        match self {
            Provenance::User | Provenance::System => None,
            Provenance::Tool(id) | Provenance::UserUpload(id) | Provenance::External(id) => {
                Some(id)
            }
        }
    }

    /// Sources whose mere presence makes a label untrusted.
    pub fn is_untrusted_source(&self) -> bool {
        matches!(self, Provenance::UserUpload(_) | Provenance::External(_))
    }

    fn validate(&self) -> Result<(), LabelError> {
        match self.id() {
            Some("") => Err(LabelError::EmptyIdentifier),
            _ => Ok(()),
        }
    }

    /// Parses the compact CLI form: `user`, `system`, `tool:NAME`,
    /// `upload:ID`, `external:ID`.
    pub fn parse_compact(s: &str) -> Result<Self, LabelError> {
        let p = match s.split_once(':') {
            None if s == "user" => Provenance::User,
            None if s == "system" => Provenance::System,
            Some(("tool", id)) => Provenance::Tool(id.to_string()),
            Some(("upload", id)) | Some(("user_upload", id)) => {
                Provenance::UserUpload(id.to_string())
            }
            Some(("external", id)) => Provenance::External(id.to_string()),
            _ => return Err(LabelError::BadProvenance(s.to_string())),
        };
        p.validate()?;
        Ok(p)
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::User => write!(f, "user"),
            Provenance::System => write!(f, "system"),
            Provenance::Tool(id) => write!(f, "tool:{id}"),
            Provenance::UserUpload(id) => write!(f, "upload:{id}"),
            Provenance::External(id) => write!(f, "external:{id}"),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct ProvenanceRepr {
    kind: SourceKind,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    id: Option<String>,
}

impl Serialize for Provenance {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        ProvenanceRepr {
            kind: self.kind(),
            id: self.id().map(str::to_string),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Provenance {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let repr = ProvenanceRepr::deserialize(d)?;
        let need_id = |id: Option<String>| id.ok_or_else(|| D::Error::missing_field("id"));
        let p = match repr.kind {
            SourceKind::User => Provenance::User,
            SourceKind::System => Provenance::System,
            SourceKind::Tool => Provenance::Tool(need_id(repr.id)?),
            SourceKind::UserUpload => Provenance::UserUpload(need_id(repr.id)?),
            SourceKind::External => Provenance::External(need_id(repr.id)?),
        };
        p.validate().map_err(D::Error::custom)?;
        Ok(p)
    }
}

/// Confidentiality component: who may read a value.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Readers {
    /// Universal reader set.
    Public,
    /// A finite, non-empty set of principals.
    Only(BTreeSet<String>),
    /// Result of intersecting disjoint finite sets. Nobody may read it.
    Unreadable,
}

impl Readers {
    pub fn only<I, S>(principals: I) -> Result<Self, LabelError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let set: BTreeSet<String> = principals.into_iter().map(Into::into).collect();
        if set.is_empty() {
            return Err(LabelError::EmptyReaders);
        }
        Ok(Readers::Only(set))
    }

    pub fn meet(&self, other: &Readers) -> Readers {
        match (self, other) {
            (Readers::Unreadable, _) | (_, Readers::Unreadable) => Readers::Unreadable,
            (Readers::Public, r) | (r, Readers::Public) => r.clone(),
            (Readers::Only(a), Readers::Only(b)) => {
                let common: BTreeSet<String> = a.intersection(b).cloned().collect();
                if common.is_empty() {
                    Readers::Unreadable
                } else {
                    Readers::Only(common)
                }
            }
        }
    }

    pub fn allows(&self, principal: &str) -> bool {
        match self {
            Readers::Public => true,
            Readers::Only(set) => set.contains(principal),
            Readers::Unreadable => false,
        }
    }
}

impl Serialize for Readers {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Readers::Public => s.serialize_str("public"),
            Readers::Unreadable => s.serialize_str("unreadable"),
            Readers::Only(set) => set.serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for Readers {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Word(String),
            Set(Vec<String>),
        }
        match Repr::deserialize(d)? {
            Repr::Word(w) if w == "public" => Ok(Readers::Public),
            Repr::Word(w) if w == "unreadable" => Ok(Readers::Unreadable),
            Repr::Word(w) => Err(D::Error::custom(format!("unknown reader keyword `{w}`"))),
            Repr::Set(v) => Readers::only(v).map_err(D::Error::custom),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrity {
    Trusted,
    Untrusted,
}

/// A capability label. Immutable once built.
///
/// Integrity is never `Trusted` while an upload or external source is
/// present; constructors enforce it.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Label {
    sources: BTreeSet<Provenance>,
    readers: Readers,
    integrity: Integrity,
}

impl Label {
    /// Label with integrity derived purely from the sources.
    pub fn new(sources: impl IntoIterator<Item = Provenance>, readers: Readers) -> Self {
        let sources: BTreeSet<Provenance> = sources.into_iter().collect();
        let integrity = derive_integrity(&sources);
        Label {
            sources,
            readers,
            integrity,
        }
    }

    /// Bottom element: no sources, public, trusted. Plan literals carry it.
    pub fn bottom() -> Self {
        Label::new([], Readers::Public)
    }

    pub fn public(sources: impl IntoIterator<Item = Provenance>) -> Self {
        Label::new(sources, Readers::Public)
    }

    /// Convenience for tests and scenario files: `readers` empty means public.
    pub fn restricted<I, S>(sources: impl IntoIterator<Item = Provenance>, readers: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let r = Readers::only(readers).unwrap_or(Readers::Public);
        Label::new(sources, r)
    }

    /// Same sources and readers, integrity forced to `Untrusted`.
    pub fn untrusted(mut self) -> Self {
        self.integrity = Integrity::Untrusted;
        self
    }

    pub fn with_source(mut self, source: Provenance) -> Self {
        if source.is_untrusted_source() {
            self.integrity = Integrity::Untrusted;
        }
        self.sources.insert(source);
        self
    }

    pub fn sources(&self) -> &BTreeSet<Provenance> {
        &self.sources
    }

    pub fn readers(&self) -> &Readers {
        &self.readers
    }

    pub fn integrity(&self) -> Integrity {
        self.integrity
    }

    pub fn join(&self, other: &Label) -> Label {
        Label {
            sources: self.sources.union(&other.sources).cloned().collect(),
            readers: self.readers.meet(&other.readers),
            integrity: self.integrity.max(other.integrity),
        }
    }

    pub fn is_secret(&self) -> bool {
        self.readers != Readers::Public
    }

    pub fn is_untrusted(&self) -> bool {
        self.integrity == Integrity::Untrusted
    }

    pub fn is_unreadable(&self) -> bool {
        self.readers == Readers::Unreadable
    }

    pub fn has_source_kind(&self, kind: SourceKind) -> bool {
        self.sources.iter().any(|s| s.kind() == kind)
    }

    /// `self ⊒ other`: at least as restrictive on every axis.
    pub fn dominates(&self, other: &Label) -> bool {
        &self.join(other) == self
    }
}

impl Default for Label {
    fn default() -> Self {
        Label::bottom()
    }
}

fn derive_integrity(sources: &BTreeSet<Provenance>) -> Integrity {
    if sources.iter().any(Provenance::is_untrusted_source) {
        Integrity::Untrusted
    } else {
        Integrity::Trusted
    }
}

pub fn join(a: &Label, b: &Label) -> Label {
    a.join(b)
}

pub fn join_all<'a>(labels: impl IntoIterator<Item = &'a Label>) -> Label {
    labels
        .into_iter()
        .fold(Label::bottom(), |acc, l| acc.join(l))
}

pub fn is_secret(l: &Label) -> bool {
    l.is_secret()
}

pub fn is_untrusted(l: &Label) -> bool {
    l.is_untrusted()
}

#[derive(Serialize, Deserialize)]
struct LabelRepr {
    sources: Vec<Provenance>,
    readers: Readers,
    #[serde(default)]
    integrity: Option<Integrity>,
}

impl Serialize for Label {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        LabelRepr {
            sources: self.sources.iter().cloned().collect(),
            readers: self.readers.clone(),
            integrity: Some(self.integrity),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let repr = LabelRepr::deserialize(d)?;
        let label = Label::new(repr.sources, repr.readers);
        match repr.integrity {
            Some(Integrity::Trusted) if label.is_untrusted() => {
                Err(D::Error::custom(LabelError::InconsistentIntegrity))
            }
            Some(Integrity::Untrusted) => Ok(label.untrusted()),
            _ => Ok(label),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn alice() -> Readers {
        Readers::only(["alice"]).unwrap()
    }

    #[test]
    fn join_idempotent_on_user_label() {
        let l = Label::public([Provenance::User]);
        assert_eq!(l.join(&l), l);
    }

    #[test]
    fn join_mixed_tool_and_upload() {
        let a = Label::new(
            [Provenance::tool("email")],
            Readers::only(["alice", "bob"]).unwrap(),
        );
        let b = Label::new([Provenance::upload("f1")], alice());
        assert!(!a.is_untrusted());
        assert!(b.is_untrusted());
        let j = a.join(&b);
        assert_eq!(
            j.sources().iter().cloned().collect::<Vec<_>>(),
            vec![Provenance::tool("email"), Provenance::upload("f1")]
        );
        assert_eq!(j.readers(), &alice());
        assert_eq!(j.integrity(), Integrity::Untrusted);
    }

    #[test]
    fn public_is_identity_for_readers() {
        let a = Label::new([], Readers::Public);
        let b = Label::new([], alice());
        assert_eq!(a.join(&b).readers(), &alice());
    }

    #[test]
    fn disjoint_readers_become_unreadable() {
        let a = Label::new([], alice());
        let b = Label::new([], Readers::only(["bob"]).unwrap());
        let j = a.join(&b);
        assert!(j.is_unreadable());
        assert!(j.is_secret());
    }

    #[test]
    fn secrecy_predicates() {
        assert!(!Label::new([], Readers::Public).is_secret());
        assert!(Label::new([], alice()).is_secret());
        let j = Label::bottom().join(&Label::new([], alice()));
        assert!(j.is_secret());
    }

    #[test]
    fn integrity_predicates() {
        assert!(!Label::public([Provenance::User]).is_untrusted());
        assert!(Label::public([Provenance::upload("f1")]).is_untrusted());
        assert!(Label::public([Provenance::tool("fetch"), Provenance::external("web")]).is_untrusted());
    }

    #[test]
    fn empty_reader_set_is_rejected() {
        assert_eq!(Readers::only(Vec::<String>::new()), Err(LabelError::EmptyReaders));
    }

    #[test]
    fn json_shape() {
        let l = Label::new([Provenance::upload("f1")], Readers::Public);
        let v = serde_json::to_value(&l).unwrap();
        assert_eq!(
            v,
            serde_json::json!({
                "sources": [{"kind": "user_upload", "id": "f1"}],
                "readers": "public",
                "integrity": "untrusted"
            })
        );
        let back: Label = serde_json::from_value(v).unwrap();
        assert_eq!(back, l);

        let restricted: Label = serde_json::from_str(
            r#"{"sources":[{"kind":"user"}],"readers":["alice"],"integrity":"trusted"}"#,
        )
        .unwrap();
        assert_eq!(restricted.readers(), &alice());
    }

    #[test]
    fn json_rejects_inconsistent_integrity_and_empty_readers() {
        assert!(serde_json::from_str::<Label>(
            r#"{"sources":[{"kind":"external","id":"web"}],"readers":"public","integrity":"trusted"}"#
        )
        .is_err());
        assert!(serde_json::from_str::<Label>(r#"{"sources":[],"readers":[]}"#).is_err());
        assert!(serde_json::from_str::<Label>(
            r#"{"sources":[{"kind":"tool","id":""}],"readers":"public"}"#
        )
        .is_err());
    }

    #[test]
    fn compact_provenance() {
        assert_eq!(Provenance::parse_compact("upload:f1").unwrap(), Provenance::upload("f1"));
        assert_eq!(Provenance::parse_compact("user").unwrap(), Provenance::User);
        assert!(Provenance::parse_compact("upload:").is_err());
        assert!(Provenance::parse_compact("nope").is_err());
    }

    fn arb_label() -> impl Strategy<Value = Label> {
        let prov = prop_oneof![
            Just(Provenance::User),
            Just(Provenance::System),
            "[ab]".prop_map(Provenance::Tool),
            "[ab]".prop_map(Provenance::UserUpload),
            "[ab]".prop_map(Provenance::External),
        ];
        let readers = prop_oneof![
            Just(Readers::Public),
            Just(Readers::Unreadable),
            proptest::collection::btree_set("[abc]", 1..3).prop_map(Readers::Only),
        ];
        (proptest::collection::vec(prov, 0..3), readers, any::<bool>()).prop_map(
            |(s, r, taint)| {
                let l = Label::new(s, r);
                if taint {
                    l.untrusted()
                } else {
                    l
                }
            },
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn lattice_laws(a in arb_label(), b in arb_label(), c in arb_label()) {
            prop_assert_eq!(a.join(&b), b.join(&a));
            prop_assert_eq!(a.join(&b.join(&c)), a.join(&b).join(&c));
            prop_assert_eq!(a.join(&a), a.clone());
            prop_assert!(a.join(&b).dominates(&a));
        }

        #[test]
        fn monotone_predicates(a in arb_label(), b in arb_label()) {
            let j = a.join(&b);
            prop_assert!(j.is_secret() >= a.is_secret());
            prop_assert!(j.is_untrusted() >= a.is_untrusted());
            if j.sources().iter().any(Provenance::is_untrusted_source) {
                prop_assert!(j.is_untrusted());
            }
        }
    }
}
