use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::label::{Label, Provenance, Readers};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub content: String,
    #[serde(default = "default_owner")]
    pub owner: String,
    #[serde(default)]
    pub shared: bool,
    /// Principals allowed to read the content; absent means public.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub readers: Option<Vec<String>>,
    /// Provenance beyond the reading tool itself, e.g. an upload.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<Provenance>,
}

fn default_owner() -> String {
    "user".to_string()
}

impl FileEntry {
    pub fn label(&self) -> Label {
        let readers = self
            .readers
            .as_ref()
            .and_then(|r| Readers::only(r.iter().cloned()).ok())
            .unwrap_or(Readers::Public);
        Label::new(self.origin.clone(), readers)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub from: String,
    pub to: String,
    pub subject: String,
    pub body: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub title: String,
    pub start: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transfer {
    pub account: String,
    pub amount: i64,
}

/// Text handed back to the user, kept with its label for auditing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Output {
    pub text: String,
    pub label: Label,
}

/// The simulated enterprise world the tools act on.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Environment {
    pub files: BTreeMap<String, FileEntry>,
    pub inbox: Vec<Message>,
    pub outbox: Vec<Message>,
    pub calendar: Vec<Event>,
    pub fetch_log: Vec<String>,
    pub transfers: Vec<Transfer>,
    pub records: BTreeMap<i64, String>,
    pub outputs: Vec<Output>,
}

impl Environment {
    /// Places an uploaded document at `/uploads/<id>` tagged with its upload id.
    pub fn add_upload(&mut self, id: &str, content: &str) {
        self.files.insert(
            format!("/uploads/{id}"),
            FileEntry {
                content: content.to_string(),
                owner: default_owner(),
                shared: false,
                readers: None,
                origin: Some(Provenance::upload(id)),
            },
        );
    }
}
