//! Scenarios, plan templates, schemas and the cache workload shipped with the crate.

use serde::{Deserialize, Serialize};

use super::scenario::{Scenario, ScenarioClass};

macro_rules! data_files {
    ($dir:literal: $($name:literal),* $(,)?) => {
        &[$(($name, include_str!(concat!("../../data/", $dir, "/", $name)))),*]
    };
}

const TEMPLATES: &[(&str, &str)] = data_files!("plans":
    "summarize_inbox.plan",
    "list_meetings.plan",
    "read_notes.plan",
    "receipt_total.plan",
    "tell_time.plan",
);

const SCHEMAS: &[(&str, &str)] = data_files!("schemas": "receipt.json", "contact.json");

const SCENARIOS: &[(&str, &str)] = data_files!("scenarios":
    "benign/archive-report.json",
    "benign/benign-inbox-summary.json",
    "benign/budget-check.json",
    "benign/calendar-digest.json",
    "benign/calendar-week.json",
    "benign/current-time.json",
    "benign/email-colleague.json",
    "benign/fetch-handbook.json",
    "benign/lookup-record.json",
    "benign/newsletter-link.json",
    "benign/pay-rent.json",
    "benign/read-notes.json",
    "benign/receipt-total.json",
    "benign/send-upload-granted.json",
    "benign/share-upload.json",
    "attack/attack-override-prompt.json",
    "attack/attack-secret-echo.json",
    "attack/email-wire-injection.json",
    "attack/flag-rejected.json",
    "attack/mfa-without-token.json",
    "attack/offsite-wire.json",
    "attack/phish-prompt.json",
    "attack/secret-egress.json",
    "attack/upload-forward-line.json",
    "attack/upload-to-red.json",
    "side_channel/side-exception-leak.json",
    "side_channel/side-loop-counting.json",
    "side_channel/side-timing.json",
);

pub const WORKLOAD_JSON: &str = include_str!("../../data/workload.json");

fn find<'a>(table: &[(&str, &'a str)], name: &str, ext: &str) -> Option<&'a str> {
    table
        .iter()
        .find(|(file, _)| file.strip_suffix(ext) == Some(name) || *file == name)
        .map(|(_, text)| *text)
}

/// Plan template by name, with or without the `.plan` extension.
pub fn template(name: &str) -> Option<&'static str> {
    find(TEMPLATES, name, ".plan")
}

pub fn template_names() -> Vec<&'static str> {
    TEMPLATES.iter().map(|(f, _)| f.trim_end_matches(".plan")).collect()
}

/// Schema JSON by name, with or without the `.json` extension.
pub fn schema(name: &str) -> Option<&'static str> {
    find(SCHEMAS, name, ".json")
}

/// Every bundled scenario, in a fixed order.
pub fn scenarios() -> Vec<Scenario> {
    SCENARIOS
        .iter()
        .map(|(file, text)| Scenario::from_json(text).unwrap_or_else(|e| panic!("bundled scenario {file}: {e}")))
        .collect()
}

pub fn scenarios_of(class: ScenarioClass) -> Vec<Scenario> {
    scenarios().into_iter().filter(|s| s.class == class).collect()
}

pub fn scenario(id: &str) -> Option<Scenario> {
    scenarios().into_iter().find(|s| s.id == id)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadItem {
    pub scenario: String,
    pub prompt: String,
}

/// Prompts replayed against one pipeline to measure cache reuse.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Workload {
    pub id: String,
    pub items: Vec<WorkloadItem>,
}

pub fn workload() -> Workload {
    serde_json::from_str(WORKLOAD_JSON).expect("bundled workload parses")
}
