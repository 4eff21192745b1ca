use std::collections::{BTreeMap, VecDeque};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::guards::AuditKind;
use crate::interpreter::{ConfirmRequest, ConfirmationProvider};
use crate::label::{Label, Provenance};
use crate::policy::{ConfirmLevel, GrantException};
use crate::quarantine::Schema;
use crate::toolsim::Environment;

use super::{bundled, PipelineError};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioClass {
    #[default]
    Benign,
    Attack,
    SideChannel,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanSource {
    Inline(String),
    /// Path relative to the scenario file.
    File(String),
    /// Name of a bundled plan template.
    Template(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConfirmResponse {
    Approve,
    ApproveMfa(String),
    Reject,
}

fn user_label() -> Label {
    Label::public([Provenance::User])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BindingSpec {
    pub value: serde_json::Value,
    #[serde(default = "user_label")]
    pub label: Label,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SchemaRef {
    /// A bundled schema name, or a path relative to the scenario file.
    Named(String),
    Inline(Schema),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DocumentRef {
    Upload { upload: String },
    Text { text: String, origin: Provenance },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuarantineInput {
    /// Plan variable receiving the list of extracted records.
    pub bind: String,
    pub schema: SchemaRef,
    pub documents: Vec<DocumentRef>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expected {
    pub completed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blocked_calls: Option<usize>,
    /// Audit finding kinds that must appear (and no others).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub findings: Option<Vec<AuditKind>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoninterferenceSpec {
    pub secret: String,
    pub values: Vec<serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub id: String,
    #[serde(default)]
    pub class: ScenarioClass,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub prompt: String,
    #[serde(default)]
    pub context: BTreeMap<String, String>,
    #[serde(default)]
    pub environment: Environment,
    #[serde(default)]
    pub uploads: BTreeMap<String, String>,
    #[serde(default)]
    pub bindings: BTreeMap<String, BindingSpec>,
    #[serde(default)]
    pub quarantine: Vec<QuarantineInput>,
    pub plan: PlanSource,
    #[serde(default)]
    pub cacheable: bool,
    #[serde(default)]
    pub confirmations: Vec<ConfirmResponse>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mfa_token: Option<String>,
    #[serde(default)]
    pub exceptions: Vec<GrantException>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected: Option<Expected>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noninterference: Option<NoninterferenceSpec>,
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| PipelineError::MalformedScenario(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::Io(format!("{}: {e}", path.display())))?;
        let mut s = Scenario::from_json(&text)?;
        s.base_dir = path.parent().map(Path::to_path_buf);
        Ok(s)
    }

    fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::MalformedScenario(format!("{}: {m}", self.id)));
        if self.id.trim().is_empty() {
            return bad("empty id".into());
        }
        for q in &self.quarantine {
            if self.bindings.contains_key(&q.bind) {
                return bad(format!("`{}` is both a binding and a quarantine target", q.bind));
            }
            for d in &q.documents {
                if let DocumentRef::Upload { upload } = d {
                    if !self.uploads.contains_key(upload) {
                        return bad(format!("quarantine document refers to missing upload `{upload}`"));
                    }
                }
            }
        }
        if let Some(ni) = &self.noninterference {
            if ni.values.len() < 2 {
                return bad("noninterference needs at least two values".into());
            }
        }
        Ok(())
    }

    fn resolve_path(&self, rel: &str) -> PathBuf {
        match &self.base_dir {
            Some(dir) => dir.join(rel),
            None => PathBuf::from(rel),
        }
    }

    /// Plan text from the scenario's source.
    pub fn plan_text(&self) -> Result<String, PipelineError> {
        match &self.plan {
            PlanSource::Inline(text) => Ok(text.clone()),
            PlanSource::Template(name) => bundled::template(name)
                .map(str::to_string)
                .ok_or_else(|| PipelineError::MalformedScenario(format!("{}: unknown plan template `{name}`", self.id))),
            PlanSource::File(rel) => {
                let path = self.resolve_path(rel);
                std::fs::read_to_string(&path).map_err(|e| PipelineError::Io(format!("{}: {e}", path.display())))
            }
        }
    }

    pub fn schema(&self, r: &SchemaRef) -> Result<Schema, PipelineError> {
        match r {
            SchemaRef::Inline(s) => Ok(s.clone()),
            SchemaRef::Named(name) => {
                let text = match bundled::schema(name) {
                    Some(t) => t.to_string(),
                    None => {
                        let path = self.resolve_path(name);
                        std::fs::read_to_string(&path)
                            .map_err(|e| PipelineError::Io(format!("{}: {e}", path.display())))?
                    }
                };
                Schema::from_json(&text).map_err(|e| PipelineError::MalformedScenario(format!("{}: {e}", self.id)))
            }
        }
    }
}

/// One answered (or unanswered) confirmation request.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConfirmLogEntry {
    pub tool: String,
    pub level: ConfirmLevel,
    /// `None` when the script had run out.
    pub response: Option<ConfirmResponse>,
    pub approved: bool,
}

/// Replays a scenario's confirmation script. An unanswered request is a
/// rejection; a multi-factor request needs `approve_mfa` with the right token.
#[derive(Debug, Clone)]
pub struct ScriptedConfirmations {
    script: VecDeque<ConfirmResponse>,
    mfa_token: Option<String>,
    pub log: Vec<ConfirmLogEntry>,
}

impl ScriptedConfirmations {
    pub fn new(script: &[ConfirmResponse], mfa_token: Option<&str>) -> Self {
        ScriptedConfirmations {
            script: script.iter().cloned().collect(),
            mfa_token: mfa_token.map(str::to_string),
            log: Vec::new(),
        }
    }

    fn answer(&mut self, tool: &str, level: ConfirmLevel) -> bool {
        let response = self.script.pop_front();
        let token_ok = |t: &String| self.mfa_token.as_ref() == Some(t);
        let approved = match (&response, level) {
            (Some(ConfirmResponse::Approve), ConfirmLevel::Single) => true,
            (Some(ConfirmResponse::ApproveMfa(t)), _) => token_ok(t),
            _ => false,
        };
        self.log.push(ConfirmLogEntry {
            tool: tool.to_string(),
            level,
            response,
            approved,
        });
        approved
    }

    /// Asks the script to let a flagged prompt through.
    pub fn resolve_flag(&mut self) -> bool {
        self.answer("screen", ConfirmLevel::Single)
    }

    pub fn requested(&self) -> usize {
        self.log.len()
    }

    /// Requests that found a script entry waiting.
    pub fn consumed(&self) -> usize {
        self.log.iter().filter(|e| e.response.is_some()).count()
    }
}

impl ConfirmationProvider for ScriptedConfirmations {
    fn confirm(&mut self, request: &ConfirmRequest<'_>) -> bool {
        self.answer(request.tool, request.level)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_scenario_parses() {
        let s = Scenario::from_json(r#"{"id": "x", "prompt": "hi", "plan": {"inline": ""}}"#).unwrap();
        assert_eq!(s.class, ScenarioClass::Benign);
        assert_eq!(s.plan_text().unwrap(), "");
    }

    #[test]
    fn unknown_keys_are_malformed() {
        let e = Scenario::from_json(r#"{"id": "x", "prompt": "hi", "plan": {"inline": ""}, "bogus": 1}"#);
        assert!(matches!(e, Err(PipelineError::MalformedScenario(_))));
    }

    #[test]
    fn missing_upload_reference_rejected() {
        let e = Scenario::from_json(
            r#"{"id": "x", "prompt": "p", "plan": {"inline": ""},
                "quarantine": [{"bind": "r", "schema": "receipt", "documents": [{"upload": "nope"}]}]}"#,
        );
        assert!(matches!(e, Err(PipelineError::MalformedScenario(m)) if m.contains("nope")));
    }

    #[test]
    fn confirmation_responses_parse() {
        let v: Vec<ConfirmResponse> = serde_json::from_str(r#"["approve", {"approve_mfa": "123"}, "reject"]"#).unwrap();
        assert_eq!(
            v,
            vec![ConfirmResponse::Approve, ConfirmResponse::ApproveMfa("123".into()), ConfirmResponse::Reject]
        );
    }

    #[test]
    fn mfa_needs_the_right_token() {
        let script = [
            ConfirmResponse::Approve,
            ConfirmResponse::ApproveMfa("000".into()),
            ConfirmResponse::ApproveMfa("123".into()),
            ConfirmResponse::ApproveMfa("123".into()),
        ];
        let mut c = ScriptedConfirmations::new(&script, Some("123"));
        assert!(!c.answer("send_email", ConfirmLevel::MultiFactor));
        assert!(!c.answer("send_email", ConfirmLevel::MultiFactor));
        assert!(c.answer("send_email", ConfirmLevel::MultiFactor));
        assert!(c.answer("fetch", ConfirmLevel::Single));
        assert!(!c.answer("fetch", ConfirmLevel::Single));
        assert_eq!((c.requested(), c.consumed()), (5, 4));
    }
}
