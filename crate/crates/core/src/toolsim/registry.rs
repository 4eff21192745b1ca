use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::policy::Tier;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamType {
    Int,
    Text,
    Any,
}

/// Which environment transition a tool performs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Behavior {
    ListCalendar,
    ListInbox,
    ReadFile,
    LookupRecord,
    CurrentTime,
    Respond,
    MoveFile,
    Fetch,
    SendEmail,
    WireTransfer,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ToolSpec {
    pub name: String,
    pub params: Vec<ParamType>,
    pub tier: Tier,
    pub worst_case_cost: u64,
    pub state_changing: bool,
    pub externally_visible: bool,
    pub batchable: bool,
    /// When false, outputs are marked untrusted regardless of their sources.
    pub trusted_output: bool,
    pub behavior: Behavior,
}

impl ToolSpec {
    pub fn arity(&self) -> usize {
        self.params.len()
    }

    /// Calls that STRICT mode intercepts.
    pub fn is_sensitive(&self) -> bool {
        self.state_changing || self.externally_visible
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RegistryError {
    #[error("tool `{0}` has zero worst-case cost")]
    ZeroCost(String),
    #[error("red-tier tool `{0}` must be externally visible")]
    RedNotVisible(String),
    #[error("unknown tool `{0}`")]
    Unknown(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Registry {
    tools: BTreeMap<String, ToolSpec>,
}

struct Row(
    &'static str,
    &'static [ParamType],
    Tier,
    u64,
    bool,
    bool,
    bool,
    bool,
    Behavior,
);

use ParamType::{Any, Int, Text};

#[rustfmt::skip]
const STANDARD: &[Row] = &[
    //   name            params              tier          cost  state  visible batch  trusted
    Row("list_calendar", &[],                Tier::Green,  2,    false, false,  false, true,  Behavior::ListCalendar),
    Row("list_inbox",    &[],                Tier::Green,  2,    false, false,  false, true,  Behavior::ListInbox),
    Row("read_file",     &[Text],            Tier::Green,  3,    false, false,  false, true,  Behavior::ReadFile),
    Row("lookup_record", &[Int],             Tier::Green,  3,    false, false,  false, true,  Behavior::LookupRecord),
    Row("current_time",  &[],                Tier::Green,  1,    false, false,  false, true,  Behavior::CurrentTime),
    Row("respond",       &[Any],             Tier::Green,  1,    false, false,  false, true,  Behavior::Respond),
    Row("move_file",     &[Text, Text],      Tier::Yellow, 4,    true,  false,  false, true,  Behavior::MoveFile),
    Row("fetch",         &[Text],            Tier::Yellow, 5,    false, true,   true,  false, Behavior::Fetch),
    Row("send_email",    &[Text, Text, Text],Tier::Red,    8,    true,  true,   false, true,  Behavior::SendEmail),
    Row("wire_transfer", &[Text, Int],       Tier::Red,    10,   true,  true,   false, true,  Behavior::WireTransfer),
];

impl Registry {
    pub fn empty() -> Self {
        Registry {
            tools: BTreeMap::new(),
        }
    }

    /// The bundled tool table. Validated on construction.
    pub fn standard() -> Self {
        let mut r = Registry::empty();
        for Row(name, params, tier, cost, state, visible, batch, trusted, behavior) in STANDARD {
            r.insert(ToolSpec {
                name: name.to_string(),
                params: params.to_vec(),
                tier: *tier,
                worst_case_cost: *cost,
                state_changing: *state,
                externally_visible: *visible,
                batchable: *batch,
                trusted_output: *trusted,
                behavior: *behavior,
            })
            .expect("standard registry is valid");
        }
        r
    }

    pub fn insert(&mut self, spec: ToolSpec) -> Result<(), RegistryError> {
        validate(&spec)?;
        self.tools.insert(spec.name.clone(), spec);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&ToolSpec> {
        self.tools.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = &ToolSpec> {
        self.tools.values()
    }

    pub fn signatures(&self) -> BTreeMap<String, usize> {
        self.tools
            .values()
            .map(|t| (t.name.clone(), t.arity()))
            .collect()
    }

    pub fn set_trusted_output(&mut self, name: &str, trusted: bool) -> Result<(), RegistryError> {
        let spec = self
            .tools
            .get_mut(name)
            .ok_or_else(|| RegistryError::Unknown(name.to_string()))?;
        spec.trusted_output = trusted;
        Ok(())
    }

    pub fn validate(&self) -> Result<(), RegistryError> {
        self.tools.values().try_for_each(validate)
    }
}

impl Default for Registry {
    fn default() -> Self {
        Registry::standard()
    }
}

fn validate(spec: &ToolSpec) -> Result<(), RegistryError> {
    if spec.worst_case_cost == 0 {
        return Err(RegistryError::ZeroCost(spec.name.clone()));
    }
    if spec.tier == Tier::Red && !spec.externally_visible {
        return Err(RegistryError::RedNotVisible(spec.name.clone()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_tiers() {
        let r = Registry::standard();
        let tier = |n: &str| r.get(n).unwrap().tier;
        assert_eq!(tier("list_calendar"), Tier::Green);
        assert_eq!(tier("read_file"), Tier::Green);
        assert_eq!(tier("move_file"), Tier::Yellow);
        assert_eq!(tier("fetch"), Tier::Yellow);
        assert_eq!(tier("send_email"), Tier::Red);
        assert_eq!(tier("wire_transfer"), Tier::Red);
        let fetch = r.get("fetch").unwrap();
        assert!(fetch.externally_visible && fetch.batchable);
        assert!(r.validate().is_ok());
        assert_eq!(r.signatures()["send_email"], 3);
    }

    #[test]
    fn invariants_enforced() {
        let mut spec = Registry::standard().get("send_email").unwrap().clone();
        spec.externally_visible = false;
        assert!(matches!(
            Registry::empty().insert(spec.clone()),
            Err(RegistryError::RedNotVisible(_))
        ));
        spec.externally_visible = true;
        spec.worst_case_cost = 0;
        assert!(matches!(Registry::empty().insert(spec), Err(RegistryError::ZeroCost(_))));
    }
}
