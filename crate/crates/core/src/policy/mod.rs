//! Tiered-risk, declarative tool-call policy.
//!
//! A [`PolicySet`] is loaded from JSON, sorted once, and then consulted for
//! every tool call. Rules are pure: a glob over the tool name, a closed set of
//! label/context predicates, an effect and a priority. When nothing matches,
//! the tool's tier decides.

mod eval;
mod lint;
mod load;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use eval::evaluate;
pub use lint::{lint_policy, Finding, FindingKind};
pub use load::{load_policy, LoadError};

use crate::label::SourceKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    Green,
    Yellow,
    Red,
}

impl Tier {
    pub const ALL: [Tier; 3] = [Tier::Green, Tier::Yellow, Tier::Red];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConfirmLevel {
    Single,
    MultiFactor,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Effect {
    Allow,
    Confirm(ConfirmLevel),
    Deny(String),
}

impl Effect {
    pub fn is_deny(&self) -> bool {
        matches!(self, Effect::Deny(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Decision {
    pub effect: Effect,
    /// Matching rule id, or `"default"` when the tier decided.
    pub rule: String,
    /// Grant exception consumed to reach this decision.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exception: Option<String>,
}

/// Effect vocabulary used in policy documents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleEffect {
    Allow,
    ConfirmSingle,
    ConfirmMfa,
    Deny,
}

/// Which labels a predicate inspects.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    #[default]
    Args,
    Pc,
    Any,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "pred", rename_all = "snake_case", deny_unknown_fields)]
pub enum Predicate {
    HasSource {
        kind: SourceKind,
        #[serde(default)]
        scope: Scope,
    },
    IsUntrusted {
        #[serde(default)]
        scope: Scope,
    },
    IsSecret {
        #[serde(default)]
        scope: Scope,
    },
    ContextEquals {
        attr: String,
        value: String,
    },
    TierIs {
        tier: Tier,
    },
}

pub const PREDICATE_NAMES: &[&str] = &["has_source", "is_untrusted", "is_secret", "context_equals", "tier_is"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PolicyRule {
    pub id: String,
    /// Exact tool name or a glob with `*` / `?`.
    pub tool: String,
    pub effect: RuleEffect,
    pub when: Vec<Predicate>,
    pub priority: i64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GrantException {
    pub id: String,
    pub tool: String,
    pub source_kind: SourceKind,
    pub issuer: String,
    /// `None` means unlimited.
    #[serde(default)]
    pub uses: Option<u32>,
}

/// Grant exceptions available to one run. Consumption is single-threaded
/// and each take is all-or-nothing.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ExceptionPool {
    items: Vec<GrantException>,
    consumed: u32,
}

impl ExceptionPool {
    pub fn new(mut items: Vec<GrantException>) -> Self {
        items.sort_by(|a, b| a.id.cmp(&b.id));
        ExceptionPool { items, consumed: 0 }
    }

    pub fn take(&mut self, tool: &str, kind: SourceKind) -> Option<String> {
        let g = self.items.iter_mut().find(|g| {
            g.source_kind == kind && glob_match(&g.tool, tool) && g.uses != Some(0)
        })?;
        if let Some(n) = g.uses.as_mut() {
            *n -= 1;
        }
        self.consumed += 1;
        Some(g.id.clone())
    }

    pub fn consumed(&self) -> u32 {
        self.consumed
    }

    pub fn items(&self) -> &[GrantException] {
        &self.items
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PolicySet {
    /// Sorted by priority descending, then id ascending.
    pub rules: Vec<PolicyRule>,
    pub modules: BTreeMap<String, Vec<PolicyRule>>,
    pub defaults: BTreeMap<Tier, RuleEffect>,
    /// Red-tier calls with upload-sourced arguments are denied unless excepted.
    pub red_upload_deny: bool,
    pub exceptions: Vec<GrantException>,
}

impl PolicySet {
    /// Tier defaults only, no rules.
    pub fn defaults_only() -> Self {
        PolicySet {
            rules: Vec::new(),
            modules: BTreeMap::new(),
            defaults: [
                (Tier::Green, RuleEffect::Allow),
                (Tier::Yellow, RuleEffect::ConfirmSingle),
                (Tier::Red, RuleEffect::ConfirmMfa),
            ]
            .into_iter()
            .collect(),
            red_upload_deny: true,
            exceptions: Vec::new(),
        }
    }

    pub fn sort_rules(&mut self) {
        self.rules
            .sort_by(|a, b| b.priority.cmp(&a.priority).then_with(|| a.id.cmp(&b.id)));
    }
}

/// The policy shipped with the crate.
pub const DEFAULT_POLICY: &str = include_str!("../../data/policy/default.json");

pub fn default_policy() -> PolicySet {
    load_policy(DEFAULT_POLICY).expect("bundled policy loads")
}

/// Glob over tool names: `*` matches any run, `?` any single character.
pub fn glob_match(pattern: &str, text: &str) -> bool {
    let p: Vec<char> = pattern.chars().collect();
    let t: Vec<char> = text.chars().collect();
    let (mut pi, mut ti) = (0, 0);
    let mut star: Option<(usize, usize)> = None;
    while ti < t.len() {
        if pi < p.len() && (p[pi] == '?' || p[pi] == t[ti]) {
            pi += 1;
            ti += 1;
        } else if pi < p.len() && p[pi] == '*' {
            star = Some((pi, ti));
            pi += 1;
        } else if let Some((sp, st)) = star {
            pi = sp + 1;
            ti = st + 1;
            star = Some((sp, st + 1));
        } else {
            return false;
        }
    }
    p[pi..].iter().all(|c| *c == '*')
}

pub fn is_glob(pattern: &str) -> bool {
    pattern.contains(['*', '?'])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn globbing() {
        assert!(glob_match("*", "send_email"));
        assert!(glob_match("send_*", "send_email"));
        assert!(glob_match("s?nd_email", "send_email"));
        assert!(glob_match("send_email", "send_email"));
        assert!(!glob_match("send_*", "fetch"));
        assert!(glob_match("*_file", "move_file"));
        assert!(!glob_match("*_file", "move_files"));
        assert!(glob_match("a*b*c", "aXXbYYc"));
    }

    #[test]
    fn tier_order() {
        assert!(Tier::Green < Tier::Yellow && Tier::Yellow < Tier::Red);
    }

    #[test]
    fn exceptions_consumed_atomically() {
        let mut pool = ExceptionPool::new(vec![GrantException {
            id: "g1".into(),
            tool: "send_email".into(),
            source_kind: SourceKind::UserUpload,
            issuer: "admin".into(),
            uses: Some(1),
        }]);
        assert_eq!(pool.take("fetch", SourceKind::UserUpload), None);
        assert_eq!(pool.take("send_email", SourceKind::External), None);
        assert_eq!(pool.take("send_email", SourceKind::UserUpload), Some("g1".into()));
        assert_eq!(pool.take("send_email", SourceKind::UserUpload), None);
        assert_eq!(pool.consumed(), 1);
        assert_eq!(pool.items()[0].uses, Some(0));
    }
}
