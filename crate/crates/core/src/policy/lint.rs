use serde::Serialize;

use super::{glob_match, is_glob, PolicyRule, PolicySet, Predicate, RuleEffect, Tier};
use crate::toolsim::Registry;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum FindingKind {
    ShadowedRule,
    NoCoverage,
    HighRiskAllow,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Finding {
    pub kind: FindingKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rule: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tool: Option<String>,
    pub detail: String,
}

/// Static review of a loaded set against the tools it governs.
pub fn lint_policy(set: &PolicySet, registry: &Registry) -> Vec<Finding> {
    let mut out = Vec::new();

    for (j, later) in set.rules.iter().enumerate() {
        if let Some(earlier) = set.rules[..j].iter().find(|e| shadows(e, later)) {
            out.push(Finding {
                kind: FindingKind::ShadowedRule,
                rule: Some(later.id.clone()),
                tool: None,
                detail: format!("always preceded by `{}`", earlier.id),
            });
        }
    }

    for tool in registry.iter() {
        let covered = set.defaults.contains_key(&tool.tier)
            || set.rules.iter().any(|r| glob_match(&r.tool, &tool.name));
        if !covered {
            out.push(Finding {
                kind: FindingKind::NoCoverage,
                rule: None,
                tool: Some(tool.name.clone()),
                detail: format!("no rule and no {:?} default", tool.tier).to_lowercase(),
            });
        }
    }

    for tool in registry.iter().filter(|t| t.tier == Tier::Red) {
        for r in &set.rules {
            if r.effect == RuleEffect::Allow && glob_match(&r.tool, &tool.name) && tier_compatible(r, Tier::Red) {
                out.push(Finding {
                    kind: FindingKind::HighRiskAllow,
                    rule: Some(r.id.clone()),
                    tool: Some(tool.name.clone()),
                    detail: "red-tier tool reachable with allow".into(),
                });
            }
        }
        if set.defaults.get(&Tier::Red) == Some(&RuleEffect::Allow) {
            out.push(Finding {
                kind: FindingKind::HighRiskAllow,
                rule: Some("default".into()),
                tool: Some(tool.name.clone()),
                detail: "red tier defaults to allow".into(),
            });
        }
    }
    out
}

/// `earlier` matches every call `later` matches.
fn shadows(earlier: &PolicyRule, later: &PolicyRule) -> bool {
    let covers = earlier.tool == later.tool || (!is_glob(&later.tool) && glob_match(&earlier.tool, &later.tool))
        || earlier.tool == "*";
    covers && earlier.when.iter().all(|p| later.when.contains(p))
}

fn tier_compatible(r: &PolicyRule, tier: Tier) -> bool {
    r.when.iter().all(|p| match p {
        Predicate::TierIs { tier: t } => *t == tier,
        _ => true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{default_policy, load_policy};

    fn load(rules: &str) -> PolicySet {
        load_policy(&format!(
            r#"{{"defaults":{{"green":"allow","yellow":"confirm_single","red":"confirm_mfa"}},"rules":[{rules}]}}"#
        ))
        .unwrap()
    }

    #[test]
    fn identical_patterns_shadow() {
        let set = load(
            r#"{"id":"a","tool":"fetch","effect":"confirm_single","priority":2},
               {"id":"b","tool":"fetch","effect":"allow","priority":1}"#,
        );
        let f = lint_policy(&set, &Registry::standard());
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].kind, FindingKind::ShadowedRule);
        assert_eq!(f[0].rule.as_deref(), Some("b"));
    }

    #[test]
    fn narrower_condition_first_does_not_shadow() {
        let set = load(
            r#"{"id":"a","tool":"fetch","effect":"deny","reason":"s","priority":2,"when":[{"pred":"is_secret"}]},
               {"id":"b","tool":"fetch","effect":"confirm_single","priority":1}"#,
        );
        assert!(lint_policy(&set, &Registry::standard()).is_empty());
    }

    #[test]
    fn allow_on_wire_transfer() {
        let set = load(r#"{"id":"w","tool":"wire_transfer","effect":"allow"}"#);
        let f = lint_policy(&set, &Registry::standard());
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].kind, FindingKind::HighRiskAllow);
        assert_eq!(f[0].tool.as_deref(), Some("wire_transfer"));
    }

    #[test]
    fn green_only_allow_is_not_high_risk() {
        let set = load(r#"{"id":"g","tool":"*","effect":"allow","when":[{"pred":"tier_is","tier":"green"}]}"#);
        assert!(lint_policy(&set, &Registry::standard()).is_empty());
    }

    #[test]
    fn missing_default_reported() {
        let mut set = load("");
        set.defaults.remove(&Tier::Yellow);
        let f = lint_policy(&set, &Registry::standard());
        let tools: Vec<_> = f.iter().filter_map(|x| x.tool.as_deref()).collect();
        assert_eq!(tools, vec!["fetch", "move_file"]);
    }

    #[test]
    fn bundled_policy_is_clean() {
        assert_eq!(lint_policy(&default_policy(), &Registry::standard()), vec![]);
    }
}
