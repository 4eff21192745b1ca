use std::collections::BTreeMap;

use super::{
    glob_match, ConfirmLevel, Decision, Effect, ExceptionPool, PolicyRule, PolicySet, Predicate,
    RuleEffect, Scope, Tier,
};
use crate::label::{Label, SourceKind};
use crate::toolsim::ToolSpec;

pub const UNREADABLE_REASON: &str = "unreadable data at sink";
pub const UPLOAD_REASON: &str = "user-upload data at red sink";

/// Decides one tool call. Total: every input yields a decision.
///
/// Only exception consumption mutates state.
pub fn evaluate(
    tool: &ToolSpec,
    args: &[Label],
    pc: &Label,
    context: &BTreeMap<String, String>,
    exceptions: &mut ExceptionPool,
    set: &PolicySet,
) -> Decision {
    if args.iter().any(Label::is_unreadable) {
        return Decision {
            effect: Effect::Deny(UNREADABLE_REASON.into()),
            rule: "builtin.unreadable".into(),
            exception: None,
        };
    }

    if let Some(rule) = set
        .rules
        .iter()
        .find(|r| glob_match(&r.tool, &tool.name) && r.when.iter().all(|p| holds(p, tool, args, pc, context)))
    {
        return apply_rule(rule, tool, args, pc, exceptions, set);
    }

    let normal = tier_effect(tool.tier, args, pc, set);
    if tool.tier == Tier::Red
        && set.red_upload_deny
        && args.iter().any(|l| l.has_source_kind(SourceKind::UserUpload))
    {
        return match exceptions.take(&tool.name, SourceKind::UserUpload) {
            Some(id) => Decision {
                effect: normal,
                rule: "default".into(),
                exception: Some(id),
            },
            None => Decision {
                effect: Effect::Deny(UPLOAD_REASON.into()),
                rule: "default".into(),
                exception: None,
            },
        };
    }
    Decision {
        effect: normal,
        rule: "default".into(),
        exception: None,
    }
}

fn apply_rule(
    rule: &PolicyRule,
    tool: &ToolSpec,
    args: &[Label],
    pc: &Label,
    exceptions: &mut ExceptionPool,
    set: &PolicySet,
) -> Decision {
    let effect = match rule.effect {
        RuleEffect::Allow => Effect::Allow,
        RuleEffect::ConfirmSingle => Effect::Confirm(ConfirmLevel::Single),
        RuleEffect::ConfirmMfa => Effect::Confirm(ConfirmLevel::MultiFactor),
        RuleEffect::Deny => {
            // A deny keyed on a source kind can be lifted by a grant for that kind.
            for p in &rule.when {
                if let Predicate::HasSource { kind, .. } = p {
                    if let Some(id) = exceptions.take(&tool.name, *kind) {
                        return Decision {
                            effect: tier_effect(tool.tier, args, pc, set),
                            rule: rule.id.clone(),
                            exception: Some(id),
                        };
                    }
                }
            }
            let reason = rule
                .reason
                .clone()
                .filter(|r| !r.trim().is_empty())
                .unwrap_or_else(|| format!("denied by rule {}", rule.id));
            Effect::Deny(reason)
        }
    };
    Decision {
        effect,
        rule: rule.id.clone(),
        exception: None,
    }
}

/// The tier's effect before any upload escalation.
fn tier_effect(tier: Tier, args: &[Label], pc: &Label, set: &PolicySet) -> Effect {
    let configured = set.defaults.get(&tier).copied().unwrap_or(RuleEffect::Deny);
    let effect = to_effect(configured, tier);
    if tier == Tier::Yellow && matches!(effect, Effect::Confirm(_)) {
        let untrusted = pc.is_untrusted() || args.iter().any(Label::is_untrusted);
        if !untrusted {
            return Effect::Allow;
        }
    }
    effect
}

fn to_effect(e: RuleEffect, tier: Tier) -> Effect {
    match e {
        RuleEffect::Allow => Effect::Allow,
        RuleEffect::ConfirmSingle => Effect::Confirm(ConfirmLevel::Single),
        RuleEffect::ConfirmMfa => Effect::Confirm(ConfirmLevel::MultiFactor),
        RuleEffect::Deny => Effect::Deny(format!("{tier:?} tier denied by default").to_lowercase()),
    }
}

fn holds(
    p: &Predicate,
    tool: &ToolSpec,
    args: &[Label],
    pc: &Label,
    context: &BTreeMap<String, String>,
) -> bool {
    let scoped = |scope: Scope, f: &dyn Fn(&Label) -> bool| match scope {
        Scope::Args => args.iter().any(f),
        Scope::Pc => f(pc),
        Scope::Any => f(pc) || args.iter().any(f),
    };
    match p {
        Predicate::HasSource { kind, scope } => scoped(*scope, &|l| l.has_source_kind(*kind)),
        Predicate::IsUntrusted { scope } => scoped(*scope, &Label::is_untrusted),
        Predicate::IsSecret { scope } => scoped(*scope, &Label::is_secret),
        Predicate::ContextEquals { attr, value } => context.get(attr) == Some(value),
        Predicate::TierIs { tier } => tool.tier == *tier,
    }
}
