use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use super::{GrantException, PolicyRule, PolicySet, Predicate, RuleEffect, Tier, PREDICATE_NAMES};

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LoadError {
    #[error("malformed policy document: {message}")]
    Malformed { message: String },
    #[error("rule `{rule}`: unknown predicate `{name}`")]
    UnknownPredicate { rule: String, name: String },
    #[error("rule `{rule}`: {message}")]
    BadRule { rule: String, message: String },
    #[error("duplicate rule id `{id}`")]
    DuplicateId { id: String },
    #[error("cyclic import: {}", chain.join(" -> "))]
    CyclicImport { chain: Vec<String> },
    #[error("unresolved import `{module}`")]
    UnresolvedImport { module: String },
    #[error("no default effect for tier {tier:?}")]
    MissingDefault { tier: Tier },
    #[error("exception `{id}`: {message}")]
    BadException { id: String, message: String },
}

fn malformed(message: impl Into<String>) -> LoadError {
    LoadError::Malformed {
        message: message.into(),
    }
}

/// One element of a rule list: a rule or an import of a named module.
enum Entry {
    Rule(RawRule),
    Import(Import),
}

#[derive(Clone)]
struct RawRule {
    id: String,
    tool: Option<String>,
    effect: RuleEffect,
    when: Vec<Predicate>,
    priority: i64,
    reason: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Import {
    import: String,
    #[serde(default)]
    tools: Option<Vec<String>>,
}

pub fn load_policy(document: &str) -> Result<PolicySet, Vec<LoadError>> {
    let doc: Value = serde_json::from_str(document).map_err(|e| vec![malformed(e.to_string())])?;
    let obj = doc
        .as_object()
        .ok_or_else(|| vec![malformed("top level must be an object")])?;
    let mut errors = Vec::new();

    for key in obj.keys() {
        if !matches!(key.as_str(), "defaults" | "modules" | "rules" | "exceptions" | "red_upload_deny") {
            errors.push(malformed(format!("unknown top-level key `{key}`")));
        }
    }

    let defaults = load_defaults(obj.get("defaults"), &mut errors);

    let mut modules: BTreeMap<String, Vec<Entry>> = BTreeMap::new();
    match obj.get("modules") {
        None => {}
        Some(Value::Object(m)) => {
            for (name, body) in m {
                modules.insert(name.clone(), load_entries(body, name, &mut errors));
            }
        }
        Some(_) => errors.push(malformed("`modules` must be an object")),
    }

    let top = match obj.get("rules") {
        None => Vec::new(),
        Some(v) => load_entries(v, "rules", &mut errors),
    };

    let exceptions: Vec<GrantException> = match obj.get("exceptions") {
        None => Vec::new(),
        Some(v) => match serde_json::from_value(v.clone()) {
            Ok(list) => list,
            Err(e) => {
                errors.push(malformed(format!("exceptions: {e}")));
                Vec::new()
            }
        },
    };
    let mut seen_exc = BTreeSet::new();
    for g in &exceptions {
        if !seen_exc.insert(g.id.clone()) {
            errors.push(LoadError::BadException {
                id: g.id.clone(),
                message: "duplicate id".into(),
            });
        }
        if g.issuer.trim().is_empty() {
            errors.push(LoadError::BadException {
                id: g.id.clone(),
                message: "issuer is empty".into(),
            });
        }
    }

    let red_upload_deny = match obj.get("red_upload_deny") {
        None => true,
        Some(Value::Bool(b)) => *b,
        Some(_) => {
            errors.push(malformed("`red_upload_deny` must be a boolean"));
            true
        }
    };

    // Flatten modules (for reference and lint) and the top-level list.
    let mut flat_modules = BTreeMap::new();
    for name in modules.keys() {
        let mut stack = vec![name.clone()];
        let rules = expand(&modules, name, None, &mut stack, &mut errors);
        flat_modules.insert(name.clone(), rules);
    }
    let mut rules = Vec::new();
    for entry in &top {
        match entry {
            Entry::Rule(r) => rules.extend(instantiate(r, None, None, &mut errors)),
            Entry::Import(imp) => {
                rules.extend(resolve_import(&modules, imp, None, &mut vec![], &mut errors));
            }
        }
    }

    let mut ids = BTreeSet::new();
    for r in &rules {
        if !ids.insert(r.id.clone()) {
            errors.push(LoadError::DuplicateId { id: r.id.clone() });
        }
    }

    let mut unique: Vec<LoadError> = Vec::new();
    for e in errors {
        if !unique.contains(&e) {
            unique.push(e);
        }
    }
    let errors = unique;
    if !errors.is_empty() {
        return Err(errors);
    }
    let mut set = PolicySet {
        rules,
        modules: flat_modules,
        defaults,
        red_upload_deny,
        exceptions,
    };
    set.sort_rules();
    Ok(set)
}

fn load_defaults(v: Option<&Value>, errors: &mut Vec<LoadError>) -> BTreeMap<Tier, RuleEffect> {
    let mut out = BTreeMap::new();
    let parsed: BTreeMap<Tier, RuleEffect> = match v {
        None => BTreeMap::new(),
        Some(v) => match serde_json::from_value(v.clone()) {
            Ok(m) => m,
            Err(e) => {
                errors.push(malformed(format!("defaults: {e}")));
                return out;
            }
        },
    };
    for tier in Tier::ALL {
        match parsed.get(&tier) {
            Some(e) => {
                out.insert(tier, *e);
            }
            None => errors.push(LoadError::MissingDefault { tier }),
        }
    }
    out
}

fn load_entries(v: &Value, context: &str, errors: &mut Vec<LoadError>) -> Vec<Entry> {
    let Some(list) = v.as_array() else {
        errors.push(malformed(format!("`{context}` must be a list")));
        return Vec::new();
    };
    let mut out = Vec::new();
    for (i, item) in list.iter().enumerate() {
        let Some(o) = item.as_object() else {
            errors.push(malformed(format!("{context}[{i}] must be an object")));
            continue;
        };
        if o.contains_key("import") {
            match serde_json::from_value::<Import>(item.clone()) {
                Ok(imp) => out.push(Entry::Import(imp)),
                Err(e) => errors.push(malformed(format!("{context}[{i}]: {e}"))),
            }
        } else if let Some(r) = load_rule(o, &format!("{context}[{i}]"), errors) {
            out.push(Entry::Rule(r));
        }
    }
    out
}

fn load_rule(
    o: &serde_json::Map<String, Value>,
    fallback: &str,
    errors: &mut Vec<LoadError>,
) -> Option<RawRule> {
    let id = match o.get("id") {
        Some(Value::String(s)) if !s.is_empty() => s.clone(),
        _ => {
            errors.push(malformed(format!("{fallback}: rule needs a non-empty string `id`")));
            return None;
        }
    };
    let bad = |message: String| LoadError::BadRule {
        rule: id.clone(),
        message,
    };
    let before = errors.len();
    for key in o.keys() {
        if !matches!(key.as_str(), "id" | "tool" | "effect" | "when" | "priority" | "reason") {
            errors.push(bad(format!("unknown field `{key}`")));
        }
    }
    let tool = match o.get("tool") {
        None => None,
        Some(Value::String(s)) if !s.is_empty() => Some(s.clone()),
        Some(_) => {
            errors.push(bad("`tool` must be a non-empty string".into()));
            None
        }
    };
    let effect = match o.get("effect").map(|v| serde_json::from_value::<RuleEffect>(v.clone())) {
        Some(Ok(e)) => Some(e),
        Some(Err(_)) => {
            errors.push(bad("`effect` must be allow, confirm_single, confirm_mfa or deny".into()));
            None
        }
        None => {
            errors.push(bad("missing `effect`".into()));
            None
        }
    };
    let priority = match o.get("priority") {
        None => 0,
        Some(v) => v.as_i64().unwrap_or_else(|| {
            errors.push(bad("`priority` must be an integer".into()));
            0
        }),
    };
    let reason = match o.get("reason") {
        None => None,
        Some(Value::String(s)) => Some(s.clone()),
        Some(_) => {
            errors.push(bad("`reason` must be a string".into()));
            None
        }
    };
    let mut when = Vec::new();
    match o.get("when") {
        None => {}
        Some(Value::Array(preds)) => {
            for p in preds {
                let name = p.get("pred").and_then(Value::as_str).unwrap_or("");
                if !PREDICATE_NAMES.contains(&name) {
                    errors.push(LoadError::UnknownPredicate {
                        rule: id.clone(),
                        name: name.to_string(),
                    });
                    continue;
                }
                match serde_json::from_value::<Predicate>(p.clone()) {
                    Ok(pred) => when.push(pred),
                    Err(e) => errors.push(bad(format!("predicate `{name}`: {e}"))),
                }
            }
        }
        Some(_) => errors.push(bad("`when` must be a list".into())),
    }
    if effect == Some(RuleEffect::Deny) && reason.as_deref().is_some_and(|r| r.trim().is_empty()) {
        errors.push(bad("deny reason is empty".into()));
    }
    if errors.len() > before {
        return None;
    }
    Some(RawRule {
        id,
        tool,
        effect: effect?,
        when,
        priority,
        reason,
    })
}

/// Expands a module into concrete rules, optionally bound to a tool.
fn expand(
    modules: &BTreeMap<String, Vec<Entry>>,
    name: &str,
    tool: Option<&str>,
    stack: &mut Vec<String>,
    errors: &mut Vec<LoadError>,
) -> Vec<PolicyRule> {
    let Some(entries) = modules.get(name) else {
        errors.push(LoadError::UnresolvedImport {
            module: name.to_string(),
        });
        return Vec::new();
    };
    let mut out = Vec::new();
    for entry in entries {
        match entry {
            Entry::Rule(r) => out.extend(instantiate(r, Some(name), tool, errors)),
            Entry::Import(imp) => {
                let bound = imp.tools.is_some();
                let mut rules = resolve_import(modules, imp, tool, stack, errors);
                if !bound {
                    for r in &mut rules {
                        r.id = format!("{name}.{}", r.id);
                    }
                }
                out.extend(rules);
            }
        }
    }
    out
}

fn resolve_import(
    modules: &BTreeMap<String, Vec<Entry>>,
    imp: &Import,
    outer_tool: Option<&str>,
    stack: &mut Vec<String>,
    errors: &mut Vec<LoadError>,
) -> Vec<PolicyRule> {
    if let Some(pos) = stack.iter().position(|m| *m == imp.import) {
        let mut chain = stack[pos..].to_vec();
        chain.push(imp.import.clone());
        errors.push(LoadError::CyclicImport { chain });
        return Vec::new();
    }
    stack.push(imp.import.clone());
    let out = match &imp.tools {
        Some(tools) => tools
            .iter()
            .flat_map(|t| expand(modules, &imp.import, Some(t), stack, errors))
            .collect(),
        None => expand(modules, &imp.import, outer_tool, stack, errors),
    };
    stack.pop();
    out
}

fn instantiate(
    r: &RawRule,
    module: Option<&str>,
    tool: Option<&str>,
    errors: &mut Vec<LoadError>,
) -> Vec<PolicyRule> {
    let pattern = match (tool, &r.tool) {
        (Some(t), _) => t.to_string(),
        (None, Some(t)) => t.clone(),
        (None, None) => {
            if module.is_none() {
                errors.push(LoadError::BadRule {
                    rule: r.id.clone(),
                    message: "missing `tool`".into(),
                });
            }
            "*".to_string()
        }
    };
    let id = match (module, tool) {
        (Some(m), Some(t)) => format!("{m}.{}@{t}", r.id),
        (Some(m), None) => format!("{m}.{}", r.id),
        (None, _) => r.id.clone(),
    };
    vec![PolicyRule {
        id,
        tool: pattern,
        effect: r.effect,
        when: r.when.clone(),
        priority: r.priority,
        reason: r.reason.clone(),
    }]
}
