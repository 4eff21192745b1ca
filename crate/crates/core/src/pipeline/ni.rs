use serde::Serialize;

use crate::interpreter::ExecConfig;
use crate::policy::PolicySet;
use crate::toolsim::{ProjectedEntry, Registry};
use crate::value::CapValue;

use super::run::{execute_prepared, load_plan, prepare};
use super::scenario::{Scenario, ScriptedConfirmations};
use super::PipelineError;

/// What an outside observer sees of one run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Observation {
    pub value: serde_json::Value,
    pub ticks: u64,
    pub projection: Vec<ProjectedEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NiDiff {
    /// Index into `observations` of the run that disagrees with the first.
    pub run: usize,
    /// First projection index where the two runs differ, if they do.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub entry: Option<usize>,
    pub left: Option<ProjectedEntry>,
    pub right: Option<ProjectedEntry>,
    pub lengths: (usize, usize),
    pub ticks: (u64, u64),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NiReport {
    pub scenario: String,
    pub secret: String,
    pub pass: bool,
    pub observations: Vec<Observation>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diff: Option<NiDiff>,
}

impl NiReport {
    /// log2 of the number of distinct observations.
    pub fn leaked_bits(&self) -> f64 {
        let mut distinct: Vec<(&u64, &Vec<ProjectedEntry>)> = Vec::new();
        for o in &self.observations {
            if !distinct.contains(&(&o.ticks, &o.projection)) {
                distinct.push((&o.ticks, &o.projection));
            }
        }
        (distinct.len().max(1) as f64).log2()
    }
}

fn compare(a: &Observation, b: &Observation, run: usize) -> Option<NiDiff> {
    if a.ticks == b.ticks && a.projection == b.projection {
        return None;
    }
    let entry = (0..a.projection.len().max(b.projection.len())).find(|&i| a.projection.get(i) != b.projection.get(i));
    Some(NiDiff {
        run,
        entry,
        left: entry.and_then(|i| a.projection.get(i).cloned()),
        right: entry.and_then(|i| b.projection.get(i).cloned()),
        lengths: (a.projection.len(), b.projection.len()),
        ticks: (a.ticks, b.ticks),
    })
}

/// Runs the scenario once per value of the secret binding and compares what
/// an external observer sees: the public ledger projection and total ticks.
pub fn check_noninterference(
    scenario: &Scenario,
    secret: &str,
    values: &[serde_json::Value],
    policy: &PolicySet,
    config: &ExecConfig,
) -> Result<NiReport, PipelineError> {
    let registry = Registry::standard();
    let spec = scenario
        .bindings
        .get(secret)
        .ok_or_else(|| PipelineError::SecretNotFound(secret.to_string()))?;
    if !spec.label.is_secret() {
        return Err(PipelineError::NotSecret(secret.to_string()));
    }
    if values.len() < 2 {
        return Err(PipelineError::MalformedScenario("noninterference needs at least two values".into()));
    }
    let source = scenario.plan_text()?;
    let mut prepared = prepare(scenario, config)?;
    let (plan, violations) = load_plan(&source, &registry, prepared.bindings.keys().cloned())?;
    if let Some(v) = violations.first() {
        return Err(PipelineError::StaticCheck(format!("{}:{} {:?}", v.span.line, v.span.column, v.kind)));
    }

    let mut observations = Vec::new();
    for value in values {
        let v = CapValue::from_json(value, &spec.label)
            .ok_or_else(|| PipelineError::MalformedScenario(format!("unsupported secret value {value}")))?;
        prepared.bindings.insert(secret.to_string(), v);
        let mut script = ScriptedConfirmations::new(&scenario.confirmations, scenario.mfa_token.as_deref());
        let outcome = execute_prepared(&plan, &prepared, &registry, policy, &mut script)?;
        observations.push(Observation {
            value: value.clone(),
            ticks: outcome.ticks,
            projection: outcome.public_projection(),
        });
    }
    let diff = observations
        .iter()
        .enumerate()
        .skip(1)
        .find_map(|(i, o)| compare(&observations[0], o, i));
    Ok(NiReport {
        scenario: scenario.id.clone(),
        secret: secret.to_string(),
        pass: diff.is_none(),
        observations,
        diff,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interpreter::StrictCallPolicy;
    use crate::policy::default_policy;

    fn loop_scenario() -> Scenario {
        Scenario::from_json(
            r#"{"id": "loop", "prompt": "ping the tracker",
                "bindings": {"n": {"value": 3, "label": {"sources": [{"kind": "user"}], "readers": ["alice"]}}},
                "plan": {"inline": "for i in range(n) { call fetch(\"https://tracker.example/ping\") }"}}"#,
        )
        .unwrap()
    }

    fn values() -> Vec<serde_json::Value> {
        vec![3.into(), 7.into()]
    }

    #[test]
    fn unmitigated_loop_leaks_the_count() {
        let r = check_noninterference(&loop_scenario(), "n", &values(), &default_policy(), &ExecConfig::unmitigated())
            .unwrap();
        assert!(!r.pass);
        let d = r.diff.as_ref().unwrap();
        assert_eq!(d.lengths, (3, 7));
        assert_eq!(d.entry, Some(3));
        assert_eq!(r.leaked_bits(), 1.0);
    }

    #[test]
    fn mitigations_close_the_loop_channel() {
        for p in [StrictCallPolicy::BatchPad, StrictCallPolicy::Deny] {
            let config = ExecConfig::default().with_policy(p);
            let r = check_noninterference(&loop_scenario(), "n", &values(), &default_policy(), &config).unwrap();
            assert!(r.pass, "{p:?}: {:?}", r.diff);
            assert_eq!(r.leaked_bits(), 0.0);
        }
    }

    #[test]
    fn secret_must_exist_and_be_secret() {
        let s = loop_scenario();
        let e = check_noninterference(&s, "m", &values(), &default_policy(), &ExecConfig::default());
        assert!(matches!(e, Err(PipelineError::SecretNotFound(_))));
        let mut public = s.clone();
        public.bindings.get_mut("n").unwrap().label = crate::label::Label::bottom();
        let e = check_noninterference(&public, "n", &values(), &default_policy(), &ExecConfig::default());
        assert!(matches!(e, Err(PipelineError::NotSecret(_))));
    }

    #[test]
    fn secret_independent_plan_passes() {
        let mut s = loop_scenario();
        s.plan = super::super::scenario::PlanSource::Inline("call fetch(\"https://a.example\")".into());
        let r = check_noninterference(&s, "n", &values(), &default_policy(), &ExecConfig::unmitigated()).unwrap();
        assert!(r.pass);
    }
}
