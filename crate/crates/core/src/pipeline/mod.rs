//! End-to-end orchestration: screen the prompt, resolve a plan from the cache
//! or the scenario, check it, execute it under policy and audit every output
//! before release. Also hosts the noninterference checker and attack suite.

mod attacks;
pub mod bundled;
mod cache;
mod ni;
mod run;
mod scenario;

use serde::Serialize;
use thiserror::Error;

pub use attacks::{run_attack_suite, AttackClass, ClassResult, LeakEstimate, SuiteReport};
pub use bundled::{Workload, WorkloadItem};
pub use cache::{normalize_prompt, prompt_digest, CacheEntry, CacheStatus, PlanCache, NORMALIZATION_RULE};
pub use ni::{check_noninterference, NiDiff, NiReport, Observation};
pub use run::{
    execute_prepared, load_plan, prepare, run_scenario, ConfirmationSummary, ExpectationCheck, OutputAudit,
    Pipeline, Prepared, QuarantineReport, RunOptions, RunReport,
};
pub use scenario::{
    BindingSpec, ConfirmLogEntry, ConfirmResponse, DocumentRef, Expected, NoninterferenceSpec, PlanSource,
    QuarantineInput, Scenario, ScenarioClass, SchemaRef, ScriptedConfirmations,
};

use crate::dsl::ParseError;
use crate::interpreter::ExecError;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("malformed scenario: {0}")]
    MalformedScenario(String),
    #[error("plan does not parse: {0}")]
    Plan(ParseError),
    #[error("plan fails the static check: {0}")]
    StaticCheck(String),
    #[error(transparent)]
    Exec(ExecError),
    #[error("no binding named `{0}`")]
    SecretNotFound(String),
    #[error("binding `{0}` is not secret")]
    NotSecret(String),
    #[error("{0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WorkloadReport {
    pub workload: String,
    pub runs: Vec<RunReport>,
    pub provider_calls: usize,
    pub cache_hits: usize,
    pub distinct_intents: usize,
}

/// Replays a workload through one pipeline so the plan cache is shared.
pub fn run_workload(pipeline: &mut Pipeline, workload: &Workload) -> Result<WorkloadReport, PipelineError> {
    let before = pipeline.provider_calls;
    let mut runs = Vec::new();
    let mut intents = std::collections::BTreeSet::new();
    for item in &workload.items {
        let mut s = bundled::scenario(&item.scenario)
            .ok_or_else(|| PipelineError::MalformedScenario(format!("unknown scenario `{}`", item.scenario)))?;
        s.prompt = item.prompt.clone();
        intents.insert(normalize_prompt(&item.prompt));
        runs.push(pipeline.run(&s)?);
    }
    Ok(WorkloadReport {
        workload: workload.id.clone(),
        cache_hits: runs.iter().filter(|r| r.cache == CacheStatus::Hit).count(),
        provider_calls: pipeline.provider_calls - before,
        distinct_intents: intents.len(),
        runs,
    })
}
