use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::Serialize;

use crate::dsl::{parse, static_check, CheckConfig, Plan, Violation};
use crate::guards::{audit_output, screen_prompt, AuditFinding, AuditKind, AuditVerdict, GuardConfig, ScreenReport, Verdict};
use crate::interpreter::{execute, ConfirmationProvider, Disposition, ExecConfig, ExecOutcome};
use crate::label::join_all;
use crate::policy::{default_policy, PolicySet};
use crate::quarantine::{extract_batch, SchemaError};
use crate::toolsim::{Environment, Registry};
use crate::value::CapValue;

use super::cache::{CacheStatus, PlanCache};
use super::scenario::{ConfirmLogEntry, DocumentRef, Scenario, ScriptedConfirmations};
use super::PipelineError;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct RunOptions {
    /// Release every output without waiting for the audit verdict.
    pub naive_release: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct QuarantineReport {
    /// Batched extraction calls; one per quarantine input.
    pub invocations: usize,
    pub extracted: usize,
    pub errors: Vec<SchemaError>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OutputAudit {
    pub output: usize,
    pub verdict: AuditVerdict,
    pub findings: Vec<AuditFinding>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConfirmationSummary {
    pub requested: usize,
    pub consumed: usize,
    pub log: Vec<ConfirmLogEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExpectationCheck {
    pub met: bool,
    pub mismatches: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub scenario: String,
    pub screen: ScreenReport,
    /// Answer to a Flag verdict, when there was one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flag_approved: Option<bool>,
    pub cache: CacheStatus,
    pub provider_calls: usize,
    pub quarantine: QuarantineReport,
    pub static_violations: Vec<Violation>,
    pub outcome: Option<ExecOutcome>,
    /// Tool confirmations only; a flag resolution is reported separately.
    pub confirmations: ConfirmationSummary,
    pub audits: Vec<OutputAudit>,
    pub released: Vec<String>,
    pub withheld: usize,
    pub completed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expectation: Option<ExpectationCheck>,
}

impl RunReport {
    fn stopped(scenario: &Scenario, screen: ScreenReport) -> Self {
        RunReport {
            scenario: scenario.id.clone(),
            screen,
            flag_approved: None,
            cache: CacheStatus::NotConsulted,
            provider_calls: 0,
            quarantine: QuarantineReport::default(),
            static_violations: Vec::new(),
            outcome: None,
            confirmations: ConfirmationSummary {
                requested: 0,
                consumed: 0,
                log: Vec::new(),
            },
            audits: Vec::new(),
            released: Vec::new(),
            withheld: 0,
            completed: false,
            expectation: None,
        }
    }

    /// Calls that were not carried out.
    pub fn blocked_calls(&self) -> usize {
        self.outcome.as_ref().map_or(0, |o| {
            o.calls
                .iter()
                .filter(|c| !matches!(c.disposition, Disposition::Executed | Disposition::Batched))
                .count()
        })
    }

    pub fn finding_kinds(&self) -> BTreeSet<AuditKind> {
        self.audits.iter().flat_map(|a| a.findings.iter().map(|f| f.kind)).collect()
    }

    /// The run was stopped or contained somewhere along the way.
    pub fn intercepted(&self) -> bool {
        self.screen.verdict == Verdict::Block
            || self.flag_approved == Some(false)
            || !self.static_violations.is_empty()
            || self.blocked_calls() > 0
            || self.withheld > 0
            || self.outcome.as_ref().is_some_and(|o| o.halted)
    }

    pub fn expectation_met(&self) -> bool {
        self.expectation.as_ref().map_or(true, |e| e.met)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "scenario   {}", self.scenario);
        let _ = writeln!(s, "screen     {:?}", self.screen.verdict);
        if let Some(a) = self.flag_approved {
            let _ = writeln!(s, "flag       {}", if a { "approved" } else { "rejected" });
        }
        let _ = writeln!(s, "cache      {:?} (provider calls {})", self.cache, self.provider_calls);
        if self.quarantine.invocations > 0 {
            let q = &self.quarantine;
            let _ = writeln!(
                s,
                "quarantine {} call(s), {} extracted, {} rejected",
                q.invocations,
                q.extracted,
                q.errors.len()
            );
        }
        for v in &self.static_violations {
            let _ = writeln!(s, "static     {}:{} {:?}", v.span.line, v.span.column, v.kind);
        }
        if let Some(o) = &self.outcome {
            let _ = writeln!(s, "ticks      {}", o.ticks);
            let _ = writeln!(s, "effects    {} ledger entries, {} public", o.ledger.len(), o.public_projection().len());
            for c in &o.calls {
                let _ = writeln!(s, "call       {} {:?} {:?}", c.tool, c.mode, c.disposition);
            }
            for v in &o.violations {
                let _ = writeln!(s, "violation  {v}");
            }
        }
        let _ = writeln!(
            s,
            "confirm    {} requested, {} answered",
            self.confirmations.requested, self.confirmations.consumed
        );
        for a in &self.audits {
            let _ = writeln!(s, "audit      output {} {:?} {} finding(s)", a.output, a.verdict, a.findings.len());
        }
        let _ = writeln!(s, "released   {} withheld {}", self.released.len(), self.withheld);
        let _ = writeln!(s, "completed  {}", self.completed);
        if let Some(e) = &self.expectation {
            let _ = writeln!(s, "expected   {}", if e.met { "met" } else { "NOT met" });
            for m in &e.mismatches {
                let _ = writeln!(s, "  - {m}");
            }
        }
        s
    }
}

/// Everything needed to execute a scenario's plan, minus the plan.
pub struct Prepared {
    pub bindings: BTreeMap<String, CapValue>,
    pub world: Environment,
    pub config: ExecConfig,
    pub quarantine: QuarantineReport,
}

/// Builds initial bindings (including quarantine extractions), the world
/// and the per-scenario execution config.
pub fn prepare(scenario: &Scenario, base: &ExecConfig) -> Result<Prepared, PipelineError> {
    let malformed = |m: String| PipelineError::MalformedScenario(format!("{}: {m}", scenario.id));
    let mut bindings = BTreeMap::new();
    for (name, spec) in &scenario.bindings {
        let v = CapValue::from_json(&spec.value, &spec.label)
            .ok_or_else(|| malformed(format!("binding `{name}` has an unsupported value (null or float)")))?;
        bindings.insert(name.clone(), v);
    }

    let mut quarantine = QuarantineReport::default();
    for q in &scenario.quarantine {
        let schema = scenario.schema(&q.schema)?;
        let items: Vec<_> = q
            .documents
            .iter()
            .map(|d| match d {
                DocumentRef::Upload { upload } => {
                    (scenario.uploads[upload].clone(), crate::label::Provenance::upload(upload))
                }
                DocumentRef::Text { text, origin } => (text.clone(), origin.clone()),
            })
            .collect();
        quarantine.invocations += 1;
        let mut records = Vec::new();
        for r in extract_batch(&schema, &items) {
            match r {
                Ok(x) => {
                    quarantine.warnings.extend(x.warnings);
                    records.push(x.value);
                }
                Err(e) => quarantine.errors.push(e),
            }
        }
        quarantine.extracted += records.len();
        let label = join_all(records.iter().map(|r| &r.label));
        bindings.insert(q.bind.clone(), CapValue::list(records, label));
    }

    let mut world = scenario.environment.clone();
    for (id, content) in &scenario.uploads {
        world.add_upload(id, content);
    }

    let mut config = base.clone();
    config.context.extend(scenario.context.clone());
    config.exceptions.extend(scenario.exceptions.iter().cloned());
    if config.jitter_seed.is_none() {
        config.jitter_seed = Some(scenario.id.clone());
    }
    Ok(Prepared {
        bindings,
        world,
        config,
        quarantine,
    })
}

/// Parses a plan and runs the static check against the registry and the
/// names bound before the plan starts.
pub fn load_plan(
    source: &str,
    registry: &Registry,
    predeclared: impl IntoIterator<Item = String>,
) -> Result<(Plan, Vec<Violation>), PipelineError> {
    let plan = parse(source).map_err(PipelineError::Plan)?;
    let violations = static_check(&plan, &registry.signatures(), &CheckConfig::with_names(predeclared));
    Ok((plan, violations))
}

pub fn execute_prepared(
    plan: &Plan,
    prepared: &Prepared,
    registry: &Registry,
    policy: &PolicySet,
    provider: &mut dyn ConfirmationProvider,
) -> Result<ExecOutcome, PipelineError> {
    execute(
        plan,
        &prepared.bindings,
        prepared.world.clone(),
        registry,
        policy,
        provider,
        &prepared.config,
    )
    .map_err(PipelineError::Exec)
}

/// Secret text the audit should look for in outputs.
fn secrets_of(prepared: &Prepared) -> Vec<String> {
    let mut out = Vec::new();
    for v in prepared.bindings.values() {
        v.secret_texts(&mut out);
    }
    for f in prepared.world.files.values() {
        if f.label().is_secret() {
            out.push(f.content.clone());
        }
    }
    out.sort();
    out.dedup();
    out
}

/// Screening, plan resolution, checking, execution and release, with a plan
/// cache that lives as long as the pipeline.
pub struct Pipeline {
    pub registry: Registry,
    pub policy: PolicySet,
    pub config: ExecConfig,
    pub guards: GuardConfig,
    pub cache: PlanCache,
    pub options: RunOptions,
    /// Cache misses so far, standing in for planner invocations.
    pub provider_calls: usize,
}

impl Pipeline {
    pub fn new(policy: PolicySet, config: ExecConfig) -> Self {
        Pipeline {
            registry: Registry::standard(),
            policy,
            config,
            guards: GuardConfig::bundled(),
            cache: PlanCache::new(),
            options: RunOptions::default(),
            provider_calls: 0,
        }
    }

    pub fn with_defaults() -> Self {
        Pipeline::new(default_policy(), ExecConfig::default())
    }

    pub fn run(&mut self, scenario: &Scenario) -> Result<RunReport, PipelineError> {
        let mut report = self.run_stages(scenario)?;
        report.expectation = scenario.expected.as_ref().map(|exp| {
            let mut mismatches = Vec::new();
            if report.completed != exp.completed {
                mismatches.push(format!("completed: expected {}, got {}", exp.completed, report.completed));
            }
            if let Some(n) = exp.blocked_calls {
                if report.blocked_calls() != n {
                    mismatches.push(format!("blocked calls: expected {n}, got {}", report.blocked_calls()));
                }
            }
            if let Some(kinds) = &exp.findings {
                let want: BTreeSet<AuditKind> = kinds.iter().copied().collect();
                let got = report.finding_kinds();
                if want != got {
                    mismatches.push(format!("findings: expected {want:?}, got {got:?}"));
                }
            }
            ExpectationCheck {
                met: mismatches.is_empty(),
                mismatches,
            }
        });
        Ok(report)
    }

    fn run_stages(&mut self, scenario: &Scenario) -> Result<RunReport, PipelineError> {
        let prepared = prepare(scenario, &self.config)?;
        let mut script = ScriptedConfirmations::new(&scenario.confirmations, scenario.mfa_token.as_deref());

        let screen = screen_prompt(&scenario.prompt, &self.guards).without_timing();
        if screen.verdict == Verdict::Block {
            return Ok(RunReport::stopped(scenario, screen));
        }
        let flag_approved = (screen.verdict == Verdict::Flag).then(|| script.resolve_flag());
        if flag_approved == Some(false) {
            let mut r = RunReport::stopped(scenario, screen);
            r.flag_approved = flag_approved;
            return Ok(r);
        }
        let flag_log = script.log.len();

        let (source, cache, provider_calls) = match self.cache.lookup(&scenario.prompt) {
            Some(src) => (src, CacheStatus::Hit, 0),
            None => {
                let src = scenario.plan_text()?;
                self.provider_calls += 1;
                (src, CacheStatus::Miss, 1)
            }
        };
        let (plan, static_violations) = load_plan(&source, &self.registry, prepared.bindings.keys().cloned())?;
        if cache == CacheStatus::Miss && static_violations.is_empty() {
            self.cache.insert(&scenario.prompt, &source, scenario.cacheable);
        }

        let mut report = RunReport {
            flag_approved,
            cache,
            provider_calls,
            quarantine: prepared.quarantine.clone(),
            ..RunReport::stopped(scenario, screen)
        };
        if !static_violations.is_empty() {
            report.static_violations = static_violations;
            return Ok(report);
        }

        let outcome = execute_prepared(&plan, &prepared, &self.registry, &self.policy, &mut script)?;
        let secrets = secrets_of(&prepared);
        let first_new = prepared.world.outputs.len();
        let mut all_clean = true;
        for (i, out) in outcome.world.outputs.iter().enumerate().skip(first_new) {
            let audit = audit_output(&out.text, &secrets, &scenario.id, &self.guards);
            let clean = audit.is_clean();
            all_clean &= clean;
            if clean || self.options.naive_release {
                report.released.push(out.text.clone());
            } else {
                report.withheld += 1;
            }
            report.audits.push(OutputAudit {
                output: i - first_new,
                verdict: audit.verdict,
                findings: audit.findings,
            });
        }

        let tool_log: Vec<ConfirmLogEntry> = script.log[flag_log..].to_vec();
        report.confirmations = ConfirmationSummary {
            requested: tool_log.len(),
            consumed: tool_log.iter().filter(|e| e.response.is_some()).count(),
            log: tool_log,
        };
        report.completed = outcome.violations.is_empty() && (all_clean || self.options.naive_release);
        report.outcome = Some(outcome);
        Ok(report)
    }
}

/// Runs one scenario through a fresh pipeline.
pub fn run_scenario(scenario: &Scenario, policy: &PolicySet, config: &ExecConfig) -> Result<RunReport, PipelineError> {
    Pipeline::new(policy.clone(), config.clone()).run(scenario)
}
