//! Tree-walking plan evaluator with label propagation.
//!
//! Every value carries a label; every control decision pushes the deciding
//! label onto a program-counter stack so that values written under it are
//! tainted too. Whenever the pc becomes secret the run enters STRICT mode:
//! sensitive calls are denied, confirmed or batched, loops are clamped and
//! padded, and branch timing is equalized to the static worst case.

mod cost;
mod eval;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

pub use cost::static_cost;

use crate::dsl::{assigned_vars, call_sites, Expr, Plan, Span, Stmt, StmtKind};
use crate::label::{join_all, Label, Provenance, SourceKind};
use crate::policy::{evaluate, ConfirmLevel, Decision, Effect, ExceptionPool, GrantException, PolicySet, Tier};
use crate::toolsim::{
    public_projection, BatchHandle, EffectLedger, Environment, ProjectedEntry, Registry, ToolHost, ToolSpec,
};
use crate::value::{CapValue, Data, ResultValue};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrictCallPolicy {
    Deny,
    Confirm,
    BatchPad,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExecConfig {
    pub max_secret_iterations: usize,
    pub strict_call_policy: StrictCallPolicy,
    pub branch_padding: bool,
    /// Ticks charged per executed statement.
    pub stmt_cost: u64,
    /// Turning this off disables STRICT regions entirely.
    pub strict_mode: bool,
    /// Stop at the first error result, the way an exception would unwind.
    pub abort_on_error: bool,
    /// Safety cap for loops outside STRICT regions.
    pub max_loop_iterations: usize,
    pub context: BTreeMap<String, String>,
    pub exceptions: Vec<GrantException>,
    pub jitter_seed: Option<String>,
    pub trace_bindings: bool,
}

impl Default for ExecConfig {
    fn default() -> Self {
        ExecConfig {
            max_secret_iterations: 64,
            strict_call_policy: StrictCallPolicy::Deny,
            branch_padding: true,
            stmt_cost: 1,
            strict_mode: true,
            abort_on_error: false,
            max_loop_iterations: 10_000,
            context: BTreeMap::new(),
            exceptions: Vec::new(),
            jitter_seed: None,
            trace_bindings: false,
        }
    }
}

impl ExecConfig {
    /// No STRICT regions, no padding, errors unwind.
    pub fn unmitigated() -> Self {
        ExecConfig {
            strict_mode: false,
            branch_padding: false,
            abort_on_error: true,
            ..ExecConfig::default()
        }
    }

    pub fn with_policy(mut self, p: StrictCallPolicy) -> Self {
        self.strict_call_policy = p;
        self
    }

    pub fn validate(&self) -> Result<(), ExecError> {
        if self.max_secret_iterations == 0 {
            return Err(ExecError::InvalidConfig("max_secret_iterations must be at least 1".into()));
        }
        if self.stmt_cost == 0 {
            return Err(ExecError::InvalidConfig("stmt_cost must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ExecError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Normal,
    Strict,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind")]
pub enum ViolationKind {
    PolicyDenied { tool: String, rule: String },
    StrictModeDenied { tool: String },
    ConfirmationRejected { tool: String },
    BatchOverflow { tool: String },
    UnknownTool { tool: String },
    NegativeBound { value: i64 },
    NonResultScrutinee { found: String },
    TypeMismatch { expected: String, found: String },
    IterationLimit { limit: usize },
    Aborted { tool: String, code: String },
}

impl ViolationKind {
    fn name(&self) -> &'static str {
        match self {
            ViolationKind::PolicyDenied { .. } => "PolicyDenied",
            ViolationKind::StrictModeDenied { .. } => "StrictModeDenied",
            ViolationKind::ConfirmationRejected { .. } => "ConfirmationRejected",
            ViolationKind::BatchOverflow { .. } => "BatchOverflow",
            ViolationKind::UnknownTool { .. } => "UnknownTool",
            ViolationKind::NegativeBound { .. } => "NegativeBound",
            ViolationKind::NonResultScrutinee { .. } => "NonResultScrutinee",
            ViolationKind::TypeMismatch { .. } => "TypeMismatch",
            ViolationKind::IterationLimit { .. } => "IterationLimit",
            ViolationKind::Aborted { .. } => "Aborted",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PolicyViolation {
    #[serde(flatten)]
    pub kind: ViolationKind,
    pub span: Span,
    pub reason: String,
}

impl PolicyViolation {
    pub fn name(&self) -> &'static str {
        self.kind.name()
    }
}

impl fmt::Display for PolicyViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}: {}", self.span.line, self.span.column, self.name(), self.reason)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Disposition {
    Executed,
    Batched,
    PolicyDenied,
    StrictDenied,
    Rejected,
    Overflow,
    UnknownTool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CallRecord {
    pub span: Span,
    pub tool: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tier: Option<Tier>,
    pub mode: Mode,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decision: Option<Decision>,
    /// Level of the confirmation request issued for this call, if any.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub confirmation: Option<ConfirmLevel>,
    pub disposition: Disposition,
    /// Some argument label, before the pc is applied, is untrusted.
    pub untrusted_args: bool,
    /// Source kinds across the argument labels, before the pc is applied.
    pub arg_sources: BTreeSet<SourceKind>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LoopRecord {
    pub span: Span,
    pub strict: bool,
    pub requested: i64,
    pub executed: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BindingTrace {
    pub name: String,
    pub label: Label,
    pub pc: Label,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExecOutcome {
    pub ticks: u64,
    pub violations: Vec<PolicyViolation>,
    #[serde(rename = "effects", serialize_with = "ledger_entries")]
    pub ledger: EffectLedger,
    pub calls: Vec<CallRecord>,
    pub loops: Vec<LoopRecord>,
    pub strict_regions: usize,
    pub halted: bool,
    pub exceptions_consumed: u32,
    pub final_env: BTreeMap<String, CapValue>,
    pub world: Environment,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub bindings: Vec<BindingTrace>,
}

fn ledger_entries<S: Serializer>(ledger: &EffectLedger, s: S) -> Result<S::Ok, S::Error> {
    ledger.entries().serialize(s)
}

impl ExecOutcome {
    pub fn public_projection(&self) -> Vec<ProjectedEntry> {
        public_projection(&self.ledger)
    }

    pub fn confirmations(&self) -> usize {
        self.calls.iter().filter(|c| c.confirmation.is_some()).count()
    }

    /// Decisions reached by spending a grant exception.
    pub fn downgraded(&self) -> usize {
        self.calls
            .iter()
            .filter(|c| c.decision.as_ref().is_some_and(|d| d.exception.is_some()))
            .count()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("outcome serializes")
    }
}

pub struct ConfirmRequest<'a> {
    pub tool: &'a str,
    pub tier: Tier,
    pub level: ConfirmLevel,
    pub rule: &'a str,
    pub mode: Mode,
    pub args: &'a [CapValue],
}

/// Stand-in for the human asked to approve a call.
pub trait ConfirmationProvider {
    fn confirm(&mut self, request: &ConfirmRequest<'_>) -> bool;
}

pub struct ApproveAll;

impl ConfirmationProvider for ApproveAll {
    fn confirm(&mut self, _: &ConfirmRequest<'_>) -> bool {
        true
    }
}

pub struct RejectAll;

impl ConfirmationProvider for RejectAll {
    fn confirm(&mut self, _: &ConfirmRequest<'_>) -> bool {
        false
    }
}

pub fn execute(
    plan: &Plan,
    bindings: &BTreeMap<String, CapValue>,
    world: Environment,
    registry: &Registry,
    policy: &PolicySet,
    provider: &mut dyn ConfirmationProvider,
    config: &ExecConfig,
) -> Result<ExecOutcome, ExecError> {
    config.validate()?;
    let mut host = ToolHost::new(registry.clone(), world);
    if let Some(seed) = &config.jitter_seed {
        host = host.with_jitter_seed(seed);
    }
    let mut exceptions = policy.exceptions.clone();
    exceptions.extend(config.exceptions.iter().cloned());
    let mut exec = Exec {
        host,
        policy,
        provider,
        config,
        env: bindings.clone(),
        pc: Vec::new(),
        strict_depth: 0,
        batches: Vec::new(),
        violations: Vec::new(),
        seen: BTreeSet::new(),
        calls: Vec::new(),
        loops: Vec::new(),
        pool: ExceptionPool::new(exceptions),
        halted: false,
        strict_regions: 0,
        trace: Vec::new(),
    };
    exec.block(&plan.statements);
    let Exec {
        host,
        env,
        violations,
        calls,
        loops,
        pool,
        halted,
        strict_regions,
        trace,
        ..
    } = exec;
    let (world, ledger) = host.finish();
    Ok(ExecOutcome {
        ticks: ledger.final_tick(),
        violations,
        ledger,
        calls,
        loops,
        strict_regions,
        halted,
        exceptions_consumed: pool.consumed(),
        final_env: env,
        world,
        bindings: trace,
    })
}

struct Exec<'a> {
    host: ToolHost,
    policy: &'a PolicySet,
    provider: &'a mut dyn ConfirmationProvider,
    config: &'a ExecConfig,
    env: BTreeMap<String, CapValue>,
    /// Cumulative joins; the top is the effective pc.
    pc: Vec<Label>,
    strict_depth: usize,
    /// Open batches of the current outermost STRICT region, by call site.
    batches: Vec<(*const Stmt, BatchHandle)>,
    violations: Vec<PolicyViolation>,
    seen: BTreeSet<(&'static str, u32, u32)>,
    calls: Vec<CallRecord>,
    loops: Vec<LoopRecord>,
    pool: ExceptionPool,
    halted: bool,
    strict_regions: usize,
    trace: Vec<BindingTrace>,
}

impl<'a> Exec<'a> {
    fn pc(&self) -> Label {
        self.pc.last().cloned().unwrap_or_else(Label::bottom)
    }

    fn push_pc(&mut self, l: &Label) {
        let top = self.pc().join(l);
        self.pc.push(top);
    }

    fn pop_pc(&mut self) {
        self.pc.pop();
    }

    fn mode(&self) -> Mode {
        if self.strict_depth > 0 {
            Mode::Strict
        } else {
            Mode::Normal
        }
    }

    fn eval(&self, e: &Expr) -> CapValue {
        eval::eval_raw(e, &self.env).raised(&self.pc())
    }

    fn bind(&mut self, name: &str, v: CapValue) {
        let pc = self.pc();
        let v = v.raised(&pc);
        if self.config.trace_bindings {
            self.trace.push(BindingTrace {
                name: name.to_string(),
                label: v.label.clone(),
                pc,
            });
        }
        self.env.insert(name.to_string(), v);
    }

    fn violation(&mut self, kind: ViolationKind, span: Span, reason: impl Into<String>) {
        if self.seen.insert((kind.name(), span.line, span.column)) {
            self.violations.push(PolicyViolation {
                kind,
                span,
                reason: reason.into(),
            });
        }
    }

    fn pad(&mut self, target: u64) {
        if !self.halted {
            self.host.advance_to(target);
        }
    }

    fn static_cost(&self, block: &[Stmt]) -> u64 {
        static_cost(block, self.host.registry(), self.config)
    }

    /// Joins `control` into every bound name the region may have written,
    /// so untaken branches leak nothing through what stayed unchanged.
    fn upgrade(&mut self, names: BTreeSet<String>, control: &Label) {
        for n in names {
            if let Some(v) = self.env.get_mut(&n) {
                v.label = v.label.join(control);
            }
        }
    }

    /// Returns whether the region runs in STRICT mode.
    fn enter(&mut self, control: &Label, blocks: &[&'a [Stmt]]) -> bool {
        if !self.config.strict_mode || (self.strict_depth == 0 && !control.is_secret()) {
            return false;
        }
        if self.strict_depth == 0 {
            self.strict_regions += 1;
            if self.config.strict_call_policy == StrictCallPolicy::BatchPad {
                let pad_to = self.config.max_secret_iterations;
                for block in blocks {
                    for site in call_sites(block) {
                        let StmtKind::Call { tool, .. } = &site.kind else { continue };
                        let eligible = self
                            .host
                            .registry()
                            .get(tool)
                            .is_some_and(|t| t.batchable && t.is_sensitive());
                        if eligible {
                            let h = self.host.begin_batch(tool, pad_to).expect("batchable tool opens a batch");
                            self.batches.push((site as *const Stmt, h));
                        }
                    }
                }
            }
        }
        self.strict_depth += 1;
        true
    }

    fn exit(&mut self, entered: bool) {
        if !entered {
            return;
        }
        self.strict_depth -= 1;
        if self.strict_depth == 0 {
            for (_, h) in std::mem::take(&mut self.batches) {
                self.host.finish_batch(h).expect("open batch flushes");
            }
        }
    }

    fn block(&mut self, block: &'a [Stmt]) {
        for stmt in block {
            if self.halted {
                return;
            }
            self.stmt(stmt);
        }
    }

    fn stmt(&mut self, stmt: &'a Stmt) {
        self.host.charge(self.config.stmt_cost);
        match &stmt.kind {
            StmtKind::Let { name, value } => {
                let v = self.eval(value);
                self.bind(name, v);
            }
            StmtKind::Call { tool, args, bind } => self.call(stmt, tool, args, bind.as_deref()),
            StmtKind::If {
                cond,
                then_branch,
                else_branch,
            } => {
                let c = self.eval(cond);
                let control = c.label.clone();
                let entered = self.enter(&control, &[then_branch, else_branch]);
                let start = self.host.now();
                self.push_pc(&control);
                match c.data {
                    Data::Bool(true) => self.block(then_branch),
                    Data::Bool(false) => self.block(else_branch),
                    _ => self.violation(
                        ViolationKind::TypeMismatch {
                            expected: "bool".into(),
                            found: c.type_name().into(),
                        },
                        stmt.span,
                        "if condition is not a bool; neither branch ran",
                    ),
                }
                self.pop_pc();
                if self.config.branch_padding {
                    let worst = self.static_cost(then_branch).max(self.static_cost(else_branch));
                    self.pad(start + worst);
                }
                let mut names = assigned_vars(then_branch);
                names.extend(assigned_vars(else_branch));
                self.upgrade(names, &control);
                self.exit(entered);
            }
            StmtKind::Match {
                scrutinee,
                ok_arm,
                err_arm,
            } => {
                let s = self.eval(scrutinee);
                let control = s.label.clone();
                let entered = self.enter(&control, &[&ok_arm.body, &err_arm.body]);
                let start = self.host.now();
                self.push_pc(&control);
                match s.data {
                    Data::Result(ResultValue::Ok(payload)) => {
                        self.bind(&ok_arm.binding, payload.raised(&control));
                        self.block(&ok_arm.body);
                    }
                    Data::Result(ResultValue::Error { code, message }) => {
                        let mut fields = BTreeMap::new();
                        fields.insert("code".to_string(), CapValue::text(code, control.clone()));
                        fields.insert("message".to_string(), CapValue::text(message, control.clone()));
                        self.bind(&err_arm.binding, CapValue::record(fields, control.clone()));
                        self.block(&err_arm.body);
                    }
                    other => self.violation(
                        ViolationKind::NonResultScrutinee {
                            found: other.type_name().into(),
                        },
                        stmt.span,
                        "match scrutinee is not a result; neither arm ran",
                    ),
                }
                self.pop_pc();
                if self.config.branch_padding {
                    let worst = self.static_cost(&ok_arm.body).max(self.static_cost(&err_arm.body));
                    self.pad(start + worst);
                }
                let mut names = assigned_vars(&ok_arm.body);
                names.extend(assigned_vars(&err_arm.body));
                names.insert(ok_arm.binding.clone());
                names.insert(err_arm.binding.clone());
                self.upgrade(names, &control);
                self.exit(entered);
            }
            StmtKind::ForRange { var, bound, body } => {
                let b = self.eval(bound);
                let control = b.label.clone();
                let requested = match b.data {
                    Data::Int(v) => v,
                    _ => {
                        self.violation(
                            ViolationKind::TypeMismatch {
                                expected: "int".into(),
                                found: b.type_name().into(),
                            },
                            stmt.span,
                            "loop bound is not an int; body skipped",
                        );
                        0
                    }
                };
                if requested < 0 {
                    self.violation(
                        ViolationKind::NegativeBound { value: requested },
                        stmt.span,
                        format!("loop bound {requested} clamped to zero iterations"),
                    );
                }
                let count = requested.max(0) as u64;
                let items = (0..count).map(|i| CapValue::int(i as i64, control.clone()));
                self.run_loop(stmt, var, &control, requested, items, body);
            }
            StmtKind::ForEach { var, list, body } => {
                let l = self.eval(list);
                let control = l.label.clone();
                let items: Vec<CapValue> = match l.data {
                    Data::List(items) => items,
                    other => {
                        self.violation(
                            ViolationKind::TypeMismatch {
                                expected: "list".into(),
                                found: other.type_name().into(),
                            },
                            stmt.span,
                            "loop target is not a list; body skipped",
                        );
                        Vec::new()
                    }
                };
                let requested = items.len() as i64;
                let items = items.into_iter().map(|v| v.raised(&control));
                self.run_loop(stmt, var, &control, requested, items, body);
            }
        }
    }

    fn run_loop(
        &mut self,
        stmt: &'a Stmt,
        var: &str,
        control: &Label,
        requested: i64,
        items: impl Iterator<Item = CapValue>,
        body: &'a [Stmt],
    ) {
        let entered = self.enter(control, &[body]);
        let cap = if entered {
            self.config.max_secret_iterations
        } else {
            self.config.max_loop_iterations
        };
        if !entered && requested > cap as i64 {
            self.violation(
                ViolationKind::IterationLimit { limit: cap },
                stmt.span,
                format!("loop stopped after {cap} iterations"),
            );
        }
        let start = self.host.now();
        self.push_pc(control);
        let mut executed = 0;
        for item in items.take(cap) {
            if self.halted {
                break;
            }
            self.bind(var, item);
            self.block(body);
            executed += 1;
        }
        self.pop_pc();
        if entered {
            let worst = self.static_cost(body).saturating_mul(cap as u64);
            self.pad(start + worst);
        }
        let mut names = assigned_vars(body);
        names.insert(var.to_string());
        self.upgrade(names, control);
        self.loops.push(LoopRecord {
            span: stmt.span,
            strict: entered,
            requested,
            executed,
        });
        self.exit(entered);
    }

    fn call(&mut self, stmt: &'a Stmt, tool: &str, args: &[Expr], bind: Option<&str>) {
        let pc = self.pc();
        let raw: Vec<CapValue> = args.iter().map(|a| eval::eval_raw(a, &self.env)).collect();
        let arg_labels: Vec<Label> = raw.iter().map(|v| v.label.clone()).collect();
        let untrusted_args = arg_labels.iter().any(Label::is_untrusted);
        let arg_sources: BTreeSet<SourceKind> =
            arg_labels.iter().flat_map(|l| l.sources().iter().map(Provenance::kind)).collect();
        let values: Vec<CapValue> = raw.into_iter().map(|v| v.raised(&pc)).collect();
        let mode = self.mode();
        let base = join_all(values.iter().map(|v| &v.label))
            .join(&pc)
            .with_source(Provenance::tool(tool));

        let Some(spec) = self.host.registry().get(tool).cloned() else {
            self.violation(
                ViolationKind::UnknownTool { tool: tool.into() },
                stmt.span,
                format!("no tool named `{tool}`"),
            );
            self.calls.push(CallRecord {
                span: stmt.span,
                tool: tool.into(),
                tier: None,
                mode,
                decision: None,
                confirmation: None,
                disposition: Disposition::UnknownTool,
                untrusted_args,
                arg_sources,
            });
            self.finish_call(stmt, tool, bind, CapValue::error("UnknownTool", "no such tool", base));
            return;
        };

        // Grants are never spent under secret control: whether one is left
        // must not depend on which branch ran.
        let decision = if mode == Mode::Strict {
            evaluate(&spec, &arg_labels, &pc, &self.config.context, &mut ExceptionPool::default(), self.policy)
        } else {
            evaluate(&spec, &arg_labels, &pc, &self.config.context, &mut self.pool, self.policy)
        };

        let (result, disposition, confirmation) = self.dispatch(stmt, &spec, &decision, &values, &base, mode);
        self.calls.push(CallRecord {
            span: stmt.span,
            tool: tool.into(),
            tier: Some(spec.tier),
            mode,
            decision: Some(decision),
            confirmation,
            disposition,
            untrusted_args,
            arg_sources,
        });
        self.finish_call(stmt, tool, bind, result);
    }

    fn dispatch(
        &mut self,
        stmt: &'a Stmt,
        spec: &ToolSpec,
        decision: &Decision,
        values: &[CapValue],
        base: &Label,
        mode: Mode,
    ) -> (CapValue, Disposition, Option<ConfirmLevel>) {
        let tool = spec.name.as_str();
        let refused = |this: &mut Self, code: &str, msg: String| {
            this.host.charge(spec.worst_case_cost);
            CapValue::error(code, msg, base.clone())
        };
        let level = match &decision.effect {
            Effect::Deny(reason) => {
                self.violation(
                    ViolationKind::PolicyDenied {
                        tool: tool.into(),
                        rule: decision.rule.clone(),
                    },
                    stmt.span,
                    reason.clone(),
                );
                let r = refused(self, "PolicyDenied", reason.clone());
                return (r, Disposition::PolicyDenied, None);
            }
            Effect::Confirm(l) => Some(*l),
            Effect::Allow => None,
        };

        let strict = mode == Mode::Strict && spec.is_sensitive();
        let site = stmt as *const Stmt;
        let batch = self.batches.iter().find(|(s, _)| *s == site).map(|(_, h)| *h);
        let policy = self.config.strict_call_policy;
        if strict && (policy == StrictCallPolicy::Deny || (policy == StrictCallPolicy::BatchPad && batch.is_none())) {
            let why = if policy == StrictCallPolicy::Deny {
                format!("`{tool}` is sensitive and the pc is secret")
            } else {
                format!("`{tool}` cannot be batched under a secret pc")
            };
            self.violation(ViolationKind::StrictModeDenied { tool: tool.into() }, stmt.span, why.clone());
            let r = refused(self, "StrictModeDenied", why);
            return (r, Disposition::StrictDenied, None);
        }

        let level = if strict && policy == StrictCallPolicy::Confirm {
            Some(level.unwrap_or(ConfirmLevel::Single))
        } else {
            level
        };
        if let Some(l) = level {
            let approved = self.provider.confirm(&ConfirmRequest {
                tool,
                tier: spec.tier,
                level: l,
                rule: &decision.rule,
                mode,
                args: values,
            });
            if !approved {
                self.violation(
                    ViolationKind::ConfirmationRejected { tool: tool.into() },
                    stmt.span,
                    format!("confirmation for `{tool}` was declined"),
                );
                let r = refused(self, "ConfirmationRejected", "declined by user".into());
                return (r, Disposition::Rejected, Some(l));
            }
        }

        if let (true, Some(h)) = (strict, batch) {
            return match self.host.batch_push(h, values) {
                Ok(v) => (v, Disposition::Batched, level),
                Err(e) => {
                    self.violation(ViolationKind::BatchOverflow { tool: tool.into() }, stmt.span, e.to_string());
                    let r = refused(self, "BatchOverflow", e.to_string());
                    (r, Disposition::Overflow, level)
                }
            };
        }
        (self.host.invoke(tool, values), Disposition::Executed, level)
    }

    fn finish_call(&mut self, stmt: &Stmt, tool: &str, bind: Option<&str>, result: CapValue) {
        if self.config.abort_on_error {
            if let Data::Result(ResultValue::Error { code, .. }) = &result.data {
                self.violation(
                    ViolationKind::Aborted {
                        tool: tool.into(),
                        code: code.clone(),
                    },
                    stmt.span,
                    format!("`{tool}` failed with {code}; remaining statements skipped"),
                );
                self.halted = true;
            }
        }
        if let Some(name) = bind {
            self.bind(name, result);
        }
    }
}
