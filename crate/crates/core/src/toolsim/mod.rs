//! Simulated tools on a deterministic tick clock.
//!
//! Every invocation advances the clock by the tool's worst-case cost whatever
//! the outcome, and appends one entry to the [`EffectLedger`]. Batches record
//! a single entry sized to the padding target.

mod env;
mod ledger;
mod registry;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use env::{Environment, Event, FileEntry, Message, Output, Transfer};
pub use ledger::{public_projection, EffectLedger, LedgerEntry, Outcome, ProjectedEntry, Visibility};
pub use registry::{Behavior, ParamType, Registry, RegistryError, ToolSpec};

use crate::label::{join_all, Label, Provenance};
use crate::value::{CapValue, Data, ResultValue};

/// Tool timestamps are truncated to buckets of this many ticks.
pub const TIMESTAMP_BUCKET: u64 = 1000;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SimClock {
    now: u64,
}

impl SimClock {
    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn advance(&mut self, ticks: u64) {
        self.now += ticks;
    }

    pub fn advance_to(&mut self, tick: u64) {
        self.now = self.now.max(tick);
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ToolError {
    #[error("unknown tool `{0}`")]
    UnknownTool(String),
    #[error("tool `{0}` is not batchable")]
    NotBatchable(String),
    #[error("batch for `{tool}` already holds {pad_to} argument sets")]
    BatchFull { tool: String, pad_to: usize },
    #[error("{got} argument sets exceed padding target {pad_to}")]
    TooManyArgsets { got: usize, pad_to: usize },
    #[error("no open batch with handle {0}")]
    NoSuchBatch(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct BatchHandle(usize);

#[derive(Debug, Clone)]
struct OpenBatch {
    tool: String,
    pad_to: usize,
    filled: usize,
}

/// Quantizes timestamps and optionally shifts them by at most one bucket.
#[derive(Debug, Clone)]
struct Jitter {
    rng: ChaCha8Rng,
}

impl Jitter {
    fn seeded(seed: &str) -> Self {
        let digest: [u8; 32] = Sha256::digest(seed.as_bytes()).into();
        Jitter {
            rng: ChaCha8Rng::from_seed(digest),
        }
    }
}

pub fn quantize(ticks: u64) -> u64 {
    ticks / TIMESTAMP_BUCKET * TIMESTAMP_BUCKET
}

/// Environment, registry, clock and ledger for one run.
#[derive(Debug, Clone)]
pub struct ToolHost {
    registry: Registry,
    env: Environment,
    clock: SimClock,
    ledger: EffectLedger,
    jitter: Option<Jitter>,
    batches: BTreeMap<BatchHandle, OpenBatch>,
    next_batch: usize,
}

type Behaved = Result<CapValue, (&'static str, String)>;

impl ToolHost {
    pub fn new(registry: Registry, env: Environment) -> Self {
        ToolHost {
            registry,
            env,
            clock: SimClock::default(),
            ledger: EffectLedger::new(),
            jitter: None,
            batches: BTreeMap::new(),
            next_batch: 0,
        }
    }

    /// Enables ±1 bucket timestamp jitter, seeded deterministically.
    pub fn with_jitter_seed(mut self, seed: &str) -> Self {
        self.jitter = Some(Jitter::seeded(seed));
        self
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    pub fn env(&self) -> &Environment {
        &self.env
    }

    pub fn ledger(&self) -> &EffectLedger {
        &self.ledger
    }

    pub fn now(&self) -> u64 {
        self.clock.now()
    }

    /// Advances the clock for non-tool work (statement costs, padding).
    pub fn charge(&mut self, ticks: u64) {
        self.clock.advance(ticks);
    }

    pub fn advance_to(&mut self, tick: u64) {
        self.clock.advance_to(tick);
    }

    /// Closes the ledger at the current tick and hands back the parts.
    pub fn finish(mut self) -> (Environment, EffectLedger) {
        let handles: Vec<BatchHandle> = self.batches.keys().copied().collect();
        for h in handles {
            let _ = self.finish_batch(h);
        }
        self.ledger.close(self.clock.now());
        (self.env, self.ledger)
    }

    /// Runs one tool call. Never traps: unknown tools, bad arguments and
    /// behavior failures all come back as error results.
    pub fn invoke(&mut self, name: &str, args: &[CapValue]) -> CapValue {
        let arg_label = join_all(args.iter().map(|a| &a.label));
        let Some(spec) = self.registry.get(name).cloned() else {
            return CapValue::error("UnknownTool", format!("no tool named `{name}`"), arg_label);
        };
        let issued = self.clock.now();
        let digest = args_digest(args);
        let result = self.apply(&spec, args);
        self.clock.advance(spec.worst_case_cost);
        let outcome = match &result {
            Ok(_) => Outcome::Ok,
            Err((code, _)) => Outcome::Error(code.to_string()),
        };
        self.ledger.append(LedgerEntry {
            tick: issued,
            tool: spec.name.clone(),
            args_digest: Some(digest),
            batch_size: 1,
            outcome,
            visibility: visibility(&spec),
        });
        self.wrap(&spec, &arg_label, result)
    }

    pub fn begin_batch(&mut self, name: &str, pad_to: usize) -> Result<BatchHandle, ToolError> {
        let spec = self
            .registry
            .get(name)
            .ok_or_else(|| ToolError::UnknownTool(name.to_string()))?;
        if !spec.batchable {
            return Err(ToolError::NotBatchable(name.to_string()));
        }
        let handle = BatchHandle(self.next_batch);
        self.next_batch += 1;
        self.batches.insert(
            handle,
            OpenBatch {
                tool: name.to_string(),
                pad_to,
                filled: 0,
            },
        );
        Ok(handle)
    }

    /// Applies one argument set inside an open batch. No clock or ledger effect.
    pub fn batch_push(&mut self, handle: BatchHandle, args: &[CapValue]) -> Result<CapValue, ToolError> {
        let batch = self
            .batches
            .get_mut(&handle)
            .ok_or(ToolError::NoSuchBatch(handle.0))?;
        if batch.filled >= batch.pad_to {
            return Err(ToolError::BatchFull {
                tool: batch.tool.clone(),
                pad_to: batch.pad_to,
            });
        }
        batch.filled += 1;
        let spec = self
            .registry
            .get(&batch.tool)
            .cloned()
            .expect("batched tool is registered");
        let arg_label = join_all(args.iter().map(|a| &a.label));
        let result = self.apply(&spec, args);
        Ok(self.wrap(&spec, &arg_label, result))
    }

    /// Emits the single padded ledger entry and charges one worst-case cost.
    pub fn finish_batch(&mut self, handle: BatchHandle) -> Result<(), ToolError> {
        let batch = self
            .batches
            .remove(&handle)
            .ok_or(ToolError::NoSuchBatch(handle.0))?;
        let spec = self
            .registry
            .get(&batch.tool)
            .cloned()
            .expect("batched tool is registered");
        self.ledger.append(LedgerEntry {
            tick: self.clock.now(),
            tool: spec.name.clone(),
            args_digest: None,
            batch_size: batch.pad_to,
            outcome: Outcome::Ok,
            visibility: visibility(&spec),
        });
        self.clock.advance(spec.worst_case_cost);
        Ok(())
    }

    /// One bulk request for `argsets`, padded with no-op slots to `pad_to`.
    pub fn invoke_batch(
        &mut self,
        name: &str,
        argsets: &[Vec<CapValue>],
        pad_to: usize,
    ) -> Result<Vec<CapValue>, ToolError> {
        if argsets.len() > pad_to {
            return Err(ToolError::TooManyArgsets {
                got: argsets.len(),
                pad_to,
            });
        }
        let handle = self.begin_batch(name, pad_to)?;
        let results = argsets
            .iter()
            .map(|args| self.batch_push(handle, args))
            .collect::<Result<Vec<_>, _>>()?;
        self.finish_batch(handle)?;
        Ok(results)
    }

    fn wrap(&self, spec: &ToolSpec, arg_label: &Label, result: Behaved) -> CapValue {
        let mut base = arg_label.clone().with_source(Provenance::tool(&spec.name));
        if !spec.trusted_output {
            base = base.untrusted();
        }
        match result {
            Ok(payload) => CapValue::result(ResultValue::ok(payload.raised(&base)), base),
            Err((code, msg)) => CapValue::error(code, msg, base),
        }
    }

    fn apply(&mut self, spec: &ToolSpec, args: &[CapValue]) -> Behaved {
        if args.len() != spec.arity() {
            return Err((
                "BadArity",
                format!("`{}` takes {} arguments, got {}", spec.name, spec.arity(), args.len()),
            ));
        }
        for (i, (p, a)) in spec.params.iter().zip(args).enumerate() {
            let ok = match p {
                ParamType::Int => matches!(a.data, Data::Int(_)),
                ParamType::Text => matches!(a.data, Data::Text(_)),
                ParamType::Any => true,
            };
            if !ok {
                return Err((
                    "BadArgument",
                    format!("argument {i} of `{}` has type {}", spec.name, a.type_name()),
                ));
            }
        }
        let bottom = Label::bottom;
        let text = |i: usize| args[i].as_text().unwrap_or_default().to_string();
        match spec.behavior {
            Behavior::ListCalendar => {
                let items = self
                    .env
                    .calendar
                    .iter()
                    .map(|e| {
                        let mut rec = BTreeMap::new();
                        rec.insert("title".to_string(), CapValue::text(&e.title, bottom()));
                        rec.insert("start".to_string(), CapValue::int(e.start, bottom()));
                        CapValue::record(rec, bottom())
                    })
                    .collect();
                Ok(CapValue::list(items, bottom()))
            }
            Behavior::ListInbox => {
                let items = self
                    .env
                    .inbox
                    .iter()
                    .map(|m| {
                        let origin = Label::public([Provenance::external(&m.from)]);
                        let mut rec = BTreeMap::new();
                        for (k, v) in [("from", &m.from), ("to", &m.to), ("subject", &m.subject), ("body", &m.body)] {
                            rec.insert(k.to_string(), CapValue::text(v, origin.clone()));
                        }
                        CapValue::record(rec, origin)
                    })
                    .collect();
                Ok(CapValue::list(items, bottom()))
            }
            Behavior::ReadFile => {
                let path = text(0);
                match self.env.files.get(&path) {
                    Some(f) => Ok(CapValue::text(&f.content, f.label())),
                    None => Err(("NotFound", format!("no file at {path}"))),
                }
            }
            Behavior::LookupRecord => {
                let key = args[0].as_int().unwrap_or_default();
                match self.env.records.get(&key) {
                    Some(r) => Ok(CapValue::text(r, bottom())),
                    None => Err(("NotFound", format!("no record {key}"))),
                }
            }
            Behavior::CurrentTime => {
                let mut t = quantize(self.clock.now());
                if let Some(j) = self.jitter.as_mut() {
                    match j.rng.gen_range(-1i8..=1) {
                        -1 => t = t.saturating_sub(TIMESTAMP_BUCKET),
                        1 => t += TIMESTAMP_BUCKET,
                        _ => {}
                    }
                }
                Ok(CapValue::int(t as i64, bottom()))
            }
            Behavior::Respond => {
                self.env.outputs.push(Output {
                    text: args[0].to_string(),
                    label: args[0].label.clone(),
                });
                Ok(CapValue::bool(true, bottom()))
            }
            Behavior::MoveFile => {
                let (path, folder) = (text(0), text(1));
                let Some(mut entry) = self.env.files.remove(&path) else {
                    return Err(("NotFound", format!("no file at {path}")));
                };
                let base = path.rsplit('/').next().unwrap_or(&path);
                let dest = format!("{}/{}", folder.trim_end_matches('/'), base);
                entry.shared = dest.starts_with("/shared/");
                self.env.files.insert(dest.clone(), entry);
                Ok(CapValue::text(dest, bottom()))
            }
            Behavior::Fetch => {
                let url = text(0);
                self.env.fetch_log.push(url.clone());
                Ok(CapValue::text(
                    format!("200 {url}"),
                    Label::public([Provenance::external("web")]),
                ))
            }
            Behavior::SendEmail => {
                let to = text(0);
                if !valid_recipient(&to) {
                    return Err(("InvalidRecipient", format!("cannot deliver to `{to}`")));
                }
                self.env.outbox.push(Message {
                    from: "user".into(),
                    to,
                    subject: text(1),
                    body: text(2),
                });
                Ok(CapValue::text("sent", bottom()))
            }
            Behavior::WireTransfer => {
                let amount = args[1].as_int().unwrap_or_default();
                if amount <= 0 {
                    return Err(("InvalidAmount", format!("amount must be positive, got {amount}")));
                }
                self.env.transfers.push(Transfer {
                    account: text(0),
                    amount,
                });
                Ok(CapValue::text("confirmed", bottom()))
            }
        }
    }
}

fn visibility(spec: &ToolSpec) -> Visibility {
    if spec.externally_visible {
        Visibility::Public
    } else {
        Visibility::Internal
    }
}

fn valid_recipient(to: &str) -> bool {
    let mut parts = to.split('@');
    matches!((parts.next(), parts.next(), parts.next()), (Some(l), Some(d), None) if !l.is_empty() && !d.is_empty())
        && !to.contains(char::is_whitespace)
}

/// Short content digest of call arguments (data only, labels excluded).
pub fn args_digest(args: &[CapValue]) -> String {
    let mut h = Sha256::new();
    for a in args {
        h.update(a.type_name().as_bytes());
        h.update(b":");
        h.update(a.to_string().as_bytes());
        h.update(b"\x00");
    }
    hex::encode(&h.finalize()[..8])
}
