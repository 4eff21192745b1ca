use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Ok,
    Error(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Visibility {
    Public,
    Internal,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub tick: u64,
    pub tool: String,
    /// Absent for batched entries.
    pub args_digest: Option<String>,
    pub batch_size: usize,
    pub outcome: Outcome,
    pub visibility: Visibility,
}

/// Append-only record of tool invocations, stamped with issue ticks.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EffectLedger {
    entries: Vec<LedgerEntry>,
    final_tick: u64,
}

/// What an outside observer of the external world can see.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ProjectedEntry {
    pub tick: u64,
    pub tool: String,
    pub batch_size: usize,
    pub outcome: Outcome,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub args_digest: Option<String>,
}

impl EffectLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn append(&mut self, entry: LedgerEntry) {
        if let Some(last) = self.entries.last() {
            assert!(entry.tick >= last.tick, "ledger ticks must not decrease");
        }
        self.final_tick = self.final_tick.max(entry.tick);
        self.entries.push(entry);
    }

    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Tick at which the run finished; set when execution closes the ledger.
    pub fn final_tick(&self) -> u64 {
        self.final_tick
    }

    pub fn close(&mut self, tick: u64) {
        assert!(tick >= self.final_tick, "ledger cannot close before its last entry");
        self.final_tick = tick;
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&serde_json::to_string(e).expect("ledger entries serialize"));
            out.push('\n');
        }
        out
    }
}

/// Public entries only. Batched entries never expose a digest.
pub fn public_projection(ledger: &EffectLedger) -> Vec<ProjectedEntry> {
    ledger
        .entries
        .iter()
        .filter(|e| e.visibility == Visibility::Public)
        .map(|e| ProjectedEntry {
            tick: e.tick,
            tool: e.tool.clone(),
            batch_size: e.batch_size,
            outcome: e.outcome.clone(),
            args_digest: if e.batch_size > 1 { None } else { e.args_digest.clone() },
        })
        .collect()
}
