use std::collections::BTreeMap;

use serde::Serialize;
use sha2::{Digest, Sha256};
use unicode_normalization::UnicodeNormalization;

/// Identifies the normalization applied before hashing.
pub const NORMALIZATION_RULE: &str = "nfc-lower-ws-trim-punct/1";

const TERMINAL_PUNCTUATION: &[char] = &['.', '!', '?', ';', ':', ',', '…', '。', '！', '？'];

/// Lowercase, NFC, single spaces, trimmed, trailing punctuation removed.
pub fn normalize_prompt(text: &str) -> String {
    let nfc: String = text.nfc().collect::<String>().to_lowercase();
    let collapsed = nfc.split_whitespace().collect::<Vec<_>>().join(" ");
    collapsed
        .trim_end_matches(|c: char| TERMINAL_PUNCTUATION.contains(&c) || c.is_whitespace())
        .to_string()
}

pub fn prompt_digest(normalized: &str) -> String {
    hex::encode(Sha256::digest(normalized.as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CacheEntry {
    pub normalized_prompt: String,
    pub plan_source: String,
    pub known_safe: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CacheStatus {
    Hit,
    Miss,
    /// The run stopped before a plan was needed.
    NotConsulted,
}

/// Known-safe plans keyed by the SHA-256 of the normalized prompt.
#[derive(Debug, Clone, Default, Serialize)]
pub struct PlanCache {
    entries: BTreeMap<String, CacheEntry>,
    pub hits: usize,
    pub misses: usize,
}

impl PlanCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn rule(&self) -> &'static str {
        NORMALIZATION_RULE
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// A servable plan for `prompt`. The entry's digest is recomputed from
    /// its stored prompt and compared on every hit.
    pub fn lookup(&mut self, prompt: &str) -> Option<String> {
        let normalized = normalize_prompt(prompt);
        let key = prompt_digest(&normalized);
        let served = self.entries.get(&key).and_then(|e| {
            let sound = e.known_safe && e.normalized_prompt == normalized && prompt_digest(&e.normalized_prompt) == key;
            sound.then(|| e.plan_source.clone())
        });
        if served.is_some() {
            self.hits += 1;
        } else {
            self.misses += 1;
        }
        served
    }

    /// Stores a plan. Returns false, storing nothing, unless it is known-safe.
    pub fn insert(&mut self, prompt: &str, plan_source: &str, known_safe: bool) -> bool {
        if !known_safe {
            return false;
        }
        let normalized = normalize_prompt(prompt);
        self.entries.insert(
            prompt_digest(&normalized),
            CacheEntry {
                normalized_prompt: normalized,
                plan_source: plan_source.to_string(),
                known_safe,
            },
        );
        true
    }

    #[cfg(test)]
    fn tamper(&mut self, prompt: &str, replacement: &str) {
        let key = prompt_digest(&normalize_prompt(prompt));
        if let Some(e) = self.entries.get_mut(&key) {
            e.normalized_prompt = replacement.to_string();
        }
    }
}
