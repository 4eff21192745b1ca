//! Conversation-boundary defenses: prompt screening before planning and an
//! output audit before anything is released.

mod audit;
mod screen;
pub mod text;

use std::collections::BTreeMap;

use once_cell::sync::Lazy;
use regex::Regex;
use thiserror::Error;

pub use audit::{audit_output, AuditFinding, AuditKind, AuditReport, AuditVerdict, CharSpan};
pub use screen::{screen_prompt, ScreenReport, Signal, SignalKind, Verdict, MAX_PROMPT_BYTES};
pub use text::Reputation;

use text::BigramModel;

pub const PHRASES_TSV: &str = include_str!("../../data/guards/phrases.tsv");
pub const REPUTATION_CSV: &str = include_str!("../../data/guards/reputation.csv");
pub const BIGRAMS_TSV: &str = include_str!("../../data/guards/bigrams.tsv");

#[derive(Debug, Error)]
pub enum GuardDataError {
    #[error("{file}: {message}")]
    Parse { file: &'static str, message: String },
}

fn parse_err(file: &'static str, message: impl ToString) -> GuardDataError {
    GuardDataError::Parse {
        file,
        message: message.to_string(),
    }
}

#[derive(Debug, Clone)]
pub struct Phrase {
    pub text: String,
    pub weight: f64,
    pattern: Regex,
}

impl Phrase {
    pub fn new(text: &str, weight: f64) -> Self {
        let words: Vec<String> = text.split_whitespace().map(|w| regex::escape(&w.to_lowercase())).collect();
        let pattern = Regex::new(&format!(r"(?i)\b{}\b", words.join(r"[\W_]+"))).expect("escaped phrase compiles");
        Phrase {
            text: text.to_string(),
            weight,
            pattern,
        }
    }

    pub fn pattern(&self) -> &Regex {
        &self.pattern
    }
}

/// Thresholds and data shared by screening and auditing.
#[derive(Debug, Clone)]
pub struct GuardConfig {
    pub flag_threshold: f64,
    pub block_threshold: f64,
    /// Bits per character.
    pub entropy_threshold: f64,
    /// Mean negative log2-likelihood per bigram.
    pub bigram_threshold: f64,
    pub phrases: Vec<Phrase>,
    pub reputation: BTreeMap<String, Reputation>,
    pub bigrams: BigramModel,
    /// Recipient domains that never count as new recipients.
    pub internal_domains: Vec<String>,
    pub known_recipients: Vec<String>,
    pub min_secret_len: usize,
}

static BUNDLED: Lazy<GuardConfig> = Lazy::new(GuardConfig::load_bundled);

impl GuardConfig {
    /// The shipped thresholds and data files. Parsed once per process.
    pub fn bundled() -> Self {
        BUNDLED.clone()
    }

    fn load_bundled() -> Self {
        GuardConfig {
            flag_threshold: 0.5,
            block_threshold: 0.9,
            entropy_threshold: 4.5,
            bigram_threshold: 4.6,
            phrases: parse_phrases(PHRASES_TSV).expect("bundled phrases parse"),
            reputation: parse_reputation(REPUTATION_CSV).expect("bundled reputation list parses"),
            bigrams: BigramModel::from_counts(&parse_bigrams(BIGRAMS_TSV).expect("bundled bigrams parse")),
            internal_domains: vec!["corp.example".to_string()],
            known_recipients: Vec::new(),
            min_secret_len: 6,
        }
    }
}

impl Default for GuardConfig {
    fn default() -> Self {
        GuardConfig::bundled()
    }
}

fn tsv(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .comment(Some(b'#'))
        .has_headers(false)
        .from_reader(text.as_bytes())
}

/// `phrase<TAB>weight` lines; `#` starts a comment.
pub fn parse_phrases(text: &str) -> Result<Vec<Phrase>, GuardDataError> {
    let mut out = Vec::new();
    for rec in tsv(text).records() {
        let rec = rec.map_err(|e| parse_err("phrases", e))?;
        let (Some(phrase), Some(weight)) = (rec.get(0), rec.get(1)) else {
            return Err(parse_err("phrases", format!("expected two columns, got {}", rec.len())));
        };
        let weight: f64 = weight.trim().parse().map_err(|e| parse_err("phrases", e))?;
        if !(0.0..=1.0).contains(&weight) || phrase.trim().is_empty() {
            return Err(parse_err("phrases", format!("bad entry `{phrase}`")));
        }
        out.push(Phrase::new(phrase.trim(), weight));
    }
    Ok(out)
}

/// `domain,verdict` with a header row.
pub fn parse_reputation(text: &str) -> Result<BTreeMap<String, Reputation>, GuardDataError> {
    #[derive(serde::Deserialize)]
    struct Row {
        domain: String,
        verdict: Reputation,
    }
    let mut out = BTreeMap::new();
    for row in csv::Reader::from_reader(text.as_bytes()).deserialize::<Row>() {
        let row = row.map_err(|e| parse_err("reputation", e))?;
        out.insert(row.domain.trim().to_ascii_lowercase(), row.verdict);
    }
    Ok(out)
}

/// `xy<TAB>count`, with `_` standing for a space.
pub fn parse_bigrams(text: &str) -> Result<BTreeMap<(char, char), u64>, GuardDataError> {
    let mut out = BTreeMap::new();
    for rec in tsv(text).records() {
        let rec = rec.map_err(|e| parse_err("bigrams", e))?;
        let pair: Vec<char> = rec.get(0).unwrap_or("").chars().collect();
        let count = rec.get(1).unwrap_or("").trim().parse::<u64>().map_err(|e| parse_err("bigrams", e))?;
        if pair.len() != 2 {
            return Err(parse_err("bigrams", format!("bad pair {pair:?}")));
        }
        let c = |x: char| if x == '_' { ' ' } else { x };
        out.insert((c(pair[0]), c(pair[1])), count);
    }
    Ok(out)
}
