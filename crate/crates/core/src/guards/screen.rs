use std::time::Instant;

use serde::Serialize;
use unicode_normalization::UnicodeNormalization;

use super::text::{extract_urls, is_ip_literal, lookup_host, shannon_entropy, Reputation};
use super::GuardConfig;

pub const MAX_PROMPT_BYTES: usize = 1 << 20;

/// Statistical signals never exceed this, so on their own they only flag.
const STATISTICAL_CAP: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Verdict {
    Pass,
    Flag,
    Block,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SignalKind {
    OverridePhrase,
    UrlReputation,
    HighEntropy,
    BigramAnomaly,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Signal {
    pub kind: SignalKind,
    pub detail: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScreenReport {
    pub verdict: Verdict,
    pub signals: Vec<Signal>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub elapsed_us: u64,
}

impl ScreenReport {
    pub fn signal(&self, kind: SignalKind) -> Option<&Signal> {
        self.signals.iter().find(|s| s.kind == kind)
    }

    /// The report with timing removed, for comparisons.
    pub fn without_timing(&self) -> ScreenReport {
        ScreenReport {
            elapsed_us: 0,
            ..self.clone()
        }
    }
}

/// Scores a prompt on all four signals. One signal of each kind is always
/// reported, with score 0 when nothing was found.
pub fn screen_prompt(prompt: &str, config: &GuardConfig) -> ScreenReport {
    let started = Instant::now();
    if prompt.len() > MAX_PROMPT_BYTES {
        return ScreenReport {
            verdict: Verdict::Block,
            signals: Vec::new(),
            note: Some("oversize".into()),
            elapsed_us: started.elapsed().as_micros() as u64,
        };
    }
    let text: String = prompt.nfkc().collect();
    let signals = vec![
        phrase_signal(&text, config),
        url_signal(&text, config),
        entropy_signal(&text, config),
        bigram_signal(&text, config),
    ];
    let top = signals.iter().map(|s| s.score).fold(0.0, f64::max);
    let verdict = if top >= config.block_threshold {
        Verdict::Block
    } else if top >= config.flag_threshold {
        Verdict::Flag
    } else {
        Verdict::Pass
    };
    ScreenReport {
        verdict,
        signals,
        note: None,
        elapsed_us: started.elapsed().as_micros() as u64,
    }
}

fn phrase_signal(text: &str, config: &GuardConfig) -> Signal {
    let hits: Vec<_> = config.phrases.iter().filter(|p| p.pattern().is_match(text)).collect();
    let score = hits.iter().map(|p| p.weight).fold(0.0, f64::max);
    let detail = if hits.is_empty() {
        "no override phrase".to_string()
    } else {
        hits.iter().map(|p| format!("\"{}\"", p.text)).collect::<Vec<_>>().join(", ")
    };
    Signal {
        kind: SignalKind::OverridePhrase,
        detail,
        score,
    }
}

pub(crate) fn url_score(host: &str, config: &GuardConfig) -> (f64, &'static str) {
    match lookup_host(host, &config.reputation) {
        Some(Reputation::Block) => (1.0, "block"),
        Some(Reputation::Suspicious) => (0.6, "suspicious"),
        Some(Reputation::Allow) => (0.0, "allow"),
        None if is_ip_literal(host) || host.split('.').any(|l| l.starts_with("xn--")) => (0.6, "suspicious host"),
        None => (0.1, "unknown"),
    }
}

fn url_signal(text: &str, config: &GuardConfig) -> Signal {
    let hits = extract_urls(text);
    let mut score = 0.0;
    let mut parts = Vec::new();
    for h in &hits {
        let (s, why) = url_score(&h.host, config);
        score = f64::max(score, s);
        parts.push(format!("{} ({why})", h.host));
    }
    Signal {
        kind: SignalKind::UrlReputation,
        detail: if parts.is_empty() {
            "no urls".to_string()
        } else {
            parts.join(", ")
        },
        score,
    }
}

/// Below the threshold the score stays under the flag level; above it,
/// it climbs toward the statistical cap over 1.5 units.
fn ramp(value: f64, threshold: f64, config: &GuardConfig) -> f64 {
    if value <= threshold {
        (value / threshold).max(0.0) * (config.flag_threshold - 0.1)
    } else {
        let over = ((value - threshold) / 1.5).min(1.0);
        config.flag_threshold + over * (STATISTICAL_CAP - config.flag_threshold)
    }
}

fn entropy_signal(text: &str, config: &GuardConfig) -> Signal {
    let h = shannon_entropy(text);
    Signal {
        kind: SignalKind::HighEntropy,
        detail: format!("{h:.3} bits/char"),
        score: ramp(h, config.entropy_threshold, config),
    }
}

fn bigram_signal(text: &str, config: &GuardConfig) -> Signal {
    match config.bigrams.mean_nll(text) {
        Some((nll, n)) => Signal {
            kind: SignalKind::BigramAnomaly,
            detail: format!("{nll:.3} bits/bigram over {n} bigrams"),
            score: ramp(nll, config.bigram_threshold, config),
        },
        None => Signal {
            kind: SignalKind::BigramAnomaly,
            detail: "too little text".to_string(),
            score: 0.0,
        },
    }
}
