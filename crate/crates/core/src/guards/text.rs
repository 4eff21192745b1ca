use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Symbols tracked by the bigram model: `a`..`z` then space.
const ALPHABET: usize = 27;
const SPACE: usize = 26;
/// Fewer scored bigrams than this and the anomaly signal abstains.
pub const MIN_BIGRAMS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reputation {
    Allow,
    Suspicious,
    Block,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UrlHit {
    /// Byte range in the scanned text.
    pub start: usize,
    pub end: usize,
    pub url: String,
    pub host: String,
}

/// Finds `http://` and `https://` URLs by prefix scan.
pub fn extract_urls(text: &str) -> Vec<UrlHit> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let rest = &bytes[i..];
        let scheme = if starts_with_ci(rest, b"https://") {
            8
        } else if starts_with_ci(rest, b"http://") {
            7
        } else {
            i += 1;
            continue;
        };
        let mut end = i + scheme;
        while end < bytes.len() && !is_url_stop(bytes[end]) {
            end += 1;
        }
        while end > i + scheme && matches!(bytes[end - 1], b'.' | b',' | b';' | b':' | b'!' | b'?') {
            end -= 1;
        }
        // Stops are ASCII, so `end` is a char boundary.
        let url = &text[i..end];
        let host = host_of(&url[scheme..]);
        if !host.is_empty() {
            out.push(UrlHit {
                start: i,
                end,
                url: url.to_string(),
                host,
            });
        }
        i = end.max(i + 1);
    }
    out
}

fn starts_with_ci(hay: &[u8], needle: &[u8]) -> bool {
    hay.len() >= needle.len() && hay[..needle.len()].eq_ignore_ascii_case(needle)
}

fn is_url_stop(b: u8) -> bool {
    b.is_ascii_whitespace() || matches!(b, b'"' | b'\'' | b'<' | b'>' | b'(' | b')' | b'[' | b']' | b'{' | b'}' | b'`')
}

fn host_of(rest: &str) -> String {
    let authority = rest.split(['/', '?', '#']).next().unwrap_or("");
    let host = authority.rsplit('@').next().unwrap_or("");
    let host = match host.rfind(':') {
        Some(p) if host[p + 1..].chars().all(|c| c.is_ascii_digit()) => &host[..p],
        _ => host,
    };
    host.trim_end_matches('.').to_ascii_lowercase()
}

/// Looks a host up by exact match or nearest listed parent domain.
pub fn lookup_host(host: &str, list: &BTreeMap<String, Reputation>) -> Option<Reputation> {
    let mut candidate = host;
    loop {
        if let Some(r) = list.get(candidate) {
            return Some(*r);
        }
        let (_, parent) = candidate.split_once('.')?;
        candidate = parent;
    }
}

pub fn is_ip_literal(host: &str) -> bool {
    host.parse::<std::net::Ipv4Addr>().is_ok() || host.starts_with('[')
}

/// Shannon entropy in bits per character.
pub fn shannon_entropy(text: &str) -> f64 {
    let mut counts: BTreeMap<char, usize> = BTreeMap::new();
    let mut n = 0usize;
    for c in text.chars() {
        *counts.entry(c).or_default() += 1;
        n += 1;
    }
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    counts
        .values()
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

/// Character-bigram model with add-one smoothing, stored as log2 probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct BigramModel {
    log_prob: Vec<[f64; ALPHABET]>,
}

impl BigramModel {
    pub fn from_counts(counts: &BTreeMap<(char, char), u64>) -> Self {
        let mut grid = vec![[0u64; ALPHABET]; ALPHABET];
        for (&(a, b), &n) in counts {
            if let (Some(i), Some(j)) = (symbol(a), symbol(b)) {
                grid[i][j] += n;
            }
        }
        let log_prob = grid
            .iter()
            .map(|row| {
                let total: u64 = row.iter().sum();
                let mut out = [0.0; ALPHABET];
                for (j, &c) in row.iter().enumerate() {
                    out[j] = ((c + 1) as f64 / (total + ALPHABET as u64) as f64).log2();
                }
                out
            })
            .collect();
        BigramModel { log_prob }
    }

    /// Mean negative log2-likelihood per bigram, with the bigram count.
    /// `None` when too little text remains after normalization.
    pub fn mean_nll(&self, text: &str) -> Option<(f64, usize)> {
        let seq = letters_and_spaces(text);
        let n = seq.len().saturating_sub(1);
        if n < MIN_BIGRAMS {
            return None;
        }
        let total: f64 = seq.windows(2).map(|w| -self.log_prob[w[0]][w[1]]).sum();
        Some((total / n as f64, n))
    }
}

fn symbol(c: char) -> Option<usize> {
    match c {
        'a'..='z' => Some(c as usize - 'a' as usize),
        ' ' | '_' => Some(SPACE),
        _ => None,
    }
}

/// Lowercased letters with every other run collapsed to one space.
fn letters_and_spaces(text: &str) -> Vec<usize> {
    let mut out = vec![SPACE];
    for c in text.chars().flat_map(char::to_lowercase) {
        match c {
            'a'..='z' => out.push(c as usize - 'a' as usize),
            _ => {
                if out.last() != Some(&SPACE) {
                    out.push(SPACE);
                }
            }
        }
    }
    if out.last() != Some(&SPACE) {
        out.push(SPACE);
    }
    out
}

/// Maps byte offsets in `text` to character offsets.
pub struct CharIndex {
    starts: Vec<usize>,
}

impl CharIndex {
    pub fn new(text: &str) -> Self {
        CharIndex {
            starts: text.char_indices().map(|(b, _)| b).collect(),
        }
    }

    pub fn char_at(&self, byte: usize) -> usize {
        self.starts.partition_point(|&b| b < byte)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn urls_found_and_trimmed() {
        let hits = extract_urls("click http://evil.example/reset, or HTTPS://User@Docs.Corp.Example:8443/x?y.");
        assert_eq!(hits.len(), 2);
        assert_eq!(hits[0].url, "http://evil.example/reset");
        assert_eq!(hits[0].host, "evil.example");
        assert_eq!(hits[1].host, "docs.corp.example");
        assert!(hits[1].url.ends_with("?y"));
    }

    #[test]
    fn no_url_without_host() {
        assert!(extract_urls("see http:// and https:///x").is_empty());
    }

    #[test]
    fn parent_domain_lookup() {
        let mut list = BTreeMap::new();
        list.insert("evil.example".to_string(), Reputation::Block);
        assert_eq!(lookup_host("cdn.evil.example", &list), Some(Reputation::Block));
        assert_eq!(lookup_host("evil.example.org", &list), None);
    }

    #[test]
    fn entropy_edges() {
        assert_eq!(shannon_entropy(""), 0.0);
        assert_eq!(shannon_entropy("aaaaaaaaaaaa"), 0.0);
        assert!((shannon_entropy("abcd") - 2.0).abs() < 1e-12);
    }

    #[test]
    fn char_index_handles_multibyte() {
        let t = "héllo wörld";
        let idx = CharIndex::new(t);
        let b = t.find("wörld").unwrap();
        assert_eq!(idx.char_at(b), 6);
        assert_eq!(idx.char_at(t.len()), 11);
    }
}
