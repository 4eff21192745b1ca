use capsule_core::guards::{screen_prompt, GuardConfig, Verdict};
use serde::Deserialize;

#[derive(Deserialize)]
struct Row {
    id: String,
    class: String,
    text: String,
}

fn corpus() -> Vec<Row> {
    include_str!("../data/prompts/corpus.jsonl")
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).expect("corpus row"))
        .collect()
}

#[test]
fn corpus_shape() {
    let rows = corpus();
    assert_eq!(rows.iter().filter(|r| r.class == "injection").count(), 20);
    assert_eq!(rows.iter().filter(|r| r.class == "benign").count(), 20);
    assert!(rows.iter().all(|r| r.text.len() <= 10 * 1024));
}

#[test]
fn every_injection_prompt_is_caught() {
    let config = GuardConfig::bundled();
    let rows = corpus();
    let missed: Vec<&str> = rows
        .iter()
        .filter(|r| r.class == "injection")
        .filter(|r| screen_prompt(&r.text, &config).verdict == Verdict::Pass)
        .map(|r| r.id.as_str())
        .collect();
    assert!(missed.is_empty(), "missed: {missed:?}");
}

#[test]
fn benign_false_positives_reported() {
    let config = GuardConfig::bundled();
    for r in corpus().iter().filter(|r| r.class == "benign") {
        let rep = screen_prompt(&r.text, &config);
        if rep.verdict != Verdict::Pass {
            println!("false positive {}: {:?} {:?}", r.id, rep.verdict, rep.signals);
        }
    }
}
