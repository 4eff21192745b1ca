//! Generators shared by the property and acceptance suites.
#![allow(dead_code)]

use capsule_core::label::{Label, Provenance, Readers};
use capsule_core::pipeline::Scenario;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

pub const MFA: &str = "482913";

/// Random plan text over a secret int `s` and a public int `p`.
pub struct PlanGen<'r> {
    rng: &'r mut ChaCha8Rng,
    next: usize,
}

impl<'r> PlanGen<'r> {
    pub fn new(rng: &'r mut ChaCha8Rng) -> Self {
        PlanGen { rng, next: 0 }
    }

    pub fn plan(&mut self) -> String {
        let vars = vec!["s".to_string(), "p".to_string()];
        let n = self.rng.gen_range(1..=5);
        self.block(n, 0, &vars, 0)
    }

    fn fresh(&mut self, prefix: &str) -> String {
        self.next += 1;
        format!("{prefix}{}", self.next)
    }

    fn int_expr(&mut self, vars: &[String], depth: usize) -> String {
        match self.rng.gen_range(0..if depth > 1 { 2 } else { 4 }) {
            0 => self.rng.gen_range(0..6).to_string(),
            1 => vars.choose(self.rng).unwrap().clone(),
            2 => format!("{} + {}", self.int_expr(vars, depth + 1), self.int_expr(vars, depth + 1)),
            _ => format!("{} - {}", self.int_expr(vars, depth + 1), self.int_expr(vars, depth + 1)),
        }
    }

    fn cond(&mut self, vars: &[String]) -> String {
        let op = ["<", "<=", "==", "!="].choose(self.rng).unwrap();
        format!("{} {op} {}", self.int_expr(vars, 1), self.int_expr(vars, 1))
    }

    fn call(&mut self, vars: &[String]) -> String {
        match self.rng.gen_range(0..9) {
            0 => "call fetch(\"https://a.example/x\")".into(),
            1 => format!("call fetch(\"https://a.example/\" ++ {})", self.int_expr(vars, 1)),
            2 => format!("call respond({})", self.int_expr(vars, 0)),
            3 => format!("call lookup_record({})", self.int_expr(vars, 1)),
            4 => "call move_file(\"/docs/a.txt\", \"/docs/b.txt\")".into(),
            5 => "call current_time()".into(),
            6 => "call send_email(\"bob@corp.example\", \"hi\", \"body\")".into(),
            7 => format!("call wire_transfer(\"ACCT-1\", {})", self.int_expr(vars, 1)),
            _ => "call list_calendar()".into(),
        }
    }

    fn block(&mut self, n: usize, depth: usize, vars: &[String], indent: usize) -> String {
        let mut vars = vars.to_vec();
        let pad = "  ".repeat(indent);
        let mut out = String::new();
        for _ in 0..n {
            let pick = if depth >= 2 { self.rng.gen_range(0..2) } else { self.rng.gen_range(0..5) };
            let inner = self.rng.gen_range(1..=2);
            match pick {
                0 => {
                    let v = self.fresh("v");
                    out += &format!("{pad}let {v} = {}\n", self.int_expr(&vars, 0));
                    vars.push(v);
                }
                1 => out += &format!("{pad}{}\n", self.call(&vars)),
                2 => {
                    let c = self.cond(&vars);
                    let a = self.block(inner, depth + 1, &vars, indent + 1);
                    let b = self.block(inner, depth + 1, &vars, indent + 1);
                    out += &format!("{pad}if {c} {{\n{a}{pad}}} else {{\n{b}{pad}}}\n");
                }
                3 => {
                    let bound = match self.rng.gen_range(0..3) {
                        0 => self.rng.gen_range(0..4).to_string(),
                        1 => "s".into(),
                        _ => "p".into(),
                    };
                    let i = self.fresh("i");
                    let mut scope = vars.clone();
                    scope.push(i.clone());
                    let body = self.block(inner, depth + 1, &scope, indent + 1);
                    out += &format!("{pad}for {i} in range({bound}) {{\n{body}{pad}}}\n");
                }
                _ => {
                    let r = self.fresh("r");
                    let key = self.int_expr(&vars, 1);
                    let ok = self.block(inner, depth + 1, &vars, indent + 1);
                    let err = self.block(inner, depth + 1, &vars, indent + 1);
                    out += &format!(
                        "{pad}let {r} = call lookup_record({key})\n{pad}match {r} {{\n{pad}  ok(x) => {{\n{ok}{pad}  }}\n{pad}  err(e) => {{\n{err}{pad}  }}\n{pad}}}\n"
                    );
                }
            }
        }
        out
    }
}

/// A scenario wrapping a generated plan, with a generous approval script.
pub fn plan_scenario(id: &str, plan: &str, secret: i64, public: i64) -> Scenario {
    let doc = json!({
        "id": id,
        "prompt": "generated plan",
        "environment": {
            "files": {"/docs/a.txt": {"content": "alpha"}},
            "records": {"1": "one", "2": "two", "3": "three", "4": "four"}
        },
        "bindings": {
            "s": {"value": secret, "label": {"sources": [{"kind": "user"}], "readers": ["alice"]}},
            "p": {"value": public}
        },
        "plan": {"inline": plan},
        "confirmations": vec![json!({"approve_mfa": MFA}); 32],
        "mfa_token": MFA
    });
    Scenario::from_json(&doc.to_string()).expect("generated scenario is well formed")
}

/// Two distinct secret values in 0..10.
pub fn secret_pair(rng: &mut ChaCha8Rng) -> (i64, i64) {
    let a = rng.gen_range(0..10);
    let mut b = rng.gen_range(0..10);
    while b == a {
        b = rng.gen_range(0..10);
    }
    (a, b)
}

pub fn random_provenance(rng: &mut ChaCha8Rng) -> Provenance {
    match rng.gen_range(0..5) {
        0 => Provenance::User,
        1 => Provenance::System,
        2 => Provenance::tool(["email", "calendar", "fetch"][rng.gen_range(0..3)]),
        3 => Provenance::upload(["f1", "f2"][rng.gen_range(0..2)]),
        _ => Provenance::external(["web", "vendor"][rng.gen_range(0..2)]),
    }
}

pub fn random_label(rng: &mut ChaCha8Rng) -> Label {
    let n = rng.gen_range(0..3);
    let sources: Vec<Provenance> = (0..n).map(|_| random_provenance(rng)).collect();
    let readers = match rng.gen_range(0..4) {
        0 => Readers::Public,
        1 => Readers::Unreadable,
        _ => {
            let pool = ["alice", "bob", "carol"];
            let k = rng.gen_range(1..=3);
            Readers::only(pool.choose_multiple(rng, k).copied()).unwrap()
        }
    };
    let l = Label::new(sources, readers);
    if rng.gen_bool(0.2) {
        l.untrusted()
    } else {
        l
    }
}

/// A receipt-shaped document, sometimes malformed or off-schema.
pub fn random_receipt(rng: &mut ChaCha8Rng) -> String {
    let mut fields = Vec::new();
    if rng.gen_bool(0.9) {
        let v = match rng.gen_range(0..4) {
            0 => json!(""),
            1 => json!("x".repeat(rng.gen_range(1..100))),
            2 => json!(17),
            _ => json!(["Cafe", "Books", "Taxi"][rng.gen_range(0..3)]),
        };
        fields.push(("vendor", v));
    }
    if rng.gen_bool(0.9) {
        let v = match rng.gen_range(0..5) {
            0 => json!(rng.gen_range(-10..2_000_000)),
            1 => {
                let currency = ["USD", "EUR"][rng.gen_range(0..2)];
                json!({"amount": rng.gen_range(0..5000), "currency": currency})
            }
            2 => json!("12.50"),
            3 => json!({"amount": 5}),
            _ => json!(rng.gen_range(0..100_000)),
        };
        fields.push(("amount", v));
    }
    if rng.gen_bool(0.5) {
        let date = ["2026-01-02", "yesterday", "2026-01-02T10:00"][rng.gen_range(0..3)];
        fields.push(("date", json!(date)));
    }
    if rng.gen_bool(0.4) {
        let u = ["https://shop.example/r/1", "ftp://x", "not a url", "https:///path"][rng.gen_range(0..4)];
        fields.push(("receipt_url", json!(u)));
    }
    if rng.gen_bool(0.2) {
        fields.push(("note", json!("extra")));
    }
    fields.shuffle(rng);
    let body: Vec<String> = fields.iter().map(|(k, v)| format!("{}: {}", json!(k), v)).collect();
    let text = format!("{{{}}}", body.join(", "));
    match rng.gen_range(0..20) {
        0 => text[..rng.gen_range(0..text.len())].to_string(),
        1 => "[1, 2, 3]".into(),
        _ => text,
    }
}
