use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use capsule_core::dsl::{parse, print_plan, static_check, CheckConfig};
use capsule_core::guards::{audit_output, screen_prompt, GuardConfig, Verdict};
use capsule_core::interpreter::{ExecConfig, StrictCallPolicy};
use capsule_core::label::Provenance;
use capsule_core::pipeline::{self, bundled, check_noninterference, run_attack_suite, Pipeline, Scenario};
use capsule_core::policy::{default_policy, lint_policy, load_policy, PolicySet};
use capsule_core::quarantine::{extract, Schema};
use capsule_core::toolsim::Registry;
use clap::{Args, Parser, Subcommand, ValueEnum};

/// Run plans under capability labels, policy and output audit.
#[derive(Parser)]
#[command(name = "capsule", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario through the full pipeline.
    Run {
        #[command(flatten)]
        scenario: ScenarioArg,
        #[command(flatten)]
        exec: ExecArgs,
        #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
        report: ReportFormat,
        /// Release outputs even when the audit would withhold them.
        #[arg(long)]
        naive_release: bool,
    },
    /// Replay the bundled cache workload against one pipeline.
    Workload {
        #[command(flatten)]
        exec: ExecArgs,
        #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
        report: ReportFormat,
    },
    /// Run the side-channel scenarios with and without mitigations.
    AttackSuite {
        #[command(flatten)]
        exec: ExecArgs,
        #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
        report: ReportFormat,
    },
    /// Compare what an observer sees across values of one secret binding.
    Noninterference {
        #[command(flatten)]
        scenario: ScenarioArg,
        #[command(flatten)]
        exec: ExecArgs,
        #[arg(long)]
        secret: Option<String>,
        /// Comma-separated JSON values, e.g. `3,7` or `"a","b"`.
        #[arg(long)]
        values: Option<String>,
    },
    /// Screen a prompt.
    Screen {
        /// Prompt file, or `-` for stdin.
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Audit a candidate output.
    Audit {
        #[arg(long = "in")]
        input: PathBuf,
        /// File with one secret per line.
        #[arg(long)]
        secrets: Option<PathBuf>,
        #[arg(long, default_value = "cli")]
        task: String,
    },
    /// Extract a schema-checked record from an untrusted document.
    Extract {
        #[arg(long)]
        schema: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        /// `user`, `upload:ID`, `external:ID`, `tool:NAME` or `system`.
        #[arg(long, default_value = "upload:cli")]
        origin: String,
    },
    /// Load and lint a policy document.
    CheckPolicy {
        #[arg(long)]
        policy: Option<PathBuf>,
    },
    /// Parse and statically check a plan, printing its canonical form.
    Parse {
        #[arg(long = "in")]
        input: PathBuf,
        /// Names bound before the plan starts.
        #[arg(long, value_delimiter = ',')]
        bound: Vec<String>,
    },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct ScenarioArg {
    /// Scenario JSON file.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Id of a bundled scenario.
    #[arg(long)]
    bundled: Option<String>,
}

#[derive(Args)]
struct ExecArgs {
    /// Policy JSON; the bundled default when absent.
    #[arg(long)]
    policy: Option<PathBuf>,
    #[arg(long, value_enum)]
    strict_policy: Option<StrictArg>,
    #[arg(long)]
    max_secret_iters: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrictArg {
    Deny,
    Confirm,
    Batchpad,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReportFormat {
    Json,
    Text,
}

/// Malformed input; exits with status 2.
struct Malformed(String);

impl<E: std::fmt::Display> From<E> for Malformed {
    fn from(e: E) -> Self {
        Malformed(e.to_string())
    }
}

fn read_input(path: &Path) -> Result<String, Malformed> {
    if path == Path::new("-") {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s)?;
        return Ok(s);
    }
    std::fs::read_to_string(path).map_err(|e| Malformed(format!("{}: {e}", path.display())))
}

fn load_scenario(arg: &ScenarioArg) -> Result<Scenario, Malformed> {
    match (&arg.scenario, &arg.bundled) {
        (Some(path), _) => Ok(Scenario::load(path)?),
        (None, Some(id)) => bundled::scenario(id).ok_or_else(|| Malformed(format!("no bundled scenario `{id}`"))),
        (None, None) => Err(Malformed("give --scenario or --bundled".into())),
    }
}

impl ExecArgs {
    fn policy(&self) -> Result<PolicySet, Malformed> {
        let Some(path) = &self.policy else {
            return Ok(default_policy());
        };
        load_policy(&read_input(path)?).map_err(|errs| {
            Malformed(errs.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))
        })
    }

    fn config(&self) -> Result<ExecConfig, Malformed> {
        let mut c = ExecConfig::default();
        if let Some(p) = self.strict_policy {
            c.strict_call_policy = match p {
                StrictArg::Deny => StrictCallPolicy::Deny,
                StrictArg::Confirm => StrictCallPolicy::Confirm,
                StrictArg::Batchpad => StrictCallPolicy::BatchPad,
            };
        }
        if let Some(n) = self.max_secret_iters {
            c.max_secret_iterations = n;
        }
        c.validate()?;
        Ok(c)
    }
}

fn json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable")
}

fn status(ok: bool) -> ExitCode {
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn run(command: Command) -> Result<ExitCode, Malformed> {
    match command {
        Command::Run {
            scenario,
            exec,
            report,
            naive_release,
        } => {
            let s = load_scenario(&scenario)?;
            let mut p = Pipeline::new(exec.policy()?, exec.config()?);
            p.options.naive_release = naive_release;
            let r = p.run(&s)?;
            match report {
                ReportFormat::Json => println!("{}", r.to_json()),
                ReportFormat::Text => print!("{}", r.to_text()),
            }
            Ok(status(r.expectation_met()))
        }
        Command::Workload { exec, report } => {
            let mut p = Pipeline::new(exec.policy()?, exec.config()?);
            let w = pipeline::run_workload(&mut p, &bundled::workload())?;
            match report {
                ReportFormat::Json => println!("{}", json(&w)),
                ReportFormat::Text => {
                    for r in &w.runs {
                        println!("{:<22} {:?}", r.scenario, r.cache);
                    }
                    println!(
                        "{} prompts, {} distinct intents, {} provider calls, {} cache hits",
                        w.runs.len(),
                        w.distinct_intents,
                        w.provider_calls,
                        w.cache_hits
                    );
                }
            }
            Ok(status(w.runs.iter().all(|r| r.expectation_met())))
        }
        Command::AttackSuite { exec, report } => {
            let suite = run_attack_suite(&exec.policy()?, &exec.config()?)?;
            match report {
                ReportFormat::Json => println!("{}", json(&suite)),
                ReportFormat::Text => print!("{}", suite.to_text()),
            }
            Ok(status(suite.all_good()))
        }
        Command::Noninterference {
            scenario,
            exec,
            secret,
            values,
        } => {
            let s = load_scenario(&scenario)?;
            let (secret, values) = match (secret, values, &s.noninterference) {
                (Some(secret), Some(values), _) => (secret, parse_values(&values)?),
                (None, None, Some(ni)) => (ni.secret.clone(), ni.values.clone()),
                _ => return Err(Malformed("give both --secret and --values, or neither".into())),
            };
            let r = check_noninterference(&s, &secret, &values, &exec.policy()?, &exec.config()?)?;
            println!("{}", json(&r));
            Ok(status(r.pass))
        }
        Command::Screen { input } => {
            let r = screen_prompt(&read_input(&input)?, &GuardConfig::bundled());
            println!("{}", json(&r));
            Ok(status(r.verdict == Verdict::Pass))
        }
        Command::Audit { input, secrets, task } => {
            let secrets: Vec<String> = match secrets {
                Some(p) => read_input(&p)?.lines().filter(|l| !l.is_empty()).map(str::to_string).collect(),
                None => Vec::new(),
            };
            let r = audit_output(&read_input(&input)?, &secrets, &task, &GuardConfig::bundled());
            println!("{}", json(&r));
            Ok(status(r.is_clean()))
        }
        Command::Extract { schema, input, origin } => {
            let schema = Schema::from_json(&read_input(&schema)?)?;
            let origin = Provenance::parse_compact(&origin)?;
            match extract(&schema, &read_input(&input)?, &origin) {
                Ok(x) => {
                    println!("{}", json(&x));
                    Ok(ExitCode::SUCCESS)
                }
                Err(e) => {
                    println!("{}", json(&e));
                    Ok(ExitCode::from(1))
                }
            }
        }
        Command::CheckPolicy { policy } => {
            let args = ExecArgs {
                policy,
                strict_policy: None,
                max_secret_iters: None,
            };
            let findings = lint_policy(&args.policy()?, &Registry::standard());
            println!("{}", json(&findings));
            Ok(status(findings.is_empty()))
        }
        Command::Parse { input, bound } => {
            let plan = parse(&read_input(&input)?)?;
            let violations = static_check(&plan, &Registry::standard().signatures(), &CheckConfig::with_names(bound));
            print!("{}", print_plan(&plan));
            for v in &violations {
                eprintln!("{}:{} {:?}", v.span.line, v.span.column, v.kind);
            }
            Ok(status(violations.is_empty()))
        }
    }
}

fn parse_values(text: &str) -> Result<Vec<serde_json::Value>, Malformed> {
    let v: Vec<serde_json::Value> = serde_json::from_str(&format!("[{text}]"))?;
    if v.len() < 2 {
        return Err(Malformed("--values needs at least two values".into()));
    }
    Ok(v)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(Malformed(m)) => {
            eprintln!("capsule: {m}");
            ExitCode::from(2)
        }
    }
}
