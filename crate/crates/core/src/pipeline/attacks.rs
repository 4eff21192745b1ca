use serde::Serialize;

use crate::interpreter::ExecConfig;
use crate::policy::PolicySet;

use super::bundled;
use super::ni::{check_noninterference, NiReport};
use super::PipelineError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackClass {
    LoopCounting,
    Exception,
    Timing,
}

impl AttackClass {
    pub const ALL: [AttackClass; 3] = [AttackClass::LoopCounting, AttackClass::Exception, AttackClass::Timing];

    /// Id of the bundled scenario exercising this class.
    pub fn scenario_id(self) -> &'static str {
        match self {
            AttackClass::LoopCounting => "side-loop-counting",
            AttackClass::Exception => "side-exception-leak",
            AttackClass::Timing => "side-timing",
        }
    }
}

/// Differences across the runs of one configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LeakEstimate {
    pub ledger_lengths: Vec<usize>,
    pub ticks: Vec<u64>,
    /// Largest minus smallest public ledger length.
    pub ledger_length_diff: usize,
    pub tick_diff: u64,
    /// Some pair of runs disagrees on a projected entry's outcome.
    pub outcome_diff: bool,
    pub leaked_bits: f64,
    pub report: NiReport,
}

impl LeakEstimate {
    fn from_report(report: NiReport) -> Self {
        let lengths: Vec<usize> = report.observations.iter().map(|o| o.projection.len()).collect();
        let ticks: Vec<u64> = report.observations.iter().map(|o| o.ticks).collect();
        let outcomes: Vec<Vec<_>> = report
            .observations
            .iter()
            .map(|o| o.projection.iter().map(|e| e.outcome.clone()).collect())
            .collect();
        let spread = |v: &[u64]| v.iter().max().unwrap_or(&0) - v.iter().min().unwrap_or(&0);
        LeakEstimate {
            ledger_length_diff: spread(&lengths.iter().map(|&l| l as u64).collect::<Vec<_>>()) as usize,
            tick_diff: spread(&ticks),
            outcome_diff: outcomes.windows(2).any(|w| w[0] != w[1]),
            leaked_bits: report.leaked_bits(),
            ledger_lengths: lengths,
            ticks,
            report,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassResult {
    pub class: AttackClass,
    pub scenario: String,
    pub demonstration: LeakEstimate,
    pub mitigated: LeakEstimate,
}

impl ClassResult {
    pub fn leak_demonstrated(&self) -> bool {
        self.demonstration.leaked_bits > 0.0
    }

    pub fn leak_closed(&self) -> bool {
        self.mitigated.report.pass && self.mitigated.leaked_bits == 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub classes: Vec<ClassResult>,
}

impl SuiteReport {
    /// Every class leaks without mitigation and leaks nothing with it.
    pub fn all_good(&self) -> bool {
        self.classes.iter().all(|c| c.leak_demonstrated() && c.leak_closed())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("class          demo bits  len diff  tick diff  outcome diff  mitigated bits\n");
        for c in &self.classes {
            let d = &c.demonstration;
            s.push_str(&format!(
                "{:<14} {:>9.2}  {:>8}  {:>9}  {:>12}  {:>14.2}\n",
                format!("{:?}", c.class),
                d.leaked_bits,
                d.ledger_length_diff,
                d.tick_diff,
                d.outcome_diff,
                c.mitigated.leaked_bits
            ));
        }
        s
    }
}

/// Runs each bundled side-channel scenario over its secret values, once with
/// every mitigation off and once under `config`.
pub fn run_attack_suite(policy: &PolicySet, config: &ExecConfig) -> Result<SuiteReport, PipelineError> {
    let mut classes = Vec::new();
    for class in AttackClass::ALL {
        let scenario = bundled::scenario(class.scenario_id())
            .ok_or_else(|| PipelineError::MalformedScenario(format!("missing bundled scenario {}", class.scenario_id())))?;
        let ni = scenario.noninterference.clone().ok_or_else(|| {
            PipelineError::MalformedScenario(format!("{} has no noninterference section", scenario.id))
        })?;
        let unmitigated = ExecConfig {
            context: config.context.clone(),
            ..ExecConfig::unmitigated()
        };
        let demo = check_noninterference(&scenario, &ni.secret, &ni.values, policy, &unmitigated)?;
        let mitigated = check_noninterference(&scenario, &ni.secret, &ni.values, policy, config)?;
        classes.push(ClassResult {
            class,
            scenario: scenario.id.clone(),
            demonstration: LeakEstimate::from_report(demo),
            mitigated: LeakEstimate::from_report(mitigated),
        });
    }
    Ok(SuiteReport { classes })
}
