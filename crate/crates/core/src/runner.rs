//! Runs scenarios over seed ranges and aggregates verdicts and costs.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::checker::cost::{read_bound, write_bound};
use crate::checker::{check_trace, Property, RbStats, Report, Status, Verdict};
use crate::netsim;
use crate::scenario::{Scenario, ScenarioError, SeedRange};
use crate::trace::{Outcome, Trace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedOutcome {
    pub seed: u64,
    pub trace_hash: String,
    pub outcome: Outcome,
    pub steps: u64,
    pub passed: bool,
    pub failures: Vec<Verdict>,
    pub rb: RbStats,
    pub read_costs: Vec<u64>,
    pub write_costs: Vec<u64>,
}

/// Simulates one seed and checks the trace.
pub fn run_seed(scn: &Scenario, seed: u64) -> Result<(Trace, Report), ScenarioError> {
    let trace = netsim::run(&scn.config(seed)?)?;
    let report = check_trace(&trace);
    Ok((trace, report))
}

/// Whether a report counts as a pass for this scenario. A scenario flagged
/// as expected to be nonterminating tolerates a NONTERMINATING verdict.
pub fn judge(scn: &Scenario, report: &Report) -> bool {
    report.verdicts.iter().all(|v| {
        v.is_ok() || (scn.expect_nonterminating && v.property == Property::Termination && v.status == Status::Nonterminating)
    })
}

pub fn summarize(scn: &Scenario, seed: u64, trace: &Trace, report: &Report) -> SeedOutcome {
    let costs = |kind| {
        report
            .cost
            .ops
            .iter()
            .filter(|o| o.kind == kind && o.completed)
            .map(|o| o.total)
            .collect()
    };
    SeedOutcome {
        seed,
        trace_hash: trace.hash(),
        outcome: trace.footer.outcome,
        steps: trace.footer.steps,
        passed: judge(scn, report),
        failures: report.failures().cloned().collect(),
        rb: report.rb.clone(),
        read_costs: costs(crate::trace::OpKind::Read),
        write_costs: costs(crate::trace::OpKind::Write),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostStats {
    pub kind: String,
    pub count: usize,
    pub min: u64,
    pub median: u64,
    pub max: u64,
    pub bound: u64,
}

impl CostStats {
    fn from(kind: &str, mut v: Vec<u64>, bound: u64) -> Option<Self> {
        if v.is_empty() {
            return None;
        }
        v.sort_unstable();
        Some(CostStats {
            kind: kind.to_string(),
            count: v.len(),
            min: v[0],
            median: v[v.len() / 2],
            max: v[v.len() - 1],
            bound,
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropertyTally {
    pub pass: usize,
    pub fail: usize,
    pub vacuous: usize,
    pub nonterminating: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub scenario: String,
    pub n: usize,
    pub t: usize,
    pub seeds: SeedRange,
    pub passed: usize,
    pub failed: usize,
    pub first_failure: Option<u64>,
    pub replay: Option<String>,
    pub properties: BTreeMap<String, PropertyTally>,
    pub costs: Vec<CostStats>,
    pub runs: Vec<SeedOutcome>,
}

impl SweepReport {
    pub fn all_passed(&self) -> bool {
        self.failed == 0
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{}: n={} t={} seeds {}: {} passed, {} failed",
            self.scenario, self.n, self.t, self.seeds, self.passed, self.failed
        );
        for (p, tally) in &self.properties {
            let _ = writeln!(
                s,
                "  {p:<24} pass {:>5}  fail {:>5}  vacuous {:>5}  nonterminating {:>5}",
                tally.pass, tally.fail, tally.vacuous, tally.nonterminating
            );
        }
        if let Some(seed) = self.first_failure {
            let _ = writeln!(s, "first failing seed: {seed}");
            if let Some(run) = self.runs.iter().find(|r| r.seed == seed) {
                for v in &run.failures {
                    let _ = writeln!(s, "  {v}");
                }
            }
            if let Some(cmd) = &self.replay {
                let _ = writeln!(s, "replay: {cmd}");
            }
        }
        s.push_str(&self.cost_table());
        s
    }

    pub fn cost_table(&self) -> String {
        let mut s = String::new();
        if self.costs.is_empty() {
            return s;
        }
        let _ = writeln!(s, "  {:<6} {:>6} {:>6} {:>6} {:>6} {:>6}", "op", "count", "min", "median", "max", "bound");
        for c in &self.costs {
            let _ = writeln!(
                s,
                "  {:<6} {:>6} {:>6} {:>6} {:>6} {:>6}",
                c.kind, c.count, c.min, c.median, c.max, c.bound
            );
        }
        s
    }
}

pub fn replay_command(source: &str, seed: u64) -> String {
    format!("byzreg run {source} --seed {seed}")
}

/// Runs every seed of `seeds`, calling `each` after each run.
pub fn sweep(
    scn: &Scenario,
    source: &str,
    seeds: &SeedRange,
    mut each: impl FnMut(&Trace, &Report, &SeedOutcome),
) -> Result<SweepReport, ScenarioError> {
    let mut runs = Vec::new();
    let mut properties: BTreeMap<String, PropertyTally> = BTreeMap::new();
    for seed in seeds.iter() {
        let (trace, report) = run_seed(scn, seed)?;
        for v in &report.verdicts {
            let t = properties.entry(v.property.as_str().to_string()).or_default();
            match v.status {
                Status::Pass => t.pass += 1,
                Status::Fail => t.fail += 1,
                Status::Vacuous => t.vacuous += 1,
                Status::Nonterminating => t.nonterminating += 1,
            }
        }
        let outcome = summarize(scn, seed, &trace, &report);
        each(&trace, &report, &outcome);
        runs.push(outcome);
    }
    let first_failure = runs.iter().find(|r| !r.passed).map(|r| r.seed);
    let reads = runs.iter().flat_map(|r| r.read_costs.iter().copied()).collect();
    let writes = runs.iter().flat_map(|r| r.write_costs.iter().copied()).collect();
    let costs = [
        CostStats::from("read", reads, read_bound(scn.n)),
        CostStats::from("write", writes, write_bound(scn.n)),
    ]
    .into_iter()
    .flatten()
    .collect();
    let passed = runs.iter().filter(|r| r.passed).count();
    Ok(SweepReport {
        scenario: scn.name.clone(),
        n: scn.n,
        t: scn.t,
        seeds: seeds.clone(),
        passed,
        failed: runs.len() - passed,
        first_failure,
        replay: first_failure.map(|s| replay_command(source, s)),
        properties,
        costs,
        runs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_fault_free_passes() {
        let scn = Scenario::resolve("abd-style-fault-free").unwrap();
        let report = sweep(&scn, "abd-style-fault-free", &SeedRange { start: 0, end: 10 }, |_, _, _| {}).unwrap();
        assert!(report.all_passed(), "{}", report.summary());
        let read = report.costs.iter().find(|c| c.kind == "read").unwrap();
        assert_eq!((read.min, read.max), (16, 16));
        let write = report.costs.iter().find(|c| c.kind == "write").unwrap();
        assert_eq!((write.min, write.max), (40, 40));
    }

    #[test]
    fn replay_names_source_and_seed() {
        assert_eq!(replay_command("equivocate", 17), "byzreg run equivocate --seed 17");
    }
}
