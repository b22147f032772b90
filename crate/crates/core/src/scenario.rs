//! Scenario files: one TOML document describing the system, the adversary,
//! the scheduler and the workload, run over a range of seeds.

use std::fmt;
use std::ops::Range;
use std::path::Path;
use std::str::FromStr;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversary::{StrategyKind, StrategyParams};
use crate::netsim::{
    AdversarySpec, SchedulerPolicy, SimConfig, SimError, WorkloadOp, DEFAULT_FAIRNESS_BOUND, DEFAULT_STEP_BUDGET,
};
use crate::quorum::{max_faults, Mutation};
use crate::rbcast::DEFAULT_PENDING_CAP;
use crate::trace::OpKind;
use crate::types::{OpId, ProcessId, Value};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("unknown bundled scenario `{0}`")]
    UnknownBundled(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// Half-open seed interval, written `a..b` or as a single seed `a`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct SeedRange {
    pub start: u64,
    pub end: u64,
}

impl SeedRange {
    pub fn single(seed: u64) -> Self {
        SeedRange { start: seed, end: seed + 1 }
    }

    pub fn iter(&self) -> Range<u64> {
        self.start..self.end
    }

    pub fn len(&self) -> u64 {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl FromStr for SeedRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parse = |x: &str| x.trim().parse::<u64>().map_err(|e| format!("bad seed `{x}`: {e}"));
        match s.split_once("..") {
            Some((a, b)) => {
                let (start, end) = (parse(a)?, parse(b)?);
                if end <= start {
                    return Err(format!("empty seed range `{s}`"));
                }
                Ok(SeedRange { start, end })
            }
            None => parse(s).map(SeedRange::single),
        }
    }
}

impl TryFrom<String> for SeedRange {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<SeedRange> for String {
    fn from(r: SeedRange) -> String {
        r.to_string()
    }
}

impl fmt::Display for SeedRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.len() == 1 {
            write!(f, "{}", self.start)
        } else {
            write!(f, "{}..{}", self.start, self.end)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScriptKind {
    Write,
    Read,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptOp {
    pub id: Option<u64>,
    pub process: u32,
    pub op: ScriptKind,
    pub target: Option<u32>,
    pub value: Option<String>,
    pub after: Option<u64>,
    pub at: Option<u64>,
}

/// Parameters of the seeded random workload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenerateParams {
    /// Rounds of one operation per process.
    pub layers: usize,
    pub write_ratio: f64,
    /// Probability that a read targets the round's hot register.
    pub hot_ratio: f64,
    /// Probability that an operation waits for one of the previous round.
    pub after_ratio: f64,
    pub byzantine_ops: bool,
}

impl Default for GenerateParams {
    fn default() -> Self {
        GenerateParams { layers: 4, write_ratio: 0.34, hot_ratio: 0.6, after_ratio: 0.6, byzantine_ops: true }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdversaryFile {
    pub strategy: String,
    pub nodes: Option<Vec<u32>>,
    /// Number of Byzantine processes to pick from the seed when `nodes` is absent.
    pub count: Option<usize>,
    #[serde(default)]
    pub params: StrategyParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    name: Option<String>,
    description: Option<String>,
    n: usize,
    t: Option<usize>,
    seed: Option<u64>,
    seeds: Option<SeedRange>,
    scheduler: Option<SchedulerPolicy>,
    step_budget: Option<u64>,
    fairness_bound: Option<u64>,
    #[serde(default)]
    allow_t_violation: bool,
    #[serde(default)]
    expect_nonterminating: bool,
    init: Option<Vec<String>>,
    mutation: Option<Mutation>,
    byz_send_cap: Option<usize>,
    pending_cap: Option<usize>,
    adversary: Option<AdversaryFile>,
    #[serde(default)]
    workload: Vec<ScriptOp>,
    generate: Option<GenerateParams>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Workload {
    Script(Vec<ScriptOp>),
    Generate(GenerateParams),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub description: Option<String>,
    pub n: usize,
    pub t: usize,
    pub seeds: SeedRange,
    pub policy: SchedulerPolicy,
    pub step_budget: u64,
    pub fairness_bound: u64,
    pub allow_t_violation: bool,
    pub expect_nonterminating: bool,
    pub init: Vec<Value>,
    pub mutation: Option<Mutation>,
    pub byz_send_cap: Option<usize>,
    pub pending_cap: usize,
    pub adversary: Option<AdversaryFile>,
    pub workload: Workload,
}

impl Scenario {
    pub fn new(name: impl Into<String>, n: usize, t: usize) -> Self {
        Scenario {
            name: name.into(),
            description: None,
            n,
            t,
            seeds: SeedRange::single(0),
            policy: SchedulerPolicy::Random,
            step_budget: DEFAULT_STEP_BUDGET,
            fairness_bound: DEFAULT_FAIRNESS_BOUND,
            allow_t_violation: false,
            expect_nonterminating: false,
            init: Vec::new(),
            mutation: None,
            byz_send_cap: None,
            pending_cap: DEFAULT_PENDING_CAP,
            adversary: None,
            workload: Workload::Generate(GenerateParams::default()),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        Self::from_toml_named(text, "scenario")
    }

    fn from_toml_named(text: &str, fallback: &str) -> Result<Self, ScenarioError> {
        let f: ScenarioFile = toml::from_str(text)?;
        let seeds = match (f.seed, f.seeds) {
            (Some(_), Some(_)) => return Err(ScenarioError::Invalid("give either `seed` or `seeds`, not both".into())),
            (Some(s), None) => SeedRange::single(s),
            (None, Some(r)) => r,
            (None, None) => SeedRange::single(0),
        };
        let workload = match (f.generate, f.workload.is_empty()) {
            (Some(_), false) => {
                return Err(ScenarioError::Invalid("give either `[[workload]]` or `[generate]`, not both".into()))
            }
            (Some(g), true) => Workload::Generate(g),
            (None, _) => Workload::Script(f.workload),
        };
        if let Some(a) = &f.adversary {
            a.strategy
                .parse::<StrategyKind>()
                .map_err(|e| ScenarioError::Sim(SimError::UnknownAdversary(e.0)))?;
            if a.nodes.is_some() && a.count.is_some() {
                return Err(ScenarioError::Invalid("adversary: give either `nodes` or `count`, not both".into()));
            }
        }
        let s = Scenario {
            name: f.name.unwrap_or_else(|| fallback.to_string()),
            description: f.description,
            n: f.n,
            t: f.t.unwrap_or_else(|| max_faults(f.n)),
            seeds,
            policy: f.scheduler.unwrap_or_default(),
            step_budget: f.step_budget.unwrap_or(DEFAULT_STEP_BUDGET),
            fairness_bound: f.fairness_bound.unwrap_or(DEFAULT_FAIRNESS_BOUND),
            allow_t_violation: f.allow_t_violation,
            expect_nonterminating: f.expect_nonterminating,
            init: f.init.unwrap_or_default().into_iter().map(Value).collect(),
            mutation: f.mutation,
            byz_send_cap: f.byz_send_cap,
            pending_cap: f.pending_cap.unwrap_or(DEFAULT_PENDING_CAP),
            adversary: f.adversary,
            workload,
        };
        // Surface structural errors at load time rather than per seed. The
        // resilience bound is left to `config`, after any caller override.
        Scenario { allow_t_violation: true, ..s.clone() }.config(s.seeds.start)?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ScenarioError::Io { path: path.display().to_string(), source })?;
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("scenario");
        Self::from_toml_named(&text, stem)
    }

    /// A bundled scenario by name, or a scenario file by path.
    pub fn resolve(name_or_path: &str) -> Result<Self, ScenarioError> {
        match bundled(name_or_path) {
            Some(text) => Self::from_toml_named(text, name_or_path),
            None if Path::new(name_or_path).exists() => Self::load(Path::new(name_or_path)),
            None => Err(ScenarioError::UnknownBundled(name_or_path.to_string())),
        }
    }

    pub fn byzantine_nodes(&self, seed: u64) -> Vec<ProcessId> {
        let Some(a) = &self.adversary else { return Vec::new() };
        if let Some(nodes) = &a.nodes {
            return nodes.iter().copied().map(ProcessId).collect();
        }
        let count = a.count.unwrap_or(self.t);
        let mut all: Vec<ProcessId> = ProcessId::all(self.n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xB42_0000);
        all.shuffle(&mut rng);
        let mut v: Vec<ProcessId> = all.into_iter().take(count).collect();
        v.sort();
        v
    }

    /// The simulator configuration for one seed.
    pub fn config(&self, seed: u64) -> Result<SimConfig, ScenarioError> {
        let byzantine = self.byzantine_nodes(seed);
        let workload = match &self.workload {
            Workload::Script(ops) => script_workload(ops, self.n)?,
            Workload::Generate(g) => generate_workload(g, self.n, &byzantine, seed),
        };
        let cfg = SimConfig {
            name: self.name.clone(),
            n: self.n,
            t: self.t,
            seed,
            policy: self.policy,
            fairness_bound: self.fairness_bound,
            step_budget: self.step_budget,
            allow_t_violation: self.allow_t_violation,
            adversary: self.adversary.as_ref().map(|a| AdversarySpec {
                strategy: a.strategy.clone(),
                nodes: byzantine.clone(),
                params: a.params.clone(),
            }),
            workload,
            init: self.init.clone(),
            mutation: self.mutation,
            byz_send_cap: self.byz_send_cap,
            pending_cap: self.pending_cap,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn script_workload(ops: &[ScriptOp], n: usize) -> Result<Vec<WorkloadOp>, ScenarioError> {
    ops.iter()
        .enumerate()
        .map(|(i, s)| {
            let id = OpId(s.id.unwrap_or(i as u64));
            let (target, value) = match s.op {
                ScriptKind::Write => {
                    if s.target.is_some_and(|t| t != s.process) {
                        return Err(ScenarioError::Invalid(format!(
                            "workload[{i}]: p{} can only write its own register",
                            s.process
                        )));
                    }
                    (s.process, Some(Value(s.value.clone().unwrap_or_else(|| format!("v{}", id.0)))))
                }
                ScriptKind::Read => {
                    let t = s.target.ok_or_else(|| ScenarioError::Invalid(format!("workload[{i}]: read needs `target`")))?;
                    if s.value.is_some() {
                        return Err(ScenarioError::Invalid(format!("workload[{i}]: read takes no `value`")));
                    }
                    (t, None)
                }
            };
            if s.process as usize >= n {
                return Err(ScenarioError::Invalid(format!("workload[{i}]: process {} does not exist", s.process)));
            }
            Ok(WorkloadOp {
                id,
                process: ProcessId(s.process),
                kind: match s.op {
                    ScriptKind::Write => OpKind::Write,
                    ScriptKind::Read => OpKind::Read,
                },
                target: ProcessId(target),
                value,
                after: s.after.map(OpId),
                at: s.at,
            })
        })
        .collect()
}

/// Rounds of one operation per process. Reads favour one hot register per
/// round so that reads and writes of the same register overlap, and some
/// operations wait for an operation of another process from the previous
/// round, which creates real-time order between processes.
pub fn generate_workload(g: &GenerateParams, n: usize, byzantine: &[ProcessId], seed: u64) -> Vec<WorkloadOp> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x2545_F491_4F6C_DD1D) ^ 0x574F_524B);
    let mut ops = Vec::new();
    let mut prev: Vec<(OpId, ProcessId)> = Vec::new();
    let mut writes = vec![0u32; n];
    for _ in 0..g.layers {
        let hot = ProcessId(rng.random_range(0..n as u32));
        let mut layer = Vec::new();
        for p in ProcessId::all(n) {
            let byz = byzantine.contains(&p);
            if byz && !g.byzantine_ops {
                continue;
            }
            let id = OpId(ops.len() as u64);
            let write = if byz { true } else { rng.random_bool(g.write_ratio) };
            let (kind, target, value) = if write {
                writes[p.index()] += 1;
                (OpKind::Write, p, Some(Value(format!("{p}.{}", writes[p.index()]))))
            } else {
                let target = if rng.random_bool(g.hot_ratio) { hot } else { ProcessId(rng.random_range(0..n as u32)) };
                (OpKind::Read, target, None)
            };
            let after = if rng.random_bool(g.after_ratio) {
                let others: Vec<&(OpId, ProcessId)> = prev.iter().filter(|(_, q)| *q != p).collect();
                others.choose(&mut rng).map(|(op, _)| *op)
            } else {
                None
            };
            ops.push(WorkloadOp { id, process: p, kind, target, value, after, at: None });
            layer.push((id, p));
        }
        prev = layer;
    }
    ops
}

pub const BUNDLED: &[(&str, &str)] = &[
    ("abd-style-fault-free", include_str!("../scenarios/abd-style-fault-free.toml")),
    ("fault-free-sweep", include_str!("../scenarios/fault-free-sweep.toml")),
    ("equivocate", include_str!("../scenarios/equivocate.toml")),
    ("write-termination", include_str!("../scenarios/write-termination.toml")),
    ("read-termination", include_str!("../scenarios/read-termination.toml")),
    ("write-then-read", include_str!("../scenarios/write-then-read.toml")),
    ("read-then-write", include_str!("../scenarios/read-then-write.toml")),
    ("no-read-inversion", include_str!("../scenarios/no-read-inversion.toml")),
    ("rb-validity", include_str!("../scenarios/rb-validity.toml")),
    ("rb-integrity", include_str!("../scenarios/rb-integrity.toml")),
    ("rb-uniformity", include_str!("../scenarios/rb-uniformity.toml")),
    ("rb-termination", include_str!("../scenarios/rb-termination.toml")),
    ("crash-silent", include_str!("../scenarios/crash-silent.toml")),
    ("seq-skip", include_str!("../scenarios/seq-skip.toml")),
    ("stale-state", include_str!("../scenarios/stale-state.toml")),
    ("ack-forge", include_str!("../scenarios/ack-forge.toml")),
    ("ready-poison", include_str!("../scenarios/ready-poison.toml")),
    ("collude-delay", include_str!("../scenarios/collude-delay.toml")),
    ("t-violation", include_str!("../scenarios/t-violation.toml")),
];

pub fn bundled(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
}
