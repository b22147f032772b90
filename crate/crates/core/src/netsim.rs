//! Deterministic discrete-event simulation of reliable, asynchronous,
//! non-FIFO channels between `n` processes.
//!
//! Logical time is the number of deliveries performed so far. Every random
//! choice comes from generators seeded by [`SimConfig::seed`], so a run is a
//! pure function of its configuration.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversary::{self, ByzantineNode, Invocation, StrategyKind, StrategyParams};
use crate::quorum::{Mutation, Thresholds};
use crate::rbcast::DEFAULT_PENDING_CAP;
use crate::register::{Effects, NodeEvent, ProtocolError, RegisterNode};
use crate::trace::{
    EventKind, OpKind, Outcome, Payload, Record, StuckOp, Trace, TraceEvent, TraceFooter, TraceHeader,
};
use crate::types::{Cause, Dest, Message, MessageKind, OpId, Outgoing, ProcessId, RegEntry, Value};

pub const DEFAULT_FAIRNESS_BOUND: u64 = 1000;
pub const DEFAULT_STEP_BUDGET: u64 = 2_000_000;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchedulerPolicy {
    #[default]
    Random,
    Fifo,
    AdversarialReorder,
}

impl SchedulerPolicy {
    pub fn as_str(self) -> &'static str {
        match self {
            SchedulerPolicy::Random => "random",
            SchedulerPolicy::Fifo => "fifo",
            SchedulerPolicy::AdversarialReorder => "adversarial_reorder",
        }
    }
}

impl fmt::Display for SchedulerPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SchedulerPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "random" => Ok(SchedulerPolicy::Random),
            "fifo" => Ok(SchedulerPolicy::Fifo),
            "adversarial_reorder" => Ok(SchedulerPolicy::AdversarialReorder),
            other => Err(format!("unknown scheduler policy `{other}`")),
        }
    }
}

/// One scripted operation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkloadOp {
    pub id: OpId,
    pub process: ProcessId,
    pub kind: OpKind,
    /// Register read; ignored for writes (a process writes its own register).
    pub target: ProcessId,
    pub value: Option<Value>,
    /// Start only once this operation has ended.
    pub after: Option<OpId>,
    /// Start no earlier than this logical time.
    pub at: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdversarySpec {
    pub strategy: String,
    pub nodes: Vec<ProcessId>,
    pub params: StrategyParams,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimConfig {
    pub name: String,
    pub n: usize,
    pub t: usize,
    pub seed: u64,
    pub policy: SchedulerPolicy,
    pub fairness_bound: u64,
    pub step_budget: u64,
    pub allow_t_violation: bool,
    pub adversary: Option<AdversarySpec>,
    pub workload: Vec<WorkloadOp>,
    /// Initial register values; empty means all bottom.
    pub init: Vec<Value>,
    pub mutation: Option<Mutation>,
    /// Cap on sends a Byzantine node releases per activation; default `4n`.
    pub byz_send_cap: Option<usize>,
    pub pending_cap: usize,
}

impl SimConfig {
    pub fn new(name: impl Into<String>, n: usize, t: usize) -> Self {
        SimConfig {
            name: name.into(),
            n,
            t,
            seed: 0,
            policy: SchedulerPolicy::Random,
            fairness_bound: DEFAULT_FAIRNESS_BOUND,
            step_budget: DEFAULT_STEP_BUDGET,
            allow_t_violation: false,
            adversary: None,
            workload: Vec::new(),
            init: Vec::new(),
            mutation: None,
            byz_send_cap: None,
            pending_cap: DEFAULT_PENDING_CAP,
        }
    }

    pub fn byzantine(&self) -> Vec<ProcessId> {
        let mut v = self.adversary.as_ref().map(|a| a.nodes.clone()).unwrap_or_default();
        v.sort();
        v
    }

    pub fn strategy(&self) -> Result<Option<StrategyKind>, SimError> {
        self.adversary
            .as_ref()
            .map(|a| a.strategy.parse().map_err(|e: adversary::UnknownStrategy| SimError::UnknownAdversary(e.0)))
            .transpose()
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.n == 0 {
            return Err(SimError::Invalid("n must be at least 1".into()));
        }
        if self.t >= self.n {
            return Err(SimError::Invalid(format!("t={} must be below n={}", self.t, self.n)));
        }
        if self.n <= 3 * self.t && !self.allow_t_violation {
            return Err(SimError::ResilienceViolated { n: self.n, t: self.t });
        }
        self.strategy()?;
        let byz = self.byzantine();
        if byz.len() > self.t {
            return Err(SimError::Invalid(format!(
                "{} Byzantine processes assigned but t={}",
                byz.len(),
                self.t
            )));
        }
        let distinct: BTreeSet<_> = byz.iter().collect();
        if distinct.len() != byz.len() {
            return Err(SimError::Invalid("Byzantine assignment lists a process twice".into()));
        }
        for p in &byz {
            if p.index() >= self.n {
                return Err(SimError::Invalid(format!("Byzantine process {p} does not exist")));
            }
        }
        if !self.init.is_empty() && self.init.len() != self.n {
            return Err(SimError::Invalid(format!(
                "init lists {} values, expected {}",
                self.init.len(),
                self.n
            )));
        }
        if self.fairness_bound == 0 {
            return Err(SimError::Invalid("fairness_bound must be positive".into()));
        }
        let mut ids = BTreeSet::new();
        for op in &self.workload {
            if !ids.insert(op.id) {
                return Err(SimError::Invalid(format!("duplicate operation id {}", op.id)));
            }
            if op.process.index() >= self.n {
                return Err(SimError::Invalid(format!("{}: process {} does not exist", op.id, op.process)));
            }
            if op.kind == OpKind::Read && op.target.index() >= self.n {
                return Err(SimError::Invalid(format!("{}: register {} does not exist", op.id, op.target)));
            }
        }
        for op in &self.workload {
            if let Some(dep) = op.after {
                if !ids.contains(&dep) {
                    return Err(SimError::Invalid(format!("{}: `after` names unknown operation {dep}", op.id)));
                }
                if dep == op.id {
                    return Err(SimError::Invalid(format!("{} depends on itself", op.id)));
                }
            }
        }
        Ok(())
    }

    fn init_values(&self) -> Vec<Value> {
        if self.init.is_empty() {
            vec![Value::bottom(); self.n]
        } else {
            self.init.clone()
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SimError {
    #[error("n > 3t required (n={n}, t={t}); pass the t-violation override to run anyway")]
    ResilienceViolated { n: usize, t: usize },
    #[error("{0}")]
    UnknownAdversary(String),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("simulation has halted")]
    Halted,
    #[error("unknown process {0}")]
    NoSuchProcess(ProcessId),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PendingMessage {
    pub id: u64,
    pub sender: ProcessId,
    pub receiver: ProcessId,
    pub payload: Message,
    pub enqueue_time: u64,
    pub cause: Cause,
}

/// Chooses which in-flight message is delivered next.
#[derive(Debug)]
pub struct Scheduler {
    policy: SchedulerPolicy,
    rng: ChaCha8Rng,
    fairness_bound: u64,
    in_flight: BTreeMap<u64, PendingMessage>,
    pools: [Vec<u64>; 2],
    slot: HashMap<u64, (usize, usize)>,
    victims: BTreeSet<ProcessId>,
}

const PREFERRED: usize = 0;
const STARVED: usize = 1;

impl Scheduler {
    pub fn new(policy: SchedulerPolicy, seed: u64, fairness_bound: u64) -> Self {
        Scheduler {
            policy,
            rng: ChaCha8Rng::seed_from_u64(seed),
            fairness_bound: fairness_bound.max(1),
            in_flight: BTreeMap::new(),
            pools: [Vec::new(), Vec::new()],
            slot: HashMap::new(),
            victims: BTreeSet::new(),
        }
    }

    pub fn policy(&self) -> SchedulerPolicy {
        self.policy
    }

    /// Processes whose incoming READY messages are held back under
    /// [`SchedulerPolicy::AdversarialReorder`].
    pub fn set_victims(&mut self, victims: impl IntoIterator<Item = ProcessId>) {
        self.victims = victims.into_iter().collect();
    }

    pub fn victims(&self) -> &BTreeSet<ProcessId> {
        &self.victims
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    pub fn len(&self) -> usize {
        self.in_flight.len()
    }

    pub fn is_empty(&self) -> bool {
        self.in_flight.is_empty()
    }

    pub fn in_flight(&self) -> impl Iterator<Item = &PendingMessage> {
        self.in_flight.values()
    }

    fn starved(&self, m: &PendingMessage) -> bool {
        self.policy == SchedulerPolicy::AdversarialReorder
            && m.payload.kind() == MessageKind::Ready
            && self.victims.contains(&m.receiver)
    }

    pub fn push(&mut self, m: PendingMessage) {
        let pool = if self.starved(&m) { STARVED } else { PREFERRED };
        self.slot.insert(m.id, (pool, self.pools[pool].len()));
        self.pools[pool].push(m.id);
        self.in_flight.insert(m.id, m);
    }

    fn remove(&mut self, id: u64) -> PendingMessage {
        let (pool, idx) = self.slot.remove(&id).expect("message is in flight");
        let v = &mut self.pools[pool];
        v.swap_remove(idx);
        if let Some(moved) = v.get(idx) {
            self.slot.insert(*moved, (pool, idx));
        }
        self.in_flight.remove(&id).expect("message is in flight")
    }

    /// Removes the next message to deliver at logical time `now`.
    ///
    /// A message that has been passed over `fairness_bound` times is forced
    /// regardless of policy.
    pub fn pick(&mut self, now: u64) -> Option<PendingMessage> {
        let (&oldest, m) = self.in_flight.iter().next()?;
        if now.saturating_sub(m.enqueue_time) >= self.fairness_bound {
            return Some(self.remove(oldest));
        }
        let id = match self.policy {
            SchedulerPolicy::Fifo => oldest,
            SchedulerPolicy::Random | SchedulerPolicy::AdversarialReorder => {
                let pool = if self.pools[PREFERRED].is_empty() { STARVED } else { PREFERRED };
                let v = &self.pools[pool];
                v[self.rng.random_range(0..v.len())]
            }
        };
        Some(self.remove(id))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    Delivered(u64),
    Quiescent,
}

enum Actor {
    Correct(RegisterNode),
    Byzantine(ByzantineNode),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum OpState {
    NotStarted,
    Running,
    Done,
}

pub struct Simulation {
    cfg: SimConfig,
    byzantine: Vec<ProcessId>,
    actors: Vec<Actor>,
    scheduler: Scheduler,
    op_state: Vec<OpState>,
    op_index: HashMap<OpId, usize>,
    events: Vec<TraceEvent>,
    time: u64,
    next_msg_id: u64,
    halted: bool,
    outcome: Option<Outcome>,
}

impl Simulation {
    pub fn new(cfg: SimConfig) -> Result<Self, SimError> {
        cfg.validate()?;
        let th = Thresholds::new(cfg.n, cfg.t).with_mutation(cfg.mutation);
        let init = cfg.init_values();
        let byzantine = cfg.byzantine();
        let correct: Vec<ProcessId> = ProcessId::all(cfg.n).filter(|p| !byzantine.contains(p)).collect();
        let strategy = cfg.strategy()?;
        let cap = cfg.byz_send_cap.unwrap_or(4 * cfg.n);
        let actors = ProcessId::all(cfg.n)
            .map(|p| {
                // Byzantine shadows always run the unmutated protocol.
                let node_th = if byzantine.contains(&p) { Thresholds::new(cfg.n, cfg.t) } else { th };
                let node = RegisterNode::new(p, node_th, init.clone()).with_pending_cap(cfg.pending_cap);
                match (byzantine.contains(&p), strategy) {
                    (true, Some(kind)) => {
                        let params = &cfg.adversary.as_ref().expect("strategy implies adversary").params;
                        let strat = adversary::build(kind, params, p, cfg.seed, &correct);
                        Actor::Byzantine(ByzantineNode::new(node, strat, cfg.seed, correct.clone(), cap))
                    }
                    _ => Actor::Correct(node),
                }
            })
            .collect::<Vec<_>>();
        let mut scheduler = Scheduler::new(cfg.policy, cfg.seed, cfg.fairness_bound);
        if cfg.policy == SchedulerPolicy::AdversarialReorder {
            let mut victims: BTreeSet<ProcessId> = actors
                .iter()
                .filter_map(|a| match a {
                    Actor::Byzantine(b) => Some(b.victims()),
                    Actor::Correct(_) => None,
                })
                .flatten()
                .collect();
            if victims.is_empty() && !correct.is_empty() {
                let mut pool = correct.clone();
                pool.shuffle(scheduler.rng());
                let max = (correct.len() / 2).max(1);
                let k = scheduler.rng().random_range(1..=max);
                victims.extend(pool.into_iter().take(k));
            }
            scheduler.set_victims(victims);
        }
        let op_index = cfg.workload.iter().enumerate().map(|(i, op)| (op.id, i)).collect();
        Ok(Simulation {
            op_state: vec![OpState::NotStarted; cfg.workload.len()],
            op_index,
            byzantine,
            actors,
            scheduler,
            events: Vec::new(),
            time: 0,
            next_msg_id: 0,
            halted: false,
            outcome: None,
            cfg,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn time(&self) -> u64 {
        self.time
    }

    pub fn scheduler(&self) -> &Scheduler {
        &self.scheduler
    }

    pub fn events(&self) -> &[TraceEvent] {
        &self.events
    }

    pub fn is_halted(&self) -> bool {
        self.halted
    }

    pub fn halt(&mut self) {
        self.halted = true;
    }

    pub fn node(&self, p: ProcessId) -> Option<&RegisterNode> {
        match self.actors.get(p.index())? {
            Actor::Correct(n) => Some(n),
            Actor::Byzantine(_) => None,
        }
    }

    fn is_correct(&self, p: ProcessId) -> bool {
        !self.byzantine.contains(&p)
    }

    fn push_event(
        &mut self,
        kind: EventKind,
        sender: Option<ProcessId>,
        receiver: Option<ProcessId>,
        msg_id: Option<u64>,
        cause: Cause,
        payload: Payload,
    ) -> usize {
        let seq = self.events.len();
        self.events.push(TraceEvent {
            seq: seq as u64,
            time: self.time,
            kind,
            sender,
            receiver,
            msg_id,
            cause,
            payload,
            snapshot: None,
        });
        seq
    }

    /// Puts a message in flight and records its SEND.
    pub fn enqueue(
        &mut self,
        sender: ProcessId,
        receiver: ProcessId,
        payload: Message,
        cause: Cause,
    ) -> Result<u64, SimError> {
        if self.halted {
            return Err(SimError::Halted);
        }
        for p in [sender, receiver] {
            if p.index() >= self.cfg.n {
                return Err(SimError::NoSuchProcess(p));
            }
        }
        let id = self.next_msg_id;
        self.next_msg_id += 1;
        self.push_event(
            EventKind::Send,
            Some(sender),
            Some(receiver),
            Some(id),
            cause,
            Payload::Message(payload.clone()),
        );
        self.scheduler.push(PendingMessage {
            id,
            sender,
            receiver,
            payload,
            enqueue_time: self.time,
            cause,
        });
        Ok(id)
    }

    fn send_all(&mut self, sender: ProcessId, sends: Vec<Outgoing>) -> Result<(), SimError> {
        for o in sends {
            match o.to {
                Dest::All => {
                    for r in ProcessId::all(self.cfg.n) {
                        self.enqueue(sender, r, o.msg.clone(), o.cause)?;
                    }
                }
                Dest::One(r) => {
                    if r.index() < self.cfg.n {
                        self.enqueue(sender, r, o.msg, o.cause)?;
                    }
                }
            }
        }
        Ok(())
    }

    fn record_node_events(&mut self, node: ProcessId, events: Vec<NodeEvent>) {
        for e in events {
            match e {
                NodeEvent::RDelivered { origin, sn, body } => {
                    self.push_event(
                        EventKind::Rdeliver,
                        Some(origin),
                        Some(node),
                        None,
                        None,
                        Payload::Record(Record::Rdeliver { sn, body }),
                    );
                }
                NodeEvent::Applied { writer, entry } => {
                    self.push_event(
                        EventKind::StateChange,
                        Some(writer),
                        Some(node),
                        None,
                        None,
                        Payload::Record(Record::StateChange { register: writer, entry }),
                    );
                }
                NodeEvent::WriteCompleted { op, wsn } => {
                    let value = self.cfg.workload[self.op_index[&op]].value.clone().unwrap_or_default();
                    self.finish_op(op, node, OpKind::Write, node, RegEntry { val: value, sn: wsn });
                }
                NodeEvent::ReadCompleted { op, target, entry } => {
                    self.finish_op(op, node, OpKind::Read, target, entry);
                }
            }
        }
    }

    fn finish_op(&mut self, op: OpId, node: ProcessId, kind: OpKind, target: ProcessId, entry: RegEntry) {
        if let Some(&i) = self.op_index.get(&op) {
            self.op_state[i] = OpState::Done;
        }
        self.push_event(
            EventKind::OpEnd,
            Some(node),
            None,
            None,
            Some(op),
            Payload::Record(Record::OpEnd { op, op_kind: kind, target, entry }),
        );
    }

    fn op_finished_for_deps(&self, i: usize) -> bool {
        let op = &self.cfg.workload[i];
        match self.op_state[i] {
            OpState::Done => true,
            // Byzantine operations have no meaningful end.
            OpState::Running => !self.is_correct(op.process),
            OpState::NotStarted => false,
        }
    }

    fn eligible(&self, i: usize, ignore_time: bool) -> bool {
        if self.op_state[i] != OpState::NotStarted {
            return false;
        }
        let op = &self.cfg.workload[i];
        let earlier_done = self.cfg.workload[..i]
            .iter()
            .enumerate()
            .filter(|(_, o)| o.process == op.process)
            .all(|(j, _)| self.op_finished_for_deps(j));
        if !earlier_done {
            return false;
        }
        if let Some(dep) = op.after {
            if !self.op_finished_for_deps(self.op_index[&dep]) {
                return false;
            }
        }
        ignore_time || op.at.is_none_or(|at| self.time >= at)
    }

    fn start_op(&mut self, i: usize) -> Result<(), SimError> {
        let op = self.cfg.workload[i].clone();
        self.op_state[i] = OpState::Running;
        let target = match op.kind {
            OpKind::Write => op.process,
            OpKind::Read => op.target,
        };
        let seq = self.push_event(
            EventKind::OpStart,
            Some(op.process),
            None,
            None,
            Some(op.id),
            Payload::Record(Record::OpStart {
                op: op.id,
                op_kind: op.kind,
                target,
                value: op.value.clone(),
            }),
        );
        let p = op.process;
        let (sends, events) = match &mut self.actors[p.index()] {
            Actor::Correct(node) => {
                let fx = match op.kind {
                    OpKind::Write => node.begin_write(op.id, op.value.clone().unwrap_or_default())?,
                    OpKind::Read => node.begin_read(op.id, op.target)?,
                };
                self.events[seq].snapshot = Some(node.snapshot_digest());
                (fx.sends, fx.events)
            }
            Actor::Byzantine(b) => {
                let inv = Invocation { op: op.id, kind: op.kind, target, value: op.value.clone() };
                (b.invoke(&inv), Vec::new())
            }
        };
        self.record_node_events(p, events);
        self.send_all(p, sends)
    }

    /// Starts every workload operation that may start now.
    fn start_ready_ops(&mut self, ignore_time: bool) -> Result<bool, SimError> {
        let mut started = false;
        loop {
            let next = (0..self.cfg.workload.len()).find(|&i| self.eligible(i, ignore_time));
            match next {
                Some(i) => {
                    self.start_op(i)?;
                    started = true;
                    if ignore_time {
                        // Only jump over one time gate before re-checking.
                        return Ok(true);
                    }
                }
                None => return Ok(started),
            }
        }
    }

    fn flush_byzantine(&mut self) -> Result<bool, SimError> {
        let mut any = false;
        for i in 0..self.actors.len() {
            let sends = match &mut self.actors[i] {
                Actor::Byzantine(b) if b.has_backlog() => b.tick(),
                _ => continue,
            };
            any |= !sends.is_empty();
            self.send_all(ProcessId(i as u32), sends)?;
        }
        Ok(any)
    }

    /// Delivers one message, or reports quiescence.
    pub fn step(&mut self) -> Result<StepOutcome, SimError> {
        if self.halted {
            return Err(SimError::Halted);
        }
        self.start_ready_ops(false)?;
        while self.scheduler.is_empty() {
            if self.flush_byzantine()? {
                continue;
            }
            if self.start_ready_ops(true)? {
                self.start_ready_ops(false)?;
                continue;
            }
            return Ok(StepOutcome::Quiescent);
        }
        let m = self.scheduler.pick(self.time).expect("non-empty");
        self.time += 1;
        let seq = self.push_event(
            EventKind::Deliver,
            Some(m.sender),
            Some(m.receiver),
            Some(m.id),
            m.cause,
            Payload::Message(m.payload.clone()),
        );
        let r = m.receiver;
        let fx = match &mut self.actors[r.index()] {
            Actor::Correct(node) => {
                let fx = node.handle(m.sender, m.payload, m.cause);
                self.events[seq].snapshot = Some(node.snapshot_digest());
                fx
            }
            Actor::Byzantine(b) => Effects { sends: b.deliver(m.sender, &m.payload, m.cause), events: Vec::new() },
        };
        self.record_node_events(r, fx.events);
        self.send_all(r, fx.sends)?;
        Ok(StepOutcome::Delivered(m.id))
    }

    /// Steps until quiescence or until the step budget runs out.
    pub fn run_to_end(&mut self) -> Result<Outcome, SimError> {
        if let Some(o) = self.outcome {
            return Ok(o);
        }
        let outcome = loop {
            if self.time >= self.cfg.step_budget {
                break Outcome::Nonterminating;
            }
            match self.step()? {
                StepOutcome::Delivered(_) => {}
                StepOutcome::Quiescent => break Outcome::Quiescent,
            }
        };
        self.outcome = Some(outcome);
        self.halted = true;
        Ok(outcome)
    }

    pub fn into_trace(mut self) -> Result<Trace, SimError> {
        let outcome = self.run_to_end()?;
        let mut stuck = Vec::new();
        let mut unstarted = Vec::new();
        for (i, op) in self.cfg.workload.iter().enumerate() {
            if !self.is_correct(op.process) {
                continue;
            }
            match self.op_state[i] {
                OpState::Running => {
                    let guards = self.node(op.process).map(|n| n.blocked_on()).unwrap_or_default();
                    stuck.push(StuckOp { op: op.id, process: op.process, guards });
                }
                OpState::NotStarted => unstarted.push(op.id),
                OpState::Done => {}
            }
        }
        let strategy = self.cfg.strategy()?.map(|k| k.as_str().to_string());
        let header = TraceHeader {
            scenario: self.cfg.name.clone(),
            n: self.cfg.n,
            t: self.cfg.t,
            seed: self.cfg.seed,
            byzantine: self.byzantine.clone(),
            strategy,
            init: self.cfg.init_values(),
            policy: self.cfg.policy.as_str().to_string(),
            fairness_bound: self.cfg.fairness_bound,
            mutation: self.cfg.mutation,
        };
        Ok(Trace {
            header,
            events: self.events,
            footer: TraceFooter { outcome, steps: self.time, stuck, unstarted },
        })
    }
}

/// Runs a scenario to completion and returns its trace.
pub fn run(cfg: &SimConfig) -> Result<Trace, SimError> {
    Simulation::new(cfg.clone())?.into_trace()
}
