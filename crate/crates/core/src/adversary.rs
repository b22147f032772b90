//! Byzantine behaviors.
//!
//! A Byzantine process is a [`ByzantineNode`]: a correct [`RegisterNode`]
//! kept as a shadow, plus a [`Strategy`] that decides what actually goes on
//! the wire. Strategies may emit any protocol-shaped message, but the
//! simulator stamps the true sender on everything they send.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::register::RegisterNode;
use crate::trace::OpKind;
use crate::types::{Cause, Dest, Message, OpId, Outgoing, ProcessId, Value, WriteBody};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    CrashSilent,
    EquivocateWrite,
    SeqSkip,
    StaleState,
    AckForge,
    ReadyPoison,
    ColludeDelay,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 7] = [
        StrategyKind::CrashSilent,
        StrategyKind::EquivocateWrite,
        StrategyKind::SeqSkip,
        StrategyKind::StaleState,
        StrategyKind::AckForge,
        StrategyKind::ReadyPoison,
        StrategyKind::ColludeDelay,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StrategyKind::CrashSilent => "crash_silent",
            StrategyKind::EquivocateWrite => "equivocate_write",
            StrategyKind::SeqSkip => "seq_skip",
            StrategyKind::StaleState => "stale_state",
            StrategyKind::AckForge => "ack_forge",
            StrategyKind::ReadyPoison => "ready_poison",
            StrategyKind::ColludeDelay => "collude_delay",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownStrategy(pub String);

impl fmt::Display for UnknownStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown adversary strategy `{}`", self.0)
    }
}

impl std::error::Error for UnknownStrategy {}

impl FromStr for StrategyKind {
    type Err = UnknownStrategy;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        StrategyKind::ALL
            .into_iter()
            .find(|k| k.as_str() == norm)
            .ok_or_else(|| UnknownStrategy(s.to_string()))
    }
}

/// How a STALE_STATE node falsifies its STATE replies.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StaleMode {
    Inflate,
    Deflate,
    #[default]
    Mixed,
}

/// Strategy-specific knobs. Unused fields are ignored by other strategies.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StrategyParams {
    /// CRASH_SILENT: number of activations handled correctly before going silent.
    pub crash_after: Option<u64>,
    /// STALE_STATE: direction of the falsified sequence numbers.
    pub stale_mode: Option<StaleMode>,
    /// COLLUDE_DELAY: the reader to starve; chosen from the seed when absent.
    pub victim: Option<ProcessId>,
}

/// Value inflated STATE replies report.
pub const INFLATED_WSN: u64 = 1_000_000;

/// Prefix of every value a READY_POISON node invents.
pub const POISON_PREFIX: &str = "poison:";

/// What a strategy may look at and use while acting for node `me`.
pub struct ByzContext<'a> {
    pub me: ProcessId,
    pub n: usize,
    pub t: usize,
    pub shadow: &'a mut RegisterNode,
    pub rng: &'a mut ChaCha8Rng,
    pub correct: &'a [ProcessId],
}

impl ByzContext<'_> {
    /// What a correct process would send in response to `msg`.
    pub fn correct_response(&mut self, from: ProcessId, msg: &Message, cause: Cause) -> Vec<Outgoing> {
        self.shadow.handle(from, msg.clone(), cause).sends
    }

    /// What a correct process would send when invoking the operation.
    pub fn correct_invoke(&mut self, inv: &Invocation) -> Vec<Outgoing> {
        let res = match inv.kind {
            OpKind::Write => self
                .shadow
                .begin_write(inv.op, inv.value.clone().unwrap_or_default()),
            OpKind::Read => self.shadow.begin_read(inv.op, inv.target),
        };
        res.map(|fx| fx.sends).unwrap_or_default()
    }

    fn random_subset(&mut self, p: f64) -> Vec<ProcessId> {
        ProcessId::all(self.n).filter(|_| self.rng.random_bool(p)).collect()
    }
}

/// Workload operation handed to a Byzantine process.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Invocation {
    pub op: OpId,
    pub kind: OpKind,
    pub target: ProcessId,
    pub value: Option<Value>,
}

pub trait Strategy: Send {
    fn kind(&self) -> StrategyKind;

    fn on_invoke(&mut self, ctx: &mut ByzContext<'_>, inv: &Invocation) -> Vec<Outgoing> {
        ctx.correct_invoke(inv)
    }

    fn on_message(
        &mut self,
        ctx: &mut ByzContext<'_>,
        from: ProcessId,
        msg: &Message,
        cause: Cause,
    ) -> Vec<Outgoing>;

    /// Correct processes this strategy wants the scheduler to starve.
    fn victims(&self) -> Vec<ProcessId> {
        Vec::new()
    }
}

/// Builds the strategy instance for node `me`. `shared` seeds choices that
/// colluding nodes must agree on.
pub fn build(
    kind: StrategyKind,
    params: &StrategyParams,
    me: ProcessId,
    shared: u64,
    correct: &[ProcessId],
) -> Box<dyn Strategy> {
    let _ = me;
    match kind {
        StrategyKind::CrashSilent => Box::new(CrashSilent {
            crash_after: params.crash_after.unwrap_or(0),
            handled: 0,
        }),
        StrategyKind::EquivocateWrite => Box::new(EquivocateWrite { next_sn: 1, wsn: 0 }),
        StrategyKind::SeqSkip => Box::new(SeqSkip { wsn: 0 }),
        StrategyKind::StaleState => Box::new(StaleState { mode: params.stale_mode.unwrap_or_default() }),
        StrategyKind::AckForge => Box::new(AckForge),
        StrategyKind::ReadyPoison => Box::new(ReadyPoison { forged: 0 }),
        StrategyKind::ColludeDelay => {
            let victim = params.victim.unwrap_or_else(|| {
                let mut rng = ChaCha8Rng::seed_from_u64(shared ^ 0x00C0_11DE);
                *correct.choose(&mut rng).expect("at least one correct process")
            });
            Box::new(ColludeDelay { victim })
        }
    }
}

struct CrashSilent {
    crash_after: u64,
    handled: u64,
}

impl CrashSilent {
    fn alive(&mut self) -> bool {
        self.handled += 1;
        self.handled <= self.crash_after
    }
}

impl Strategy for CrashSilent {
    fn kind(&self) -> StrategyKind {
        StrategyKind::CrashSilent
    }

    fn on_invoke(&mut self, ctx: &mut ByzContext<'_>, inv: &Invocation) -> Vec<Outgoing> {
        if self.alive() {
            ctx.correct_invoke(inv)
        } else {
            Vec::new()
        }
    }

    fn on_message(&mut self, ctx: &mut ByzContext<'_>, from: ProcessId, msg: &Message, cause: Cause) -> Vec<Outgoing> {
        if self.alive() {
            ctx.correct_response(from, msg, cause)
        } else {
            Vec::new()
        }
    }
}

/// Sends one WRITE to a random part of the processes and a different one to the rest,
/// then echoes and readies both to random subsets.
struct EquivocateWrite {
    next_sn: u64,
    wsn: u64,
}

impl Strategy for EquivocateWrite {
    fn kind(&self) -> StrategyKind {
        StrategyKind::EquivocateWrite
    }

    fn on_invoke(&mut self, ctx: &mut ByzContext<'_>, inv: &Invocation) -> Vec<Outgoing> {
        if inv.kind == OpKind::Read {
            return ctx.correct_invoke(inv);
        }
        let sn = self.next_sn;
        self.next_sn += 1;
        self.wsn += 1;
        let value = inv.value.clone().unwrap_or_default();
        let a = WriteBody { value: value.clone(), wsn: self.wsn };
        let b = WriteBody { value: Value::new(format!("{value}'")), wsn: self.wsn };
        let cause = Some(inv.op);
        let mut all: Vec<ProcessId> = ProcessId::all(ctx.n).collect();
        all.shuffle(ctx.rng);
        let half = ctx.rng.random_range(1..ctx.n.max(2));
        let mut out = Vec::new();
        for (i, p) in all.iter().enumerate() {
            let body = if i < half { a.clone() } else { b.clone() };
            out.push(Outgoing::to_one(*p, Message::App { body, sn }, cause));
        }
        for body in [a, b] {
            for p in ctx.random_subset(0.5) {
                out.push(Outgoing::to_one(
                    p,
                    Message::Echo { origin: ctx.me, body: body.clone(), sn },
                    cause,
                ));
            }
            for p in ctx.random_subset(0.5) {
                out.push(Outgoing::to_one(
                    p,
                    Message::Ready { origin: ctx.me, body: body.clone(), sn },
                    cause,
                ));
            }
        }
        out
    }

    fn on_message(&mut self, ctx: &mut ByzContext<'_>, from: ProcessId, msg: &Message, cause: Cause) -> Vec<Outgoing> {
        let me = ctx.me;
        ctx.correct_response(from, msg, cause)
            .into_iter()
            .filter(|o| match &o.msg {
                Message::Echo { origin, .. } | Message::Ready { origin, .. } => *origin != me,
                _ => true,
            })
            .collect()
    }
}

/// r-broadcasts its writes with gaps and repeats in the write sequence numbers.
struct SeqSkip {
    wsn: u64,
}

impl Strategy for SeqSkip {
    fn kind(&self) -> StrategyKind {
        StrategyKind::SeqSkip
    }

    fn on_invoke(&mut self, ctx: &mut ByzContext<'_>, inv: &Invocation) -> Vec<Outgoing> {
        if inv.kind == OpKind::Read {
            return ctx.correct_invoke(inv);
        }
        let step = *[0u64, 1, 2, 3].choose(ctx.rng).expect("non-empty");
        self.wsn = (self.wsn + step).max(1);
        let body = WriteBody { value: inv.value.clone().unwrap_or_default(), wsn: self.wsn };
        ctx.shadow.rbroadcast_raw(body, Some(inv.op)).sends
    }

    fn on_message(&mut self, ctx: &mut ByzContext<'_>, from: ProcessId, msg: &Message, cause: Cause) -> Vec<Outgoing> {
        ctx.correct_response(from, msg, cause)
    }
}

/// Answers READ requests with falsified sequence numbers.
struct StaleState {
    mode: StaleMode,
}

impl Strategy for StaleState {
    fn kind(&self) -> StrategyKind {
        StrategyKind::StaleState
    }

    fn on_message(&mut self, ctx: &mut ByzContext<'_>, from: ProcessId, msg: &Message, cause: Cause) -> Vec<Outgoing> {
        if let Message::Read { target, rsn } = msg {
            let inflate = match self.mode {
                StaleMode::Inflate => true,
                StaleMode::Deflate => false,
                StaleMode::Mixed => ctx.rng.random_bool(0.5),
            };
            let wsn = if inflate { INFLATED_WSN } else { 0 };
            return vec![Outgoing::to_one(from, Message::State { target: *target, rsn: *rsn, wsn }, cause)];
        }
        ctx.correct_response(from, msg, cause)
    }
}

/// Behaves correctly but also sends unsolicited WRITE_DONE and CATCH_UP_DONE.
struct AckForge;

impl Strategy for AckForge {
    fn kind(&self) -> StrategyKind {
        StrategyKind::AckForge
    }

    fn on_message(&mut self, ctx: &mut ByzContext<'_>, from: ProcessId, msg: &Message, cause: Cause) -> Vec<Outgoing> {
        let mut out = ctx.correct_response(from, msg, cause);
        match msg {
            Message::App { body, .. } => {
                for wsn in [body.wsn, body.wsn + 1] {
                    out.push(Outgoing::to_one(from, Message::WriteDone { wsn }, cause));
                }
            }
            Message::Read { target, .. } => {
                let base = ctx.shadow.reg(*target).sn;
                for wsn in base..=base + 2 {
                    out.push(Outgoing::to_one(from, Message::CatchUpDone { target: *target, wsn }, cause));
                }
            }
            _ => {}
        }
        if ctx.rng.random_bool(0.25) {
            let to = ProcessId(ctx.rng.random_range(0..ctx.n as u32));
            let target = ProcessId(ctx.rng.random_range(0..ctx.n as u32));
            let wsn = ctx.rng.random_range(0..4);
            let junk = if ctx.rng.random_bool(0.5) {
                Message::WriteDone { wsn }
            } else {
                Message::CatchUpDone { target, wsn }
            };
            out.push(Outgoing::to_one(to, junk, None));
        }
        out
    }
}

/// Behaves correctly but keeps sending READY for pairs nobody broadcast, each
/// to at most `t` processes at a time.
struct ReadyPoison {
    forged: u64,
}

impl Strategy for ReadyPoison {
    fn kind(&self) -> StrategyKind {
        StrategyKind::ReadyPoison
    }

    fn on_message(&mut self, ctx: &mut ByzContext<'_>, from: ProcessId, msg: &Message, cause: Cause) -> Vec<Outgoing> {
        let mut out = ctx.correct_response(from, msg, cause);
        if ctx.t > 0 && ctx.rng.random_bool(0.5) {
            self.forged += 1;
            let origin = ProcessId(ctx.rng.random_range(0..ctx.n as u32));
            let sn = ctx.shadow.broadcast().next(origin) + ctx.rng.random_range(0..2);
            let body = WriteBody {
                value: Value::new(format!("{POISON_PREFIX}{}:{}", ctx.me.0, self.forged)),
                wsn: ctx.rng.random_range(1..5),
            };
            let mut targets: Vec<ProcessId> = ProcessId::all(ctx.n).collect();
            targets.shuffle(ctx.rng);
            let k = ctx.rng.random_range(1..=ctx.t);
            for p in targets.into_iter().take(k) {
                out.push(Outgoing::to_one(p, Message::Ready { origin, body: body.clone(), sn }, None));
            }
        }
        out
    }
}

/// Withholds its replies from one reader and asks the scheduler to starve it.
struct ColludeDelay {
    victim: ProcessId,
}

impl Strategy for ColludeDelay {
    fn kind(&self) -> StrategyKind {
        StrategyKind::ColludeDelay
    }

    fn on_message(&mut self, ctx: &mut ByzContext<'_>, from: ProcessId, msg: &Message, cause: Cause) -> Vec<Outgoing> {
        let victim = self.victim;
        ctx.correct_response(from, msg, cause)
            .into_iter()
            .filter(|o| {
                !(o.to == Dest::One(victim)
                    && matches!(o.msg, Message::State { .. } | Message::CatchUpDone { .. }))
            })
            .collect()
    }

    fn victims(&self) -> Vec<ProcessId> {
        vec![self.victim]
    }
}

/// A Byzantine process as seen by the simulator.
pub struct ByzantineNode {
    me: ProcessId,
    n: usize,
    t: usize,
    shadow: RegisterNode,
    rng: ChaCha8Rng,
    strategy: Box<dyn Strategy>,
    correct: Vec<ProcessId>,
    outbox: VecDeque<Outgoing>,
    send_cap: usize,
}

impl ByzantineNode {
    pub fn new(
        shadow: RegisterNode,
        strategy: Box<dyn Strategy>,
        seed: u64,
        correct: Vec<ProcessId>,
        send_cap: usize,
    ) -> Self {
        let me = shadow.me();
        let th = shadow.thresholds();
        ByzantineNode {
            me,
            n: th.n,
            t: th.t,
            shadow,
            rng: ChaCha8Rng::seed_from_u64(seed ^ (0x9E37_79B9_7F4A_7C15u64.wrapping_mul(me.0 as u64 + 1))),
            strategy,
            correct,
            outbox: VecDeque::new(),
            send_cap: send_cap.max(1),
        }
    }

    pub fn me(&self) -> ProcessId {
        self.me
    }

    pub fn strategy(&self) -> StrategyKind {
        self.strategy.kind()
    }

    pub fn victims(&self) -> Vec<ProcessId> {
        self.strategy.victims()
    }

    pub fn has_backlog(&self) -> bool {
        !self.outbox.is_empty()
    }

    fn ctx(&mut self) -> (ByzContext<'_>, &mut Box<dyn Strategy>) {
        (
            ByzContext {
                me: self.me,
                n: self.n,
                t: self.t,
                shadow: &mut self.shadow,
                rng: &mut self.rng,
                correct: &self.correct,
            },
            &mut self.strategy,
        )
    }

    pub fn invoke(&mut self, inv: &Invocation) -> Vec<Outgoing> {
        let (mut ctx, strategy) = self.ctx();
        let out = strategy.on_invoke(&mut ctx, inv);
        self.outbox.extend(out);
        self.drain()
    }

    pub fn deliver(&mut self, from: ProcessId, msg: &Message, cause: Cause) -> Vec<Outgoing> {
        let (mut ctx, strategy) = self.ctx();
        let out = strategy.on_message(&mut ctx, from, msg, cause);
        self.outbox.extend(out);
        self.drain()
    }

    /// Releases another batch of backlogged sends.
    pub fn tick(&mut self) -> Vec<Outgoing> {
        self.drain()
    }

    /// Pops queued sends while they fit in the per-activation cap; a
    /// broadcast counts as `n` sends.
    fn drain(&mut self) -> Vec<Outgoing> {
        let mut budget = self.send_cap;
        let mut out = Vec::new();
        while let Some(front) = self.outbox.front() {
            let cost = match front.to {
                Dest::All => self.n,
                Dest::One(_) => 1,
            };
            if cost > budget && !out.is_empty() {
                break;
            }
            budget = budget.saturating_sub(cost);
            out.push(self.outbox.pop_front().expect("front exists"));
        }
        out
    }
}
