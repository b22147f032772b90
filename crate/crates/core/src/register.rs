//! Single-writer/multi-reader atomic register protocol.
//!
//! A [`RegisterNode`] is the full state of one correct process: the local copy
//! `reg[0..n]` of every register, its write and read counters, at most one
//! pending write and one pending read, and the reliable broadcast layer that
//! carries WRITE messages. Every input returns an [`Effects`] batch.

use std::collections::{BTreeMap, BTreeSet};

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::quorum::Thresholds;
use crate::rbcast::{RbDelivery, RbMessage, RbOutput, RbSend, ReliableBroadcast};
use crate::types::{Cause, Message, OpId, Outgoing, ProcessId, RegEntry, Value, WriteBody};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProtocolError {
    #[error("{0} already has a write in progress")]
    WriteInProgress(ProcessId),
    #[error("{0} already has a read in progress")]
    ReadInProgress(ProcessId),
    #[error("register {target} does not exist in a system of {n} processes")]
    NoSuchRegister { target: ProcessId, n: usize },
    #[error(transparent)]
    Broadcast(#[from] crate::rbcast::RbError),
}

/// Observable consequence of an input, recorded in the trace by the host.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NodeEvent {
    /// The broadcast layer r-delivered `body` as instance `sn` of `origin`.
    RDelivered { origin: ProcessId, sn: u64, body: WriteBody },
    /// `reg[writer]` was overwritten with `entry`.
    Applied { writer: ProcessId, entry: RegEntry },
    WriteCompleted { op: OpId, wsn: u64 },
    ReadCompleted { op: OpId, target: ProcessId, entry: RegEntry },
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Effects {
    pub sends: Vec<Outgoing>,
    pub events: Vec<NodeEvent>,
}

impl Effects {
    pub fn is_empty(&self) -> bool {
        self.sends.is_empty() && self.events.is_empty()
    }

    pub fn extend(&mut self, other: Effects) {
        self.sends.extend(other.sends);
        self.events.extend(other.events);
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PendingWrite {
    pub op: OpId,
    pub wsn: u64,
    pub acks: BTreeSet<ProcessId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReadPhase {
    Freshness,
    CatchUp { chosen: RegEntry, acks: BTreeSet<ProcessId> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PendingRead {
    pub op: OpId,
    pub target: ProcessId,
    pub rsn: u64,
    pub reports: BTreeMap<ProcessId, u64>,
    pub phase: ReadPhase,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct DeferredCatchUp {
    wsn: u64,
    from: ProcessId,
    cause: Cause,
}

#[derive(Debug, Clone)]
pub struct RegisterNode {
    me: ProcessId,
    th: Thresholds,
    rb: ReliableBroadcast<WriteBody>,
    reg: Vec<RegEntry>,
    wsn: u64,
    rsn: Vec<u64>,
    pending_write: Option<PendingWrite>,
    pending_read: Option<PendingRead>,
    /// Per writer: r-delivered WRITEs waiting for `wsn == reg[writer].sn + 1`.
    deferred_writes: Vec<BTreeMap<u64, (Value, Cause)>>,
    /// Per register: CATCH_UP requests waiting for `reg[j].sn >= wsn`.
    deferred_catchups: Vec<Vec<DeferredCatchUp>>,
}

impl RegisterNode {
    pub fn new(me: ProcessId, th: Thresholds, init: Vec<Value>) -> Self {
        assert_eq!(init.len(), th.n, "one initial value per register");
        RegisterNode {
            me,
            th,
            rb: ReliableBroadcast::new(me, th),
            reg: init.into_iter().map(RegEntry::initial).collect(),
            wsn: 0,
            rsn: vec![0; th.n],
            pending_write: None,
            pending_read: None,
            deferred_writes: vec![BTreeMap::new(); th.n],
            deferred_catchups: vec![Vec::new(); th.n],
        }
    }

    pub fn with_pending_cap(mut self, cap: usize) -> Self {
        self.rb = self.rb.with_pending_cap(cap);
        self
    }

    pub fn me(&self) -> ProcessId {
        self.me
    }

    pub fn thresholds(&self) -> Thresholds {
        self.th
    }

    pub fn reg(&self, j: ProcessId) -> &RegEntry {
        &self.reg[j.index()]
    }

    pub fn wsn(&self) -> u64 {
        self.wsn
    }

    pub fn rsn(&self, j: ProcessId) -> u64 {
        self.rsn[j.index()]
    }

    pub fn pending_write(&self) -> Option<&PendingWrite> {
        self.pending_write.as_ref()
    }

    pub fn pending_read(&self) -> Option<&PendingRead> {
        self.pending_read.as_ref()
    }

    pub fn broadcast(&self) -> &ReliableBroadcast<WriteBody> {
        &self.rb
    }

    pub fn deferred_write_count(&self, writer: ProcessId) -> usize {
        self.deferred_writes[writer.index()].len()
    }

    pub fn deferred_catchup_count(&self, j: ProcessId) -> usize {
        self.deferred_catchups[j.index()].len()
    }

    /// Human-readable description of what the pending operations wait for.
    pub fn blocked_on(&self) -> Vec<String> {
        let mut out = Vec::new();
        if let Some(w) = &self.pending_write {
            out.push(format!(
                "{} write wsn={} waits for WRITE_DONE from {} processes, has {}",
                w.op,
                w.wsn,
                self.th.write_quorum(),
                w.acks.len()
            ));
        }
        if let Some(r) = &self.pending_read {
            match &r.phase {
                ReadPhase::Freshness => out.push(format!(
                    "{} read of {} rsn={} waits for freshness: reg.sn={}, reports={:?}, quorum={}",
                    r.op,
                    r.target,
                    r.rsn,
                    self.reg[r.target.index()].sn,
                    r.reports.values().collect::<Vec<_>>(),
                    self.th.read_quorum()
                )),
                ReadPhase::CatchUp { chosen, acks } => out.push(format!(
                    "{} read of {} waits for CATCH_UP_DONE(wsn={}) from {} processes, has {}",
                    r.op,
                    r.target,
                    chosen.sn,
                    self.th.read_quorum(),
                    acks.len()
                )),
            }
        }
        out
    }

    /// Digest of the protocol-visible local state, stable across runs.
    pub fn snapshot_digest(&self) -> String {
        let mut h = Sha256::new();
        for e in &self.reg {
            h.update(e.sn.to_le_bytes());
            h.update(e.val.as_str().as_bytes());
            h.update([0u8]);
        }
        h.update(self.wsn.to_le_bytes());
        for r in &self.rsn {
            h.update(r.to_le_bytes());
        }
        for nx in self.rb.next_all() {
            h.update(nx.to_le_bytes());
        }
        match &self.pending_write {
            Some(w) => {
                h.update([1u8]);
                h.update(w.wsn.to_le_bytes());
                h.update((w.acks.len() as u64).to_le_bytes());
            }
            None => h.update([0u8]),
        }
        match &self.pending_read {
            Some(r) => {
                h.update([1u8]);
                h.update(r.target.0.to_le_bytes());
                h.update(r.rsn.to_le_bytes());
                h.update((r.reports.len() as u64).to_le_bytes());
                if let ReadPhase::CatchUp { chosen, acks } = &r.phase {
                    h.update(chosen.sn.to_le_bytes());
                    h.update((acks.len() as u64).to_le_bytes());
                }
            }
            None => h.update([0u8]),
        }
        hex::encode(&h.finalize()[..8])
    }

    fn check_target(&self, target: ProcessId) -> Result<(), ProtocolError> {
        if target.index() < self.th.n {
            Ok(())
        } else {
            Err(ProtocolError::NoSuchRegister { target, n: self.th.n })
        }
    }

    /// Starts `REG[me].write(value)`.
    pub fn begin_write(&mut self, op: OpId, value: Value) -> Result<Effects, ProtocolError> {
        if self.pending_write.is_some() {
            return Err(ProtocolError::WriteInProgress(self.me));
        }
        let wsn = self.wsn + 1;
        let rb_sn = self.rb.last_broadcast_sn() + 1;
        let out = self.rb.broadcast(WriteBody { value, wsn }, rb_sn, Some(op))?;
        self.wsn = wsn;
        self.pending_write = Some(PendingWrite { op, wsn, acks: BTreeSet::new() });
        let mut fx = Effects::default();
        self.absorb_rb(out, &mut fx);
        Ok(fx)
    }

    /// Starts `REG[target].read()`.
    pub fn begin_read(&mut self, op: OpId, target: ProcessId) -> Result<Effects, ProtocolError> {
        self.check_target(target)?;
        if self.pending_read.is_some() {
            return Err(ProtocolError::ReadInProgress(self.me));
        }
        let j = target.index();
        self.rsn[j] += 1;
        let rsn = self.rsn[j];
        self.pending_read = Some(PendingRead {
            op,
            target,
            rsn,
            reports: BTreeMap::new(),
            phase: ReadPhase::Freshness,
        });
        let mut fx = Effects::default();
        fx.sends.push(Outgoing::to_all(Message::Read { target, rsn }, Some(op)));
        self.evaluate_freshness(&mut fx);
        Ok(fx)
    }

    /// r-broadcasts an arbitrary WRITE body under the next broadcast sequence
    /// number, bypassing write bookkeeping. Used by Byzantine strategies.
    pub fn rbroadcast_raw(&mut self, body: WriteBody, cause: Cause) -> Effects {
        let sn = self.rb.last_broadcast_sn() + 1;
        let out = self.rb.broadcast(body, sn, cause).expect("consecutive sn");
        let mut fx = Effects::default();
        self.absorb_rb(out, &mut fx);
        fx
    }

    /// Handles a message received from `from`.
    pub fn handle(&mut self, from: ProcessId, msg: Message, cause: Cause) -> Effects {
        let mut fx = Effects::default();
        match msg {
            Message::App { body, sn } => {
                let out = self.rb.handle(from, RbMessage::App { value: body, sn }, cause);
                self.absorb_rb(out, &mut fx);
            }
            Message::Echo { origin, body, sn } => {
                let out = self.rb.handle(from, RbMessage::Echo { origin, value: body, sn }, cause);
                self.absorb_rb(out, &mut fx);
            }
            Message::Ready { origin, body, sn } => {
                let out = self.rb.handle(from, RbMessage::Ready { origin, value: body, sn }, cause);
                self.absorb_rb(out, &mut fx);
            }
            Message::WriteDone { wsn } => self.on_write_done(wsn, from, &mut fx),
            Message::Read { target, rsn } => self.on_read_req(target, rsn, from, cause, &mut fx),
            Message::State { target, rsn, wsn } => self.on_state(target, rsn, wsn, from, &mut fx),
            Message::CatchUp { target, wsn } => self.on_catch_up(target, wsn, from, cause, &mut fx),
            Message::CatchUpDone { target, wsn } => self.on_catch_up_done(target, wsn, from, &mut fx),
        }
        fx
    }

    fn absorb_rb(&mut self, out: RbOutput<WriteBody>, fx: &mut Effects) {
        for RbSend { to, msg, cause } in out.sends {
            let msg = match msg {
                RbMessage::App { value, sn } => Message::App { body: value, sn },
                RbMessage::Echo { origin, value, sn } => Message::Echo { origin, body: value, sn },
                RbMessage::Ready { origin, value, sn } => Message::Ready { origin, body: value, sn },
            };
            fx.sends.push(Outgoing { to, msg, cause });
        }
        for RbDelivery { origin, sn, value, cause } in out.deliveries {
            fx.events.push(NodeEvent::RDelivered { origin, sn, body: value.clone() });
            self.on_write_rdeliver(origin, value, cause, fx);
        }
    }

    fn on_write_rdeliver(&mut self, writer: ProcessId, body: WriteBody, cause: Cause, fx: &mut Effects) {
        let j = writer.index();
        let current = self.reg[j].sn;
        if body.wsn <= current {
            // An already-used sequence number can never satisfy the wait.
            return;
        }
        self.deferred_writes[j].entry(body.wsn).or_insert((body.value, cause));
        let mut changed = false;
        loop {
            let want = self.reg[j].sn + 1;
            let Some((value, cause)) = self.deferred_writes[j].remove(&want) else {
                break;
            };
            let entry = RegEntry { val: value, sn: want };
            self.reg[j] = entry.clone();
            fx.events.push(NodeEvent::Applied { writer, entry });
            fx.sends.push(Outgoing::to_one(writer, Message::WriteDone { wsn: want }, cause));
            changed = true;
        }
        if changed {
            self.release_catchups(writer, fx);
            self.evaluate_freshness(fx);
        }
    }

    fn on_write_done(&mut self, wsn: u64, from: ProcessId, fx: &mut Effects) {
        let quorum = self.th.write_quorum();
        let Some(w) = self.pending_write.as_mut() else {
            return;
        };
        if w.wsn != wsn {
            return;
        }
        w.acks.insert(from);
        if w.acks.len() >= quorum {
            let w = self.pending_write.take().expect("checked above");
            fx.events.push(NodeEvent::WriteCompleted { op: w.op, wsn: w.wsn });
        }
    }

    fn on_read_req(&mut self, target: ProcessId, rsn: u64, from: ProcessId, cause: Cause, fx: &mut Effects) {
        if target.index() >= self.th.n {
            return;
        }
        let wsn = self.reg[target.index()].sn;
        fx.sends.push(Outgoing::to_one(from, Message::State { target, rsn, wsn }, cause));
    }

    fn on_state(&mut self, target: ProcessId, rsn: u64, wsn: u64, from: ProcessId, fx: &mut Effects) {
        let Some(r) = self.pending_read.as_mut() else {
            return;
        };
        if r.target != target || r.rsn != rsn || r.phase != ReadPhase::Freshness {
            return;
        }
        r.reports.entry(from).or_insert(wsn);
        self.evaluate_freshness(fx);
    }

    /// Freshness guard: at least `read_quorum` distinct reporters whose
    /// reported sequence numbers do not exceed the local copy.
    fn evaluate_freshness(&mut self, fx: &mut Effects) {
        let quorum = self.th.read_quorum();
        let fresh_check = self.th.freshness_enabled();
        let Some(r) = self.pending_read.as_mut() else {
            return;
        };
        if r.phase != ReadPhase::Freshness {
            return;
        }
        let local = &self.reg[r.target.index()];
        if fresh_check {
            let fresh = r.reports.values().filter(|w| **w <= local.sn).count();
            if fresh < quorum {
                return;
            }
        }
        let chosen = local.clone();
        let (op, target) = (r.op, r.target);
        if self.th.catch_up_enabled() {
            fx.sends.push(Outgoing::to_all(Message::CatchUp { target, wsn: chosen.sn }, Some(op)));
            r.phase = ReadPhase::CatchUp { chosen, acks: BTreeSet::new() };
        } else {
            self.pending_read = None;
            fx.events.push(NodeEvent::ReadCompleted { op, target, entry: chosen });
        }
    }

    fn on_catch_up(&mut self, target: ProcessId, wsn: u64, from: ProcessId, cause: Cause, fx: &mut Effects) {
        let j = target.index();
        if j >= self.th.n {
            return;
        }
        if self.reg[j].sn >= wsn {
            fx.sends.push(Outgoing::to_one(from, Message::CatchUpDone { target, wsn }, cause));
        } else {
            self.deferred_catchups[j].push(DeferredCatchUp { wsn, from, cause });
        }
    }

    fn release_catchups(&mut self, target: ProcessId, fx: &mut Effects) {
        let j = target.index();
        let sn = self.reg[j].sn;
        let waiting = std::mem::take(&mut self.deferred_catchups[j]);
        let (ready, still): (Vec<_>, Vec<_>) = waiting.into_iter().partition(|d| d.wsn <= sn);
        self.deferred_catchups[j] = still;
        for d in ready {
            fx.sends.push(Outgoing::to_one(
                d.from,
                Message::CatchUpDone { target, wsn: d.wsn },
                d.cause,
            ));
        }
    }

    fn on_catch_up_done(&mut self, target: ProcessId, wsn: u64, from: ProcessId, fx: &mut Effects) {
        let quorum = self.th.read_quorum();
        let Some(r) = self.pending_read.as_mut() else {
            return;
        };
        if r.target != target {
            return;
        }
        let ReadPhase::CatchUp { chosen, acks } = &mut r.phase else {
            return;
        };
        if chosen.sn != wsn {
            return;
        }
        acks.insert(from);
        if acks.len() >= quorum {
            let entry = chosen.clone();
            let op = r.op;
            self.pending_read = None;
            fx.events.push(NodeEvent::ReadCompleted { op, target, entry });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{Dest, MessageKind};

    fn pid(i: u32) -> ProcessId {
        ProcessId(i)
    }

    fn node(me: u32) -> RegisterNode {
        RegisterNode::new(pid(me), Thresholds::new(4, 1), vec![Value::bottom(); 4])
    }

    fn body(v: &str, wsn: u64) -> WriteBody {
        WriteBody { value: Value::new(v), wsn }
    }

    /// Makes `node` r-deliver instance `sn` of `origin` carrying `b`.
    fn rdeliver(node: &mut RegisterNode, origin: u32, b: WriteBody, sn: u64) -> Effects {
        let mut fx = Effects::default();
        for from in 1..=3 {
            fx.extend(node.handle(
                pid(from),
                Message::Ready { origin: pid(origin), body: b.clone(), sn },
                None,
            ));
        }
        fx
    }

    fn sends_of(fx: &Effects, kind: MessageKind) -> Vec<&Outgoing> {
        fx.sends.iter().filter(|o| o.msg.kind() == kind).collect()
    }

    #[test]
    fn write_broadcasts_consecutive_numbers() {
        let mut n0 = node(0);
        let fx = n0.begin_write(OpId(1), Value::new("x")).unwrap();
        assert_eq!(
            fx.sends,
            vec![Outgoing::to_all(Message::App { body: body("x", 1), sn: 1 }, Some(OpId(1)))]
        );
        assert_eq!(n0.begin_write(OpId(2), "y".into()), Err(ProtocolError::WriteInProgress(pid(0))));
        for from in 0..3 {
            n0.handle(pid(from), Message::WriteDone { wsn: 1 }, None);
        }
        n0.begin_write(OpId(2), "y".into()).unwrap();
        for from in 0..3 {
            n0.handle(pid(from), Message::WriteDone { wsn: 2 }, None);
        }
        let fx = n0.begin_write(OpId(3), "z".into()).unwrap();
        assert!(matches!(fx.sends[0].msg, Message::App { body: WriteBody { wsn: 3, .. }, sn: 3 }));
    }

    #[test]
    fn write_completes_at_n_minus_t_distinct_acks() {
        let mut n0 = node(0);
        n0.begin_write(OpId(1), "x".into()).unwrap();
        assert!(n0.handle(pid(1), Message::WriteDone { wsn: 1 }, None).is_empty());
        assert!(n0.handle(pid(1), Message::WriteDone { wsn: 1 }, None).is_empty());
        assert!(n0.handle(pid(2), Message::WriteDone { wsn: 2 }, None).is_empty());
        assert!(n0.handle(pid(2), Message::WriteDone { wsn: 1 }, None).is_empty());
        assert_eq!(n0.pending_write().unwrap().acks.len(), 2);
        let fx = n0.handle(pid(3), Message::WriteDone { wsn: 1 }, None);
        assert_eq!(fx.events, vec![NodeEvent::WriteCompleted { op: OpId(1), wsn: 1 }]);
        assert!(n0.pending_write().is_none());
    }

    #[test]
    fn rdelivered_write_is_applied_and_acked() {
        let mut n1 = node(1);
        let fx = rdeliver(&mut n1, 2, body("a", 1), 1);
        assert_eq!(n1.reg(pid(2)), &RegEntry { val: "a".into(), sn: 1 });
        let acks = sends_of(&fx, MessageKind::WriteDone);
        assert_eq!(acks.len(), 1);
        assert_eq!(acks[0].to, Dest::One(pid(2)));
        assert_eq!(acks[0].msg, Message::WriteDone { wsn: 1 });
    }

    #[test]
    fn gapped_writes_are_buffered_then_drained_in_order() {
        let mut n1 = node(1);
        let fx = rdeliver(&mut n1, 3, body("c", 3), 1);
        assert!(sends_of(&fx, MessageKind::WriteDone).is_empty());
        assert_eq!(n1.reg(pid(3)).sn, 0);
        assert_eq!(n1.deferred_write_count(pid(3)), 1);
        rdeliver(&mut n1, 3, body("a", 1), 2);
        assert_eq!(n1.reg(pid(3)).sn, 1);
        let fx = rdeliver(&mut n1, 3, body("b", 2), 3);
        let applied: Vec<u64> = fx
            .events
            .iter()
            .filter_map(|e| match e {
                NodeEvent::Applied { entry, .. } => Some(entry.sn),
                _ => None,
            })
            .collect();
        assert_eq!(applied, vec![2, 3]);
        assert_eq!(n1.reg(pid(3)), &RegEntry { val: "c".into(), sn: 3 });
        assert_eq!(sends_of(&fx, MessageKind::WriteDone).len(), 2);
    }

    #[test]
    fn stale_wsn_is_never_applied() {
        let mut n1 = node(1);
        rdeliver(&mut n1, 3, body("a", 1), 1);
        let fx = rdeliver(&mut n1, 3, body("evil", 1), 2);
        assert!(sends_of(&fx, MessageKind::WriteDone).is_empty());
        assert_eq!(n1.reg(pid(3)).val, Value::new("a"));
    }

    #[test]
    fn read_request_and_state_replies() {
        let mut n1 = node(1);
        let fx = n1.begin_read(OpId(5), pid(2)).unwrap();
        assert_eq!(fx.sends, vec![Outgoing::to_all(Message::Read { target: pid(2), rsn: 1 }, Some(OpId(5)))]);
        assert_eq!(n1.begin_read(OpId(6), pid(2)), Err(ProtocolError::ReadInProgress(pid(1))));
        assert!(matches!(
            n1.begin_read(OpId(6), pid(9)),
            Err(ProtocolError::NoSuchRegister { .. })
        ));

        let mut n2 = node(2);
        let fx = n2.handle(pid(3), Message::Read { target: pid(0), rsn: 7 }, None);
        assert_eq!(fx.sends, vec![Outgoing::to_one(pid(3), Message::State { target: pid(0), rsn: 7, wsn: 0 }, None)]);
        for sn in 1..=5 {
            rdeliver(&mut n2, 0, body("v", sn), sn);
        }
        let fx = n2.handle(pid(3), Message::Read { target: pid(0), rsn: 8 }, None);
        assert_eq!(fx.sends[0].msg, Message::State { target: pid(0), rsn: 8, wsn: 5 });
    }

    #[test]
    fn second_read_uses_next_rsn() {
        let mut n1 = node(1);
        n1.begin_read(OpId(1), pid(2)).unwrap();
        for from in 0..3 {
            n1.handle(pid(from), Message::State { target: pid(2), rsn: 1, wsn: 0 }, None);
        }
        for from in 0..3 {
            n1.handle(pid(from), Message::CatchUpDone { target: pid(2), wsn: 0 }, None);
        }
        assert!(n1.pending_read().is_none());
        let fx = n1.begin_read(OpId(2), pid(2)).unwrap();
        assert_eq!(fx.sends[0].msg, Message::Read { target: pid(2), rsn: 2 });
    }

    fn state(n: &mut RegisterNode, from: u32, target: u32, rsn: u64, wsn: u64) -> Effects {
        n.handle(pid(from), Message::State { target: pid(target), rsn, wsn }, None)
    }

    #[test]
    fn freshness_exists_subset() {
        let mut n1 = node(1);
        rdeliver(&mut n1, 2, body("a", 1), 1);
        rdeliver(&mut n1, 2, body("b", 2), 2);
        n1.begin_read(OpId(1), pid(2)).unwrap();
        assert!(state(&mut n1, 0, 2, 1, 1).is_empty());
        assert!(state(&mut n1, 1, 2, 1, 2).is_empty());
        let fx = state(&mut n1, 3, 2, 1, 2);
        assert_eq!(fx.sends, vec![Outgoing::to_all(Message::CatchUp { target: pid(2), wsn: 2 }, Some(OpId(1)))]);
    }

    #[test]
    fn inflated_reports_block_until_local_copy_catches_up() {
        let mut n1 = node(1);
        rdeliver(&mut n1, 2, body("a", 1), 1);
        rdeliver(&mut n1, 2, body("b", 2), 2);
        n1.begin_read(OpId(1), pid(2)).unwrap();
        for from in [0, 2, 3] {
            assert!(state(&mut n1, from, 2, 1, 5).is_empty());
        }
        assert!(state(&mut n1, 1, 2, 1, 0).is_empty());
        // Only one report is <= 2; raise the local copy to 5.
        for sn in 3..=4 {
            let fx = rdeliver(&mut n1, 2, body("v", sn), sn);
            assert!(sends_of(&fx, MessageKind::CatchUp).is_empty());
        }
        let fx = rdeliver(&mut n1, 2, body("e", 5), 5);
        let cu = sends_of(&fx, MessageKind::CatchUp);
        assert_eq!(cu.len(), 1);
        assert_eq!(cu[0].msg, Message::CatchUp { target: pid(2), wsn: 5 });
    }

    #[test]
    fn stale_and_duplicate_states_ignored() {
        let mut n1 = node(1);
        n1.begin_read(OpId(1), pid(2)).unwrap();
        assert!(state(&mut n1, 0, 2, 0, 0).is_empty());
        assert!(state(&mut n1, 0, 3, 1, 0).is_empty());
        assert!(state(&mut n1, 0, 2, 1, 0).is_empty());
        assert!(state(&mut n1, 0, 2, 1, 0).is_empty());
        assert_eq!(n1.pending_read().unwrap().reports.len(), 1);
    }

    #[test]
    fn catch_up_immediate_and_deferred() {
        let mut n2 = node(2);
        for sn in 1..=3 {
            rdeliver(&mut n2, 0, body("v", sn), sn);
        }
        let fx = n2.handle(pid(1), Message::CatchUp { target: pid(0), wsn: 2 }, None);
        assert_eq!(fx.sends, vec![Outgoing::to_one(pid(1), Message::CatchUpDone { target: pid(0), wsn: 2 }, None)]);

        let mut n3 = node(3);
        rdeliver(&mut n3, 0, body("v", 1), 1);
        assert!(n3.handle(pid(1), Message::CatchUp { target: pid(0), wsn: 4 }, None).is_empty());
        assert!(n3.handle(pid(1), Message::CatchUp { target: pid(0), wsn: 1_000_000_000 }, None).is_empty());
        for sn in 2..=3 {
            let fx = rdeliver(&mut n3, 0, body("v", sn), sn);
            assert!(sends_of(&fx, MessageKind::CatchUpDone).is_empty());
        }
        let fx = rdeliver(&mut n3, 0, body("v", 4), 4);
        let done = sends_of(&fx, MessageKind::CatchUpDone);
        assert_eq!(done.len(), 1);
        assert_eq!(done[0].msg, Message::CatchUpDone { target: pid(0), wsn: 4 });
        assert_eq!(n3.deferred_catchup_count(pid(0)), 1);
    }

    #[test]
    fn read_completes_at_quorum_of_catch_up_done() {
        let mut n1 = node(1);
        rdeliver(&mut n1, 2, body("a", 1), 1);
        n1.begin_read(OpId(9), pid(2)).unwrap();
        for from in 0..3 {
            state(&mut n1, from, 2, 1, 1);
        }
        let done = |wsn: u64| Message::CatchUpDone { target: pid(2), wsn };
        assert!(n1.handle(pid(0), done(1), None).is_empty());
        assert!(n1.handle(pid(0), done(1), None).is_empty());
        assert!(n1.handle(pid(2), done(0), None).is_empty());
        assert!(n1.handle(pid(2), done(1), None).is_empty());
        let fx = n1.handle(pid(3), done(1), None);
        assert_eq!(
            fx.events,
            vec![NodeEvent::ReadCompleted {
                op: OpId(9),
                target: pid(2),
                entry: RegEntry { val: "a".into(), sn: 1 }
            }]
        );
    }

    #[test]
    fn chosen_value_is_taken_when_guard_first_holds() {
        let mut n1 = node(1);
        n1.begin_read(OpId(1), pid(2)).unwrap();
        for from in 0..3 {
            state(&mut n1, from, 2, 1, 0);
        }
        rdeliver(&mut n1, 2, body("late", 1), 1);
        match &n1.pending_read().unwrap().phase {
            ReadPhase::CatchUp { chosen, .. } => assert_eq!(chosen.sn, 0),
            p => panic!("unexpected phase {p:?}"),
        }
        // Late STATE after the guard fired is discarded.
        state(&mut n1, 3, 2, 1, 0);
        assert_eq!(n1.pending_read().unwrap().reports.len(), 3);
    }

    #[test]
    fn snapshot_digest_tracks_state() {
        let mut a = node(1);
        let b = node(1);
        assert_eq!(a.snapshot_digest(), b.snapshot_digest());
        rdeliver(&mut a, 2, body("a", 1), 1);
        assert_ne!(a.snapshot_digest(), b.snapshot_digest());
    }

    #[test]
    fn mutations_change_read_path() {
        use crate::quorum::Mutation;
        let th = Thresholds::new(4, 1).with_mutation(Some(Mutation::NoFreshness));
        let mut n = RegisterNode::new(pid(1), th, vec![Value::bottom(); 4]);
        let fx = n.begin_read(OpId(1), pid(0)).unwrap();
        assert_eq!(sends_of(&fx, MessageKind::CatchUp).len(), 1);

        let th = Thresholds::new(4, 1).with_mutation(Some(Mutation::NoCatchUp));
        let mut n = RegisterNode::new(pid(1), th, vec![Value::bottom(); 4]);
        n.begin_read(OpId(1), pid(0)).unwrap();
        state(&mut n, 0, 0, 1, 0);
        state(&mut n, 1, 0, 1, 0);
        let fx = state(&mut n, 2, 0, 1, 0);
        assert!(sends_of(&fx, MessageKind::CatchUp).is_empty());
        assert!(matches!(fx.events[0], NodeEvent::ReadCompleted { .. }));
    }
}
