//! Sequence-numbered Bracha reliable broadcast.
//!
//! The state machine is purely reactive: every input returns the messages to
//! send and the pairs r-delivered as a consequence. Blocking waits of the
//! textbook formulation are modeled as guards re-evaluated whenever the state
//! they observe changes.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::quorum::Thresholds;
use crate::types::{Cause, Dest, ProcessId};

/// Default bound on buffered not-yet-processable APP messages per origin.
pub const DEFAULT_PENDING_CAP: usize = 1024;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RbMessage<P> {
    App { value: P, sn: u64 },
    Echo { origin: ProcessId, value: P, sn: u64 },
    Ready { origin: ProcessId, value: P, sn: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RbSend<P> {
    pub to: Dest,
    pub msg: RbMessage<P>,
    pub cause: Cause,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RbDelivery<P> {
    pub origin: ProcessId,
    pub sn: u64,
    pub value: P,
    pub cause: Cause,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RbOutput<P> {
    pub sends: Vec<RbSend<P>>,
    pub deliveries: Vec<RbDelivery<P>>,
}

impl<P> Default for RbOutput<P> {
    fn default() -> Self {
        RbOutput { sends: Vec::new(), deliveries: Vec::new() }
    }
}

impl<P> RbOutput<P> {
    pub fn is_empty(&self) -> bool {
        self.sends.is_empty() && self.deliveries.is_empty()
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RbError {
    #[error("broadcast sequence number {got} out of order, expected {expected}")]
    OutOfSequence { expected: u64, got: u64 },
}

#[derive(Debug, Clone)]
struct Instance<P> {
    first_app: Option<P>,
    echoed: bool,
    echoes: BTreeMap<P, BTreeSet<ProcessId>>,
    readies: BTreeMap<P, BTreeSet<ProcessId>>,
    readied: BTreeSet<P>,
    delivered: bool,
    cause: Cause,
}

impl<P> Instance<P> {
    fn new(cause: Cause) -> Self {
        Instance {
            first_app: None,
            echoed: false,
            echoes: BTreeMap::new(),
            readies: BTreeMap::new(),
            readied: BTreeSet::new(),
            delivered: false,
            cause,
        }
    }
}

#[derive(Debug, Clone)]
struct OriginState<P> {
    instances: BTreeMap<u64, Instance<P>>,
    /// sn -> arrival stamp, for APPs waiting until `next == sn`.
    pending: BTreeMap<u64, u64>,
    arrivals: u64,
}

impl<P> Default for OriginState<P> {
    fn default() -> Self {
        OriginState { instances: BTreeMap::new(), pending: BTreeMap::new(), arrivals: 0 }
    }
}

/// Per-process reliable broadcast state.
#[derive(Debug, Clone)]
pub struct ReliableBroadcast<P> {
    me: ProcessId,
    th: Thresholds,
    last_sn: u64,
    next: Vec<u64>,
    origins: Vec<OriginState<P>>,
    pending_cap: usize,
}

impl<P: Clone + Ord> ReliableBroadcast<P> {
    pub fn new(me: ProcessId, th: Thresholds) -> Self {
        ReliableBroadcast {
            me,
            th,
            last_sn: 0,
            next: vec![1; th.n],
            origins: (0..th.n).map(|_| OriginState::default()).collect(),
            pending_cap: DEFAULT_PENDING_CAP,
        }
    }

    pub fn with_pending_cap(mut self, cap: usize) -> Self {
        self.pending_cap = cap.max(1);
        self
    }

    pub fn me(&self) -> ProcessId {
        self.me
    }

    /// Next sequence number this node will r-deliver from `origin`.
    pub fn next(&self, origin: ProcessId) -> u64 {
        self.next[origin.index()]
    }

    pub fn next_all(&self) -> &[u64] {
        &self.next
    }

    /// Sequence number of this node's last own broadcast.
    pub fn last_broadcast_sn(&self) -> u64 {
        self.last_sn
    }

    pub fn is_delivered(&self, origin: ProcessId, sn: u64) -> bool {
        sn >= 1 && sn < self.next[origin.index()]
    }

    pub fn pending_len(&self, origin: ProcessId) -> usize {
        self.origins[origin.index()].pending.len()
    }

    pub fn has_echoed(&self, origin: ProcessId, sn: u64) -> bool {
        self.instance(origin, sn).is_some_and(|i| i.echoed)
    }

    pub fn has_readied(&self, origin: ProcessId, value: &P, sn: u64) -> bool {
        self.instance(origin, sn).is_some_and(|i| i.readied.contains(value))
    }

    pub fn echo_count(&self, origin: ProcessId, value: &P, sn: u64) -> usize {
        self.instance(origin, sn)
            .and_then(|i| i.echoes.get(value))
            .map_or(0, BTreeSet::len)
    }

    pub fn ready_count(&self, origin: ProcessId, value: &P, sn: u64) -> usize {
        self.instance(origin, sn)
            .and_then(|i| i.readies.get(value))
            .map_or(0, BTreeSet::len)
    }

    fn instance(&self, origin: ProcessId, sn: u64) -> Option<&Instance<P>> {
        self.origins.get(origin.index())?.instances.get(&sn)
    }

    fn valid(&self, origin: ProcessId, sn: u64) -> bool {
        sn >= 1 && origin.index() < self.th.n
    }

    /// Starts the broadcast of `value` under this node's sequence number `sn`.
    pub fn broadcast(&mut self, value: P, sn: u64, cause: Cause) -> Result<RbOutput<P>, RbError> {
        let expected = self.last_sn + 1;
        if sn != expected {
            return Err(RbError::OutOfSequence { expected, got: sn });
        }
        self.last_sn = sn;
        let mut out = RbOutput::default();
        out.sends.push(RbSend { to: Dest::All, msg: RbMessage::App { value, sn }, cause });
        Ok(out)
    }

    pub fn handle(&mut self, from: ProcessId, msg: RbMessage<P>, cause: Cause) -> RbOutput<P> {
        match msg {
            RbMessage::App { value, sn } => self.on_app(from, value, sn, cause),
            RbMessage::Echo { origin, value, sn } => self.on_echo(origin, value, sn, from, cause),
            RbMessage::Ready { origin, value, sn } => self.on_ready(origin, value, sn, from, cause),
        }
    }

    pub fn on_app(&mut self, origin: ProcessId, value: P, sn: u64, cause: Cause) -> RbOutput<P> {
        let mut out = RbOutput::default();
        if !self.valid(origin, sn) {
            return out;
        }
        let next = self.next[origin.index()];
        let cap = self.pending_cap;
        let st = &mut self.origins[origin.index()];
        let inst = st.instances.entry(sn).or_insert_with(|| Instance::new(cause));
        if inst.first_app.is_some() {
            return out;
        }
        inst.first_app = Some(value);
        if sn <= next {
            self.echo(origin, sn, &mut out);
            return out;
        }
        st.arrivals += 1;
        st.pending.insert(sn, st.arrivals);
        if st.pending.len() > cap {
            let oldest = st
                .pending
                .iter()
                .min_by_key(|(_, stamp)| **stamp)
                .map(|(sn, _)| *sn)
                .expect("pending is non-empty");
            st.pending.remove(&oldest);
            if let Some(i) = st.instances.get_mut(&oldest) {
                i.first_app = None;
            }
        }
        out
    }

    pub fn on_echo(
        &mut self,
        origin: ProcessId,
        value: P,
        sn: u64,
        from: ProcessId,
        cause: Cause,
    ) -> RbOutput<P> {
        let mut out = RbOutput::default();
        if !self.valid(origin, sn) || self.is_delivered(origin, sn) {
            return out;
        }
        let th = self.th;
        let inst = self.origins[origin.index()]
            .instances
            .entry(sn)
            .or_insert_with(|| Instance::new(cause));
        let senders = inst.echoes.entry(value.clone()).or_default();
        if !senders.insert(from) {
            return out;
        }
        if th.echo_quorum_reached(senders.len()) && !inst.readied.contains(&value) {
            inst.readied.insert(value.clone());
            out.sends.push(RbSend {
                to: Dest::All,
                msg: RbMessage::Ready { origin, value, sn },
                cause: inst.cause,
            });
        }
        out
    }

    pub fn on_ready(
        &mut self,
        origin: ProcessId,
        value: P,
        sn: u64,
        from: ProcessId,
        cause: Cause,
    ) -> RbOutput<P> {
        let mut out = RbOutput::default();
        if !self.valid(origin, sn) || self.is_delivered(origin, sn) {
            return out;
        }
        let th = self.th;
        let inst = self.origins[origin.index()]
            .instances
            .entry(sn)
            .or_insert_with(|| Instance::new(cause));
        let senders = inst.readies.entry(value.clone()).or_default();
        if !senders.insert(from) {
            return out;
        }
        let count = senders.len();
        if th.ready_amplify_reached(count) && !inst.readied.contains(&value) {
            inst.readied.insert(value.clone());
            out.sends.push(RbSend {
                to: Dest::All,
                msg: RbMessage::Ready { origin, value: value.clone(), sn },
                cause: inst.cause,
            });
        }
        if th.ready_deliver_reached(count) {
            self.try_deliver(origin, Some(&value), &mut out);
        }
        out
    }

    fn echo(&mut self, origin: ProcessId, sn: u64, out: &mut RbOutput<P>) {
        let inst = self.origins[origin.index()]
            .instances
            .get_mut(&sn)
            .expect("instance exists for a received APP");
        if inst.echoed {
            return;
        }
        let Some(value) = inst.first_app.clone() else {
            return;
        };
        inst.echoed = true;
        out.sends.push(RbSend {
            to: Dest::All,
            msg: RbMessage::Echo { origin, value, sn },
            cause: inst.cause,
        });
    }

    /// Delivers from `origin` in sequence order for as long as the instance at
    /// `next[origin]` holds 2t+1 matching READY messages.
    fn try_deliver(&mut self, origin: ProcessId, hint: Option<&P>, out: &mut RbOutput<P>) {
        let th = self.th;
        let mut hint = hint.cloned();
        loop {
            let o = origin.index();
            let sn = self.next[o];
            let Some(inst) = self.origins[o].instances.get_mut(&sn) else {
                break;
            };
            let hinted = hint
                .take()
                .filter(|v| inst.readies.get(v).is_some_and(|s| th.ready_deliver_reached(s.len())));
            let chosen = hinted.or_else(|| {
                inst.readies
                    .iter()
                    .find(|(_, s)| th.ready_deliver_reached(s.len()))
                    .map(|(v, _)| v.clone())
            });
            let Some(value) = chosen else {
                break;
            };
            inst.delivered = true;
            inst.echoes.clear();
            inst.readies.clear();
            inst.readied.clear();
            out.deliveries.push(RbDelivery { origin, sn, value, cause: inst.cause });
            self.next[o] = sn + 1;
            let after = sn + 1;
            if self.origins[o].pending.remove(&after).is_some() {
                self.echo(origin, after, out);
            }
        }
    }
}
