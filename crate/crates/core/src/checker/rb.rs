//! Reliable broadcast properties over the RDELIVER events of correct nodes.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{Property, Verdict};
use crate::adversary::POISON_PREFIX;
use crate::trace::{EventKind, Record, Trace};
use crate::types::{Message, ProcessId, WriteBody};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RbStats {
    /// Number of r-delivery events at correct nodes.
    pub deliveries: usize,
    /// Distinct (origin, sn) pairs with a Byzantine origin that some correct
    /// node r-delivered.
    pub byzantine_pairs_delivered: usize,
}

struct Delivery {
    seq: u64,
    sn: u64,
    body: WriteBody,
}

/// Per node: the body it delivered first and the event seq.
type FirstDelivery<'a> = BTreeMap<ProcessId, (&'a WriteBody, u64)>;

/// Checks validity, integrity, uniformity, termination, per-origin FIFO order
/// and the absence of poisoned deliveries.
pub fn check_rb(trace: &Trace) -> (Vec<Verdict>, RbStats) {
    let h = &trace.header;
    let correct = h.correct();
    // (origin, sn) -> body -> event seq, for APP broadcasts by correct origins.
    let mut broadcast: BTreeMap<(ProcessId, u64), (WriteBody, u64)> = BTreeMap::new();
    // node -> origin -> deliveries in order.
    let mut delivered: BTreeMap<ProcessId, BTreeMap<ProcessId, Vec<Delivery>>> = BTreeMap::new();
    let mut count = 0;

    for e in &trace.events {
        match e.kind {
            EventKind::Send => {
                if let (Some(Message::App { body, sn }), Some(s)) = (e.message(), e.sender) {
                    if h.is_correct(s) {
                        broadcast.entry((s, *sn)).or_insert((body.clone(), e.seq));
                    }
                }
            }
            EventKind::Rdeliver => {
                let (Some(origin), Some(node), Some(Record::Rdeliver { sn, body })) = (e.sender, e.receiver, e.record())
                else {
                    continue;
                };
                if !h.is_correct(node) {
                    continue;
                }
                count += 1;
                delivered
                    .entry(node)
                    .or_default()
                    .entry(origin)
                    .or_default()
                    .push(Delivery { seq: e.seq, sn: *sn, body: body.clone() });
            }
            _ => {}
        }
    }

    let all = || delivered.iter().flat_map(|(node, m)| m.iter().flat_map(move |(o, ds)| ds.iter().map(move |d| (*node, *o, d))));

    // Validity: deliveries from correct origins were broadcast by them.
    let mut validity = None;
    let mut tested = 0;
    for (node, origin, d) in all() {
        if !h.is_correct(origin) {
            continue;
        }
        tested += 1;
        match broadcast.get(&(origin, d.sn)) {
            Some((b, _)) if *b == d.body => {}
            _ => {
                validity = Some(Verdict::fail(
                    Property::RbValidity,
                    vec![d.seq],
                    format!("{node} r-delivered ({}, {}) from {origin} which never broadcast it", d.body.value, d.sn),
                ));
                break;
            }
        }
    }
    let validity = validity.unwrap_or_else(|| Verdict::pass_or_vacuous(Property::RbValidity, tested));

    // Integrity: at most one delivery per (node, origin, sn).
    let mut integrity = None;
    'int: for (node, m) in &delivered {
        for (origin, ds) in m {
            let mut seen: BTreeMap<u64, u64> = BTreeMap::new();
            for d in ds {
                if let Some(prev) = seen.insert(d.sn, d.seq) {
                    integrity = Some(Verdict::fail(
                        Property::RbIntegrity,
                        vec![prev, d.seq],
                        format!("{node} r-delivered instance {} of {origin} twice", d.sn),
                    ));
                    break 'int;
                }
            }
        }
    }
    let integrity = integrity.unwrap_or_else(|| Verdict::pass_or_vacuous(Property::RbIntegrity, count));

    // FIFO: each node delivers the instances of an origin as 1, 2, 3, ...
    let mut fifo = None;
    'fifo: for (node, m) in &delivered {
        for (origin, ds) in m {
            for (i, d) in ds.iter().enumerate() {
                if d.sn != i as u64 + 1 {
                    fifo = Some(Verdict::fail(
                        Property::RbFifo,
                        vec![d.seq],
                        format!("{node} r-delivered instance {} of {origin} as its delivery number {}", d.sn, i + 1),
                    ));
                    break 'fifo;
                }
            }
        }
    }
    let fifo = fifo.unwrap_or_else(|| Verdict::pass_or_vacuous(Property::RbFifo, count));

    // Uniformity: no two correct nodes deliver different bodies for one
    // instance, and at quiescence every correct node delivered it.
    let mut instances: BTreeMap<(ProcessId, u64), FirstDelivery> = BTreeMap::new();
    for (node, origin, d) in all() {
        instances.entry((origin, d.sn)).or_default().entry(node).or_insert((&d.body, d.seq));
    }
    let mut uniformity = None;
    for ((origin, sn), by_node) in &instances {
        let mut it = by_node.iter();
        let (first_node, (first_body, first_seq)) = it.next().expect("non-empty");
        if let Some((node, (_, seq))) = it.find(|(_, (b, _))| b != first_body) {
            uniformity = Some(Verdict::fail(
                Property::RbUniformity,
                vec![*first_seq, *seq],
                format!("{first_node} and {node} r-delivered different bodies for instance {sn} of {origin}"),
            ));
            break;
        }
        if trace.is_quiescent() && by_node.len() < correct.len() {
            let missing: Vec<String> = correct.iter().filter(|p| !by_node.contains_key(p)).map(|p| p.to_string()).collect();
            uniformity = Some(Verdict::fail(
                Property::RbUniformity,
                vec![*first_seq],
                format!("instance {sn} of {origin} r-delivered by {first_node} but never by {}", missing.join(", ")),
            ));
            break;
        }
    }
    let uniformity = uniformity.unwrap_or_else(|| Verdict::pass_or_vacuous(Property::RbUniformity, instances.len()));

    // Termination: at quiescence every correct broadcast reached every correct node.
    let termination = if !trace.is_quiescent() {
        Verdict::vacuous(Property::RbTermination, "run did not reach quiescence")
    } else {
        let mut fail = None;
        for ((origin, sn), (body, seq)) in &broadcast {
            let nodes = instances.get(&(*origin, *sn));
            let missing: Vec<String> = correct
                .iter()
                .filter(|p| !nodes.is_some_and(|m| m.get(p).is_some_and(|(b, _)| *b == body)))
                .map(|p| p.to_string())
                .collect();
            if !missing.is_empty() {
                fail = Some(Verdict::fail(
                    Property::RbTermination,
                    vec![*seq],
                    format!("instance {sn} of correct {origin} never r-delivered by {}", missing.join(", ")),
                ));
                break;
            }
        }
        fail.unwrap_or_else(|| Verdict::pass_or_vacuous(Property::RbTermination, broadcast.len()))
    };

    let poison = all()
        .find(|(_, _, d)| d.body.value.as_str().starts_with(POISON_PREFIX))
        .map(|(node, origin, d)| {
            Verdict::fail(
                Property::NoPoisonDelivery,
                vec![d.seq],
                format!("{node} r-delivered forged value {} attributed to {origin}", d.body.value),
            )
        })
        .unwrap_or_else(|| Verdict::pass_or_vacuous(Property::NoPoisonDelivery, count));

    let byz_pairs: BTreeSet<_> = instances.keys().filter(|(o, _)| !h.is_correct(*o)).collect();
    let stats = RbStats { deliveries: count, byzantine_pairs_delivered: byz_pairs.len() };
    (vec![validity, integrity, uniformity, termination, fifo, poison], stats)
}
