//! Per-register histories and operation records recovered from a trace.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::trace::{EventKind, OpKind, Record, Trace};
use crate::types::{Message, OpId, ProcessId, RegEntry, Value, WriteBody};

/// One operation of a correct process.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperationRecord {
    pub op: OpId,
    pub kind: OpKind,
    pub invoker: ProcessId,
    pub target: ProcessId,
    pub start_seq: u64,
    pub end_seq: Option<u64>,
    pub start_time: u64,
    pub end_time: Option<u64>,
    /// Written value, or the value a completed read returned.
    pub value: Option<Value>,
    /// Position in the target's history; 0 is the initial value.
    pub index: Option<u64>,
}

impl OperationRecord {
    pub fn completed(&self) -> bool {
        self.end_seq.is_some()
    }

    /// `self` ended before `other` started.
    pub fn precedes(&self, other: &OperationRecord) -> bool {
        self.end_seq.is_some_and(|e| e < other.start_seq)
    }
}

/// Position `index` of a register history, with the write that produced it
/// when that write is identifiable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WriteInfo {
    pub index: u64,
    pub entry: RegEntry,
    /// The invoking operation, for correct writers.
    pub op: Option<OpId>,
    /// OP_START of a correct write, or the first send carrying the body from
    /// a Byzantine writer.
    pub start_seq: Option<u64>,
    /// Only defined for completed writes of correct writers.
    pub end_seq: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Problem {
    pub events: Vec<u64>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct History {
    pub n: usize,
    pub init: Vec<Value>,
    pub byzantine: Vec<ProcessId>,
    /// `registers[j]` is H_j: position `x` is stored at `x - 1`.
    pub registers: Vec<Vec<RegEntry>>,
    pub writes: Vec<Vec<WriteInfo>>,
    /// Operations of correct processes in start order.
    pub ops: Vec<OperationRecord>,
    pub agreement: Vec<Problem>,
    pub resolution: Vec<Problem>,
}

impl History {
    pub fn is_correct(&self, p: ProcessId) -> bool {
        !self.byzantine.contains(&p)
    }

    pub fn reads(&self) -> impl Iterator<Item = &OperationRecord> {
        self.ops.iter().filter(|o| o.kind == OpKind::Read)
    }

    pub fn correct_writes(&self) -> impl Iterator<Item = &OperationRecord> {
        self.ops.iter().filter(|o| o.kind == OpKind::Write)
    }
}

/// Builds H_j from the STATE_CHANGE events of correct nodes and resolves
/// every completed operation to its history position.
pub fn derive_histories(trace: &Trace) -> History {
    let h = &trace.header;
    let n = h.n;
    let correct = |p: Option<ProcessId>| p.is_some_and(|p| h.is_correct(p));
    let mut registers: Vec<Vec<RegEntry>> = vec![Vec::new(); n];
    let mut first_seq: Vec<Vec<u64>> = vec![Vec::new(); n];
    // applied[j][i]: how many entries of register j node i has applied.
    let mut applied = vec![vec![0usize; n]; n];
    let mut agreement = Vec::new();
    let mut ops: Vec<OperationRecord> = Vec::new();
    let mut op_pos: HashMap<OpId, usize> = HashMap::new();
    let mut byz_first_send: HashMap<(ProcessId, WriteBody), u64> = HashMap::new();

    for e in &trace.events {
        match (e.kind, e.record(), e.message()) {
            (EventKind::StateChange, Some(Record::StateChange { register, entry }), _) if correct(e.receiver) => {
                let (j, i) = (register.index(), e.receiver.expect("checked").index());
                if j >= n {
                    continue;
                }
                let pos = applied[j][i];
                applied[j][i] += 1;
                if entry.sn != pos as u64 + 1 {
                    agreement.push(Problem {
                        events: vec![e.seq],
                        detail: format!(
                            "{} applied {register}[{}] at position {}",
                            e.receiver.expect("checked"),
                            entry.sn,
                            pos + 1
                        ),
                    });
                }
                match registers[j].get(pos) {
                    Some(prev) if prev != entry => agreement.push(Problem {
                        events: vec![first_seq[j][pos], e.seq],
                        detail: format!(
                            "position {} of {register}: ({}, {}) vs ({}, {})",
                            pos + 1,
                            prev.val,
                            prev.sn,
                            entry.val,
                            entry.sn
                        ),
                    }),
                    Some(_) => {}
                    None => {
                        registers[j].push(entry.clone());
                        first_seq[j].push(e.seq);
                    }
                }
            }
            (EventKind::OpStart, Some(Record::OpStart { op, op_kind, target, value }), _) if correct(e.sender) => {
                op_pos.insert(*op, ops.len());
                ops.push(OperationRecord {
                    op: *op,
                    kind: *op_kind,
                    invoker: e.sender.expect("checked"),
                    target: *target,
                    start_seq: e.seq,
                    end_seq: None,
                    start_time: e.time,
                    end_time: None,
                    value: match op_kind {
                        OpKind::Write => Some(value.clone().unwrap_or_default()),
                        OpKind::Read => None,
                    },
                    index: None,
                });
            }
            (EventKind::OpEnd, Some(Record::OpEnd { op, entry, .. }), _) if correct(e.sender) => {
                if let Some(&i) = op_pos.get(op) {
                    let rec = &mut ops[i];
                    rec.end_seq = Some(e.seq);
                    rec.end_time = Some(e.time);
                    if rec.kind == OpKind::Read {
                        rec.value = Some(entry.val.clone());
                        rec.index = Some(entry.sn);
                    }
                }
            }
            (EventKind::Send, _, Some(m)) => {
                let key = match m {
                    Message::App { body, .. } => e.sender.map(|s| (s, body)),
                    Message::Echo { origin, body, .. } | Message::Ready { origin, body, .. } => Some((*origin, body)),
                    _ => None,
                };
                if let Some((origin, body)) = key {
                    if !h.is_correct(origin) {
                        byz_first_send.entry((origin, body.clone())).or_insert(e.seq);
                    }
                }
            }
            _ => {}
        }
    }

    let mut resolution = Vec::new();
    let mut writes: Vec<Vec<WriteInfo>> = registers
        .iter()
        .enumerate()
        .map(|(j, hist)| {
            hist.iter()
                .enumerate()
                .map(|(x, entry)| WriteInfo {
                    index: x as u64 + 1,
                    entry: entry.clone(),
                    op: None,
                    start_seq: if h.is_correct(ProcessId(j as u32)) {
                        None
                    } else {
                        byz_first_send.get(&(ProcessId(j as u32), entry.as_body())).copied()
                    },
                    end_seq: None,
                })
                .collect()
        })
        .collect();

    let mut write_count = vec![0u64; n];
    for rec in &mut ops {
        let j = rec.target.index();
        match rec.kind {
            OpKind::Write => {
                write_count[j] += 1;
                let x = write_count[j];
                rec.index = Some(x);
                if let Some(w) = writes[j].get_mut(x as usize - 1) {
                    if Some(&w.entry.val) != rec.value.as_ref() {
                        resolution.push(Problem {
                            events: vec![rec.start_seq],
                            detail: format!("{} wrote {:?} but position {x} holds {}", rec.op, rec.value, w.entry.val),
                        });
                    }
                    w.op = Some(rec.op);
                    w.start_seq = Some(rec.start_seq);
                    w.end_seq = rec.end_seq;
                } else if rec.completed() {
                    resolution.push(Problem {
                        events: vec![rec.start_seq, rec.end_seq.expect("completed")],
                        detail: format!("{} completed but position {x} of {} was never applied", rec.op, rec.target),
                    });
                }
            }
            OpKind::Read => {
                let (Some(x), Some(val)) = (rec.index, rec.value.as_ref()) else { continue };
                let ok = if x == 0 {
                    h.init.get(j) == Some(val)
                } else {
                    registers[j].get(x as usize - 1).is_some_and(|e| &e.val == val)
                };
                if !ok {
                    resolution.push(Problem {
                        events: vec![rec.start_seq, rec.end_seq.expect("completed")],
                        detail: format!("{} returned ({val}, {x}) which is not position {x} of {}", rec.op, rec.target),
                    });
                }
            }
        }
    }

    History {
        n,
        init: h.init.clone(),
        byzantine: h.byzantine.clone(),
        registers,
        writes,
        ops,
        agreement,
        resolution,
    }
}
