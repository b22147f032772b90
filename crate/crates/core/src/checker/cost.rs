//! Message accounting per operation.
//!
//! A send is charged to an operation when the sender is correct and the
//! send's cause is an operation of a correct process.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Property, Verdict};
use crate::trace::{EventKind, OpKind, Record, Trace};
use crate::types::{MessageKind, OpId, ProcessId};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCost {
    pub op: OpId,
    pub kind: OpKind,
    pub process: ProcessId,
    pub completed: bool,
    pub by_kind: BTreeMap<String, u64>,
    pub total: u64,
    pub start_seq: u64,
}

impl OpCost {
    pub fn count(&self, k: MessageKind) -> u64 {
        self.by_kind.get(k.as_str()).copied().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostReport {
    pub n: usize,
    pub ops: Vec<OpCost>,
}

pub fn read_bound(n: usize) -> u64 {
    4 * n as u64
}

pub fn write_bound(n: usize) -> u64 {
    let n = n as u64;
    2 * n * n + 2 * n
}

impl CostReport {
    pub fn reads(&self) -> impl Iterator<Item = &OpCost> {
        self.ops.iter().filter(|o| o.kind == OpKind::Read)
    }

    pub fn writes(&self) -> impl Iterator<Item = &OpCost> {
        self.ops.iter().filter(|o| o.kind == OpKind::Write)
    }

    pub fn verdicts(&self) -> Vec<Verdict> {
        let check = |p: Property, ops: Vec<&OpCost>, bound: u64| {
            match ops.iter().find(|o| o.total > bound) {
                Some(o) => Verdict::fail(p, vec![o.start_seq], format!("{} cost {} messages, bound {bound}", o.op, o.total)),
                None => Verdict::pass_or_vacuous(p, ops.len()),
            }
        };
        vec![
            check(Property::ReadCost, self.reads().collect(), read_bound(self.n)),
            check(Property::WriteCost, self.writes().collect(), write_bound(self.n)),
        ]
    }
}

pub fn count_messages(trace: &Trace) -> CostReport {
    let h = &trace.header;
    let mut ops: Vec<OpCost> = Vec::new();
    let mut index: BTreeMap<OpId, usize> = BTreeMap::new();
    for e in &trace.events {
        let correct = e.sender.is_some_and(|p| h.is_correct(p));
        if !correct {
            continue;
        }
        match (e.kind, e.record()) {
            (EventKind::OpStart, Some(Record::OpStart { op, op_kind, .. })) => {
                index.insert(*op, ops.len());
                ops.push(OpCost {
                    op: *op,
                    kind: *op_kind,
                    process: e.sender.expect("checked"),
                    completed: false,
                    by_kind: BTreeMap::new(),
                    total: 0,
                    start_seq: e.seq,
                });
            }
            (EventKind::OpEnd, Some(Record::OpEnd { op, .. })) => {
                if let Some(&i) = index.get(op) {
                    ops[i].completed = true;
                }
            }
            (EventKind::Send, _) => {
                let (Some(op), Some(m)) = (e.cause, e.message()) else { continue };
                if let Some(&i) = index.get(&op) {
                    *ops[i].by_kind.entry(m.kind().as_str().to_string()).or_insert(0) += 1;
                    ops[i].total += 1;
                }
            }
            _ => {}
        }
    }
    CostReport { n: h.n, ops }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounds() {
        assert_eq!(read_bound(4), 16);
        assert_eq!(write_bound(4), 40);
        assert_eq!(write_bound(7), 112);
    }
}
