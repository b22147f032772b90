//! Builds a total order per register in which every read directly follows
//! the write whose position it returned, then validates it independently.

use serde::{Deserialize, Serialize};

use super::history::History;
use super::{Property, Verdict};
use crate::trace::OpKind;
use crate::types::{OpId, ProcessId, RegEntry};

/// An operation as placed in a linearization.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinEntry {
    pub kind: OpKind,
    /// None for writes of a Byzantine owner.
    pub op: Option<OpId>,
    /// Written or returned pair.
    pub entry: RegEntry,
    pub start: Option<u64>,
    pub end: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Linearization {
    /// `registers[j]` orders the operations on register `j`.
    pub registers: Vec<Vec<LinEntry>>,
}

impl Linearization {
    pub fn len(&self) -> usize {
        self.registers.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn build_linearization(h: &History) -> Result<Linearization, Verdict> {
    let mut registers = Vec::with_capacity(h.n);
    for j in 0..h.n {
        let writes = &h.writes[j];
        let mut by_index: Vec<Vec<&crate::checker::OperationRecord>> = vec![Vec::new(); writes.len() + 1];
        for r in h.reads().filter(|r| r.target.index() == j && r.completed()) {
            let x = r.index.expect("completed reads are indexed") as usize;
            match by_index.get_mut(x) {
                Some(slot) => slot.push(r),
                None => {
                    return Err(Verdict::fail(
                        Property::Linearization,
                        vec![r.start_seq],
                        format!("{} returned position {x} of {} which has only {} writes", r.op, ProcessId(j as u32), writes.len()),
                    ))
                }
            }
        }
        let mut order = Vec::new();
        for (x, reads) in by_index.iter_mut().enumerate() {
            if x > 0 {
                let w = &writes[x - 1];
                order.push(LinEntry {
                    kind: OpKind::Write,
                    op: w.op,
                    entry: w.entry.clone(),
                    start: w.start_seq,
                    end: w.end_seq,
                });
            }
            reads.sort_by_key(|r| (r.start_seq, r.op));
            for r in reads.iter() {
                order.push(LinEntry {
                    kind: OpKind::Read,
                    op: Some(r.op),
                    entry: RegEntry { val: r.value.clone().expect("completed"), sn: r.index.expect("completed") },
                    start: Some(r.start_seq),
                    end: r.end_seq,
                });
            }
        }
        let initial = RegEntry::initial(h.init[j].clone());
        if let Err((a, b, why)) = validate_order(&initial, &order) {
            let seqs = [&order[a], &order[b]].iter().flat_map(|e| [e.start, e.end]).flatten().collect();
            return Err(Verdict::fail(Property::Linearization, seqs, format!("register {}: {why}", ProcessId(j as u32))));
        }
        registers.push(order);
    }
    Ok(Linearization { registers })
}

/// Checks that `order` is a legal sequential history of one register that
/// respects real time. On failure returns the two offending positions.
///
/// A read must return what the nearest preceding write wrote, or `initial`
/// when there is none; and an operation that ended before another started
/// must come first.
pub fn validate_order(initial: &RegEntry, order: &[LinEntry]) -> Result<(), (usize, usize, String)> {
    let mut last: Option<usize> = None;
    for (i, e) in order.iter().enumerate() {
        match e.kind {
            OpKind::Write => last = Some(i),
            OpKind::Read => {
                let expect = last.map_or(initial, |w| &order[w].entry);
                if e.entry.val != expect.val {
                    return Err((
                        last.unwrap_or(i),
                        i,
                        format!("read returns {} but the preceding write is {}", e.entry.val, expect.val),
                    ));
                }
            }
        }
    }
    for (i, a) in order.iter().enumerate() {
        for (k, b) in order.iter().enumerate().take(i) {
            // b is placed before a; that is wrong if a ended before b started.
            if let (Some(end), Some(start)) = (a.end, b.start) {
                if end < start {
                    return Err((k, i, "placement contradicts real-time order".to_string()));
                }
            }
        }
    }
    Ok(())
}
