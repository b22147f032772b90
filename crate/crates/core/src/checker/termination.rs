//! Every operation invoked by a correct process eventually returns.

use std::collections::BTreeSet;

use super::{Property, Status, Verdict};
use crate::trace::{EventKind, Outcome, Record, Trace};

pub fn check_termination(trace: &Trace) -> Verdict {
    if trace.footer.outcome == Outcome::Nonterminating {
        let stuck: Vec<String> = trace
            .footer
            .stuck
            .iter()
            .map(|s| format!("{} at {} waiting on [{}]", s.op, s.process, s.guards.join("; ")))
            .collect();
        return Verdict {
            property: Property::Termination,
            status: Status::Nonterminating,
            counterexample: Vec::new(),
            detail: format!("step budget exhausted after {} steps; {}", trace.footer.steps, stuck.join(", ")),
        };
    }
    let h = &trace.header;
    let mut open: Vec<(u64, crate::types::OpId)> = Vec::new();
    let mut ended = BTreeSet::new();
    let mut started = 0;
    for e in &trace.events {
        if !e.sender.is_some_and(|p| h.is_correct(p)) {
            continue;
        }
        match (e.kind, e.record()) {
            (EventKind::OpStart, Some(Record::OpStart { op, .. })) => {
                started += 1;
                open.push((e.seq, *op));
            }
            (EventKind::OpEnd, Some(Record::OpEnd { op, .. })) => {
                ended.insert(*op);
            }
            _ => {}
        }
    }
    let unfinished: Vec<_> = open.iter().filter(|(_, op)| !ended.contains(op)).collect();
    if !unfinished.is_empty() {
        let names: Vec<String> = unfinished.iter().map(|(_, op)| op.to_string()).collect();
        return Verdict::fail(
            Property::Termination,
            unfinished.iter().map(|(s, _)| *s).collect(),
            format!("quiescent with unfinished operations {}", names.join(", ")),
        );
    }
    if !trace.footer.unstarted.is_empty() {
        let names: Vec<String> = trace.footer.unstarted.iter().map(|o| o.to_string()).collect();
        return Verdict::fail(
            Property::Termination,
            Vec::new(),
            format!("quiescent with operations never started: {}", names.join(", ")),
        );
    }
    if started == 0 {
        return Verdict::vacuous(Property::Termination, "no operations");
    }
    Verdict::pass_or_vacuous(Property::Termination, started)
}
