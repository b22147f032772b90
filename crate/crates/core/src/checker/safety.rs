//! Register consistency: per-writer agreement and the three ordering
//! properties between non-overlapping operations of correct processes.

use super::history::{History, Problem};
use super::{Property, Verdict};

fn from_problems(p: Property, problems: &[Problem], tested: usize) -> Verdict {
    match problems.first() {
        Some(first) => Verdict::fail(p, first.events.clone(), format!("{} ({} total)", first.detail, problems.len())),
        None => Verdict::pass_or_vacuous(p, tested),
    }
}

/// Returns verdicts for agreement, read resolution, read-followed-by-write,
/// write-followed-by-read and no-read-inversion.
pub fn check_safety(h: &History) -> Vec<Verdict> {
    let applied: usize = h.registers.iter().map(Vec::len).sum();
    let completed = h.ops.iter().filter(|o| o.completed()).count();
    let mut out = vec![
        from_problems(Property::PerWriterAgreement, &h.agreement, applied),
        from_problems(Property::ReadResolution, &h.resolution, completed),
    ];

    let reads: Vec<_> = h.reads().filter(|r| r.completed() && r.index.is_some()).collect();

    // A read that ends before write[j, y] starts returns some x < y.
    let mut tested = 0;
    let mut fail = None;
    'rw: for r in &reads {
        let j = r.target.index();
        let x = r.index.expect("filtered");
        for w in &h.writes[j] {
            let Some(start) = w.start_seq else { continue };
            if r.end_seq.expect("filtered") < start {
                tested += 1;
                if x >= w.index {
                    fail = Some(Verdict::fail(
                        Property::ReadFollowedByWrite,
                        vec![r.start_seq, r.end_seq.expect("filtered"), start],
                        format!("{} returned position {x} of {} before position {} was written", r.op, r.target, w.index),
                    ));
                    break 'rw;
                }
            }
        }
        // Correct writes that never reached any correct node still count.
        for w in h.correct_writes().filter(|w| w.target == r.target) {
            let y = w.index.expect("writes are indexed");
            if y as usize > h.writes[j].len() && r.precedes(w) {
                tested += 1;
                if x >= y {
                    fail = Some(Verdict::fail(
                        Property::ReadFollowedByWrite,
                        vec![r.start_seq, r.end_seq.expect("filtered"), w.start_seq],
                        format!("{} returned position {x} of {} before {} started", r.op, r.target, w.op),
                    ));
                    break 'rw;
                }
            }
        }
    }
    out.push(fail.unwrap_or_else(|| Verdict::pass_or_vacuous(Property::ReadFollowedByWrite, tested)));

    // A read that starts after a correct write[j, y] ended returns x >= y.
    let mut tested = 0;
    let mut fail = None;
    'wr: for w in h.correct_writes().filter(|w| w.completed()) {
        let y = w.index.expect("writes are indexed");
        for r in reads.iter().filter(|r| r.target == w.target) {
            if w.precedes(r) {
                tested += 1;
                let x = r.index.expect("filtered");
                if x < y {
                    fail = Some(Verdict::fail(
                        Property::WriteFollowedByRead,
                        vec![w.start_seq, w.end_seq.expect("completed"), r.start_seq, r.end_seq.expect("filtered")],
                        format!("{} returned position {x} of {} after {} wrote position {y}", r.op, r.target, w.op),
                    ));
                    break 'wr;
                }
            }
        }
    }
    out.push(fail.unwrap_or_else(|| Verdict::pass_or_vacuous(Property::WriteFollowedByRead, tested)));

    // Of two non-overlapping reads of the same register, the later one does
    // not return an older position.
    let mut tested = 0;
    let mut fail = None;
    'ri: for a in &reads {
        for b in reads.iter().filter(|b| b.target == a.target) {
            if a.precedes(b) {
                tested += 1;
                let (x, y) = (a.index.expect("filtered"), b.index.expect("filtered"));
                if y < x {
                    fail = Some(Verdict::fail(
                        Property::NoReadInversion,
                        vec![a.start_seq, a.end_seq.expect("filtered"), b.start_seq, b.end_seq.expect("filtered")],
                        format!("{} returned position {x} of {} but the later {} returned {y}", a.op, a.target, b.op),
                    ));
                    break 'ri;
                }
            }
        }
    }
    out.push(fail.unwrap_or_else(|| Verdict::pass_or_vacuous(Property::NoReadInversion, tested)));
    out
}
