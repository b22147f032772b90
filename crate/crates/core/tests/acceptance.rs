//! Release acceptance run: one line per criterion, non-zero exit on failure.
//!
//! Tolerances are fixed below; nothing is read from the environment.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use byzreg::adversary::{StrategyKind, StrategyParams};
use byzreg::checker::linearize::validate_order;
use byzreg::checker::{check_trace, derive_histories, LinEntry, Linearization, Property, Report, Status};
use byzreg::netsim::{self, SchedulerPolicy};
use byzreg::quorum::{max_faults, min_quorum_intersection, Mutation};
use byzreg::scenario::{AdversaryFile, GenerateParams, Scenario, Workload, BUNDLED};
use byzreg::trace::{OpKind, Record, Trace};
use byzreg::types::{MessageKind, OpId, RegEntry};

const SIZES: [usize; 3] = [4, 7, 10];
const POLICIES: [SchedulerPolicy; 2] = [SchedulerPolicy::Random, SchedulerPolicy::AdversarialReorder];
const SAFETY_SEEDS: u64 = 200;
const MUTATION_SEEDS: u64 = 500;
const MIN_NONVACUOUS_EQUIVOCATION: f64 = 0.10;
const DETERMINISM_PAIRS: usize = 100;
const COST_SEEDS: u64 = 50;
/// Per register; 8! orders is the worst case searched.
const BRUTE_FORCE_MAX_OPS: usize = 8;
const BRUTE_FORCE_TRACES: u64 = 300;
const TINY_TRACE_OPS: usize = 6;
/// Slope of log(cost) against log(n) over n = 4..10. Exact `2n^2 + 2n` gives
/// about 1.86 and exact `4n` gives 1.
const WRITE_SLOPE: (f64, f64) = (1.7, 2.1);
const READ_SLOPE: (f64, f64) = (0.95, 1.05);

fn matrix_scenario(n: usize, strategy: StrategyKind, policy: SchedulerPolicy) -> Scenario {
    let t = max_faults(n);
    let mut s = Scenario::new(format!("{}-{}-n{n}", strategy.as_str(), policy.as_str()), n, t);
    s.policy = policy;
    s.adversary = Some(AdversaryFile {
        strategy: strategy.as_str().to_string(),
        nodes: None,
        count: Some(t),
        params: StrategyParams::default(),
    });
    s.workload = Workload::Generate(GenerateParams::default());
    s
}

fn fault_free(n: usize) -> Scenario {
    let mut s = Scenario::new(format!("fault-free-n{n}"), n, max_faults(n));
    s.workload = Workload::Generate(GenerateParams::default());
    s
}

fn run(s: &Scenario, seed: u64) -> (Trace, Report) {
    let trace = netsim::run(&s.config(seed).expect("valid scenario")).expect("simulation runs");
    let report = check_trace(&trace);
    (trace, report)
}

struct Line {
    ok: bool,
    text: String,
}

fn line(n: u32, name: &str, ok: bool, detail: String) -> Line {
    let text = format!("criterion {n} {name:<28} {}  {detail}", if ok { "PASS" } else { "FAIL" });
    println!("{text}");
    Line { ok, text }
}

#[derive(Default)]
struct MatrixStats {
    runs: usize,
    safety_failures: Vec<String>,
    quiescent: usize,
    termination_failures: Vec<String>,
    rb_runs: usize,
    rb_failures: Vec<String>,
    equivocation_runs: usize,
    equivocation_nonvacuous: usize,
    lin_checked: usize,
    lin_failures: Vec<String>,
}

fn safety_matrix() -> MatrixStats {
    let mut st = MatrixStats::default();
    for n in SIZES {
        for strategy in StrategyKind::ALL {
            for policy in POLICIES {
                let scn = matrix_scenario(n, strategy, policy);
                for seed in 0..SAFETY_SEEDS {
                    let (trace, report) = run(&scn, seed);
                    let tag = format!("{} seed {seed}", scn.name);
                    st.runs += 1;
                    if let Some(v) = report.verdicts.iter().find(|v| v.property.is_safety() && !v.is_ok()) {
                        st.safety_failures.push(format!("{tag}: {v}"));
                    }
                    if trace.is_quiescent() {
                        st.quiescent += 1;
                        let v = report.verdict(Property::Termination).expect("always present");
                        if !v.is_ok() {
                            st.termination_failures.push(format!("{tag}: {v}"));
                        }
                    } else {
                        st.termination_failures.push(format!("{tag}: did not reach quiescence"));
                    }
                    if matches!(strategy, StrategyKind::EquivocateWrite | StrategyKind::ReadyPoison) {
                        st.rb_runs += 1;
                        for p in [Property::RbIntegrity, Property::RbUniformity, Property::NoPoisonDelivery] {
                            let v = report.verdict(p).expect("always present");
                            if !v.is_ok() {
                                st.rb_failures.push(format!("{tag}: {v}"));
                            }
                        }
                    }
                    if strategy == StrategyKind::EquivocateWrite {
                        st.equivocation_runs += 1;
                        if report.rb.byzantine_pairs_delivered > 0 {
                            st.equivocation_nonvacuous += 1;
                        }
                    }
                    if report.safety_passed() {
                        st.lin_checked += 1;
                        match &report.linearization {
                            Some(lin) => {
                                if let Err(e) = independent_validate(&trace, lin) {
                                    st.lin_failures.push(format!("{tag}: {e}"));
                                }
                            }
                            None => st.lin_failures.push(format!("{tag}: construction failed")),
                        }
                    }
                }
            }
        }
    }
    st
}

/// Checks a linearization against the raw trace: it must hold exactly the
/// completed reads of correct processes plus the applied writes, respect
/// real time, and every read must return the latest preceding write.
fn independent_validate(trace: &Trace, lin: &Linearization) -> Result<(), String> {
    let h = &trace.header;
    let mut reads: BTreeMap<OpId, (usize, RegEntry, u64, u64)> = BTreeMap::new();
    let mut starts: BTreeMap<OpId, (u64, usize, OpKind)> = BTreeMap::new();
    let mut applied: Vec<u64> = vec![0; h.n];
    for e in &trace.events {
        let correct_sender = e.sender.is_some_and(|p| h.is_correct(p));
        match e.record() {
            Some(Record::OpStart { op, op_kind, target, .. }) if correct_sender => {
                starts.insert(*op, (e.seq, target.index(), *op_kind));
            }
            Some(Record::OpEnd { op, op_kind: OpKind::Read, entry, .. }) if correct_sender => {
                let (s, j, _) = starts[op];
                reads.insert(*op, (j, entry.clone(), s, e.seq));
            }
            Some(Record::StateChange { register, entry }) if e.receiver.is_some_and(|p| h.is_correct(p)) => {
                let a = &mut applied[register.index()];
                *a = (*a).max(entry.sn);
            }
            _ => {}
        }
    }
    if lin.registers.len() != h.n {
        return Err("wrong number of registers".into());
    }
    let mut seen_reads = 0;
    for (j, order) in lin.registers.iter().enumerate() {
        let writes: Vec<&LinEntry> = order.iter().filter(|e| e.kind == OpKind::Write).collect();
        if writes.len() as u64 != applied[j] {
            return Err(format!("register {j}: {} writes placed, {} applied", writes.len(), applied[j]));
        }
        for (i, w) in writes.iter().enumerate() {
            if w.entry.sn != i as u64 + 1 {
                return Err(format!("register {j}: write {} out of order", w.entry.sn));
            }
        }
        let mut last = RegEntry::initial(h.init[j].clone());
        for e in order {
            match e.kind {
                OpKind::Write => last = e.entry.clone(),
                OpKind::Read => {
                    let op = e.op.ok_or("read without op id")?;
                    let (rj, entry, s, end) = reads.get(&op).ok_or_else(|| format!("{op} is not a completed read"))?;
                    if *rj != j || *entry != e.entry || e.start != Some(*s) || e.end != Some(*end) {
                        return Err(format!("{op} misreported"));
                    }
                    if entry.val != last.val || entry.sn != last.sn {
                        return Err(format!("{op} returned {} but the preceding write is {}", entry.val, last.val));
                    }
                    seen_reads += 1;
                }
            }
        }
        for (a_pos, a) in order.iter().enumerate() {
            for b in &order[a_pos + 1..] {
                if let (Some(b_end), Some(a_start)) = (b.end, a.start) {
                    if b_end < a_start {
                        return Err(format!("register {j}: real-time order violated"));
                    }
                }
            }
        }
    }
    if seen_reads != reads.len() {
        return Err(format!("{} reads placed, {} completed", seen_reads, reads.len()));
    }
    Ok(())
}

fn criterion_4_5() -> (Line, Line) {
    let mut read_ok = true;
    let mut write_ok = true;
    let mut read_detail = Vec::new();
    let mut write_detail = Vec::new();
    let mut read_mean = Vec::new();
    let mut write_mean = Vec::new();
    for n in SIZES {
        let scn = fault_free(n);
        let n64 = n as u64;
        let (mut reads, mut writes) = (0u64, 0u64);
        let (mut rsum, mut wsum) = (0u64, 0u64);
        for seed in 0..COST_SEEDS {
            let (_, report) = run(&scn, seed);
            for op in report.cost.ops.iter().filter(|o| o.completed) {
                match op.kind {
                    OpKind::Read => {
                        reads += 1;
                        rsum += op.total;
                        let each = [MessageKind::Read, MessageKind::State, MessageKind::CatchUp, MessageKind::CatchUpDone]
                            .iter()
                            .all(|k| op.count(*k) == n64);
                        if op.total != 4 * n64 || !each {
                            read_ok = false;
                            read_detail.push(format!("n={n} seed {seed} {}: {:?}", op.op, op.by_kind));
                        }
                    }
                    OpKind::Write => {
                        writes += 1;
                        wsum += op.total;
                        let exact = op.count(MessageKind::App) == n64
                            && op.count(MessageKind::Echo) == n64 * n64
                            && op.count(MessageKind::Ready) == n64 * n64
                            && op.count(MessageKind::WriteDone) == n64
                            && op.total == 2 * n64 * n64 + 2 * n64;
                        if !exact {
                            write_ok = false;
                            write_detail.push(format!("n={n} seed {seed} {}: {:?}", op.op, op.by_kind));
                        }
                    }
                }
            }
        }
        if reads == 0 || writes == 0 {
            read_ok = false;
            write_ok = false;
        }
        read_mean.push(rsum as f64 / reads.max(1) as f64);
        write_mean.push(wsum as f64 / writes.max(1) as f64);
        read_detail.push(format!("n={n}: {reads} reads"));
        write_detail.push(format!("n={n}: {writes} writes"));
    }
    let slope = |v: &[f64]| (v[2] / v[0]).ln() / ((SIZES[2] as f64) / (SIZES[0] as f64)).ln();
    let (rs, ws) = (slope(&read_mean), slope(&write_mean));
    read_ok &= (READ_SLOPE.0..=READ_SLOPE.1).contains(&rs);
    write_ok &= (WRITE_SLOPE.0..=WRITE_SLOPE.1).contains(&ws);
    let trunc = |v: Vec<String>| v.into_iter().take(4).collect::<Vec<_>>().join("; ");
    (
        line(4, "exact read cost 4n", read_ok, format!("slope {rs:.2}; {}", trunc(read_detail))),
        line(5, "exact write cost 2n^2+2n", write_ok, format!("slope {ws:.2}; {}", trunc(write_detail))),
    )
}

fn criterion_6() -> Line {
    let mut ok = true;
    let mut pairs = 0;
    for n in 1..=50usize {
        for t in 0..=max_faults(n) {
            pairs += 1;
            if min_quorum_intersection(n, t) < t + 1 {
                ok = false;
            }
        }
    }
    // Bitmask enumeration: by symmetry fix the first quorum to the lowest
    // n-t processes and range the second over every subset of that size.
    let mut enumerated = 0u64;
    for n in 1..=20usize {
        for t in 0..=max_faults(n) {
            let q = n - t;
            let first: u32 = (1u32 << q) - 1;
            let mut min = usize::MAX;
            let mut s: u32 = (1u32 << q) - 1;
            let limit: u32 = if n == 32 { u32::MAX } else { 1u32 << n };
            while s < limit {
                enumerated += 1;
                min = min.min((s & first).count_ones() as usize);
                // Next subset with the same number of bits.
                let c = s & s.wrapping_neg();
                let r = s + c;
                s = (((r ^ s) >> 2) / c) | r;
            }
            if min < t + 1 || min != min_quorum_intersection(n, t) {
                ok = false;
            }
        }
    }
    line(
        6,
        "quorum intersection >= t+1",
        ok,
        format!("{pairs} (n,t) pairs for n<=50; {enumerated} quorums enumerated for n<=20"),
    )
}

fn criterion_7() -> Line {
    let mut ok = true;
    let mut details = Vec::new();
    for m in Mutation::ALL {
        let want_inversion = m == Mutation::NoCatchUp;
        let mut found: Option<String> = None;
        let mut inversion: Option<String> = None;
        'seeds: for seed in 0..MUTATION_SEEDS {
            for n in SIZES {
                for strategy in StrategyKind::ALL {
                    for policy in POLICIES {
                        if found.is_some() && (!want_inversion || policy != SchedulerPolicy::AdversarialReorder) {
                            continue;
                        }
                        let mut scn = matrix_scenario(n, strategy, policy);
                        scn.mutation = Some(m);
                        let (_, report) = run(&scn, seed);
                        if let Some(v) = report.failures().next() {
                            found.get_or_insert_with(|| format!("{} seed {seed}: {}", scn.name, v.property));
                        }
                        if policy == SchedulerPolicy::AdversarialReorder
                            && report
                                .verdict(Property::NoReadInversion)
                                .is_some_and(|v| v.status == Status::Fail)
                        {
                            inversion.get_or_insert_with(|| format!("{} seed {seed}", scn.name));
                        }
                        if found.is_some() && (!want_inversion || inversion.is_some()) {
                            break 'seeds;
                        }
                    }
                }
            }
        }
        let killed = found.is_some() && (!want_inversion || inversion.is_some());
        ok &= killed;
        let mut d = format!("{}: {}", m.as_str(), found.unwrap_or_else(|| "survived".into()));
        if want_inversion {
            d.push_str(&format!(" / read inversion: {}", inversion.unwrap_or_else(|| "none".into())));
        }
        details.push(d);
    }
    for d in &details {
        println!("    {d}");
    }
    line(7, "mutation kills", ok, format!("{} mutations, {MUTATION_SEEDS} seeds max each", Mutation::ALL.len()))
}

fn criterion_8() -> Line {
    let mut rng = ChaCha8Rng::seed_from_u64(0xD3_7E12);
    let mut ok = true;
    let mut bad = Vec::new();
    for _ in 0..DETERMINISM_PAIRS {
        let (name, text) = BUNDLED[rng.random_range(0..BUNDLED.len())];
        let scn = Scenario::from_toml(text).expect("bundled scenarios load");
        let seed = rng.random_range(0..10_000u64);
        let cfg = scn.config(seed).expect("valid");
        let a = netsim::run(&cfg).expect("runs");
        let b = netsim::run(&cfg).expect("runs");
        let reread = Trace::read_jsonl(a.to_jsonl().as_bytes()).expect("round trip");
        if a.hash() != b.hash() || a.to_jsonl() != b.to_jsonl() || reread.hash() != a.hash() {
            ok = false;
            bad.push(format!("{name} seed {seed}"));
        }
    }
    line(8, "determinism", ok, format!("{DETERMINISM_PAIRS} (scenario, seed) pairs {}", bad.join(", ")))
}

fn brute_force_exists(initial: &RegEntry, ops: &[LinEntry]) -> bool {
    fn go(initial: &RegEntry, ops: &[LinEntry], used: &mut Vec<bool>, order: &mut Vec<LinEntry>) -> bool {
        if order.len() == ops.len() {
            return validate_order(initial, order).is_ok();
        }
        for i in 0..ops.len() {
            if !used[i] {
                used[i] = true;
                order.push(ops[i].clone());
                let found = go(initial, ops, used, order);
                order.pop();
                used[i] = false;
                if found {
                    return true;
                }
            }
        }
        false
    }
    go(initial, ops, &mut vec![false; ops.len()], &mut Vec::new())
}

/// Every operation of register `j` the construction would have to place.
fn register_ops(trace: &Trace, j: usize) -> Vec<LinEntry> {
    let h = derive_histories(trace);
    let mut ops: Vec<LinEntry> = h.writes[j]
        .iter()
        .map(|w| LinEntry { kind: OpKind::Write, op: w.op, entry: w.entry.clone(), start: w.start_seq, end: w.end_seq })
        .collect();
    for r in h.reads().filter(|r| r.target.index() == j && r.completed()) {
        ops.push(LinEntry {
            kind: OpKind::Read,
            op: Some(r.op),
            entry: RegEntry { val: r.value.clone().expect("completed"), sn: r.index.expect("completed") },
            start: Some(r.start_seq),
            end: r.end_seq,
        });
    }
    ops
}

fn criterion_9(st: &MatrixStats) -> Line {
    // Small traces, with and without a mutation, so that both outcomes of
    // the construction are compared with exhaustive search.
    let mut compared = 0;
    let mut agree = true;
    let mut constructed_fail = 0;
    let mut bad = Vec::new();
    let mut tiny = 0;
    for (seed, layers) in (0..BRUTE_FORCE_TRACES).flat_map(|s| [(s, 1), (s, 2)]) {
        for mutation in [None, Some(Mutation::NoCatchUp), Some(Mutation::NoFreshness)] {
            let mut scn = Scenario::new("brute", 4, 1);
            scn.policy = SchedulerPolicy::AdversarialReorder;
            scn.workload = Workload::Generate(GenerateParams { layers, byzantine_ops: false, ..GenerateParams::default() });
            scn.mutation = mutation;
            let cfg = scn.config(seed).expect("valid");
            let trace = netsim::run(&cfg).expect("runs");
            let per_register: Vec<Vec<LinEntry>> = (0..trace.header.n).map(|j| register_ops(&trace, j)).collect();
            if per_register.iter().any(|ops| ops.len() > BRUTE_FORCE_MAX_OPS) {
                continue;
            }
            let report = check_trace(&trace);
            let built = report.linearization.is_some();
            if !built {
                constructed_fail += 1;
            }
            let h = derive_histories(&trace);
            let exists = per_register
                .iter()
                .enumerate()
                .all(|(j, ops)| brute_force_exists(&RegEntry::initial(h.init[j].clone()), ops));
            compared += 1;
            if per_register.iter().map(Vec::len).sum::<usize>() <= TINY_TRACE_OPS {
                tiny += 1;
            }
            if exists != built {
                agree = false;
                bad.push(format!("seed {seed} {mutation:?}: built {built}, exists {exists}"));
            }
        }
    }
    let ok = st.lin_failures.is_empty() && st.lin_checked > 0 && agree && tiny > 0;
    let mut detail = format!(
        "{} safe runs validated; {compared} small traces ({tiny} with <= {TINY_TRACE_OPS} ops) vs exhaustive search ({constructed_fail} not linearizable)",
        st.lin_checked
    );
    for f in st.lin_failures.iter().chain(&bad).take(3) {
        detail.push_str(&format!("; {f}"));
    }
    line(9, "linearization witness", ok, detail)
}

fn first(v: &[String]) -> String {
    v.first().cloned().unwrap_or_default()
}

fn main() {
    let started = Instant::now();
    let mut lines = Vec::new();

    let st = safety_matrix();
    lines.push(line(
        1,
        "safety suite",
        st.safety_failures.is_empty(),
        format!(
            "{} runs ({} sizes x {} strategies x {} policies x {SAFETY_SEEDS} seeds), {} failures {}",
            st.runs,
            SIZES.len(),
            StrategyKind::ALL.len(),
            POLICIES.len(),
            st.safety_failures.len(),
            first(&st.safety_failures)
        ),
    ));
    lines.push(line(
        2,
        "liveness suite",
        st.termination_failures.is_empty() && st.quiescent > 0,
        format!("{} quiescent runs, {} failures {}", st.quiescent, st.termination_failures.len(), first(&st.termination_failures)),
    ));
    let rate = st.equivocation_nonvacuous as f64 / st.equivocation_runs.max(1) as f64;
    lines.push(line(
        3,
        "rb suite",
        st.rb_failures.is_empty() && rate >= MIN_NONVACUOUS_EQUIVOCATION,
        format!(
            "{} runs, {} failures; equivocated pairs delivered in {:.1}% of {} runs (need {:.0}%) {}",
            st.rb_runs,
            st.rb_failures.len(),
            rate * 100.0,
            st.equivocation_runs,
            MIN_NONVACUOUS_EQUIVOCATION * 100.0,
            first(&st.rb_failures)
        ),
    ));
    let (c4, c5) = criterion_4_5();
    lines.push(c4);
    lines.push(c5);
    lines.push(criterion_6());
    lines.push(criterion_7());
    lines.push(criterion_8());
    lines.push(criterion_9(&st));

    let failed: Vec<&Line> = lines.iter().filter(|l| !l.ok).collect();
    println!(
        "acceptance: {}/{} criteria passed in {:.1}s",
        lines.len() - failed.len(),
        lines.len(),
        started.elapsed().as_secs_f64()
    );
    if !failed.is_empty() {
        for l in failed {
            eprintln!("{}", l.text);
        }
        std::process::exit(1);
    }
}
