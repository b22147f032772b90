//! Quorum thresholds used by the protocols, the knobs that deliberately break
//! them for mutation testing, and the quorum-intersection arithmetic.

use serde::{Deserialize, Serialize};

/// A deliberate protocol defect, used to show that the checker notices when a
/// threshold or a phase is wrong.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mutation {
    /// ECHO threshold `count >= floor((n+t)/2)` instead of `2*count > n+t`.
    NonStrictEcho,
    /// r-deliver at `2t` matching READY messages instead of `2t+1`.
    ReadyDeliverAt2t,
    /// Both read phases wait for `n-t-1` replies instead of `n-t`.
    ReadQuorumMinusOne,
    /// The read returns right after the freshness wait, skipping CATCH_UP.
    NoCatchUp,
    /// The read skips the freshness wait and uses the local copy at once.
    NoFreshness,
}

impl Mutation {
    pub const ALL: [Mutation; 5] = [
        Mutation::NonStrictEcho,
        Mutation::ReadyDeliverAt2t,
        Mutation::ReadQuorumMinusOne,
        Mutation::NoCatchUp,
        Mutation::NoFreshness,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Mutation::NonStrictEcho => "non_strict_echo",
            Mutation::ReadyDeliverAt2t => "ready_deliver_at_2t",
            Mutation::ReadQuorumMinusOne => "read_quorum_minus_one",
            Mutation::NoCatchUp => "no_catch_up",
            Mutation::NoFreshness => "no_freshness",
        }
    }
}

/// Threshold arithmetic for a system of `n` processes tolerating `t` faults.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Thresholds {
    pub n: usize,
    pub t: usize,
    pub mutation: Option<Mutation>,
}

impl Thresholds {
    pub fn new(n: usize, t: usize) -> Self {
        Thresholds { n, t, mutation: None }
    }

    pub fn with_mutation(mut self, mutation: Option<Mutation>) -> Self {
        self.mutation = mutation;
        self
    }

    fn is(&self, m: Mutation) -> bool {
        self.mutation == Some(m)
    }

    /// ECHO from strictly more than (n+t)/2 distinct processes.
    pub fn echo_quorum_reached(&self, distinct: usize) -> bool {
        if self.is(Mutation::NonStrictEcho) {
            distinct >= (self.n + self.t) / 2
        } else {
            2 * distinct > self.n + self.t
        }
    }

    /// READY from at least t+1 distinct processes.
    pub fn ready_amplify_reached(&self, distinct: usize) -> bool {
        distinct > self.t
    }

    /// READY from at least 2t+1 distinct processes.
    pub fn ready_deliver_reached(&self, distinct: usize) -> bool {
        if self.is(Mutation::ReadyDeliverAt2t) {
            distinct >= 2 * self.t
        } else {
            distinct > 2 * self.t
        }
    }

    /// WRITE_DONE acknowledgements needed to finish a write.
    pub fn write_quorum(&self) -> usize {
        self.n - self.t
    }

    /// STATE reports and CATCH_UP_DONE acknowledgements needed by a read.
    pub fn read_quorum(&self) -> usize {
        if self.is(Mutation::ReadQuorumMinusOne) {
            (self.n - self.t).saturating_sub(1).max(1)
        } else {
            self.n - self.t
        }
    }

    pub fn catch_up_enabled(&self) -> bool {
        !self.is(Mutation::NoCatchUp)
    }

    pub fn freshness_enabled(&self) -> bool {
        !self.is(Mutation::NoFreshness)
    }
}

/// Largest `t` an `n`-process system tolerates: `floor((n-1)/3)`.
pub fn max_faults(n: usize) -> usize {
    n.saturating_sub(1) / 3
}

/// Smallest possible intersection of two quorums of size `n-t` drawn from `n`
/// processes.
///
/// Up to a permutation of the processes, any pair of quorums is determined by
/// how many members of the second quorum lie outside the first. Every such
/// class is enumerated, so the result is exhaustive over all pairs.
pub fn min_quorum_intersection(n: usize, t: usize) -> usize {
    assert!(t <= n, "t must not exceed n");
    let q = n - t;
    let outside = n - q;
    (0..=outside.min(q)).map(|o| q - o).min().unwrap_or(q)
}

/// `true` when every two quorums of size `n-t` share at least `t+1` processes,
/// and hence at least one correct one.
pub fn quorums_intersect_in_correct(n: usize, t: usize) -> bool {
    min_quorum_intersection(n, t) > t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn echo_threshold_for_four_processes_is_three() {
        let th = Thresholds::new(4, 1);
        assert!(!th.echo_quorum_reached(2));
        assert!(th.echo_quorum_reached(3));
    }

    #[test]
    fn non_strict_echo_lowers_the_threshold() {
        let th = Thresholds::new(4, 1).with_mutation(Some(Mutation::NonStrictEcho));
        assert!(th.echo_quorum_reached(2));
    }

    #[test]
    fn ready_thresholds() {
        let th = Thresholds::new(4, 1);
        assert!(!th.ready_amplify_reached(1));
        assert!(th.ready_amplify_reached(2));
        assert!(!th.ready_deliver_reached(2));
        assert!(th.ready_deliver_reached(3));
        let m = th.with_mutation(Some(Mutation::ReadyDeliverAt2t));
        assert!(m.ready_deliver_reached(2));
    }

    #[test]
    fn quorums() {
        let th = Thresholds::new(7, 2);
        assert_eq!(th.write_quorum(), 5);
        assert_eq!(th.read_quorum(), 5);
        let m = th.with_mutation(Some(Mutation::ReadQuorumMinusOne));
        assert_eq!(m.read_quorum(), 4);
        assert_eq!(m.write_quorum(), 5);
    }

    #[test]
    fn four_process_intersection() {
        assert_eq!(min_quorum_intersection(4, 1), 2);
        assert!(quorums_intersect_in_correct(4, 1));
        assert!(!quorums_intersect_in_correct(3, 1));
    }

    #[test]
    fn max_faults_table() {
        assert_eq!(max_faults(4), 1);
        assert_eq!(max_faults(7), 2);
        assert_eq!(max_faults(10), 3);
        assert_eq!(max_faults(3), 0);
    }

    fn brute_min_intersection(n: usize, t: usize) -> usize {
        let q = n - t;
        let subsets: Vec<u32> = (0u32..(1 << n))
            .filter(|m| m.count_ones() as usize == q)
            .collect();
        let mut best = usize::MAX;
        for a in &subsets {
            for b in &subsets {
                best = best.min((a & b).count_ones() as usize);
            }
        }
        best
    }

    #[test]
    fn class_enumeration_matches_brute_force() {
        for n in 1..=11 {
            for t in 0..n {
                assert_eq!(
                    min_quorum_intersection(n, t),
                    brute_min_intersection(n, t),
                    "n={n} t={t}"
                );
            }
        }
    }
}
