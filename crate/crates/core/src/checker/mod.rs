//! Post-hoc verification of recorded traces.
//!
//! Every check is a pure function of a [`Trace`]. A failing verdict carries
//! the sequence numbers of the trace events that exhibit the violation.

pub mod cost;
pub mod history;
pub mod linearize;
pub mod rb;
pub mod safety;
pub mod termination;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::trace::Trace;

pub use cost::{count_messages, CostReport, OpCost};
pub use history::{derive_histories, History, OperationRecord, WriteInfo};
pub use linearize::{build_linearization, validate_order, LinEntry, Linearization};
pub use rb::{check_rb, RbStats};
pub use safety::check_safety;
pub use termination::check_termination;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Property {
    PerWriterAgreement,
    ReadResolution,
    ReadFollowedByWrite,
    WriteFollowedByRead,
    NoReadInversion,
    RbValidity,
    RbIntegrity,
    RbUniformity,
    RbTermination,
    RbFifo,
    NoPoisonDelivery,
    Termination,
    Linearization,
    ReadCost,
    WriteCost,
}

impl Property {
    pub const ALL: [Property; 15] = [
        Property::PerWriterAgreement,
        Property::ReadResolution,
        Property::ReadFollowedByWrite,
        Property::WriteFollowedByRead,
        Property::NoReadInversion,
        Property::RbValidity,
        Property::RbIntegrity,
        Property::RbUniformity,
        Property::RbTermination,
        Property::RbFifo,
        Property::NoPoisonDelivery,
        Property::Termination,
        Property::Linearization,
        Property::ReadCost,
        Property::WriteCost,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Property::PerWriterAgreement => "per_writer_agreement",
            Property::ReadResolution => "read_resolution",
            Property::ReadFollowedByWrite => "read_followed_by_write",
            Property::WriteFollowedByRead => "write_followed_by_read",
            Property::NoReadInversion => "no_read_inversion",
            Property::RbValidity => "rb_validity",
            Property::RbIntegrity => "rb_integrity",
            Property::RbUniformity => "rb_uniformity",
            Property::RbTermination => "rb_termination",
            Property::RbFifo => "rb_fifo",
            Property::NoPoisonDelivery => "no_poison_delivery",
            Property::Termination => "termination",
            Property::Linearization => "linearization",
            Property::ReadCost => "read_cost",
            Property::WriteCost => "write_cost",
        }
    }

    /// The register consistency properties plus per-writer agreement.
    pub fn is_safety(self) -> bool {
        matches!(
            self,
            Property::PerWriterAgreement
                | Property::ReadResolution
                | Property::ReadFollowedByWrite
                | Property::WriteFollowedByRead
                | Property::NoReadInversion
        )
    }
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Status {
    Pass,
    Fail,
    /// Nothing to test: the property's premise never occurred.
    Vacuous,
    /// The run hit its step budget before quiescence.
    Nonterminating,
}

impl Status {
    pub fn is_ok(self) -> bool {
        matches!(self, Status::Pass | Status::Vacuous)
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Vacuous => "VACUOUS",
            Status::Nonterminating => "NONTERMINATING",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub property: Property,
    pub status: Status,
    /// Trace event sequence numbers witnessing a failure.
    pub counterexample: Vec<u64>,
    pub detail: String,
}

impl Verdict {
    pub fn pass(property: Property) -> Self {
        Verdict { property, status: Status::Pass, counterexample: Vec::new(), detail: String::new() }
    }

    pub fn vacuous(property: Property, detail: impl Into<String>) -> Self {
        Verdict { property, status: Status::Vacuous, counterexample: Vec::new(), detail: detail.into() }
    }

    pub fn fail(property: Property, counterexample: Vec<u64>, detail: impl Into<String>) -> Self {
        Verdict { property, status: Status::Fail, counterexample, detail: detail.into() }
    }

    /// PASS when `tested` is non-zero, VACUOUS otherwise.
    pub fn pass_or_vacuous(property: Property, tested: usize) -> Self {
        if tested == 0 {
            Verdict::vacuous(property, "no instance of the premise")
        } else {
            Verdict {
                property,
                status: Status::Pass,
                counterexample: Vec::new(),
                detail: format!("{tested} instances checked"),
            }
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status.is_ok()
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:<24} {}", self.property.as_str(), self.status)?;
        if !self.detail.is_empty() {
            write!(f, "  {}", self.detail)?;
        }
        if !self.counterexample.is_empty() {
            write!(f, "  events {:?}", self.counterexample)?;
        }
        Ok(())
    }
}

/// All verdicts for one trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub verdicts: Vec<Verdict>,
    pub rb: RbStats,
    pub cost: CostReport,
    pub linearization: Option<Linearization>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(Verdict::is_ok)
    }

    pub fn verdict(&self, p: Property) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.property == p)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Verdict> {
        self.verdicts.iter().filter(|v| !v.is_ok())
    }

    pub fn safety_passed(&self) -> bool {
        self.verdicts.iter().filter(|v| v.property.is_safety()).all(Verdict::is_ok)
    }
}

/// Runs every check on `trace`.
pub fn check_trace(trace: &Trace) -> Report {
    let history = derive_histories(trace);
    let mut verdicts = check_safety(&history);
    let (rb_verdicts, rb) = check_rb(trace);
    verdicts.extend(rb_verdicts);
    verdicts.push(check_termination(trace));
    let (lin_verdict, linearization) = match build_linearization(&history) {
        Ok(l) => (Verdict::pass_or_vacuous(Property::Linearization, l.len()), Some(l)),
        Err(v) => (v, None),
    };
    verdicts.push(lin_verdict);
    let cost = count_messages(trace);
    verdicts.extend(cost.verdicts());
    Report { verdicts, rb, cost, linearization }
}
