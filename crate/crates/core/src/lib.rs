//! Signature-free Byzantine-tolerant single-writer multi-reader atomic
//! registers for `n > 3t`, with a deterministic network simulator, a library
//! of Byzantine strategies and a trace consistency checker.

pub mod adversary;
pub mod checker;
pub mod netsim;
pub mod quorum;
pub mod rbcast;
pub mod runner;
pub mod scenario;
pub mod register;
pub mod trace;
pub mod types;

pub use netsim::{run, SchedulerPolicy, SimConfig, SimError, Simulation};
pub use quorum::{Mutation, Thresholds};
pub use register::RegisterNode;
pub use trace::Trace;
pub use types::{Message, OpId, ProcessId, RegEntry, Value};
