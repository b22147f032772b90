//! Line-delimited execution trace.
//!
//! A trace file is a header line, one line per event, and a footer line. All
//! records serialize with a fixed field order, so equal executions produce
//! byte-identical files.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::quorum::Mutation;
use crate::types::{Message, OpId, ProcessId, RegEntry, Value, WriteBody};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EventKind {
    Send,
    Deliver,
    Rdeliver,
    OpStart,
    OpEnd,
    StateChange,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum OpKind {
    Write,
    Read,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "tag", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Record {
    Rdeliver { sn: u64, body: WriteBody },
    OpStart { op: OpId, op_kind: OpKind, target: ProcessId, value: Option<Value> },
    /// For a write, `entry` is the written value and its write sequence
    /// number; for a read, the returned pair.
    OpEnd { op: OpId, op_kind: OpKind, target: ProcessId, entry: RegEntry },
    StateChange { register: ProcessId, entry: RegEntry },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Payload {
    Message(Message),
    Record(Record),
}

/// One trace line.
///
/// `sender`/`receiver` are the channel endpoints for SEND and DELIVER; the
/// origin and the delivering node for RDELIVER; the invoker for OP_START and
/// OP_END; the register owner and the updated node for STATE_CHANGE.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub seq: u64,
    pub time: u64,
    pub kind: EventKind,
    pub sender: Option<ProcessId>,
    pub receiver: Option<ProcessId>,
    pub msg_id: Option<u64>,
    pub cause: Option<OpId>,
    pub payload: Payload,
    pub snapshot: Option<String>,
}

impl TraceEvent {
    pub fn message(&self) -> Option<&Message> {
        match &self.payload {
            Payload::Message(m) => Some(m),
            Payload::Record(_) => None,
        }
    }

    pub fn record(&self) -> Option<&Record> {
        match &self.payload {
            Payload::Record(r) => Some(r),
            Payload::Message(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub scenario: String,
    pub n: usize,
    pub t: usize,
    pub seed: u64,
    pub byzantine: Vec<ProcessId>,
    pub strategy: Option<String>,
    pub init: Vec<Value>,
    pub policy: String,
    pub fairness_bound: u64,
    pub mutation: Option<Mutation>,
}

impl TraceHeader {
    pub fn is_correct(&self, p: ProcessId) -> bool {
        !self.byzantine.contains(&p)
    }

    pub fn correct(&self) -> Vec<ProcessId> {
        ProcessId::all(self.n).filter(|p| self.is_correct(*p)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Outcome {
    /// Nothing in flight and no workload operation can start.
    Quiescent,
    /// The step budget ran out first.
    Nonterminating,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StuckOp {
    pub op: OpId,
    pub process: ProcessId,
    pub guards: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceFooter {
    pub outcome: Outcome,
    pub steps: u64,
    pub stuck: Vec<StuckOp>,
    pub unstarted: Vec<OpId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub header: TraceHeader,
    pub events: Vec<TraceEvent>,
    pub footer: TraceFooter,
}

#[derive(Serialize, Deserialize)]
struct HeaderLine {
    header: TraceHeader,
}

#[derive(Serialize, Deserialize)]
struct FooterLine {
    footer: TraceFooter,
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("trace line {line}: {source}")]
    Parse { line: usize, source: serde_json::Error },
    #[error("trace is missing its {0} line")]
    Missing(&'static str),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Trace {
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{}", to_line(&HeaderLine { header: self.header.clone() })?)?;
        for e in &self.events {
            writeln!(w, "{}", to_line(e)?)?;
        }
        writeln!(w, "{}", to_line(&FooterLine { footer: self.footer.clone() })?)?;
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("json is utf-8")
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Trace, TraceError> {
        let mut header = None;
        let mut footer = None;
        let mut events = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parse_err = |source| TraceError::Parse { line: i + 1, source };
            if header.is_none() {
                let h: HeaderLine = serde_json::from_str(&line).map_err(parse_err)?;
                header = Some(h.header);
            } else if line.starts_with("{\"footer\"") {
                let f: FooterLine = serde_json::from_str(&line).map_err(parse_err)?;
                footer = Some(f.footer);
            } else {
                events.push(serde_json::from_str(&line).map_err(parse_err)?);
            }
        }
        Ok(Trace {
            header: header.ok_or(TraceError::Missing("header"))?,
            events,
            footer: footer.ok_or(TraceError::Missing("footer"))?,
        })
    }

    /// SHA-256 of the serialized trace, hex encoded.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        self.write_jsonl(HashWriter(&mut h)).expect("hashing never fails");
        hex::encode(h.finalize())
    }

    pub fn is_quiescent(&self) -> bool {
        self.footer.outcome == Outcome::Quiescent
    }
}

struct HashWriter<'a>(&'a mut Sha256);

impl Write for HashWriter<'_> {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        self.0.update(buf);
        Ok(buf.len())
    }

    fn flush(&mut self) -> std::io::Result<()> {
        Ok(())
    }
}

fn to_line<T: Serialize>(v: &T) -> std::io::Result<String> {
    serde_json::to_string(v).map_err(std::io::Error::other)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Trace {
        let header = TraceHeader {
            scenario: "s".into(),
            n: 4,
            t: 1,
            seed: 3,
            byzantine: vec![ProcessId(3)],
            strategy: Some("crash_silent".into()),
            init: vec![Value::bottom(); 4],
            policy: "random".into(),
            fairness_bound: 1000,
            mutation: None,
        };
        let events = vec![
            TraceEvent {
                seq: 0,
                time: 0,
                kind: EventKind::Send,
                sender: Some(ProcessId(0)),
                receiver: Some(ProcessId(1)),
                msg_id: Some(0),
                cause: Some(OpId(0)),
                payload: Payload::Message(Message::Read { target: ProcessId(2), rsn: 1 }),
                snapshot: None,
            },
            TraceEvent {
                seq: 1,
                time: 1,
                kind: EventKind::OpEnd,
                sender: Some(ProcessId(0)),
                receiver: None,
                msg_id: None,
                cause: None,
                payload: Payload::Record(Record::OpEnd {
                    op: OpId(0),
                    op_kind: OpKind::Read,
                    target: ProcessId(2),
                    entry: RegEntry::initial(Value::bottom()),
                }),
                snapshot: Some("00".into()),
            },
        ];
        Trace {
            header,
            events,
            footer: TraceFooter { outcome: Outcome::Quiescent, steps: 1, stuck: vec![], unstarted: vec![] },
        }
    }

    #[test]
    fn jsonl_roundtrip() {
        let t = sample();
        let text = t.to_jsonl();
        assert_eq!(text.lines().count(), 4);
        let back = Trace::read_jsonl(text.as_bytes()).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.hash(), t.hash());
    }

    #[test]
    fn field_order_is_stable() {
        let line = sample().to_jsonl().lines().nth(1).unwrap().to_string();
        assert_eq!(
            line,
            r#"{"seq":0,"time":0,"kind":"SEND","sender":0,"receiver":1,"msg_id":0,"cause":0,"payload":{"tag":"READ","target":2,"rsn":1},"snapshot":null}"#
        );
    }

    #[test]
    fn missing_footer_is_an_error() {
        let text = sample().to_jsonl();
        let truncated: String = text.lines().take(2).map(|l| format!("{l}\n")).collect();
        assert!(matches!(Trace::read_jsonl(truncated.as_bytes()), Err(TraceError::Missing("footer"))));
    }
}
