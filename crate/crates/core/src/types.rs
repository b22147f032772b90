//! Identifiers, values and the protocol wire messages shared by every layer.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Index of a process in `0..n`.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct ProcessId(pub u32);

impl ProcessId {
    pub fn index(self) -> usize {
        self.0 as usize
    }

    /// All process identities of an `n`-process system, in ascending order.
    pub fn all(n: usize) -> impl Iterator<Item = ProcessId> {
        (0..n as u32).map(ProcessId)
    }
}

impl fmt::Display for ProcessId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.0)
    }
}

/// Identifier of a workload operation; also used to attribute messages to the
/// operation that caused them.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct OpId(pub u64);

impl fmt::Display for OpId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "op{}", self.0)
    }
}

/// Operation that caused a message, if any.
pub type Cause = Option<OpId>;

/// Application value stored in a register.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Value(pub String);

impl Value {
    pub const BOTTOM: &'static str = "⊥";

    pub fn new(s: impl Into<String>) -> Self {
        Value(s.into())
    }

    /// Distinguished initial value of a register.
    pub fn bottom() -> Self {
        Value(Self::BOTTOM.to_string())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl Default for Value {
    fn default() -> Self {
        Value::bottom()
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value(s.to_string())
    }
}

/// A value paired with its write sequence number: one slot of `reg[1..n]`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RegEntry {
    pub val: Value,
    pub sn: u64,
}

impl RegEntry {
    pub fn initial(val: Value) -> Self {
        RegEntry { val, sn: 0 }
    }

    pub fn as_body(&self) -> WriteBody {
        WriteBody { value: self.val.clone(), wsn: self.sn }
    }
}

/// Content of a WRITE message carried inside a reliable-broadcast instance.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct WriteBody {
    pub value: Value,
    pub wsn: u64,
}

/// Protocol datagram. The sender identity is carried by the channel, never by
/// the payload, so it cannot be forged.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "tag", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Message {
    App {
        body: WriteBody,
        sn: u64,
    },
    Echo {
        origin: ProcessId,
        body: WriteBody,
        sn: u64,
    },
    Ready {
        origin: ProcessId,
        body: WriteBody,
        sn: u64,
    },
    WriteDone {
        wsn: u64,
    },
    Read {
        target: ProcessId,
        rsn: u64,
    },
    State {
        target: ProcessId,
        rsn: u64,
        wsn: u64,
    },
    CatchUp {
        target: ProcessId,
        wsn: u64,
    },
    CatchUpDone {
        target: ProcessId,
        wsn: u64,
    },
}

impl Message {
    pub fn kind(&self) -> MessageKind {
        match self {
            Message::App { .. } => MessageKind::App,
            Message::Echo { .. } => MessageKind::Echo,
            Message::Ready { .. } => MessageKind::Ready,
            Message::WriteDone { .. } => MessageKind::WriteDone,
            Message::Read { .. } => MessageKind::Read,
            Message::State { .. } => MessageKind::State,
            Message::CatchUp { .. } => MessageKind::CatchUp,
            Message::CatchUpDone { .. } => MessageKind::CatchUpDone,
        }
    }
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MessageKind {
    App,
    Echo,
    Ready,
    WriteDone,
    Read,
    State,
    CatchUp,
    CatchUpDone,
}

impl MessageKind {
    pub const ALL: [MessageKind; 8] = [
        MessageKind::App,
        MessageKind::Echo,
        MessageKind::Ready,
        MessageKind::WriteDone,
        MessageKind::Read,
        MessageKind::State,
        MessageKind::CatchUp,
        MessageKind::CatchUpDone,
    ];

    pub fn is_broadcast_layer(self) -> bool {
        matches!(self, MessageKind::App | MessageKind::Echo | MessageKind::Ready)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MessageKind::App => "APP",
            MessageKind::Echo => "ECHO",
            MessageKind::Ready => "READY",
            MessageKind::WriteDone => "WRITE_DONE",
            MessageKind::Read => "READ",
            MessageKind::State => "STATE",
            MessageKind::CatchUp => "CATCH_UP",
            MessageKind::CatchUpDone => "CATCH_UP_DONE",
        }
    }
}

impl fmt::Display for MessageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Addressing of an outgoing message. `All` is the broadcast macro: one copy
/// to every process, the sender included.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dest {
    All,
    One(ProcessId),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outgoing {
    pub to: Dest,
    pub msg: Message,
    pub cause: Cause,
}

impl Outgoing {
    pub fn to_all(msg: Message, cause: Cause) -> Self {
        Outgoing { to: Dest::All, msg, cause }
    }

    pub fn to_one(to: ProcessId, msg: Message, cause: Cause) -> Self {
        Outgoing { to: Dest::One(to), msg, cause }
    }
}
