//! The message model every other module builds on.
//!
//! Everything here is a plain value type. Relay state (queues, custody,
//! bundles) lives in [`crate::dtnproto`].

mod geo;

pub use geo::{Disc, Position};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Device hardware identifier (an IMEI-like 64-bit value).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HardwareId(pub u64);

impl fmt::Display for HardwareId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Delivery priority. Lower discriminant outranks higher, so the derived
/// `Ord` puts `Emergency` first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Priority {
    Emergency = 0,
    High = 1,
    Normal = 2,
    Low = 3,
}

impl Priority {
    pub const ALL: [Priority; 4] = [Priority::Emergency, Priority::High, Priority::Normal, Priority::Low];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }

    /// True when `self` must be served before `other`.
    pub fn outranks(self, other: Priority) -> bool {
        self < other
    }

    pub fn name(self) -> &'static str {
        match self {
            Priority::Emergency => "emergency",
            Priority::High => "high",
            Priority::Normal => "normal",
            Priority::Low => "low",
        }
    }
}

/// Protection tier of a payload.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sensitivity {
    HighSensitive,
    LowSensitive,
    OpenAccess,
}

impl Sensitivity {
    pub const ALL: [Sensitivity; 3] = [
        Sensitivity::HighSensitive,
        Sensitivity::LowSensitive,
        Sensitivity::OpenAccess,
    ];

    pub fn code(self) -> u8 {
        match self {
            Sensitivity::HighSensitive => 0,
            Sensitivity::LowSensitive => 1,
            Sensitivity::OpenAccess => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }

    pub fn is_protected(self) -> bool {
        self != Sensitivity::OpenAccess
    }
}

/// Readers list chosen by the sender plus the provenance chain of every
/// node that has held the message.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FlowLabel {
    pub readers: BTreeSet<HardwareId>,
    pub writers: BTreeSet<HardwareId>,
}

impl FlowLabel {
    pub fn new(source: HardwareId, readers: BTreeSet<HardwareId>) -> Self {
        Self {
            readers,
            writers: BTreeSet::from([source]),
        }
    }
}

/// Whether `principal` may read a message carrying `label` at `sensitivity`.
pub fn can_read(label: &FlowLabel, sensitivity: Sensitivity, principal: HardwareId) -> bool {
    sensitivity == Sensitivity::OpenAccess || label.readers.contains(&principal)
}

/// Returns `label` with `principal` appended to its provenance chain.
pub fn record_writer(label: &FlowLabel, principal: HardwareId) -> FlowLabel {
    let mut out = label.clone();
    out.writers.insert(principal);
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CentreId(pub u64);

impl fmt::Display for CentreId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A TSN's spatial extent: everybody within `radius` metres of `centre`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActivityCentre {
    pub id: CentreId,
    pub centre: Position,
    pub radius: f64,
}

impl ActivityCentre {
    pub fn new(id: CentreId, centre: Position, radius: f64) -> Result<Self, MsgError> {
        if radius.is_nan() || radius <= 0.0 || !radius.is_finite() {
            return Err(MsgError::BadRadius(radius));
        }
        Ok(Self { id, centre, radius })
    }

    pub fn disc(&self) -> Disc {
        Disc {
            centre: self.centre,
            radius: self.radius,
        }
    }

    pub fn contains(&self, p: Position) -> bool {
        self.disc().contains(p)
    }
}

/// Nodes currently inside `centre`. The boundary is inclusive.
pub fn resolve_centre(centre: &ActivityCentre, positions: &BTreeMap<HardwareId, Position>) -> BTreeSet<HardwareId> {
    positions
        .iter()
        .filter(|(_, p)| centre.contains(**p))
        .map(|(id, _)| *id)
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Address {
    Unicast(HardwareId),
    Centre(CentreId),
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Address::Unicast(id) => write!(f, "node:{id}"),
            Address::Centre(c) => write!(f, "centre:{c}"),
        }
    }
}

/// `(source, per-source sequence number)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MessageId {
    pub source: HardwareId,
    pub seq: u64,
}

impl fmt::Display for MessageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "m{}-{}", self.source, self.seq)
    }
}

/// Simulation time in whole seconds.
pub type SimTime = u64;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Message {
    pub id: MessageId,
    pub source: HardwareId,
    pub destination: Address,
    pub priority: Priority,
    pub sensitivity: Sensitivity,
    pub label: FlowLabel,
    pub payload: Vec<u8>,
    pub created_at: SimTime,
    pub ttl: u64,
}

impl Message {
    pub fn age(&self, now: SimTime) -> u64 {
        now.saturating_sub(self.created_at)
    }

    /// Retained at `age == ttl`, expired strictly beyond.
    pub fn is_expired(&self, now: SimTime) -> bool {
        self.age(now) > self.ttl
    }

    pub fn deadline(&self) -> SimTime {
        self.created_at.saturating_add(self.ttl)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MsgError {
    #[error("protected message has an empty readers list")]
    EmptyReaders,
    #[error("ttl must be positive")]
    ZeroTtl,
    #[error("activity radius must be positive and finite, got {0}")]
    BadRadius(f64),
}

/// Hands out message ids; one counter per source keeps runs reproducible.
#[derive(Debug, Default, Clone)]
pub struct MessageFactory {
    counters: BTreeMap<HardwareId, u64>,
}

impl MessageFactory {
    pub fn new() -> Self {
        Self::default()
    }

    #[allow(clippy::too_many_arguments)]
    pub fn new_message(
        &mut self,
        source: HardwareId,
        destination: Address,
        priority: Priority,
        sensitivity: Sensitivity,
        readers: BTreeSet<HardwareId>,
        payload: Vec<u8>,
        now: SimTime,
        ttl: u64,
    ) -> Result<Message, MsgError> {
        if ttl == 0 {
            return Err(MsgError::ZeroTtl);
        }
        if sensitivity.is_protected() && readers.is_empty() {
            return Err(MsgError::EmptyReaders);
        }
        let counter = self.counters.entry(source).or_insert(0);
        let id = MessageId { source, seq: *counter };
        *counter += 1;
        Ok(Message {
            id,
            source,
            destination,
            priority,
            sensitivity,
            label: FlowLabel::new(source, readers),
            payload,
            created_at: now,
            ttl,
        })
    }
}
