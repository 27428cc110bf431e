//! Role-based store-and-forward protocol.
//!
//! Every operation is a state-in/state-out transition on [`NodeState`]
//! values. Side effects are appended to a [`Journal`]: the audit log plus the
//! bookkeeping the simulator needs for metrics (bundle contents, energy,
//! transfer counts).
//!
//! Custody is single-copy. A message or bundle handed to a new custodian is
//! removed from the sender, so every live message sits in exactly one place.

mod bundle;
mod contact;
mod node;
mod queue;
mod roles;
mod uplink;

pub use bundle::{ingest_bundle, make_bundle, Bundle, BundleId};
pub use contact::on_contact;
pub use node::{expire, submit, NodeState};
pub use queue::{MessageQueue, Queued};
pub use roles::{active_collector, promote_auxiliary, register_node, Registration, Registry};
pub use uplink::{server_flush, server_inject, try_uplink};

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::msgcore::{ActivityCentre, Address, CentreId, HardwareId, MessageId, Position, SimTime};
use crate::secstream::Keychain;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IslandId(pub u64);

impl IslandId {
    /// Origin recorded on bundles sealed by the backhaul server.
    pub const BACKHAUL: IslandId = IslandId(u64::MAX);
}

impl fmt::Display for IslandId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Generator,
    Collector,
    AuxCollector,
    LocalMule,
    SuperMule,
    BackhaulServer,
}

impl Role {
    pub fn name(self) -> &'static str {
        match self {
            Role::Generator => "generator",
            Role::Collector => "collector",
            Role::AuxCollector => "aux_collector",
            Role::LocalMule => "local_mule",
            Role::SuperMule => "super_mule",
            Role::BackhaulServer => "backhaul_server",
        }
    }

    pub fn has_island(self) -> bool {
        !matches!(self, Role::SuperMule | Role::BackhaulServer)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Item {
    Message(MessageId),
    Bundle(BundleId),
}

impl fmt::Display for Item {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Item::Message(m) => m.fmt(f),
            Item::Bundle(b) => b.fmt(f),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Action {
    Submit,
    MuleDump,
    BundleHandoff,
    Unbundle,
    Deliver,
    UplinkUpload,
    UplinkFetch,
    DropTtl,
    DropOverflow,
    DropTampered,
    RejectUnreadable,
}

impl Action {
    pub fn name(self) -> &'static str {
        match self {
            Action::Submit => "Submit",
            Action::MuleDump => "MuleDump",
            Action::BundleHandoff => "BundleHandoff",
            Action::Unbundle => "Unbundle",
            Action::Deliver => "Deliver",
            Action::UplinkUpload => "UplinkUpload",
            Action::UplinkFetch => "UplinkFetch",
            Action::DropTtl => "DropTtl",
            Action::DropOverflow => "DropOverflow",
            Action::DropTampered => "DropTampered",
            Action::RejectUnreadable => "RejectUnreadable",
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct TransferLog {
    pub time: SimTime,
    pub from: HardwareId,
    pub to: HardwareId,
    pub item: Item,
    pub action: Action,
}

impl TransferLog {
    /// `time,from,to,item,action`
    pub fn csv_line(&self) -> String {
        format!("{},{},{},{},{}", self.time, self.from, self.to, self.item, self.action)
    }

    pub fn message(&self) -> Option<MessageId> {
        match self.item {
            Item::Message(m) => Some(m),
            Item::Bundle(_) => None,
        }
    }
}

/// Side effects of protocol operations.
#[derive(Clone, Debug, Default)]
pub struct Journal {
    pub log: Vec<TransferLog>,
    /// Contents of every bundle sealed, in sealing order.
    pub sealed: Vec<(BundleId, HardwareId, Vec<MessageId>)>,
    /// Messages contained in bundles discarded as tampered.
    pub tampered: Vec<MessageId>,
    pub duplicates: usize,
    /// Message-level radio transmissions.
    pub transfers: u64,
    pub energy_spent: f64,
    /// Seconds spent queued, summed over every departure from a queue.
    pub queue_wait_total: u64,
    pub queue_departures: u64,
}

impl Journal {
    pub fn new() -> Self {
        Self::default()
    }

    pub(crate) fn push(&mut self, time: SimTime, from: HardwareId, to: HardwareId, item: Item, action: Action) {
        self.log.push(TransferLog {
            time,
            from,
            to,
            item,
            action,
        });
    }

    /// Books the wait of an entry leaving a queue at `now`.
    pub(crate) fn depart(&mut self, now: SimTime, q: &Queued) {
        self.queue_wait_total += now.saturating_sub(q.enqueued_at);
        self.queue_departures += 1;
    }
}

/// Static knowledge every node shares: who lives on which island and where
/// each activity centre is.
#[derive(Clone, Debug, Default)]
pub struct Directory {
    pub home: BTreeMap<HardwareId, IslandId>,
    pub centres: BTreeMap<CentreId, ActivityCentre>,
    /// Island whose extent contains the centre point.
    pub centre_island: BTreeMap<CentreId, IslandId>,
}

impl Directory {
    pub fn destination_island(&self, addr: &Address) -> Option<IslandId> {
        match addr {
            Address::Unicast(id) => self.home.get(id).copied(),
            Address::Centre(c) => self.centre_island.get(c).copied(),
        }
    }

    /// Whether `addr` currently resolves to `node`. Centre membership uses
    /// the positions at the time of the call.
    pub fn resolves_to(&self, addr: &Address, node: HardwareId, positions: &BTreeMap<HardwareId, Position>) -> bool {
        match addr {
            Address::Unicast(id) => *id == node,
            Address::Centre(c) => match (self.centres.get(c), positions.get(&node)) {
                (Some(centre), Some(p)) => centre.contains(*p),
                _ => false,
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyCosts {
    pub per_send: f64,
    pub per_receive: f64,
}

impl Default for EnergyCosts {
    fn default() -> Self {
        Self {
            per_send: 1.0,
            per_receive: 0.5,
        }
    }
}

/// Everything an operation needs besides the node states themselves.
pub struct Env<'a> {
    pub now: SimTime,
    pub directory: &'a Directory,
    pub positions: &'a BTreeMap<HardwareId, Position>,
    pub keys: &'a mut Keychain,
    /// Key interval in force at `now`.
    pub interval: u64,
    /// Messages per contact; `None` is unlimited.
    pub budget: Option<usize>,
    pub costs: EnergyCosts,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DtnError {
    #[error("node {0} is offline")]
    Offline(HardwareId),
    #[error("node {node} has role {role:?}, operation needs {needed}")]
    WrongRole {
        node: HardwareId,
        role: Role,
        needed: &'static str,
    },
    #[error("collector {0} has nothing addressed off-island")]
    NothingToBundle(HardwareId),
    #[error("island {0} has no auxiliary collector to promote")]
    NoAuxiliary(IslandId),
    #[error("node {0} has no backhaul")]
    NoBackhaul(HardwareId),
    #[error("malformed bundle: {0}")]
    Malformed(&'static str),
}
