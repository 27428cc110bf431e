use std::collections::{BTreeMap, BTreeSet};

use super::bundle::Bundle;
use super::queue::{MessageQueue, Queued};
use super::{Action, DtnError, Env, IslandId, Item, Journal, Role};
use crate::msgcore::{can_read, record_writer, Address, HardwareId, Message, MessageId, SimTime};

#[derive(Clone, Debug, PartialEq)]
pub struct NodeState {
    pub id: HardwareId,
    pub role: Role,
    pub island: Option<IslandId>,
    pub queue: MessageQueue,
    /// Ids this node currently holds or has consumed (delivered to it or
    /// dropped by it). Handing a message on removes it again, so a message
    /// that travels back through an island is not mistaken for a duplicate.
    pub seen: BTreeSet<MessageId>,
    /// Sealed bundles in custody: carried by a super mule, awaiting upload at
    /// a collector.
    pub bundles: Vec<Bundle>,
    /// Messages held (queued plus inside bundles); `None` is unlimited.
    pub buffer_capacity: Option<usize>,
    /// `None` is unlimited.
    pub energy: Option<f64>,
    pub online: bool,
    pub backhaul_available: bool,
    pub(crate) bundle_seq: u64,
    /// Backhaul server only: sealed bundles keyed by destination island.
    pub stored: BTreeMap<IslandId, Vec<Bundle>>,
    /// Backhaul server only: islands whose collector has uplinked at least once.
    pub connected: BTreeSet<IslandId>,
}

impl NodeState {
    pub fn new(id: HardwareId, role: Role, island: Option<IslandId>) -> Self {
        Self {
            id,
            role,
            island,
            queue: MessageQueue::new(),
            seen: BTreeSet::new(),
            bundles: Vec::new(),
            buffer_capacity: None,
            energy: None,
            online: true,
            backhaul_available: false,
            bundle_seq: 0,
            stored: BTreeMap::new(),
            connected: BTreeSet::new(),
        }
    }

    pub fn with_capacity(mut self, cap: usize) -> Self {
        self.buffer_capacity = Some(cap);
        self
    }

    pub fn with_energy(mut self, energy: f64) -> Self {
        self.energy = Some(energy);
        self
    }

    /// Messages in custody, whether loose or sealed.
    pub fn load(&self) -> usize {
        self.queue.len()
            + self.bundles.iter().map(|b| b.messages.len()).sum::<usize>()
            + self.stored.values().flatten().map(|b| b.messages.len()).sum::<usize>()
    }

    pub fn free_space(&self) -> Option<usize> {
        self.buffer_capacity.map(|c| c.saturating_sub(self.load()))
    }

    pub fn has_energy(&self) -> bool {
        self.energy.is_none_or(|e| e > 0.0)
    }

    pub(crate) fn debit(&mut self, amount: f64) -> f64 {
        match self.energy.as_mut() {
            Some(e) => {
                let spent = amount.min(*e).max(0.0);
                *e -= spent;
                spent
            }
            None => amount,
        }
    }

    /// Forgets a message that has left this node's custody.
    pub(crate) fn release(&mut self, id: MessageId) {
        self.seen.remove(&id);
    }

    /// All message ids in custody, each once per place held.
    pub fn custody_ids(&self) -> Vec<MessageId> {
        let mut ids = self.queue.ids();
        for b in self.bundles.iter().chain(self.stored.values().flatten()) {
            ids.extend(b.messages.iter().map(|m| m.id));
        }
        ids
    }
}

/// What happened to a message offered to a node.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Accepted {
    Queued,
    Delivered,
    Duplicate,
    Dropped,
}

/// Takes custody of `msg` arriving from `from`. Messages unicast to the
/// receiver itself are delivered on the spot when readable. `action` is the
/// log entry written when the message is queued.
pub(crate) fn accept(
    node: &mut NodeState,
    mut msg: Message,
    from: HardwareId,
    action: Action,
    via_backhaul: bool,
    env: &Env<'_>,
    journal: &mut Journal,
) -> Accepted {
    let now = env.now;
    if node.seen.contains(&msg.id) {
        journal.duplicates += 1;
        return Accepted::Duplicate;
    }
    if node.id != msg.source {
        msg.label = record_writer(&msg.label, node.id);
    }
    let id = msg.id;
    let mut rejected = false;
    if msg.destination == Address::Unicast(node.id) && !msg.is_expired(now) {
        if can_read(&msg.label, msg.sensitivity, node.id) {
            journal.push(now, from, node.id, Item::Message(id), Action::Deliver);
            node.seen.insert(id);
            return Accepted::Delivered;
        }
        journal.push(now, from, node.id, Item::Message(id), Action::RejectUnreadable);
        rejected = true;
    }
    journal.push(now, from, node.id, Item::Message(id), action);
    node.seen.insert(id);
    let mut entry = Queued::new(msg, now);
    entry.via_backhaul = via_backhaul;
    if rejected {
        entry.rejected.insert(node.id);
    }
    if enqueue(node, entry, now, journal) {
        Accepted::Queued
    } else {
        Accepted::Dropped
    }
}

/// Enqueues with the overflow policy: when full, the oldest message of the
/// lowest-priority nonempty class (counting the newcomer) is dropped.
/// Returns false when the newcomer itself was the victim.
fn enqueue(node: &mut NodeState, entry: Queued, now: SimTime, journal: &mut Journal) -> bool {
    let full = node.free_space() == Some(0);
    if !full {
        node.queue.push(entry);
        return true;
    }
    let incoming = entry.msg.priority;
    match node.queue.lowest_class() {
        Some(lowest) if lowest >= incoming => {
            let victim = node.queue.pop_oldest(lowest).expect("class is nonempty");
            journal.depart(now, &victim);
            journal.push(
                now,
                node.id,
                node.id,
                Item::Message(victim.msg.id),
                Action::DropOverflow,
            );
            node.queue.push(entry);
            true
        }
        _ => {
            journal.push(now, node.id, node.id, Item::Message(entry.msg.id), Action::DropOverflow);
            false
        }
    }
}

/// Queues a freshly generated message at its generator.
pub fn submit(node: &mut NodeState, msg: Message, env: &Env<'_>, journal: &mut Journal) -> Result<(), DtnError> {
    if node.role != Role::Generator {
        return Err(DtnError::WrongRole {
            node: node.id,
            role: node.role,
            needed: "generator",
        });
    }
    if !node.online {
        return Err(DtnError::Offline(node.id));
    }
    let id = node.id;
    accept(node, msg, id, Action::Submit, false, env, journal);
    Ok(())
}

/// Drops every queued message older than its ttl.
pub fn expire(node: &mut NodeState, now: SimTime, journal: &mut Journal) {
    for q in node.queue.extract_if(|q| q.msg.is_expired(now)) {
        journal.depart(now, &q);
        journal.push(now, node.id, node.id, Item::Message(q.msg.id), Action::DropTtl);
    }
}
