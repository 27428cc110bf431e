//! What two nodes in radio range do with each other.
//!
//! | pair                              | behaviour                                   |
//! |-----------------------------------|---------------------------------------------|
//! | Generator -> LocalMule/Collector  | generator dumps its queue                   |
//! | LocalMule -> Collector            | mule dumps what it carries                  |
//! | SuperMule <-> Collector           | foreign bundles in, then outbound bundle out|
//! | Collector -> any island node      | deliver what is addressed to that node      |
//! | anything else                     | nothing                                     |
//!
//! A contact moves at most `budget` messages in total (a bundle costs one
//! unit per message inside it), always most urgent first.

use super::bundle::{seal_where, unpack};
use super::node::{accept, NodeState};
use super::{Action, Env, IslandId, Item, Journal, Role};
use crate::msgcore::{can_read, Address};

fn upward(from: Role, to: Role) -> bool {
    matches!(
        (from, to),
        (Role::Generator, Role::LocalMule) | (Role::Generator, Role::Collector) | (Role::LocalMule, Role::Collector)
    )
}

fn receives_deliveries(role: Role) -> bool {
    !matches!(role, Role::SuperMule | Role::BackhaulServer)
}

/// Charges `n` message transmissions against the contact budget and both
/// batteries. Refuses when the budget is short or either side is drained.
fn charge(
    allowance: &mut Option<usize>,
    sender: &mut NodeState,
    receiver: &mut NodeState,
    n: usize,
    env: &Env<'_>,
    journal: &mut Journal,
) -> bool {
    if allowance.is_some_and(|left| left < n) || !sender.has_energy() || !receiver.has_energy() {
        return false;
    }
    if let Some(left) = allowance.as_mut() {
        *left -= n;
    }
    journal.energy_spent += sender.debit(env.costs.per_send * n as f64);
    journal.energy_spent += receiver.debit(env.costs.per_receive * n as f64);
    journal.transfers += n as u64;
    true
}

fn dump(
    sender: &mut NodeState,
    receiver: &mut NodeState,
    allowance: &mut Option<usize>,
    env: &Env<'_>,
    journal: &mut Journal,
) {
    let candidates: Vec<_> = sender
        .queue
        .iter()
        .map(|q| q.msg.id)
        .filter(|id| !receiver.seen.contains(id))
        .collect();
    for id in candidates {
        if !charge(allowance, sender, receiver, 1, env, journal) {
            break;
        }
        let q = sender.queue.remove(id).expect("listed from queue");
        journal.depart(env.now, &q);
        sender.release(id);
        accept(receiver, q.msg, sender.id, Action::MuleDump, false, env, journal);
    }
}

fn exchange_bundles(
    mule: &mut NodeState,
    collector: &mut NodeState,
    allowance: &mut Option<usize>,
    env: &mut Env<'_>,
    journal: &mut Journal,
) {
    let island = collector.island;
    let mut inbound: Vec<usize> = (0..mule.bundles.len())
        .filter(|&i| Some(mule.bundles[i].origin_island) != island)
        .collect();
    inbound.sort_by_key(|&i| {
        let b = &mule.bundles[i];
        (b.priority(), b.sealed_at, b.bundle_id)
    });
    let mut taken = Vec::new();
    for i in inbound {
        let n = mule.bundles[i].messages.len();
        if !charge(allowance, mule, collector, n, env, journal) {
            break;
        }
        taken.push(i);
    }
    taken.sort_unstable();
    let mut handed = Vec::with_capacity(taken.len());
    for i in taken.into_iter().rev() {
        handed.push(mule.bundles.remove(i));
    }
    handed.sort_by_key(|b| (b.priority(), b.sealed_at, b.bundle_id));
    for bundle in handed {
        journal.push(
            env.now,
            mule.id,
            collector.id,
            Item::Bundle(bundle.bundle_id),
            Action::BundleHandoff,
        );
        unpack(collector, bundle, false, env, journal);
    }

    let mut limit = *allowance;
    if let Some(space) = mule.free_space() {
        limit = Some(limit.map_or(space, |l| l.min(space)));
    }
    if limit == Some(0) || !collector.has_energy() || !mule.has_energy() {
        return;
    }
    let directory = env.directory;
    let origin = island.unwrap_or(IslandId::BACKHAUL);
    if let Some(bundle) = seal_where(collector, env, journal, limit, origin, |q| {
        directory.destination_island(&q.msg.destination) != island
    }) {
        let n = bundle.messages.len();
        let charged = charge(allowance, collector, mule, n, env, journal);
        debug_assert!(charged, "seal size was bounded by the allowance");
        journal.push(
            env.now,
            collector.id,
            mule.id,
            Item::Bundle(bundle.bundle_id),
            Action::BundleHandoff,
        );
        mule.bundles.push(bundle);
    }
}

fn deliver(
    collector: &mut NodeState,
    peer: &mut NodeState,
    allowance: &mut Option<usize>,
    env: &Env<'_>,
    journal: &mut Journal,
) {
    let candidates: Vec<_> = collector
        .queue
        .iter()
        .filter(|q| {
            !q.served.contains(&peer.id)
                && !q.msg.is_expired(env.now)
                && env.directory.resolves_to(&q.msg.destination, peer.id, env.positions)
        })
        .map(|q| q.msg.id)
        .collect();
    for id in candidates {
        let q = collector.queue.get_mut(id).expect("listed from queue");
        if !can_read(&q.msg.label, q.msg.sensitivity, peer.id) {
            if q.rejected.insert(peer.id) {
                journal.push(
                    env.now,
                    collector.id,
                    peer.id,
                    Item::Message(id),
                    Action::RejectUnreadable,
                );
            }
            continue;
        }
        if !charge(allowance, collector, peer, 1, env, journal) {
            break;
        }
        journal.push(env.now, collector.id, peer.id, Item::Message(id), Action::Deliver);
        let q = collector.queue.get_mut(id).expect("still queued");
        match q.msg.destination {
            Address::Unicast(_) => {
                // consumed: the recipient remembers it, the collector lets go
                peer.seen.insert(id);
                let q = collector.queue.remove(id).expect("still queued");
                journal.depart(env.now, &q);
                collector.release(id);
            }
            Address::Centre(_) => {
                q.served.insert(peer.id);
            }
        }
    }
}

/// Runs one contact between `a` and `b` at `env.now`.
pub fn on_contact(a: &mut NodeState, b: &mut NodeState, env: &mut Env<'_>, journal: &mut Journal) {
    if !a.online || !b.online || a.id == b.id {
        return;
    }
    let mut allowance = env.budget;

    if upward(a.role, b.role) {
        dump(a, b, &mut allowance, env, journal);
    } else if upward(b.role, a.role) {
        dump(b, a, &mut allowance, env, journal);
    }

    match (a.role, b.role) {
        (Role::SuperMule, Role::Collector) => exchange_bundles(a, b, &mut allowance, env, journal),
        (Role::Collector, Role::SuperMule) => exchange_bundles(b, a, &mut allowance, env, journal),
        _ => {}
    }

    if a.role == Role::Collector && receives_deliveries(b.role) {
        deliver(a, b, &mut allowance, env, journal);
    }
    if b.role == Role::Collector && receives_deliveries(a.role) {
        deliver(b, a, &mut allowance, env, journal);
    }

    for n in [a, b] {
        if !n.has_energy() {
            n.online = false;
        }
    }
}
