//! Brute-force reachability over the time-expanded contact graph.
//!
//! Replays the same contacts and role changes as the engine but tracks each
//! message as a bare location, following the role behaviour table directly.
//! None of the protocol code is used, so agreement between the two is a
//! real check. Only the resource-free setting is supported; `unsupported`
//! lists what is refused.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use super::engine::{registered, world_bbox};
use super::mobility::{contacts_at, Trajectory};
use super::scenario::{Budget, Destination, Scenario};
use super::traffic::expand_traffic;
use super::{step_at_or_after, step_times, stream, Concern};
use crate::dtnproto::{IslandId, Role};
use crate::eventflow::Mode;
use crate::msgcore::{HardwareId, MessageId, Position, Sensitivity, SimTime};

pub const ORACLE_MAX_NODES: usize = 10;
/// Contact opportunities: maximal runs of consecutive steps a pair is in range.
pub const ORACLE_MAX_CONTACTS: usize = 200;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("scenario too large for the oracle: {0}")]
    TooLarge(String),
    #[error("oracle does not model {0}")]
    Unsupported(&'static str),
    #[error("scenario does not validate")]
    Invalid,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Where {
    /// Loose at a node.
    At(HardwareId),
    /// Sealed on a super mule, in a batch from `origin`.
    Carried(HardwareId, IslandId),
    Delivered,
    Lost,
}

struct Msg {
    dest: HardwareId,
    readable_by: Option<BTreeSet<HardwareId>>,
    deadline: SimTime,
    at: Where,
}

impl Msg {
    fn readable(&self, node: HardwareId) -> bool {
        self.readable_by.as_ref().is_none_or(|r| r.contains(&node))
    }

    fn alive(&self, t: SimTime) -> bool {
        t <= self.deadline
    }
}

fn unsupported(s: &Scenario) -> Option<&'static str> {
    let nodes = &s.nodes;
    if nodes.iter().any(|n| n.buffer.is_some()) {
        return Some("buffer limits");
    }
    if s.contact_budget != Budget::Unlimited {
        return Some("a finite contact budget");
    }
    if nodes.iter().any(|n| n.energy.is_some()) {
        return Some("batteries");
    }
    if nodes.iter().any(|n| !n.backhaul.is_empty()) {
        return Some("backhaul");
    }
    if s.tamper_rate > 0.0 {
        return Some("tampering");
    }
    if s.traffic
        .iter()
        .any(|t| matches!(t.destination, Destination::Centre(_)))
    {
        return Some("activity-centre traffic");
    }
    let subs = s.parsed_subscriptions().ok()?;
    if !s.parsed_rules().ok()?.is_empty() && subs.iter().any(|x| x.mode == Mode::Active) {
        return Some("push alerts");
    }
    None
}

/// The set of generated messages that some custody path delivers by its
/// deadline.
pub fn oracle_deliverable(s: &Scenario) -> Result<BTreeSet<MessageId>, OracleError> {
    if !s.diagnostics().is_empty() {
        return Err(OracleError::Invalid);
    }
    if let Some(what) = unsupported(s) {
        return Err(OracleError::Unsupported(what));
    }
    let (keep, _) = registered(s);
    if keep.len() > ORACLE_MAX_NODES {
        return Err(OracleError::TooLarge(format!("{} nodes", keep.len())));
    }
    let specs: BTreeMap<HardwareId, &super::NodeSpec> = keep.iter().map(|&i| (s.nodes[i].id, &s.nodes[i])).collect();
    let home: BTreeMap<HardwareId, IslandId> = specs.iter().filter_map(|(id, n)| n.island.map(|i| (*id, i))).collect();

    // contacts for every step, computed up front so the size check comes first
    let times: Vec<SimTime> = step_times(s).collect();
    let mut timeline: Vec<Vec<(HardwareId, HardwareId)>> = Vec::with_capacity(times.len());
    match &s.contacts {
        Some(list) => {
            let mut by_step: BTreeMap<SimTime, BTreeSet<(HardwareId, HardwareId)>> = BTreeMap::new();
            for c in list {
                by_step
                    .entry(step_at_or_after(s, c.time))
                    .or_default()
                    .insert((c.a.min(c.b), c.a.max(c.b)));
            }
            for t in &times {
                timeline.push(by_step.get(t).map(|p| p.iter().copied().collect()).unwrap_or_default());
            }
        }
        None => {
            let extents = s.extents();
            let world = world_bbox(&extents, s);
            let mut paths: BTreeMap<HardwareId, Trajectory> = specs
                .iter()
                .filter(|(_, n)| n.role != Role::BackhaulServer)
                .map(|(id, n)| {
                    (
                        *id,
                        Trajectory::new(n, &extents, world, stream(s.seed, Concern::Mobility, id.0), s.duration),
                    )
                })
                .collect();
            for &t in &times {
                let here: BTreeMap<HardwareId, Position> = paths.iter_mut().map(|(id, p)| (*id, p.at(t))).collect();
                timeline.push(contacts_at(&here, s.radio_range));
            }
        }
    }
    let mut opportunities = 0;
    let mut prev: BTreeSet<(HardwareId, HardwareId)> = BTreeSet::new();
    for pairs in &timeline {
        let now: BTreeSet<_> = pairs.iter().copied().collect();
        opportunities += now.difference(&prev).count();
        prev = now;
    }
    if opportunities > ORACLE_MAX_CONTACTS {
        return Err(OracleError::TooLarge(format!("{opportunities} contacts")));
    }

    let mut role: BTreeMap<HardwareId, Role> = specs.iter().map(|(id, n)| (*id, n.role)).collect();
    let gens = expand_traffic(s);
    let mut next_gen = 0;
    let mut seq: BTreeMap<HardwareId, u64> = BTreeMap::new();
    let mut msgs: BTreeMap<MessageId, Msg> = BTreeMap::new();

    for (step, &t) in times.iter().enumerate() {
        let up: BTreeSet<HardwareId> = specs
            .keys()
            .copied()
            .filter(|id| {
                !s.failures
                    .iter()
                    .any(|f| f.node == *id && f.offline_at <= t && f.online_at.is_none_or(|on| t < on))
            })
            .collect();

        // standby takeover: when no collector on an island is up, the
        // lowest-id standby that is up becomes collector and every other
        // collector there stands down
        let islands: BTreeSet<IslandId> = home.values().copied().collect();
        for isl in islands {
            let on_isl = |r: Role| {
                home.iter()
                    .filter(|(_, i)| **i == isl)
                    .map(|(id, _)| *id)
                    .filter(|id| role[id] == r)
                    .collect::<Vec<_>>()
            };
            let collectors = on_isl(Role::Collector);
            if collectors.is_empty() || collectors.iter().any(|c| up.contains(c)) {
                continue;
            }
            if let Some(&aux) = on_isl(Role::AuxCollector).iter().find(|a| up.contains(a)) {
                role.insert(aux, Role::Collector);
                for c in collectors {
                    role.insert(c, Role::AuxCollector);
                }
            }
        }

        while let Some(g) = gens.get(next_gen).copied().filter(|g| g.time <= t) {
            next_gen += 1;
            let spec = &s.traffic[g.traffic];
            if !up.contains(&spec.source) {
                continue;
            }
            let counter = seq.entry(spec.source).or_insert(0);
            let id = MessageId {
                source: spec.source,
                seq: *counter,
            };
            *counter += 1;
            let Destination::Node(dest) = spec.destination else {
                unreachable!("centre traffic rejected above")
            };
            let readable_by = (spec.sensitivity != Sensitivity::OpenAccess).then(|| spec.reader_set());
            let mut m = Msg {
                dest,
                readable_by,
                deadline: t + spec.ttl,
                at: Where::At(spec.source),
            };
            arrive(&mut m, spec.source, t);
            msgs.insert(id, m);
        }

        for &(a, b) in &timeline[step] {
            if !up.contains(&a) || !up.contains(&b) || !role.contains_key(&a) || !role.contains_key(&b) {
                continue;
            }
            let (ra, rb) = (role[&a], role[&b]);

            // generators and local mules hand everything up the chain
            for (from, to) in [(a, b), (b, a)] {
                let upward = matches!(
                    (role[&from], role[&to]),
                    (Role::Generator, Role::LocalMule | Role::Collector) | (Role::LocalMule, Role::Collector)
                );
                if upward {
                    for m in msgs.values_mut().filter(|m| m.at == Where::At(from)) {
                        m.at = Where::At(to);
                        arrive(m, to, t);
                    }
                }
            }

            // super mule meets collector: foreign batches in, off-island mail out
            let exchange = match (ra, rb) {
                (Role::SuperMule, Role::Collector) => Some((a, b)),
                (Role::Collector, Role::SuperMule) => Some((b, a)),
                _ => None,
            };
            if let Some((mule, coll)) = exchange {
                let isl = home[&coll];
                for m in msgs.values_mut() {
                    if let Where::Carried(on, origin) = m.at {
                        if on == mule && origin != isl {
                            if m.alive(t) {
                                m.at = Where::At(coll);
                                arrive(m, coll, t);
                            } else {
                                m.at = Where::Lost;
                            }
                        }
                    }
                }
                for m in msgs.values_mut() {
                    if m.at == Where::At(coll) && home.get(&m.dest) != Some(&isl) {
                        m.at = Where::Carried(mule, isl);
                    }
                }
            }

            // collectors hand over what is addressed to, and readable by, the peer
            for (c, peer) in [(a, b), (b, a)] {
                if role[&c] != Role::Collector || matches!(role[&peer], Role::SuperMule | Role::BackhaulServer) {
                    continue;
                }
                for m in msgs.values_mut() {
                    if m.at == Where::At(c) && m.dest == peer && m.alive(t) && m.readable(peer) {
                        m.at = Where::Delivered;
                    }
                }
            }
        }

        for m in msgs.values_mut() {
            if m.at != Where::Delivered && !m.alive(t) {
                m.at = Where::Lost;
            }
        }
    }

    Ok(msgs
        .into_iter()
        .filter(|(_, m)| m.at == Where::Delivered)
        .map(|(id, _)| id)
        .collect())
}

/// A message arriving at its own destination is consumed there if it may be
/// read; otherwise it stays put.
fn arrive(m: &mut Msg, node: HardwareId, t: SimTime) {
    if m.dest == node && m.alive(t) && m.readable(node) {
        m.at = Where::Delivered;
    }
}
