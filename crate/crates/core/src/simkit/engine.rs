//! The tick loop. One step at time `t` does, in order:
//!
//! 1. move every node
//! 2. work out who is online and who has backhaul; promote standby
//!    collectors where the collector is down
//! 3. generate scheduled traffic (skipped while the source is offline)
//! 4. expire stale messages on online nodes
//! 5. run every contact, in ascending `(a, b)` id order
//! 6. uplink collectors and generators that have backhaul, in id order
//! 7. push sensor packets through the stream manager, then evaluate
//!    triggers and rules; push alerts go to the backhaul server

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, RngCore};
use rand_chacha::ChaCha8Rng;

use super::geometry::{Bbox, Extent};
use super::metrics::{events_csv, metrics_json, nearest_rank, ratio, transfers_csv, Metrics};
use super::mobility::{contacts_at, Trajectory};
use super::scenario::{pos, Scenario};
use super::traffic::{expand_traffic, Generation};
use super::{step_at_or_after, step_times, stream, Concern, SimError};
use crate::dtnproto::{
    expire, on_contact, promote_auxiliary, server_flush, server_inject, submit, try_uplink, Action, Bundle, BundleId,
    Directory, Env, IslandId, Journal, NodeState, Registration, Registry, Role, TransferLog,
};
use crate::eventflow::{
    evaluate_triggers, AlertDesk, AlertSubscription, EventRecord, PortalEntry, ReadingStore, RuleEngine, SensorReading,
    TriggerState,
};
use crate::msgcore::{Address, HardwareId, MessageFactory, MessageId, Position, Priority, Sensitivity, SimTime};
use crate::secstream::prime::next_prime;
use crate::secstream::{protect, Dsm, Keychain, SharedSecret, Window, MIN_SEED_PRIME};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Check custody conservation and the node invariants after every step.
    pub audit: bool,
}

/// One contact as seen by an [`Observer`]: both nodes before and after,
/// and the log entries it produced.
pub struct ContactEvent<'a> {
    pub time: SimTime,
    pub before: [&'a NodeState; 2],
    pub after: [&'a NodeState; 2],
    pub log: &'a [TransferLog],
    pub directory: &'a Directory,
    pub positions: &'a BTreeMap<HardwareId, Position>,
}

pub trait Observer {
    fn contact(&mut self, event: &ContactEvent<'_>);
}

#[derive(Clone, Debug, PartialEq)]
pub struct MessageInfo {
    pub source: HardwareId,
    pub destination: Address,
    pub priority: Priority,
    pub sensitivity: Sensitivity,
    pub readers: BTreeSet<HardwareId>,
    pub created_at: SimTime,
    pub ttl: u64,
    /// Generated by the alert pipeline rather than scenario traffic.
    pub alert: bool,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub metrics: Metrics,
    pub log: Vec<TransferLog>,
    pub events: Vec<EventRecord>,
    pub portal: Vec<PortalEntry>,
    pub alerts: Vec<MessageId>,
    pub messages: BTreeMap<MessageId, MessageInfo>,
    /// First delivery of each delivered message.
    pub delivered: BTreeMap<MessageId, SimTime>,
    pub sealed: Vec<(BundleId, HardwareId, Vec<MessageId>)>,
    pub still_queued: u64,
    pub in_transit: u64,
    /// Scheduled messages not generated because their source was offline.
    pub skipped: u64,
    pub dsm_accepted: u64,
    pub dsm_dropped: u64,
    pub nodes: Vec<NodeState>,
}

impl RunOutput {
    pub fn metrics_json(&self) -> String {
        metrics_json(&self.metrics)
    }

    pub fn transfers_csv(&self) -> String {
        transfers_csv(&self.log)
    }

    pub fn events_csv(&self) -> String {
        events_csv(&self.events, &self.portal)
    }
}

pub fn run(scenario: &Scenario) -> Result<RunOutput, SimError> {
    run_with(scenario, RunOptions::default(), None)
}

pub fn run_with(
    scenario: &Scenario,
    options: RunOptions,
    mut observer: Option<&mut dyn Observer>,
) -> Result<RunOutput, SimError> {
    let diags = scenario.diagnostics();
    if !diags.is_empty() {
        return Err(SimError::Invalid(diags));
    }
    let mut world = World::new(scenario);
    for t in step_times(scenario) {
        world.step(t, observer.as_deref_mut());
        if options.audit {
            world.audit(t)?;
        }
    }
    world.finish(options.audit)
}

fn pair_mut<T>(v: &mut [T], i: usize, j: usize) -> (&mut T, &mut T) {
    assert_ne!(i, j);
    if i < j {
        let (l, r) = v.split_at_mut(j);
        (&mut l[i], &mut r[0])
    } else {
        let (l, r) = v.split_at_mut(i);
        (&mut r[0], &mut l[j])
    }
}

/// Corrupts a bundle in flight: one payload bit, or the tag when every
/// payload is empty.
fn tamper_bundle(b: &mut Bundle) {
    match b.messages.iter_mut().find(|m| !m.payload.is_empty()) {
        Some(m) => m.payload[0] ^= 0x01,
        None => b.integrity_tag[0] ^= 0x01,
    }
}

pub(crate) fn scenario_secret(s: &Scenario) -> SharedSecret {
    if let Some(secret) = &s.secret {
        return secret.clone();
    }
    let mut salt = [0u8; 16];
    stream(s.seed, Concern::Secret, 0).fill_bytes(&mut salt);
    let prime = next_prime(MIN_SEED_PRIME + (s.seed & 0x3fff_ffff));
    SharedSecret::new(prime, salt).expect("prime above the minimum")
}

pub(crate) fn world_bbox(extents: &BTreeMap<IslandId, Extent>, s: &Scenario) -> Bbox {
    let mut boxes = extents.values().map(Extent::bbox);
    let first = boxes.next().unwrap_or(Bbox {
        min: Position::default(),
        max: Position::default(),
    });
    let mut b = boxes.fold(first, Bbox::union);
    for n in &s.nodes {
        if let Some(p) = n.position {
            let p = pos(p);
            b = b.union(Bbox { min: p, max: p });
        }
    }
    b
}

/// Ids of the nodes that take part, first declaration of each id winning,
/// plus the number of rejected repeats.
pub(crate) fn registered(s: &Scenario) -> (Vec<usize>, u64) {
    let mut reg = Registry::default();
    let mut keep = Vec::new();
    for (i, n) in s.nodes.iter().enumerate() {
        if reg.register(n.id) == Registration::Accepted {
            keep.push(i);
        }
    }
    keep.sort_by_key(|&i| s.nodes[i].id);
    (keep, reg.sybil_rejections)
}

pub(crate) fn offline_by_schedule(s: &Scenario, id: HardwareId, t: SimTime) -> bool {
    s.failures
        .iter()
        .any(|f| f.node == id && f.offline_at <= t && f.online_at.is_none_or(|on| t < on))
}

/// Sensor readings in delivery order, each tagged with the step it arrives.
fn sensor_feed(s: &Scenario) -> Vec<(SimTime, SensorReading, Sensitivity)> {
    let mut out = Vec::new();
    for sensor in &s.sensors {
        let mut push = |time: SimTime, metric, value| {
            out.push((
                step_at_or_after(s, time),
                SensorReading {
                    sensor: sensor.id,
                    metric,
                    value,
                    time,
                    position: pos(sensor.position),
                },
                sensor.tier,
            ));
        };
        for r in &sensor.readings {
            push(r.time, r.metric, r.value);
        }
        for series in &sensor.series {
            let mut t = series.from;
            while t <= series.to && series.every > 0 {
                push(t, series.metric, series.value);
                t += series.every;
            }
        }
    }
    out.sort_by(|a, b| (a.0, a.1.time, a.1.sensor, a.1.metric).cmp(&(b.0, b.1.time, b.1.sensor, b.1.metric)));
    out
}

struct Pipeline {
    feed: Vec<(SimTime, SensorReading, Sensitivity)>,
    cursor: usize,
    store: ReadingStore,
    triggers: TriggerState,
    rules: RuleEngine,
    desk: AlertDesk,
    subs: Vec<AlertSubscription>,
    dsm: Dsm,
    rng: ChaCha8Rng,
    events: Vec<EventRecord>,
    portal: Vec<PortalEntry>,
    accepted: u64,
    dropped: u64,
}

struct World<'s> {
    s: &'s Scenario,
    nodes: Vec<NodeState>,
    index: BTreeMap<HardwareId, usize>,
    server: Option<usize>,
    paths: Vec<Trajectory>,
    directory: Directory,
    positions: BTreeMap<HardwareId, Position>,
    keys: Keychain,
    journal: Journal,
    factory: MessageFactory,
    generations: Vec<Generation>,
    next_generation: usize,
    scripted: Option<BTreeMap<SimTime, Vec<(HardwareId, HardwareId)>>>,
    previous_pairs: BTreeSet<(HardwareId, HardwareId)>,
    contacts: u64,
    tamper: ChaCha8Rng,
    pipeline: Pipeline,
    messages: BTreeMap<MessageId, MessageInfo>,
    alerts: Vec<MessageId>,
    skipped: u64,
    sybil_rejections: u64,
    online: BTreeSet<HardwareId>,
    audited: usize,
    terminal: BTreeMap<MessageId, u32>,
}

impl<'s> World<'s> {
    fn new(s: &'s Scenario) -> Self {
        let extents = s.extents();
        let world = world_bbox(&extents, s);
        let (keep, sybil_rejections) = registered(s);
        let mut nodes = Vec::new();
        let mut paths = Vec::new();
        let mut directory = Directory::default();
        for &i in &keep {
            let spec = &s.nodes[i];
            let mut n = NodeState::new(spec.id, spec.role, spec.island);
            n.buffer_capacity = spec.buffer;
            n.energy = spec.energy;
            nodes.push(n);
            paths.push(Trajectory::new(
                spec,
                &extents,
                world,
                stream(s.seed, Concern::Mobility, spec.id.0),
                s.duration,
            ));
            if let Some(isl) = spec.island {
                directory.home.insert(spec.id, isl);
            }
        }
        for c in &s.centres {
            let centre = crate::msgcore::ActivityCentre::new(c.id, pos(c.centre), c.radius).expect("validated radius");
            directory.centres.insert(c.id, centre);
            if let Some((isl, _)) = extents.iter().find(|(_, e)| e.contains(pos(c.centre))) {
                directory.centre_island.insert(c.id, *isl);
            }
        }
        let index: BTreeMap<HardwareId, usize> = nodes.iter().enumerate().map(|(i, n)| (n.id, i)).collect();
        let server = nodes.iter().position(|n| n.role == Role::BackhaulServer);
        let scripted = s.contacts.as_ref().map(|list| {
            let mut m: BTreeMap<SimTime, Vec<(HardwareId, HardwareId)>> = BTreeMap::new();
            for c in list {
                let pair = (c.a.min(c.b), c.a.max(c.b));
                m.entry(step_at_or_after(s, c.time)).or_default().push(pair);
            }
            for v in m.values_mut() {
                v.sort_unstable();
                v.dedup();
            }
            m
        });
        let keys = Keychain::new(scenario_secret(s)).expect("validated secret");
        let rules = s.parsed_rules().expect("validated rules");
        let subs = s.parsed_subscriptions().expect("validated subscriptions");
        let pipeline = Pipeline {
            feed: sensor_feed(s),
            cursor: 0,
            store: ReadingStore::new(),
            triggers: TriggerState::new(s.trigger_quiet_period),
            rules: RuleEngine::new(rules),
            desk: AlertDesk::new(),
            subs,
            dsm: Dsm::new(keys.clone(), Window::SKEW),
            rng: stream(s.seed, Concern::Tamper, 1),
            events: Vec::new(),
            portal: Vec::new(),
            accepted: 0,
            dropped: 0,
        };
        World {
            s,
            nodes,
            index,
            server,
            paths,
            directory,
            positions: BTreeMap::new(),
            keys,
            journal: Journal::new(),
            factory: MessageFactory::new(),
            generations: expand_traffic(s),
            next_generation: 0,
            scripted,
            previous_pairs: BTreeSet::new(),
            contacts: 0,
            tamper: stream(s.seed, Concern::Tamper, 0),
            pipeline,
            messages: BTreeMap::new(),
            alerts: Vec::new(),
            skipped: 0,
            sybil_rejections,
            online: BTreeSet::new(),
            audited: 0,
            terminal: BTreeMap::new(),
        }
    }

    fn step<'o>(&mut self, t: SimTime, mut observer: Option<&mut (dyn Observer + 'o)>) {
        let s = self.s;
        let interval = t / s.key_interval;
        let budget = s.budget();
        let costs = s.energy_costs;

        // 1. mobility
        for (n, path) in self.nodes.iter().zip(self.paths.iter_mut()) {
            if n.role != Role::BackhaulServer {
                self.positions.insert(n.id, path.at(t));
            }
        }

        // 2. node state and roles
        for n in &mut self.nodes {
            n.online = n.role == Role::BackhaulServer || (!offline_by_schedule(s, n.id, t) && n.has_energy());
            n.backhaul_available = s
                .nodes
                .iter()
                .find(|spec| spec.id == n.id)
                .is_some_and(|spec| spec.backhaul.iter().any(|w| w[0] <= t && t < w[1]));
        }
        let islands: BTreeSet<IslandId> = self.nodes.iter().filter_map(|n| n.island).collect();
        for isl in islands {
            let _ = promote_auxiliary(isl, &mut self.nodes);
        }
        self.online = self.nodes.iter().filter(|n| n.online).map(|n| n.id).collect();

        // 3. traffic
        while let Some(g) = self.generations.get(self.next_generation).copied() {
            if g.time > t {
                break;
            }
            self.next_generation += 1;
            let spec = &s.traffic[g.traffic];
            let Some(&i) = self.index.get(&spec.source) else {
                continue;
            };
            if !self.nodes[i].online {
                self.skipped += 1;
                continue;
            }
            let msg = self
                .factory
                .new_message(
                    spec.source,
                    spec.address(),
                    spec.priority,
                    spec.sensitivity,
                    spec.reader_set(),
                    spec.payload_for(g.k),
                    t,
                    spec.ttl,
                )
                .expect("validated traffic");
            self.messages.insert(msg.id, info(&msg, false));
            let env = Env {
                now: t,
                directory: &self.directory,
                positions: &self.positions,
                keys: &mut self.keys,
                interval,
                budget,
                costs,
            };
            submit(&mut self.nodes[i], msg, &env, &mut self.journal).expect("online generator");
        }

        // 4. expiry
        for n in self.nodes.iter_mut().filter(|n| n.online) {
            expire(n, t, &mut self.journal);
        }

        // 5. contacts
        let pairs: Vec<(HardwareId, HardwareId)> = match &self.scripted {
            Some(m) => m
                .get(&t)
                .into_iter()
                .flatten()
                .copied()
                .filter(|(a, b)| self.online.contains(a) && self.online.contains(b))
                .collect(),
            None => {
                let live: BTreeMap<HardwareId, Position> = self
                    .positions
                    .iter()
                    .filter(|(id, _)| self.online.contains(id))
                    .map(|(k, v)| (*k, *v))
                    .collect();
                contacts_at(&live, s.radio_range)
            }
        };
        let current: BTreeSet<(HardwareId, HardwareId)> = pairs.iter().copied().collect();
        self.contacts += current.difference(&self.previous_pairs).count() as u64;
        self.previous_pairs = current;
        for (a, b) in pairs {
            let (Some(&i), Some(&j)) = (self.index.get(&a), self.index.get(&b)) else {
                continue;
            };
            let before = observer
                .as_ref()
                .map(|_| (self.nodes[i].clone(), self.nodes[j].clone()));
            let log_start = self.journal.log.len();
            let held_before: [BTreeSet<BundleId>; 2] =
                [i, j].map(|k| self.nodes[k].bundles.iter().map(|b| b.bundle_id).collect());
            {
                let (na, nb) = pair_mut(&mut self.nodes, i, j);
                let mut env = Env {
                    now: t,
                    directory: &self.directory,
                    positions: &self.positions,
                    keys: &mut self.keys,
                    interval,
                    budget,
                    costs,
                };
                on_contact(na, nb, &mut env, &mut self.journal);
            }
            if s.tamper_rate > 0.0 {
                for (k, held) in [i, j].into_iter().zip(held_before.iter()) {
                    if self.nodes[k].role != Role::SuperMule {
                        continue;
                    }
                    for bundle in self.nodes[k]
                        .bundles
                        .iter_mut()
                        .filter(|b| !held.contains(&b.bundle_id))
                    {
                        if self.tamper.gen_bool(s.tamper_rate) {
                            tamper_bundle(bundle);
                        }
                    }
                }
            }
            if let (Some(obs), Some((ba, bb))) = (observer.as_deref_mut(), before.as_ref()) {
                obs.contact(&ContactEvent {
                    time: t,
                    before: [ba, bb],
                    after: [&self.nodes[i], &self.nodes[j]],
                    log: &self.journal.log[log_start..],
                    directory: &self.directory,
                    positions: &self.positions,
                });
            }
        }

        // 6. uplinks
        if let Some(si) = self.server {
            for i in 0..self.nodes.len() {
                let n = &self.nodes[i];
                if i == si || !n.online || !n.backhaul_available || !matches!(n.role, Role::Collector | Role::Generator)
                {
                    continue;
                }
                let (node, server) = pair_mut(&mut self.nodes, i, si);
                let mut env = Env {
                    now: t,
                    directory: &self.directory,
                    positions: &self.positions,
                    keys: &mut self.keys,
                    interval,
                    budget,
                    costs,
                };
                let _ = try_uplink(node, server, &mut env, &mut self.journal);
            }
        }

        // 7. sensing and alerts
        let p = &mut self.pipeline;
        p.dsm.set_interval(interval);
        while let Some((at, reading, tier)) = p.feed.get(p.cursor).cloned() {
            if at > t {
                break;
            }
            p.cursor += 1;
            let mut wire = protect(&reading.encode(), tier, self.keys.key(interval)).encode();
            if s.tamper_rate > 0.0 && p.rng.gen_bool(s.tamper_rate) {
                let bit = p.rng.gen_range(0..wire.len() * 8);
                wire[bit / 8] ^= 1 << (bit % 8);
            }
            match p.dsm.open_wire(&wire).and_then(|plain| SensorReading::decode(&plain)) {
                Some(r) => {
                    p.accepted += 1;
                    p.store.push(r);
                }
                None => p.dropped += 1,
            }
        }
        let fired = evaluate_triggers(&s.triggers, &p.store, &s.forecasts, &s.mentions, t);
        p.triggers.record(&fired, t);
        let collecting = p.triggers.collecting(t);
        let events = p.rules.match_rules(&p.store, t, collecting);
        for event in events {
            if let Some(si) = self.server {
                let server_id = self.nodes[si].id;
                let d = p
                    .desk
                    .dispatch(&event, &p.subs, &mut self.factory, server_id, t, s.alert_ttl);
                p.portal.extend(d.portal);
                for msg in d.push {
                    self.messages.insert(msg.id, info(&msg, true));
                    self.alerts.push(msg.id);
                    let env = Env {
                        now: t,
                        directory: &self.directory,
                        positions: &self.positions,
                        keys: &mut self.keys,
                        interval,
                        budget,
                        costs,
                    };
                    server_inject(&mut self.nodes[si], msg, &env, &mut self.journal).expect("server role");
                }
            } else {
                let d = p.desk.dispatch(
                    &event,
                    &p.subs,
                    &mut MessageFactory::new(),
                    HardwareId(u64::MAX),
                    t,
                    s.alert_ttl,
                );
                p.portal.extend(d.portal);
            }
            p.events.push(event);
        }
        if let Some(si) = self.server {
            let mut env = Env {
                now: t,
                directory: &self.directory,
                positions: &self.positions,
                keys: &mut self.keys,
                interval,
                budget,
                costs,
            };
            server_flush(&mut self.nodes[si], &mut env, &mut self.journal);
        }
    }

    /// Ends custody for good: delivery of a unicast message, or a drop.
    fn is_terminal(&self, l: &TransferLog) -> Option<MessageId> {
        let id = l.message()?;
        match l.action {
            Action::DropTtl | Action::DropOverflow => Some(id),
            Action::Deliver => match self.messages.get(&id)?.destination {
                Address::Unicast(d) if d == l.to => Some(id),
                _ => None,
            },
            _ => None,
        }
    }

    fn audit(&mut self, t: SimTime) -> Result<(), SimError> {
        let fail = |detail: String| Err(SimError::Audit { time: t, detail });
        for l in &self.journal.log[self.audited..] {
            for end in [l.from, l.to] {
                if !self.online.contains(&end) {
                    return fail(format!("{} logged {} with offline endpoint {end}", l.item, l.action));
                }
            }
            if let Some(id) = self.is_terminal(l) {
                *self.terminal.entry(id).or_default() += 1;
            }
        }
        self.audited = self.journal.log.len();

        let mut held: BTreeMap<MessageId, u32> = BTreeMap::new();
        let mut collectors: BTreeMap<IslandId, u32> = BTreeMap::new();
        for n in &self.nodes {
            for id in n.custody_ids() {
                *held.entry(id).or_default() += 1;
            }
            if let (Some(cap), load) = (n.buffer_capacity, n.load()) {
                if load > cap {
                    return fail(format!("node {} holds {load} messages, capacity {cap}", n.id));
                }
            }
            if let Some(q) = n.queue.iter().find(|q| !n.seen.contains(&q.msg.id)) {
                return fail(format!("node {} queues {} without having seen it", n.id, q.msg.id));
            }
            if let (Role::Collector, Some(isl)) = (n.role, n.island) {
                *collectors.entry(isl).or_default() += 1;
            }
        }
        if let Some((isl, k)) = collectors.iter().find(|(_, k)| **k > 1) {
            return fail(format!("island {isl} has {k} collectors"));
        }
        let tampered: BTreeMap<MessageId, u32> = self.journal.tampered.iter().fold(BTreeMap::new(), |mut m, id| {
            *m.entry(*id).or_default() += 1;
            m
        });
        for id in self.messages.keys() {
            let h = held.get(id).copied().unwrap_or(0);
            let term = self.terminal.get(id).copied().unwrap_or(0) + tampered.get(id).copied().unwrap_or(0);
            if h + term != 1 {
                return fail(format!("message {id} is held {h} times with {term} terminal events"));
            }
        }
        if let Some(id) = held.keys().find(|id| !self.messages.contains_key(id)) {
            return fail(format!("message {id} is held but was never generated"));
        }
        Ok(())
    }

    fn finish(self, audit: bool) -> Result<RunOutput, SimError> {
        let mut delivered: BTreeMap<MessageId, SimTime> = BTreeMap::new();
        let mut expired = BTreeSet::new();
        let mut overflow = BTreeSet::new();
        for l in &self.journal.log {
            let Some(id) = l.message() else { continue };
            match l.action {
                Action::Deliver => {
                    let info = &self.messages[&id];
                    let reached = match info.destination {
                        Address::Unicast(d) => d == l.to,
                        Address::Centre(_) => true,
                    };
                    if reached {
                        delivered.entry(id).or_insert(l.time);
                    }
                }
                Action::DropTtl => {
                    expired.insert(id);
                }
                Action::DropOverflow => {
                    overflow.insert(id);
                }
                _ => {}
            }
        }
        let tampered: BTreeSet<MessageId> = self.journal.tampered.iter().copied().collect();
        let mut queued = BTreeSet::new();
        let mut transit = BTreeSet::new();
        for n in &self.nodes {
            queued.extend(n.queue.ids());
            for b in n.bundles.iter().chain(n.stored.values().flatten()) {
                transit.extend(b.ids());
            }
        }

        let mut m = Metrics {
            generated: self.messages.len() as u64,
            duplicates_suppressed: self.journal.duplicates as u64,
            sybil_rejections: self.sybil_rejections,
            contacts: self.contacts,
            transfers: self.journal.transfers,
            energy_spent: self.journal.energy_spent,
            ..Metrics::default()
        };
        let (mut still_queued, mut in_transit, mut unaccounted) = (0u64, 0u64, Vec::new());
        let mut latencies = Vec::new();
        for (id, info) in &self.messages {
            if let Some(at) = delivered.get(id) {
                m.delivered += 1;
                latencies.push(at - info.created_at);
                match info.priority {
                    Priority::Emergency => m.delivered_emergency += 1,
                    Priority::High => m.delivered_high += 1,
                    Priority::Normal => m.delivered_normal += 1,
                    Priority::Low => m.delivered_low += 1,
                }
            } else if tampered.contains(id) {
                m.dropped_tampered += 1;
            } else if expired.contains(id) {
                m.expired += 1;
            } else if overflow.contains(id) {
                m.dropped_overflow += 1;
            } else if queued.contains(id) {
                still_queued += 1;
            } else if transit.contains(id) {
                in_transit += 1;
            } else {
                unaccounted.push(*id);
            }
        }
        if audit {
            if let Some(id) = unaccounted.first() {
                return Err(SimError::Audit {
                    time: self.s.duration,
                    detail: format!("message {id} vanished"),
                });
            }
        }
        latencies.sort_unstable();
        m.delivery_ratio = ratio(m.delivered, m.generated);
        m.latency_p50 = nearest_rank(&latencies, 50);
        m.latency_p95 = nearest_rank(&latencies, 95);
        m.latency_mean = if latencies.is_empty() {
            0.0
        } else {
            latencies.iter().sum::<u64>() as f64 / latencies.len() as f64
        };
        m.queue_delay_mean = if self.journal.queue_departures == 0 {
            0.0
        } else {
            self.journal.queue_wait_total as f64 / self.journal.queue_departures as f64
        };

        Ok(RunOutput {
            metrics: m,
            log: self.journal.log,
            events: self.pipeline.events,
            portal: self.pipeline.portal,
            alerts: self.alerts,
            messages: self.messages,
            delivered,
            sealed: self.journal.sealed,
            still_queued,
            in_transit,
            skipped: self.skipped,
            dsm_accepted: self.pipeline.accepted,
            dsm_dropped: self.pipeline.dropped,
            nodes: self.nodes,
        })
    }
}

fn info(m: &crate::msgcore::Message, alert: bool) -> MessageInfo {
    MessageInfo {
        source: m.source,
        destination: m.destination,
        priority: m.priority,
        sensitivity: m.sensitivity,
        readers: m.label.readers.clone(),
        created_at: m.created_at,
        ttl: m.ttl,
        alert,
    }
}
