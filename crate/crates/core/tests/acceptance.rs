//! Acceptance suite. Every criterion prints one line; a single FAIL fails
//! the target.

use std::collections::{BTreeMap, BTreeSet};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use mulenet::dtnproto::{Action, Item, NodeState, Role, TransferLog};
use mulenet::eventflow::{Metric, SensorReading};
use mulenet::msgcore::{can_read, FlowLabel, HardwareId, MessageId, Position, Priority, Sensitivity};
use mulenet::secstream::prime::next_prime;
use mulenet::secstream::{
    advance_key, init_key_state, protect, Dsm, Keychain, SharedSecret, Window, KEY_LENGTHS, MIN_SEED_PRIME,
};
use mulenet::simkit::synth::{busy, small};
use mulenet::simkit::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SMALL_RUNS: u64 = 200;
const BUSY_RUNS: u64 = 100;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn within(limit: Duration, took: Duration) -> bool {
    took < limit
}

fn load(name: &str) -> Scenario {
    Scenario::load(format!("../../scenarios/{name}")).expect("canonical scenario loads")
}

fn delivered(out: &RunOutput) -> BTreeSet<MessageId> {
    out.delivered.keys().copied().collect()
}

fn oracle_equivalence() -> Verdict {
    let start = Instant::now();
    let mut bad = Vec::new();
    let mut deliveries = 0;
    for seed in 0..SMALL_RUNS {
        let s = small(seed);
        let got = delivered(&run(&s).expect("small scenarios validate"));
        match oracle_deliverable(&s) {
            Ok(want) if want == got => deliveries += got.len(),
            Ok(_) => bad.push(seed),
            Err(e) => return verdict(false, format!("seed {seed}: oracle refused: {e}")),
        }
    }
    let took = start.elapsed();
    let pass = bad.is_empty() && within(Duration::from_secs(10), took);
    verdict(
        pass,
        format!("{SMALL_RUNS} scenarios, {deliveries} deliveries, mismatched seeds {bad:?}, {took:.2?}"),
    )
}

fn two_island_relay() -> Verdict {
    let s = load("relay.json");
    let start = Instant::now();
    let out = run(&s).expect("relay runs");
    let took = start.elapsed();
    let deliveries: Vec<MessageId> = out
        .log
        .iter()
        .filter(|l| l.action == Action::Deliver)
        .filter_map(TransferLog::message)
        .collect();
    let unique: BTreeSet<MessageId> = deliveries.iter().copied().collect();
    let dupes = deliveries.len() - unique.len();
    let m = &out.metrics;
    let pass = m.generated == 100 && m.delivery_ratio == 1.0 && dupes == 0 && within(Duration::from_secs(1), took);
    verdict(
        pass,
        format!(
            "generated {}, delivery_ratio {}, duplicate deliveries {dupes}, {took:.2?}",
            m.generated, m.delivery_ratio
        ),
    )
}

/// Watches every contact for transfers that overtook a more urgent message
/// the same sender could have sent to the same peer.
#[derive(Default)]
struct PriorityWatch {
    checked: u64,
    violations: Vec<String>,
}

fn upward(from: Role, to: Role) -> bool {
    matches!(
        (from, to),
        (Role::Generator, Role::LocalMule | Role::Collector) | (Role::LocalMule, Role::Collector)
    )
}

fn priority_of(n: &NodeState, id: MessageId) -> Option<Priority> {
    n.queue.iter().find(|q| q.msg.id == id).map(|q| q.msg.priority)
}

impl PriorityWatch {
    fn flag(&mut self, e: &ContactEvent<'_>, what: String) {
        self.violations.push(format!("t={} {what}", e.time));
    }
}

impl Observer for PriorityWatch {
    fn contact(&mut self, e: &ContactEvent<'_>) {
        let side = |id: HardwareId| usize::from(e.before[0].id != id);
        for l in e.log {
            if l.from == l.to {
                continue;
            }
            let (x, y) = (side(l.from), side(l.to));
            let (sx, sy) = (e.before[x], e.before[y]);
            let (ax, ay) = (e.after[x], e.after[y]);
            match (l.item, l.action) {
                (Item::Message(id), Action::MuleDump | Action::Deliver) if upward(sx.role, sy.role) => {
                    self.checked += 1;
                    let p = priority_of(sx, id).expect("dumped from the sender's queue");
                    for q in ax.queue.iter() {
                        if q.msg.priority.outranks(p) && !sy.seen.contains(&q.msg.id) {
                            self.flag(e, format!("{} dumped {id} ({p:?}) ahead of {}", l.from, q.msg.id));
                        }
                    }
                }
                (Item::Message(id), Action::Deliver) if sx.role == Role::Collector => {
                    self.checked += 1;
                    let p = priority_of(sx, id)
                        .or_else(|| priority_of(ax, id))
                        .or_else(|| e.before.iter().find_map(|n| priority_of(n, id)))
                        .expect("delivered message was queued on one side");
                    for q in ax.queue.iter() {
                        let eligible = !q.served.contains(&l.to)
                            && !q.msg.is_expired(e.time)
                            && e.directory.resolves_to(&q.msg.destination, l.to, e.positions)
                            && can_read(&q.msg.label, q.msg.sensitivity, l.to);
                        if eligible && q.msg.priority.outranks(p) {
                            self.flag(e, format!("{} delivered {id} ({p:?}) ahead of {}", l.from, q.msg.id));
                        }
                    }
                }
                (Item::Bundle(bid), Action::BundleHandoff) if sx.role == Role::SuperMule => {
                    self.checked += 1;
                    let Some(b) = sx.bundles.iter().find(|b| b.bundle_id == bid) else {
                        self.flag(e, format!("handed unknown bundle {bid}"));
                        continue;
                    };
                    for left in &ax.bundles {
                        if Some(left.origin_island) != sy.island && left.priority().outranks(b.priority()) {
                            self.flag(e, format!("mule handed {bid} ahead of {}", left.bundle_id));
                        }
                    }
                }
                (Item::Bundle(bid), Action::BundleHandoff) if sx.role == Role::Collector => {
                    self.checked += 1;
                    let Some(b) = ay.bundles.iter().find(|b| b.bundle_id == bid) else {
                        self.flag(e, format!("sealed bundle {bid} missing on the mule"));
                        continue;
                    };
                    let least = b
                        .messages
                        .iter()
                        .map(|m| m.priority)
                        .max()
                        .unwrap_or(Priority::Emergency);
                    for q in ax.queue.iter() {
                        let outbound = e.directory.destination_island(&q.msg.destination) != sx.island;
                        if outbound && q.msg.priority.outranks(least) {
                            self.flag(e, format!("sealed {bid} without {}", q.msg.id));
                        }
                    }
                }
                _ => {}
            }
        }
    }
}

/// Every Deliver entry goes to a principal allowed to read the message.
fn unreadable_deliveries(out: &RunOutput) -> Vec<TransferLog> {
    out.log
        .iter()
        .filter(|l| l.action == Action::Deliver)
        .filter(|l| {
            let info = &out.messages[&l.message().expect("deliveries are messages")];
            let label = FlowLabel::new(info.source, info.readers.clone());
            !can_read(&label, info.sensitivity, l.to)
        })
        .copied()
        .collect()
}

struct BusyResults {
    priority: Verdict,
    conservation: Verdict,
    unreadable: usize,
    deliveries: usize,
}

fn busy_sweep() -> BusyResults {
    let mut watch = PriorityWatch::default();
    let mut audit_failures = Vec::new();
    let mut unreadable = 0;
    let mut deliveries = 0;
    let mut generated = 0;
    for seed in 0..BUSY_RUNS {
        let s = busy(seed);
        match run_with(&s, RunOptions { audit: true }, Some(&mut watch)) {
            Ok(out) => {
                unreadable += unreadable_deliveries(&out).len();
                deliveries += out.log.iter().filter(|l| l.action == Action::Deliver).count();
                generated += out.metrics.generated;
            }
            Err(e) => audit_failures.push(format!("seed {seed}: {e}")),
        }
    }
    let first = watch.violations.first().cloned().unwrap_or_default();
    BusyResults {
        priority: verdict(
            watch.violations.is_empty() && audit_failures.is_empty(),
            format!(
                "{BUSY_RUNS} scenarios, {} transfers checked, {} violations {first}",
                watch.checked,
                watch.violations.len()
            ),
        ),
        conservation: verdict(
            audit_failures.is_empty(),
            format!(
                "{BUSY_RUNS} audited scenarios, {generated} messages, failures {}",
                audit_failures.first().map_or("none", String::as_str)
            ),
        ),
        unreadable,
        deliveries,
    }
}

fn key_synchronization() -> Verdict {
    let start = Instant::now();
    let secret = SharedSecret::new(next_prime(MIN_SEED_PRIME + 12_345), [0x5a; 16]).expect("prime above the minimum");
    let twin = SharedSecret::new(secret.seed_prime, secret.session_salt).expect("same secret");
    let mut a = init_key_state(&secret).expect("valid");
    let mut b = init_key_state(&twin).expect("valid");
    let mut mismatches = 0;
    let mut seen: BTreeMap<u16, u64> = BTreeMap::new();
    for _ in 0..10_000 {
        a = advance_key(&a, &secret);
        b = advance_key(&b, &twin);
        if a != b {
            mismatches += 1;
        }
        if a.key.len() * 8 != a.key_length as usize {
            mismatches += 1;
        }
        *seen.entry(a.key_length).or_default() += 1;
    }
    let took = start.elapsed();
    let lengths_ok = seen.keys().all(|l| KEY_LENGTHS.contains(l)) && KEY_LENGTHS.iter().all(|l| seen.contains_key(l));
    verdict(
        mismatches == 0 && lengths_ok && within(Duration::from_secs(5), took),
        format!("10000 steps, {mismatches} mismatches, lengths {seen:?}, {took:.2?}"),
    )
}

fn tamper_filtering() -> Verdict {
    let start = Instant::now();
    let secret = SharedSecret::new(2_147_483_659, [0x11; 16]).expect("prime");
    let mut sender = Keychain::new(secret.clone()).expect("valid");
    let mut dsm = Dsm::new(Keychain::new(secret).expect("valid"), Window::SKEW);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut clean_ok, mut variants, mut false_accepts) = (0, 0u64, 0u64);
    for i in 0..100u64 {
        let tier = if i % 2 == 0 {
            Sensitivity::HighSensitive
        } else {
            Sensitivity::LowSensitive
        };
        let interval = i % 7;
        dsm.set_interval(interval);
        let reading = SensorReading {
            sensor: HardwareId(i),
            metric: Metric::ALL[(i % 5) as usize],
            value: rng.gen_range(-50.0..50.0),
            time: i * 10,
            position: Position {
                x: rng.gen_range(0.0..1000.0),
                y: rng.gen_range(0.0..1000.0),
            },
        };
        let plain = reading.encode();
        let wire = protect(&plain, tier, sender.key(interval)).encode();
        if dsm.open_wire(&wire).as_deref() == Some(&plain[..]) {
            clean_ok += 1;
        }
        for pos in 0..wire.len() {
            for mask in 1..=255u8 {
                let mut bad = wire.clone();
                bad[pos] ^= mask;
                variants += 1;
                if dsm.open_wire(&bad).is_some() {
                    false_accepts += 1;
                }
            }
        }
    }
    let took = start.elapsed();
    verdict(
        clean_ok == 100 && false_accepts == 0 && within(Duration::from_secs(10), took),
        format!("clean {clean_ok}/100 accepted, {variants} corrupted frames, {false_accepts} accepted, {took:.2?}"),
    )
}

fn failover() -> Verdict {
    let s = load("failover.json");
    let fail_at = s.failures[0].offline_at;
    let out = run_with(&s, RunOptions { audit: true }, None).expect("failover runs");
    let want = match oracle_deliverable(&s) {
        Ok(w) => w,
        Err(e) => return verdict(false, format!("oracle refused: {e}")),
    };
    // every message is generated after the failure, so any path it has
    // runs over post-failover contacts
    let post: BTreeSet<MessageId> = want
        .iter()
        .copied()
        .filter(|id| out.messages[id].created_at > fail_at)
        .collect();
    let got = delivered(&out);
    let hit = post.intersection(&got).count();
    let ratio = if post.is_empty() {
        0.0
    } else {
        hit as f64 / post.len() as f64
    };
    let aux_served = out
        .log
        .iter()
        .any(|l| l.from == HardwareId(5) && l.action == Action::BundleHandoff);
    verdict(
        !post.is_empty() && ratio == 1.0 && aux_served,
        format!(
            "{} post-failover deliverable, ratio {ratio}, standby carried traffic {aux_served}",
            post.len()
        ),
    )
}

const NON_READER: &str = r#"{
    "schema": 1, "duration": 30, "radio_range": 50,
    "islands": [{"id": 1, "disc": {"centre": [0, 0], "radius": 100}}],
    "nodes": [
        {"id": 1, "role": "generator", "island": 1, "position": [10, 0]},
        {"id": 2, "role": "collector", "island": 1, "position": [0, 0]},
        {"id": 4, "role": "generator", "island": 1, "position": [-10, 0]}
    ],
    "traffic": [{"source": 1, "destination": {"node": 4}, "sensitivity": "high_sensitive",
                 "readers": [1], "ttl": 100, "times": [0, 5, 10]}]
}"#;

fn flow_control(busy_unreadable: usize, busy_deliveries: usize) -> Verdict {
    let mut unreadable = busy_unreadable;
    let mut deliveries = busy_deliveries;
    let mut scenarios: Vec<Scenario> = (0..SMALL_RUNS).map(small).collect();
    for f in ["relay.json", "failover.json", "alerts.json"] {
        scenarios.push(load(f));
    }
    for s in &scenarios {
        let out = run(s).expect("validates");
        unreadable += unreadable_deliveries(&out).len();
        deliveries += out.log.iter().filter(|l| l.action == Action::Deliver).count();
    }
    let out = run(&Scenario::from_json(NON_READER).expect("parses")).expect("runs");
    let to_four = |a: Action| {
        out.log
            .iter()
            .filter(|l| l.to == HardwareId(4) && l.action == a)
            .count()
    };
    let (rejected, given) = (to_four(Action::RejectUnreadable), to_four(Action::Deliver));
    verdict(
        unreadable == 0 && rejected > 0 && given == 0,
        format!(
            "{deliveries} deliveries checked, {unreadable} unreadable; non-reader: {rejected} rejections, {given} deliveries"
        ),
    )
}

fn alert_pipeline() -> Verdict {
    let s = load("alerts.json");
    let out = run_with(&s, RunOptions { audit: true }, None).expect("alerts runs");
    let subs = s.parsed_subscriptions().expect("subscriptions parse");
    let mut problems = Vec::new();
    if out.events.len() != 1 {
        problems.push(format!("{} events", out.events.len()));
    }
    let Some(event) = out.events.first() else {
        return verdict(false, "no event detected");
    };
    let matching = |mode| {
        subs.iter()
            .filter(|x| {
                x.mode == mode
                    && x.event_types.contains(&event.event_type)
                    && x.area.disc().intersects(&event.area.disc())
            })
            .map(|x| x.subscriber)
            .collect::<BTreeSet<_>>()
    };
    let active = matching(mulenet::eventflow::Mode::Active);
    let passive = matching(mulenet::eventflow::Mode::Passive);

    let mut pushed: BTreeMap<HardwareId, Vec<MessageId>> = BTreeMap::new();
    for id in &out.alerts {
        let info = &out.messages[id];
        let mulenet::msgcore::Address::Unicast(to) = info.destination else {
            problems.push(format!("{id} not unicast"));
            continue;
        };
        pushed.entry(to).or_default().push(*id);
        if info.priority != Priority::Emergency {
            problems.push(format!("{id} is {:?}", info.priority));
        }
        let over_dtn = out
            .log
            .iter()
            .any(|l| l.message() == Some(*id) && l.action == Action::Deliver && l.to == to && l.from != to);
        if !over_dtn || !out.delivered.contains_key(id) {
            problems.push(format!("{id} not delivered over a contact"));
        }
    }
    if pushed.keys().copied().collect::<BTreeSet<_>>() != active || pushed.values().any(|v| v.len() != 1) {
        problems.push(format!("push targets {pushed:?}, expected {active:?}"));
    }
    let portal: Vec<HardwareId> = out.portal.iter().map(|p| p.subscriber).collect();
    if portal.iter().copied().collect::<BTreeSet<_>>() != passive || portal.len() != passive.len() {
        problems.push(format!("portal {portal:?}, expected {passive:?}"));
    }
    verdict(
        problems.is_empty() && !active.is_empty() && !passive.is_empty(),
        format!(
            "event {} at t={}, {} push alert(s), {} portal entr(ies), problems {problems:?}",
            event.event_type,
            event.detected_at,
            out.alerts.len(),
            out.portal.len()
        ),
    )
}

fn determinism() -> Verdict {
    let mut scenarios: Vec<Scenario> = vec![load("relay.json"), load("failover.json"), load("alerts.json")];
    scenarios.extend((0..10).map(busy));
    let mut differing = 0;
    for s in &scenarios {
        let a = run(s).expect("runs");
        let b = run(s).expect("runs");
        if a.metrics_json() != b.metrics_json() || a.transfers_csv() != b.transfers_csv() {
            differing += 1;
        }
    }
    verdict(
        differing == 0,
        format!("{} scenarios run twice, {differing} differing", scenarios.len()),
    )
}

fn main() -> ExitCode {
    let busy = busy_sweep();
    let (unreadable, deliveries) = (busy.unreadable, busy.deliveries);
    let results: Vec<(&str, Verdict)> = vec![
        ("oracle equivalence", oracle_equivalence()),
        ("two-island relay", two_island_relay()),
        ("priority dispatch", busy.priority),
        ("conservation", busy.conservation),
        ("key synchronization", key_synchronization()),
        ("tamper filtering", tamper_filtering()),
        ("failover", failover()),
        ("flow control", flow_control(unreadable, deliveries)),
        ("alert pipeline", alert_pipeline()),
        ("determinism", determinism()),
    ];
    let mut failed = 0;
    for (i, (name, v)) in results.iter().enumerate() {
        let mark = if v.pass { "PASS" } else { "FAIL" };
        println!("acceptance {:>2} {mark} {name}: {}", i + 1, v.detail);
        failed += usize::from(!v.pass);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    }
}
