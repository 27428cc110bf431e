//! Seeded random scenarios for property tests and benchmarks.
//!
//! [`small`] stays inside what the oracle models. [`busy`] switches on
//! every mechanism the engine has.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::scenario::*;
use crate::dtnproto::{EnergyCosts, IslandId, Role};
use crate::eventflow::{Comparator, Metric, Trigger, TriggerSpec};
use crate::msgcore::{CentreId, HardwareId, Priority, Sensitivity};

fn rng_for(seed: u64, salt: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(0x5157_0000 | salt);
    r
}

fn base(seed: u64, duration: u64, radio_range: f64) -> Scenario {
    Scenario::from_json(&format!(
        r#"{{"schema":1,"seed":{seed},"duration":{duration},"radio_range":{radio_range},"islands":[],"nodes":[]}}"#
    ))
    .expect("static skeleton parses")
}

fn disc(id: u64, x: f64, y: f64, r: f64) -> IslandSpec {
    IslandSpec {
        id: IslandId(id),
        disc: Some(DiscSpec {
            centre: [x, y],
            radius: r,
        }),
        polygon: None,
        anchor: None,
    }
}

fn node(id: u64, role: Role, island: Option<u64>, at: Point) -> NodeSpec {
    NodeSpec {
        id: HardwareId(id),
        role,
        island: island.map(IslandId),
        position: Some(at),
        buffer: None,
        energy: None,
        mobility: MobilitySpec::Static,
        backhaul: Vec::new(),
    }
}

fn traffic(source: HardwareId, destination: Destination, ttl: u64) -> TrafficSpec {
    TrafficSpec {
        source,
        destination,
        priority: Priority::Normal,
        sensitivity: Sensitivity::LowSensitive,
        readers: None,
        ttl,
        payload: None,
        times: Vec::new(),
        every: None,
        rate: None,
        start: None,
        end: None,
        count: None,
    }
}

fn pick<T: Copy>(rng: &mut ChaCha8Rng, xs: &[T]) -> T {
    *xs.choose(rng).expect("non-empty")
}

/// At most five nodes on two distant islands, at most twenty scripted
/// contacts, unlimited resources.
pub fn small(seed: u64) -> Scenario {
    let mut rng = rng_for(seed, 1);
    let mut s = base(seed, 60, 50.0);
    s.contact_budget = Budget::Unlimited;
    s.islands = vec![disc(1, 0.0, 0.0, 100.0), disc(2, 10_000.0, 0.0, 100.0)];
    let n = rng.gen_range(2..=5u64);
    let mut has_collector = [false, false];
    s.nodes.push(node(1, Role::Generator, Some(1), [0.0, 0.0]));
    for id in 2..=n {
        let role = pick(
            &mut rng,
            &[
                Role::Generator,
                Role::Collector,
                Role::Collector,
                Role::AuxCollector,
                Role::LocalMule,
                Role::SuperMule,
            ],
        );
        if role == Role::SuperMule {
            s.nodes.push(node(id, role, None, [5_000.0, 0.0]));
            continue;
        }
        let isl = rng.gen_range(1..=2u64);
        let role = if role == Role::Collector && has_collector[isl as usize - 1] {
            Role::AuxCollector
        } else {
            role
        };
        if role == Role::Collector {
            has_collector[isl as usize - 1] = true;
        }
        let x = (isl - 1) as f64 * 10_000.0 + rng.gen_range(-50.0..50.0);
        s.nodes.push(node(id, role, Some(isl), [x, 0.0]));
    }
    if rng.gen_bool(0.1) {
        // a forged copy of an existing id
        let mut dup = s.nodes[rng.gen_range(0..s.nodes.len())].clone();
        dup.role = Role::LocalMule;
        dup.island = Some(IslandId(1));
        dup.position = Some([1.0, 1.0]);
        s.nodes.push(dup);
    }
    let ids: Vec<HardwareId> = (1..=n).map(HardwareId).collect();
    let receivers: Vec<HardwareId> = s.nodes[..n as usize]
        .iter()
        .filter(|x| x.role.has_island())
        .map(|x| x.id)
        .collect();
    let generators: Vec<HardwareId> = s.nodes[..n as usize]
        .iter()
        .filter(|x| x.role == Role::Generator)
        .map(|x| x.id)
        .collect();

    let k = rng.gen_range(0..=20);
    let contacts = (0..k)
        .filter_map(|_| {
            let a = pick(&mut rng, &ids);
            let b = pick(&mut rng, &ids);
            (a != b).then(|| ScriptedContact {
                time: rng.gen_range(0..=s.duration),
                a,
                b,
            })
        })
        .collect();
    s.contacts = Some(contacts);

    for _ in 0..rng.gen_range(1..=3) {
        let dest = pick(&mut rng, &receivers);
        let mut t = traffic(
            pick(&mut rng, &generators),
            Destination::Node(dest),
            rng.gen_range(5..=80),
        );
        t.priority = pick(&mut rng, &Priority::ALL);
        t.sensitivity = pick(&mut rng, &Sensitivity::ALL);
        if rng.gen_bool(0.3) {
            let mut readers: Vec<HardwareId> = ids.iter().copied().filter(|_| rng.gen_bool(0.5)).collect();
            if readers.is_empty() {
                readers.push(pick(&mut rng, &ids));
            }
            t.readers = Some(readers);
        }
        let m = rng.gen_range(1..=3);
        t.times = (0..m).map(|_| rng.gen_range(0..=s.duration)).collect();
        s.traffic.push(t);
    }
    if rng.gen_bool(0.4) {
        let at = rng.gen_range(0..s.duration);
        s.failures.push(FailureSpec {
            node: pick(&mut rng, &ids),
            offline_at: at,
            online_at: rng.gen_bool(0.5).then(|| at + rng.gen_range(1..=30)),
        });
    }
    s
}

/// Three islands, every mechanism switched on. Validates by construction.
pub fn busy(seed: u64) -> Scenario {
    let mut rng = rng_for(seed, 2);
    let mut s = base(seed, 400, 60.0);
    s.contact_budget = Budget::Limited(rng.gen_range(2..=6));
    s.tamper_rate = 0.1;
    s.energy_costs = EnergyCosts {
        per_send: 1.0,
        per_receive: 0.5,
    };
    let centres = [(0.0, 0.0), (3_000.0, 0.0), (1_500.0, 2_500.0)];
    s.islands = centres
        .iter()
        .enumerate()
        .map(|(i, &(x, y))| disc(i as u64 + 1, x, y, 150.0))
        .collect();
    s.centres.push(CentreSpec {
        id: CentreId(1),
        centre: [3_000.0, 0.0],
        radius: 60.0,
    });

    let mut sv = node(100, Role::BackhaulServer, None, [0.0, 0.0]);
    sv.position = None;
    s.nodes.push(sv);

    let mut next = 1u64;
    let mut by_island: Vec<Vec<HardwareId>> = vec![Vec::new(); 3];
    let mut generators = Vec::new();
    for (i, &(cx, cy)) in centres.iter().enumerate() {
        let isl = i as u64 + 1;
        let mut c = node(next, Role::Collector, Some(isl), [cx, cy]);
        c.buffer = Some(rng.gen_range(15..=40));
        if rng.gen_bool(0.5) {
            c.backhaul.push([rng.gen_range(50..150), rng.gen_range(200..400)]);
        }
        by_island[i].push(c.id);
        s.nodes.push(c);
        let collector = HardwareId(next);
        next += 1;
        if rng.gen_bool(0.6) {
            let a = node(next, Role::AuxCollector, Some(isl), [cx - 20.0, cy + 10.0]);
            by_island[i].push(a.id);
            s.nodes.push(a);
            next += 1;
            if rng.gen_bool(0.5) {
                let at = rng.gen_range(50..250);
                s.failures.push(FailureSpec {
                    node: collector,
                    offline_at: at,
                    online_at: rng.gen_bool(0.5).then(|| at + rng.gen_range(20..100)),
                });
            }
        }
        for _ in 0..rng.gen_range(1..=3) {
            let ang: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let r = rng.gen_range(10.0..55.0);
            let mut g = node(
                next,
                Role::Generator,
                Some(isl),
                [cx + r * ang.cos(), cy + r * ang.sin()],
            );
            if rng.gen_bool(0.3) {
                g.energy = Some(rng.gen_range(5.0..60.0));
            }
            if rng.gen_bool(0.2) {
                g.backhaul.push([rng.gen_range(0..200), rng.gen_range(250..400)]);
            }
            by_island[i].push(g.id);
            generators.push(g.id);
            s.nodes.push(g);
            next += 1;
        }
        if rng.gen_bool(0.7) {
            let mut m = node(next, Role::LocalMule, Some(isl), [cx + 100.0, cy]);
            m.mobility = MobilitySpec::RandomWaypoint {
                speed: [1.0, 4.0],
                pause: [0, 20],
                confined: true,
            };
            m.buffer = Some(rng.gen_range(5..=20));
            by_island[i].push(m.id);
            s.nodes.push(m);
            next += 1;
        }
    }
    for k in 0..rng.gen_range(1..=2u64) {
        let mut order = [1u64, 2, 3];
        order.shuffle(&mut rng);
        let mut sm = node(50 + k, Role::SuperMule, None, [0.0, 0.0]);
        sm.mobility = MobilitySpec::Itinerary {
            speed: rng.gen_range(40.0..80.0),
            stops: order
                .iter()
                .map(|&isl| StopSpec {
                    island: IslandId(isl),
                    dwell: rng.gen_range(5..=25),
                    at: None,
                })
                .collect(),
            repeat: true,
        };
        sm.buffer = Some(rng.gen_range(10..=40));
        s.nodes.push(sm);
    }

    let everyone: Vec<HardwareId> = by_island.iter().flatten().copied().collect();
    for _ in 0..rng.gen_range(3..=6) {
        let src = pick(&mut rng, &generators);
        let dest = if rng.gen_bool(0.15) {
            Destination::Centre(CentreId(1))
        } else {
            Destination::Node(pick(&mut rng, &everyone))
        };
        let mut t = traffic(src, dest, rng.gen_range(100..=400));
        t.priority = pick(&mut rng, &Priority::ALL);
        t.sensitivity = pick(&mut rng, &Sensitivity::ALL);
        if let Destination::Centre(_) = dest {
            t.readers = Some(by_island[1].clone());
        } else if rng.gen_bool(0.2) {
            t.readers = Some(vec![pick(&mut rng, &everyone)]);
        }
        match rng.gen_range(0..3) {
            0 => t.times = (0..rng.gen_range(1..=8)).map(|_| rng.gen_range(0..=300)).collect(),
            1 => {
                t.every = Some(rng.gen_range(5..=40));
                t.start = Some(rng.gen_range(0..100));
                t.end = Some(rng.gen_range(150..=350));
            }
            _ => {
                t.rate = Some(rng.gen_range(0.01..0.1));
                t.end = Some(300);
            }
        }
        s.traffic.push(t);
    }

    // a flood on island 1 that should alert somebody on island 2
    s.sensors.push(SensorSpec {
        id: HardwareId(900),
        position: [10.0, 10.0],
        tier: pick(&mut rng, &[Sensitivity::HighSensitive, Sensitivity::LowSensitive]),
        readings: Vec::new(),
        series: vec![
            SeriesSpec {
                metric: Metric::WaterLevel,
                from: 0,
                to: 300,
                every: 10,
                value: 3.4,
            },
            SeriesSpec {
                metric: Metric::Humidity,
                from: 0,
                to: 300,
                every: 10,
                value: 95.0,
            },
        ],
    });
    s.triggers.push(Trigger {
        id: "gauge".into(),
        spec: TriggerSpec::SensorThreshold {
            metric: Metric::WaterLevel,
            op: Comparator::Gt,
            threshold: 3.0,
            sustain: 60,
        },
    });
    s.rules.push(
        "rule flood when water_level>3@30s and humidity>90@30s within 0,0,300 emit flood severity emergency_warning"
            .into(),
    );
    let watcher = by_island[1][by_island[1].len() - 1];
    s.subscriptions
        .push(format!("sub {} area 0,0,500 types flood mode active", watcher.0));
    s.subscriptions.push(format!(
        "sub {} area 0,0,500 types flood mode passive",
        by_island[2][0].0
    ));
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generated_scenarios_validate() {
        for seed in 0..200 {
            let s = small(seed);
            assert_eq!(s.diagnostics(), vec![], "small({seed})");
            assert!(s.contacts.as_ref().unwrap().len() <= 20);
        }
        for seed in 0..50 {
            assert_eq!(busy(seed).diagnostics(), vec![], "busy({seed})");
        }
    }

    #[test]
    fn seeded() {
        assert_eq!(small(5), small(5));
        assert_eq!(busy(5), busy(5));
        assert_ne!(busy(5), busy(6));
    }
}
