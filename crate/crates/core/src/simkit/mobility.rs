use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::geometry::{Bbox, Extent};
use super::scenario::{pos, MobilitySpec, NodeSpec, StopSpec};
use crate::dtnproto::IslandId;
use crate::msgcore::{HardwareId, Position, SimTime};

/// Attempts at drawing a reachable waypoint before a walker stays put.
const DRAW_ATTEMPTS: usize = 64;

/// Pairs `(a, b)` with `a < b` whose distance is at most `range`, sorted.
pub fn contacts_at(positions: &BTreeMap<HardwareId, Position>, range: f64) -> Vec<(HardwareId, HardwareId)> {
    let nodes: Vec<(HardwareId, Position)> = positions.iter().map(|(k, v)| (*k, *v)).collect();
    let mut out = Vec::new();
    for (i, (a, pa)) in nodes.iter().enumerate() {
        for (b, pb) in &nodes[i + 1..] {
            if pa.within(*pb, range) {
                out.push((*a, *b));
            }
        }
    }
    out
}

#[derive(Clone, Debug)]
struct Walk {
    rng: ChaCha8Rng,
    area: Area,
    speed: [f64; 2],
    pause: [u64; 2],
    from: Position,
    to: Position,
    depart: f64,
    arrive: f64,
    resume: f64,
}

#[derive(Clone, Debug)]
enum Area {
    Island(Extent),
    World(Bbox),
}

impl Area {
    fn bbox(&self) -> Bbox {
        match self {
            Area::Island(e) => e.bbox(),
            Area::World(b) => *b,
        }
    }

    fn reachable(&self, from: Position, to: Position) -> bool {
        match self {
            Area::Island(e) => e.segment_inside(from, to),
            Area::World(b) => b.contains(to),
        }
    }
}

impl Walk {
    fn draw(&mut self) {
        let b = self.area.bbox();
        let mut target = self.to;
        for _ in 0..DRAW_ATTEMPTS {
            let p = Position::new(
                self.rng.gen_range(b.min.x..=b.max.x),
                self.rng.gen_range(b.min.y..=b.max.y),
            );
            if self.area.reachable(self.to, p) {
                target = p;
                break;
            }
        }
        let speed = self.rng.gen_range(self.speed[0]..=self.speed[1]);
        let pause = self.rng.gen_range(self.pause[0]..=self.pause[1]);
        self.from = self.to;
        self.depart = self.resume;
        self.arrive = self.depart + self.from.distance(target) / speed;
        self.resume = self.arrive + pause as f64;
        self.to = target;
    }

    fn at(&mut self, t: f64) -> Position {
        while t >= self.resume {
            self.draw();
        }
        if t >= self.arrive || self.arrive <= self.depart {
            self.to
        } else {
            self.from.lerp(self.to, (t - self.depart) / (self.arrive - self.depart))
        }
    }
}

/// Precomputed piecewise-linear path: `(time, position)` corners.
#[derive(Clone, Debug)]
struct Path {
    corners: Vec<(f64, Position)>,
}

impl Path {
    fn build(start: Position, speed: f64, stops: &[(Position, u64)], repeat: bool, horizon: SimTime) -> Path {
        let mut corners = vec![(0.0, start)];
        let mut here = start;
        let mut t = 0.0;
        let horizon = horizon as f64;
        'outer: loop {
            for &(p, dwell) in stops {
                t += here.distance(p) / speed;
                corners.push((t, p));
                t += dwell as f64;
                corners.push((t, p));
                here = p;
                if t > horizon {
                    break 'outer;
                }
            }
            if !repeat {
                break;
            }
        }
        Path { corners }
    }

    fn at(&self, t: f64) -> Position {
        let k = self.corners.partition_point(|(ct, _)| *ct <= t);
        if k == self.corners.len() {
            return self.corners[k - 1].1;
        }
        let (t0, p0) = self.corners[k - 1];
        let (t1, p1) = self.corners[k];
        if t1 <= t0 {
            p1
        } else {
            p0.lerp(p1, (t - t0) / (t1 - t0))
        }
    }
}

#[derive(Clone, Debug)]
enum Motion {
    Fixed(Position),
    Walk(Box<Walk>),
    Path(Path),
}

/// Where one node is over time. Queries must come in non-decreasing time
/// order for random walkers.
#[derive(Clone, Debug)]
pub struct Trajectory {
    motion: Motion,
}

impl Trajectory {
    /// `rng` is the node's private mobility stream.
    pub fn new(
        node: &NodeSpec,
        extents: &BTreeMap<IslandId, Extent>,
        world: Bbox,
        rng: ChaCha8Rng,
        horizon: SimTime,
    ) -> Trajectory {
        let start = pos(node.position.unwrap_or_default());
        let motion = match &node.mobility {
            MobilitySpec::Static => Motion::Fixed(start),
            MobilitySpec::RandomWaypoint { speed, pause, confined } => {
                let area = match node.island.and_then(|i| extents.get(&i)) {
                    Some(e) if *confined => Area::Island(e.clone()),
                    _ => Area::World(world),
                };
                Motion::Walk(Box::new(Walk {
                    rng,
                    area,
                    speed: *speed,
                    pause: *pause,
                    from: start,
                    to: start,
                    depart: 0.0,
                    arrive: 0.0,
                    resume: 0.0,
                }))
            }
            MobilitySpec::Itinerary { speed, stops, repeat } => {
                let stops: Vec<(Position, u64)> = stops
                    .iter()
                    .map(|s: &StopSpec| {
                        let p = s.at.map(pos).unwrap_or_else(|| extents[&s.island].anchor);
                        (p, s.dwell)
                    })
                    .collect();
                Motion::Path(Path::build(start, *speed, &stops, *repeat, horizon))
            }
        };
        Trajectory { motion }
    }

    pub fn at(&mut self, t: SimTime) -> Position {
        match &mut self.motion {
            Motion::Fixed(p) => *p,
            Motion::Walk(w) => w.at(t as f64),
            Motion::Path(p) => p.at(t as f64),
        }
    }
}
