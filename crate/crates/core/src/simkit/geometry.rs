use crate::msgcore::{Disc, Position};

use super::scenario::{pos, IslandSpec};

/// Slack for points that land a rounding error outside a boundary.
const EPS: f64 = 1e-6;

/// Axis-aligned box, `min` to `max` inclusive.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bbox {
    pub min: Position,
    pub max: Position,
}

impl Bbox {
    pub fn union(self, other: Bbox) -> Bbox {
        Bbox {
            min: Position::new(self.min.x.min(other.min.x), self.min.y.min(other.min.y)),
            max: Position::new(self.max.x.max(other.max.x), self.max.y.max(other.max.y)),
        }
    }

    pub fn contains(&self, p: Position) -> bool {
        p.x >= self.min.x - EPS && p.x <= self.max.x + EPS && p.y >= self.min.y - EPS && p.y <= self.max.y + EPS
    }
}

/// Land area of one island.
#[derive(Clone, Debug, PartialEq)]
pub enum Shape {
    Disc(Disc),
    Polygon(Vec<Position>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Extent {
    pub shape: Shape,
    /// Where itineraries stop unless told otherwise.
    pub anchor: Position,
}

fn cross(o: Position, a: Position, b: Position) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

fn on_segment(p: Position, a: Position, b: Position) -> bool {
    let len = a.distance(b).max(1.0);
    cross(a, b, p).abs() <= EPS * len
        && p.x >= a.x.min(b.x) - EPS
        && p.x <= a.x.max(b.x) + EPS
        && p.y >= a.y.min(b.y) - EPS
        && p.y <= a.y.max(b.y) + EPS
}

/// Strict crossing: the segments cut through each other at interior points.
fn crosses(p1: Position, p2: Position, q1: Position, q2: Position) -> bool {
    let d1 = cross(q1, q2, p1);
    let d2 = cross(q1, q2, p2);
    let d3 = cross(p1, p2, q1);
    let d4 = cross(p1, p2, q2);
    ((d1 > EPS && d2 < -EPS) || (d1 < -EPS && d2 > EPS)) && ((d3 > EPS && d4 < -EPS) || (d3 < -EPS && d4 > EPS))
}

fn edges(poly: &[Position]) -> impl Iterator<Item = (Position, Position)> + '_ {
    poly.iter().copied().zip(poly.iter().copied().cycle().skip(1))
}

/// Even-odd rule; points on an edge count as inside.
pub fn polygon_contains(poly: &[Position], p: Position) -> bool {
    if edges(poly).any(|(a, b)| on_segment(p, a, b)) {
        return true;
    }
    let mut inside = false;
    for (a, b) in edges(poly) {
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x {
                inside = !inside;
            }
        }
    }
    inside
}

impl Extent {
    pub fn from_spec(spec: &IslandSpec) -> Option<Extent> {
        let (shape, default_anchor) = match (&spec.disc, &spec.polygon) {
            (Some(d), None) => {
                let c = pos(d.centre);
                (
                    Shape::Disc(Disc {
                        centre: c,
                        radius: d.radius,
                    }),
                    c,
                )
            }
            (None, Some(p)) if p.len() >= 3 => {
                let verts: Vec<Position> = p.iter().copied().map(pos).collect();
                let n = verts.len() as f64;
                let mean = Position::new(
                    verts.iter().map(|v| v.x).sum::<f64>() / n,
                    verts.iter().map(|v| v.y).sum::<f64>() / n,
                );
                (Shape::Polygon(verts), mean)
            }
            _ => return None,
        };
        Some(Extent {
            shape,
            anchor: spec.anchor.map(pos).unwrap_or(default_anchor),
        })
    }

    pub fn contains(&self, p: Position) -> bool {
        match &self.shape {
            Shape::Disc(d) => d.centre.distance(p) <= d.radius + EPS,
            Shape::Polygon(v) => polygon_contains(v, p),
        }
    }

    /// Whether the straight walk from `a` to `b` stays on the island.
    pub fn segment_inside(&self, a: Position, b: Position) -> bool {
        match &self.shape {
            // convex
            Shape::Disc(_) => self.contains(a) && self.contains(b),
            Shape::Polygon(v) => {
                self.contains(a)
                    && self.contains(b)
                    && self.contains(a.lerp(b, 0.5))
                    && !edges(v).any(|(p, q)| crosses(a, b, p, q))
                    && v.iter().all(|&w| !on_segment(w, a, b) || self.contains_near(w, a, b))
            }
        }
    }

    /// A walk that grazes a vertex must stay inside on both sides of it.
    fn contains_near(&self, w: Position, a: Position, b: Position) -> bool {
        let len = a.distance(b);
        if len == 0.0 {
            return true;
        }
        let t = ((w.x - a.x) * (b.x - a.x) + (w.y - a.y) * (b.y - a.y)) / (len * len);
        let step = (1e-3 / len).min(0.5);
        [t - step, t + step]
            .into_iter()
            .filter(|s| (0.0..=1.0).contains(s))
            .all(|s| self.contains(a.lerp(b, s)))
    }

    pub fn bbox(&self) -> Bbox {
        match &self.shape {
            Shape::Disc(d) => Bbox {
                min: Position::new(d.centre.x - d.radius, d.centre.y - d.radius),
                max: Position::new(d.centre.x + d.radius, d.centre.y + d.radius),
            },
            Shape::Polygon(v) => {
                let first = Bbox { min: v[0], max: v[0] };
                v.iter().fold(first, |b, &p| b.union(Bbox { min: p, max: p }))
            }
        }
    }
}
