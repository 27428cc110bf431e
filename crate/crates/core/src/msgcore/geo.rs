use serde::{Deserialize, Serialize};

/// Point on the flat simulation plane, in metres.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance_sq(self, other: Position) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn distance(self, other: Position) -> f64 {
        self.distance_sq(other).sqrt()
    }

    /// Inclusive range test done on squared distances.
    pub fn within(self, other: Position, range: f64) -> bool {
        self.distance_sq(other) <= range * range
    }

    pub fn lerp(self, to: Position, frac: f64) -> Position {
        Position::new(self.x + (to.x - self.x) * frac, self.y + (to.y - self.y) * frac)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Disc {
    pub centre: Position,
    pub radius: f64,
}

impl Disc {
    pub fn contains(&self, p: Position) -> bool {
        self.centre.within(p, self.radius)
    }

    /// Two discs intersect when their centres are no further apart than the
    /// sum of the radii.
    pub fn intersects(&self, other: &Disc) -> bool {
        self.centre.within(other.centre, self.radius + other.radius)
    }
}
