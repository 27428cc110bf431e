//! Deterministic tick simulator.
//!
//! A run is a pure function of the [`Scenario`] (its seed included). Every
//! source of randomness draws from its own ChaCha stream keyed by
//! `(seed, concern, index)`, so adding traffic never perturbs mobility.

mod engine;
mod geometry;
mod metrics;
mod mobility;
mod oracle;
mod scenario;
pub mod synth;
mod traffic;

pub use engine::{run, run_with, ContactEvent, MessageInfo, Observer, RunOptions, RunOutput};
pub use geometry::{Bbox, Extent, Shape};
pub use metrics::{events_csv, metrics_json, transfers_csv, Metrics, METRIC_FIELDS};
pub use mobility::{contacts_at, Trajectory};
pub use oracle::{oracle_deliverable, OracleError, ORACLE_MAX_CONTACTS, ORACLE_MAX_NODES};
pub use scenario::{
    Budget, CentreSpec, Destination, Diagnostic, DiscSpec, FailureSpec, IslandSpec, MobilitySpec, NodeSpec, Point,
    ReadingSpec, Scenario, ScriptedContact, SensorSpec, SeriesSpec, StopSpec, TrafficSpec, SCHEMA_VERSION,
};
pub use traffic::{expand_traffic, Generation};

use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::msgcore::SimTime;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("{path}: {message} (line {line}, column {column})")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid scenario: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Diagnostic>),
    #[error("audit failed at t={time}: {detail}")]
    Audit { time: SimTime, detail: String },
}

/// What a random stream is used for.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Concern {
    Mobility = 1,
    Traffic = 2,
    Tamper = 3,
    Secret = 4,
}

/// Independent stream `index` of `concern` under `seed`.
pub fn stream(seed: u64, concern: Concern, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((concern as u64) << 32) | (index & 0xffff_ffff));
    rng
}

/// Step times `0, tick, 2 tick, ..` up to and including `duration`.
pub fn step_times(s: &Scenario) -> impl Iterator<Item = SimTime> {
    let tick = s.tick.max(1);
    (0..=s.duration / tick).map(move |k| k * tick)
}

/// First step at or after `t`.
pub fn step_at_or_after(s: &Scenario, t: SimTime) -> SimTime {
    let tick = s.tick.max(1);
    t.div_ceil(tick) * tick
}
