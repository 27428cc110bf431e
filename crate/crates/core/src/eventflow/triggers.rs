use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{Metric, SensorReading, Trigger, TriggerSpec};
use crate::msgcore::{HardwareId, Position, SimTime};

/// Verified readings, one time-ordered series per (sensor, metric).
#[derive(Clone, Debug, Default)]
pub struct ReadingStore {
    series: BTreeMap<(HardwareId, Metric), Vec<SensorReading>>,
}

impl ReadingStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a reading. Returns false (and stores nothing) when it is older
    /// than the latest reading of its series.
    pub fn push(&mut self, r: SensorReading) -> bool {
        let s = self.series.entry((r.sensor, r.metric)).or_default();
        if s.last().is_some_and(|last| last.time > r.time) {
            return false;
        }
        s.push(r);
        true
    }

    pub fn len(&self) -> usize {
        self.series.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn series(&self, sensor: HardwareId, metric: Metric) -> &[SensorReading] {
        self.series.get(&(sensor, metric)).map_or(&[], Vec::as_slice)
    }

    /// Every series of `metric`, by sensor id.
    pub fn of_metric(&self, metric: Metric) -> impl Iterator<Item = (HardwareId, &[SensorReading])> {
        self.series
            .iter()
            .filter(move |((_, m), _)| *m == metric)
            .map(|((s, _), v)| (*s, v.as_slice()))
    }

    /// Readings with `t - window < time <= t`.
    pub fn window(&self, sensor: HardwareId, metric: Metric, t: SimTime, window: u64) -> &[SensorReading] {
        let s = self.series(sensor, metric);
        let lo = s.partition_point(|r| r.time.saturating_add(window) <= t);
        let hi = s.partition_point(|r| r.time <= t);
        &s[lo..hi.max(lo)]
    }

    /// Where the sensor last reported from.
    pub fn position(&self, sensor: HardwareId) -> Option<Position> {
        self.series
            .range((sensor, Metric::ALL[0])..=(sensor, Metric::ALL[Metric::ALL.len() - 1]))
            .filter_map(|(_, v)| v.last())
            .max_by_key(|r| r.time)
            .map(|r| r.position)
    }
}

/// A forecast condition in effect over `[from, to]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Forecast {
    pub from: SimTime,
    pub to: SimTime,
    pub condition: String,
}

/// `count` mentions of `topic` observed at `time`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mention {
    pub time: SimTime,
    pub topic: String,
    #[serde(default = "one")]
    pub count: u64,
}

fn one() -> u64 {
    1
}

fn sustained(series: &[SensorReading], t: SimTime, hold: impl Fn(f64) -> bool, sustain: u64) -> bool {
    let upto = series.partition_point(|r| r.time <= t);
    let Some(last) = series[..upto].last() else {
        return false;
    };
    let mut start = None;
    for r in series[..upto].iter().rev() {
        if !hold(r.value) {
            break;
        }
        start = Some(r.time);
    }
    start.is_some_and(|s| last.time - s >= sustain)
}

fn fires(
    spec: &TriggerSpec,
    readings: &ReadingStore,
    forecasts: &[Forecast],
    mentions: &[Mention],
    t: SimTime,
) -> bool {
    match spec {
        TriggerSpec::WeatherForecast { condition } => forecasts
            .iter()
            .any(|f| &f.condition == condition && f.from <= t && t <= f.to),
        TriggerSpec::SensorThreshold {
            metric,
            op,
            threshold,
            sustain,
        } => readings
            .of_metric(*metric)
            .any(|(_, s)| sustained(s, t, |v| op.holds(v, *threshold), *sustain)),
        TriggerSpec::SocialTopicBurst { topic, count, window } => {
            let seen: u64 = mentions
                .iter()
                .filter(|m| &m.topic == topic && m.time <= t && m.time.saturating_add(*window) > t)
                .map(|m| m.count)
                .sum();
            seen >= *count
        }
    }
}

/// Ids of the triggers whose condition holds at `t`.
///
/// A threshold trigger needs one sensor whose latest unbroken run of
/// satisfying readings (up to `t`) spans at least `sustain` seconds. A
/// sensor that goes quiet does not keep sustaining. A burst counts mentions
/// in `(t - window, t]`.
pub fn evaluate_triggers(
    specs: &[Trigger],
    readings: &ReadingStore,
    forecasts: &[Forecast],
    mentions: &[Mention],
    t: SimTime,
) -> BTreeSet<String> {
    specs
        .iter()
        .filter(|s| fires(&s.spec, readings, forecasts, mentions, t))
        .map(|s| s.id.clone())
        .collect()
}

/// Remembers when each trigger last fired. Collection stays on until every
/// trigger has been quiet for `quiet_period` seconds.
#[derive(Clone, Debug)]
pub struct TriggerState {
    pub quiet_period: u64,
    last_fired: BTreeMap<String, SimTime>,
}

impl TriggerState {
    pub const DEFAULT_QUIET_PERIOD: u64 = 600;

    pub fn new(quiet_period: u64) -> Self {
        Self {
            quiet_period,
            last_fired: BTreeMap::new(),
        }
    }

    pub fn record(&mut self, fired: &BTreeSet<String>, t: SimTime) {
        for id in fired {
            self.last_fired.insert(id.clone(), t);
        }
    }

    pub fn last_fired(&self, id: &str) -> Option<SimTime> {
        self.last_fired.get(id).copied()
    }

    pub fn active(&self, t: SimTime) -> BTreeSet<String> {
        self.last_fired
            .iter()
            .filter(|(_, f)| **f <= t && t - **f < self.quiet_period)
            .map(|(id, _)| id.clone())
            .collect()
    }

    pub fn collecting(&self, t: SimTime) -> bool {
        !self.active(t).is_empty()
    }
}

impl Default for TriggerState {
    fn default() -> Self {
        Self::new(Self::DEFAULT_QUIET_PERIOD)
    }
}
