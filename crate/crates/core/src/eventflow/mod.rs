//! Trigger-driven event pipeline. A fired trigger starts collection; rules
//! then turn sensor readings into events that reach subscribers as pushed
//! DTN alerts or portal entries.

mod alerts;
mod parse;
mod rules;
mod triggers;

pub use alerts::{dispatch_alerts, AlertDesk, Dispatch, PortalEntry};
pub use parse::{parse_rule, parse_rules, parse_subscription, parse_subscriptions};
pub use rules::{condition_holds, rule_holds, Evidence, RuleEngine};
pub use triggers::{evaluate_triggers, Forecast, Mention, ReadingStore, TriggerState};

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::msgcore::{ActivityCentre, HardwareId, Position, SimTime};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Temperature,
    Humidity,
    Noise,
    WaterLevel,
    Battery,
}

impl Metric {
    pub const ALL: [Metric; 5] = [
        Metric::Temperature,
        Metric::Humidity,
        Metric::Noise,
        Metric::WaterLevel,
        Metric::Battery,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Temperature => "temperature",
            Metric::Humidity => "humidity",
            Metric::Noise => "noise",
            Metric::WaterLevel => "water_level",
            Metric::Battery => "battery",
        }
    }

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }

    /// Accepts `water_level`, `waterlevel` and `WaterLevel` alike.
    pub fn from_name(s: &str) -> Option<Self> {
        let folded: String = s
            .chars()
            .filter(|c| *c != '_' && *c != '-')
            .collect::<String>()
            .to_ascii_lowercase();
        Self::ALL.into_iter().find(|m| m.name().replace('_', "") == folded)
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Comparator {
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "=")]
    Eq,
}

impl Comparator {
    pub fn holds(self, value: f64, threshold: f64) -> bool {
        match self {
            Comparator::Gt => value > threshold,
            Comparator::Ge => value >= threshold,
            Comparator::Lt => value < threshold,
            Comparator::Le => value <= threshold,
            Comparator::Eq => value == threshold,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Comparator::Gt => ">",
            Comparator::Ge => ">=",
            Comparator::Lt => "<",
            Comparator::Le => "<=",
            Comparator::Eq => "=",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensorReading {
    pub sensor: HardwareId,
    pub metric: Metric,
    pub value: f64,
    pub time: SimTime,
    pub position: Position,
}

impl SensorReading {
    pub const WIRE_LEN: usize = 8 + 1 + 8 + 8 + 8 + 8;

    /// `sensor:u64 metric:u8 value:f64 time:u64 x:f64 y:f64`, big-endian.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(Self::WIRE_LEN);
        out.extend_from_slice(&self.sensor.0.to_be_bytes());
        out.push(self.metric.code());
        out.extend_from_slice(&self.value.to_bits().to_be_bytes());
        out.extend_from_slice(&self.time.to_be_bytes());
        out.extend_from_slice(&self.position.x.to_bits().to_be_bytes());
        out.extend_from_slice(&self.position.y.to_bits().to_be_bytes());
        out
    }

    pub fn decode(bytes: &[u8]) -> Option<Self> {
        if bytes.len() != Self::WIRE_LEN {
            return None;
        }
        let word = |at: usize| u64::from_be_bytes(bytes[at..at + 8].try_into().expect("8 bytes"));
        Some(Self {
            sensor: HardwareId(word(0)),
            metric: Metric::from_code(bytes[8])?,
            value: f64::from_bits(word(9)),
            time: word(17),
            position: Position::new(f64::from_bits(word(25)), f64::from_bits(word(33))),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TriggerSpec {
    WeatherForecast {
        condition: String,
    },
    SensorThreshold {
        metric: Metric,
        op: Comparator,
        threshold: f64,
        /// Seconds the comparison must hold without a break.
        sustain: u64,
    },
    SocialTopicBurst {
        topic: String,
        count: u64,
        window: u64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trigger {
    pub id: String,
    #[serde(flatten)]
    pub spec: TriggerSpec,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Advice,
    WatchAct,
    EmergencyWarning,
}

impl Severity {
    pub fn name(self) -> &'static str {
        match self {
            Severity::Advice => "advice",
            Severity::WatchAct => "watch_act",
            Severity::EmergencyWarning => "emergency_warning",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "advice" => Some(Severity::Advice),
            "watch_act" | "watchact" => Some(Severity::WatchAct),
            "emergency_warning" | "emergencywarning" => Some(Severity::EmergencyWarning),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Condition {
    pub metric: Metric,
    pub op: Comparator,
    pub threshold: f64,
    /// Look-back in seconds.
    pub window: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OntologyRule {
    pub id: String,
    pub conditions: Vec<Condition>,
    pub area: ActivityCentre,
    pub event_type: String,
    pub severity: Severity,
}

impl OntologyRule {
    /// Longest condition window; an open event closes after this long false.
    pub fn window(&self) -> u64 {
        self.conditions.iter().map(|c| c.window).max().unwrap_or(0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EventId(pub u64);

impl fmt::Display for EventId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EventRecord {
    pub id: EventId,
    pub rule: String,
    pub event_type: String,
    pub severity: Severity,
    pub area: ActivityCentre,
    pub detected_at: SimTime,
    pub evidence: Vec<Evidence>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Active,
    Passive,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AlertSubscription {
    pub subscriber: HardwareId,
    pub area: ActivityCentre,
    pub event_types: BTreeSet<String>,
    pub mode: Mode,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}
