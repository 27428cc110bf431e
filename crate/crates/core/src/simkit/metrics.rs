use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dtnproto::TransferLog;
use crate::eventflow::{EventRecord, PortalEntry};

/// End-of-run summary. Serializes flat, one key per field, in this order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Metrics {
    pub generated: u64,
    pub delivered: u64,
    pub expired: u64,
    pub dropped_overflow: u64,
    pub dropped_tampered: u64,
    pub duplicates_suppressed: u64,
    pub sybil_rejections: u64,
    pub delivery_ratio: f64,
    pub latency_p50: u64,
    pub latency_p95: u64,
    pub latency_mean: f64,
    pub queue_delay_mean: f64,
    pub contacts: u64,
    pub transfers: u64,
    pub energy_spent: f64,
    pub delivered_emergency: u64,
    pub delivered_high: u64,
    pub delivered_normal: u64,
    pub delivered_low: u64,
}

pub const METRIC_FIELDS: [&str; 19] = [
    "generated",
    "delivered",
    "expired",
    "dropped_overflow",
    "dropped_tampered",
    "duplicates_suppressed",
    "sybil_rejections",
    "delivery_ratio",
    "latency_p50",
    "latency_p95",
    "latency_mean",
    "queue_delay_mean",
    "contacts",
    "transfers",
    "energy_spent",
    "delivered_emergency",
    "delivered_high",
    "delivered_normal",
    "delivered_low",
];

/// Nearest-rank percentile of sorted samples; 0 when empty.
pub(crate) fn nearest_rank(sorted: &[u64], pct: u64) -> u64 {
    if sorted.is_empty() {
        return 0;
    }
    let rank = (pct as usize * sorted.len()).div_ceil(100).max(1);
    sorted[rank - 1]
}

pub(crate) fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn metrics_json(m: &Metrics) -> String {
    let mut s = serde_json::to_string_pretty(m).expect("metrics serialize");
    s.push('\n');
    s
}

pub fn transfers_csv(log: &[TransferLog]) -> String {
    let mut out = String::from("time,from,to,item,action\n");
    for l in log {
        out.push_str(&l.csv_line());
        out.push('\n');
    }
    out
}

/// Detected events and passive portal entries, one row each.
pub fn events_csv(events: &[EventRecord], portal: &[PortalEntry]) -> String {
    let mut out = String::from("kind,time,event,rule,event_type,severity,x,y,radius,subscriber,evidence\n");
    for e in events {
        let _ = writeln!(
            out,
            "event,{},{},{},{},{},{},{},{},,{}",
            e.detected_at,
            e.id,
            e.rule,
            e.event_type,
            e.severity.name(),
            e.area.centre.x,
            e.area.centre.y,
            e.area.radius,
            e.evidence.len()
        );
    }
    for p in portal {
        let e = events.iter().find(|e| e.id == p.event);
        let _ = writeln!(
            out,
            "portal,{},{},{},{},{},{},{},{},{},",
            p.time,
            p.event,
            e.map_or("", |e| e.rule.as_str()),
            p.event_type,
            p.severity.name(),
            e.map_or(String::new(), |e| e.area.centre.x.to_string()),
            e.map_or(String::new(), |e| e.area.centre.y.to_string()),
            e.map_or(String::new(), |e| e.area.radius.to_string()),
            p.subscriber
        );
    }
    out
}
