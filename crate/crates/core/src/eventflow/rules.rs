use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Condition, EventId, EventRecord, Metric, OntologyRule, ReadingStore};
use crate::msgcore::{ActivityCentre, HardwareId, SimTime};

/// Reference to one reading that supported an event.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub sensor: HardwareId,
    pub metric: Metric,
    pub time: SimTime,
    pub value: f64,
}

/// A condition holds when some sensor inside `area` reported the metric
/// during the window and every one of those readings satisfies it. Returns
/// the readings of every such sensor.
pub fn condition_holds(
    cond: &Condition,
    area: &ActivityCentre,
    readings: &ReadingStore,
    t: SimTime,
) -> Option<Vec<Evidence>> {
    let mut evidence = Vec::new();
    for (sensor, _) in readings.of_metric(cond.metric) {
        let w = readings.window(sensor, cond.metric, t, cond.window);
        let Some(last) = w.last() else { continue };
        if !area.contains(last.position) {
            continue;
        }
        if w.iter().all(|r| cond.op.holds(r.value, cond.threshold)) {
            evidence.extend(w.iter().map(|r| Evidence {
                sensor,
                metric: r.metric,
                time: r.time,
                value: r.value,
            }));
        }
    }
    (!evidence.is_empty()).then_some(evidence)
}

/// Evidence for every conjunct, or `None` if any conjunct fails.
pub fn rule_holds(rule: &OntologyRule, readings: &ReadingStore, t: SimTime) -> Option<Vec<Evidence>> {
    let mut all = Vec::new();
    for c in &rule.conditions {
        all.extend(condition_holds(c, &rule.area, readings, t)?);
    }
    Some(all)
}

#[derive(Clone, Copy, Debug)]
struct Open {
    last_true: SimTime,
}

/// Rule matcher with per-rule hysteresis. A rule that matched keeps its
/// event open until its conditions have been false for one full window;
/// only then can it emit again.
#[derive(Clone, Debug)]
pub struct RuleEngine {
    rules: Vec<OntologyRule>,
    open: BTreeMap<usize, Open>,
    next_id: u64,
}

impl RuleEngine {
    pub fn new(rules: Vec<OntologyRule>) -> Self {
        Self {
            rules,
            open: BTreeMap::new(),
            next_id: 0,
        }
    }

    pub fn rules(&self) -> &[OntologyRule] {
        &self.rules
    }

    pub fn is_open(&self, rule_id: &str) -> bool {
        self.rules
            .iter()
            .position(|r| r.id == rule_id)
            .is_some_and(|i| self.open.contains_key(&i))
    }

    /// Evaluates every rule at `t`. Nothing matches while `collecting` is
    /// false, though open events still close on schedule.
    pub fn match_rules(&mut self, readings: &ReadingStore, t: SimTime, collecting: bool) -> Vec<EventRecord> {
        let mut out = Vec::new();
        for (i, rule) in self.rules.iter().enumerate() {
            let evidence = if collecting {
                rule_holds(rule, readings, t)
            } else {
                None
            };
            match (evidence, self.open.get_mut(&i)) {
                (Some(_), Some(open)) => open.last_true = t,
                (Some(evidence), None) => {
                    self.open.insert(i, Open { last_true: t });
                    out.push(EventRecord {
                        id: EventId(self.next_id),
                        rule: rule.id.clone(),
                        event_type: rule.event_type.clone(),
                        severity: rule.severity,
                        area: rule.area,
                        detected_at: t,
                        evidence,
                    });
                    self.next_id += 1;
                }
                (None, Some(open)) => {
                    if t.saturating_sub(open.last_true) >= rule.window() {
                        self.open.remove(&i);
                    }
                }
                (None, None) => {}
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::super::{parse_rule, SensorReading, Severity};
    use super::*;
    use crate::msgcore::Position;

    const FLOOD: &str =
        "rule flood when water_level>3@60s and humidity>90@60s within 0,0,500 emit flood severity watch_act";

    fn feed(s: &mut ReadingStore, sensor: u64, metric: Metric, value: f64, t: SimTime, at: Position) {
        s.push(SensorReading {
            sensor: HardwareId(sensor),
            metric,
            value,
            time: t,
            position: at,
        });
    }

    fn wet(s: &mut ReadingStore, t: SimTime, level: f64, humidity: f64) {
        feed(s, 1, Metric::WaterLevel, level, t, Position::new(10.0, 0.0));
        feed(s, 2, Metric::Humidity, humidity, t, Position::new(-10.0, 0.0));
    }

    #[test]
    fn conjunction_emits_once() {
        let mut eng = RuleEngine::new(vec![parse_rule(FLOOD).unwrap()]);
        let mut s = ReadingStore::new();
        wet(&mut s, 0, 3.5, 95.0);
        let ev = eng.match_rules(&s, 0, true);
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].severity, Severity::WatchAct);
        assert_eq!(ev[0].evidence.len(), 2);
        wet(&mut s, 10, 3.6, 96.0);
        assert!(eng.match_rules(&s, 10, true).is_empty(), "still open");
    }

    #[test]
    fn one_conjunct_is_not_enough() {
        let mut eng = RuleEngine::new(vec![parse_rule(FLOOD).unwrap()]);
        let mut s = ReadingStore::new();
        wet(&mut s, 0, 3.5, 80.0);
        assert!(eng.match_rules(&s, 0, true).is_empty());
    }

    #[test]
    fn no_match_without_collection() {
        let mut eng = RuleEngine::new(vec![parse_rule(FLOOD).unwrap()]);
        let mut s = ReadingStore::new();
        wet(&mut s, 0, 3.5, 95.0);
        assert!(eng.match_rules(&s, 0, false).is_empty());
        assert_eq!(eng.match_rules(&s, 1, true).len(), 1);
    }

    #[test]
    fn sensors_outside_area_ignored() {
        let mut eng = RuleEngine::new(vec![parse_rule(FLOOD).unwrap()]);
        let mut s = ReadingStore::new();
        feed(&mut s, 1, Metric::WaterLevel, 4.0, 0, Position::new(501.0, 0.0));
        feed(&mut s, 2, Metric::Humidity, 99.0, 0, Position::new(0.0, 0.0));
        assert!(eng.match_rules(&s, 0, true).is_empty());
    }

    #[test]
    fn a_dip_inside_the_window_fails_the_condition() {
        let mut eng = RuleEngine::new(vec![parse_rule(FLOOD).unwrap()]);
        let mut s = ReadingStore::new();
        wet(&mut s, 0, 2.0, 95.0);
        wet(&mut s, 30, 3.5, 95.0);
        assert!(eng.match_rules(&s, 30, true).is_empty());
        // the dry reading leaves the 60 s window at t = 60
        wet(&mut s, 60, 3.5, 95.0);
        assert_eq!(eng.match_rules(&s, 60, true).len(), 1);
    }

    /// Replays a schedule of holding/failing ticks against a hand model of
    /// the hysteresis: emit on a rising edge, close after `window` seconds
    /// false.
    #[test]
    fn hysteresis_replay() {
        let rule = parse_rule("rule f when water_level>3@10s within 0,0,100 emit flood severity advice").unwrap();
        let mut eng = RuleEngine::new(vec![rule]);
        let mut s = ReadingStore::new();
        // level per 5-second tick
        let levels = [4.0, 4.0, 1.0, 4.0, 1.0, 1.0, 1.0, 4.0, 4.0, 1.0, 1.0, 1.0, 1.0, 4.0];
        let mut emitted = Vec::new();
        for (k, &v) in levels.iter().enumerate() {
            let t = k as u64 * 5;
            feed(&mut s, 1, Metric::WaterLevel, v, t, Position::default());
            if !eng.match_rules(&s, t, true).is_empty() {
                emitted.push(t);
            }
        }
        // hand trace, window 10 s so a condition sees the last two readings:
        // t=0 holds -> emit. t=5 holds. t=10 fails (1.0). t=15 fails (1.0 in window),
        // 15-5=10 >= 10 closes. t=20..30 fail. t=35 holds only 4.0@35 and 1.0@30 -> fails.
        // t=40 holds (35, 40) -> emit. t=45.. fail, closes at 50. t=65 window {60:1.0,65:4.0} fails.
        assert_eq!(emitted, vec![0, 40]);
    }
}
