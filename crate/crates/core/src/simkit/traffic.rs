use std::collections::BTreeSet;

use rand::Rng;

use super::scenario::{Destination, Scenario, TrafficSpec};
use super::{step_at_or_after, stream, Concern};
use crate::msgcore::{Address, HardwareId, SimTime};

/// One scheduled message: the `k`-th of `traffic[traffic]`, at step `time`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Generation {
    pub time: SimTime,
    pub traffic: usize,
    pub k: u64,
}

fn raw_times(s: &Scenario, index: usize, t: &TrafficSpec) -> Vec<SimTime> {
    let start = t.start.unwrap_or(0);
    let end = t.end.unwrap_or(s.duration).min(s.duration);
    let cap = t.count.unwrap_or(u64::MAX);
    if !t.times.is_empty() {
        return t.times.clone();
    }
    let mut out = Vec::new();
    if let Some(every) = t.every.filter(|e| *e > 0) {
        let mut x = start;
        while x <= end && (out.len() as u64) < cap {
            out.push(x);
            x += every;
        }
    } else if let Some(rate) = t.rate.filter(|r| *r > 0.0) {
        let mut rng = stream(s.seed, Concern::Traffic, index as u64);
        let mut x = start as f64;
        loop {
            let u: f64 = rng.gen();
            x += -(1.0 - u).ln() / rate;
            if x > end as f64 || (out.len() as u64) >= cap {
                break;
            }
            out.push(x.ceil() as SimTime);
        }
    }
    out
}

/// Every message the scenario schedules, in generation order: by step, then
/// by traffic entry, then by position within the entry.
pub fn expand_traffic(s: &Scenario) -> Vec<Generation> {
    let mut out: Vec<Generation> = s
        .traffic
        .iter()
        .enumerate()
        .flat_map(|(i, t)| {
            raw_times(s, i, t)
                .into_iter()
                .enumerate()
                .map(move |(k, x)| (i, k as u64, x))
        })
        .filter_map(|(i, k, x)| {
            let time = step_at_or_after(s, x);
            (time <= s.duration).then_some(Generation { time, traffic: i, k })
        })
        .collect();
    out.sort();
    out
}

impl TrafficSpec {
    pub fn address(&self) -> Address {
        match self.destination {
            Destination::Node(h) => Address::Unicast(h),
            Destination::Centre(c) => Address::Centre(c),
        }
    }

    /// Explicit readers, or the destination node for unicast traffic.
    pub fn reader_set(&self) -> BTreeSet<HardwareId> {
        match (&self.readers, self.destination) {
            (Some(r), _) => r.iter().copied().collect(),
            (None, Destination::Node(h)) => BTreeSet::from([h]),
            (None, Destination::Centre(_)) => BTreeSet::new(),
        }
    }

    pub fn payload_for(&self, k: u64) -> Vec<u8> {
        match &self.payload {
            Some(p) => p.clone().into_bytes(),
            None => format!("{} #{k}", self.source).into_bytes(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scenario(traffic: &str) -> Scenario {
        let text = format!(
            r#"{{"schema":1,"duration":100,"tick":5,"radio_range":10,
            "islands":[{{"id":1,"disc":{{"centre":[0,0],"radius":50}}}}],
            "nodes":[{{"id":1,"role":"generator","island":1,"position":[0,0]}},
                     {{"id":2,"role":"collector","island":1,"position":[1,0]}}],
            "traffic":[{traffic}]}}"#
        );
        Scenario::from_json(&text).unwrap()
    }

    #[test]
    fn explicit_times_snap_up_to_steps() {
        let s = scenario(r#"{"source":1,"destination":{"node":2},"ttl":10,"times":[0,1,5,99]}"#);
        let times: Vec<SimTime> = expand_traffic(&s).iter().map(|g| g.time).collect();
        assert_eq!(times, vec![0, 5, 5, 100]);
    }

    #[test]
    fn periodic_with_count() {
        let s = scenario(r#"{"source":1,"destination":{"node":2},"ttl":10,"every":20,"start":10,"count":3}"#);
        let times: Vec<SimTime> = expand_traffic(&s).iter().map(|g| g.time).collect();
        assert_eq!(times, vec![10, 30, 50]);
    }

    #[test]
    fn poisson_is_seeded() {
        let s = scenario(r#"{"source":1,"destination":{"node":2},"ttl":10,"rate":0.2}"#);
        let a = expand_traffic(&s);
        assert_eq!(a, expand_traffic(&s));
        assert!(!a.is_empty());
        let mut t = s.clone();
        t.seed = 99;
        assert_ne!(a, expand_traffic(&t));
    }
}
