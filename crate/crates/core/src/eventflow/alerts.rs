use std::collections::BTreeSet;

use super::{AlertSubscription, EventId, EventRecord, Mode, Severity};
use crate::msgcore::{Address, HardwareId, Message, MessageFactory, Priority, Sensitivity, SimTime};

/// Passive-mode alert published on the portal.
#[derive(Clone, Debug, PartialEq)]
pub struct PortalEntry {
    pub time: SimTime,
    pub event: EventId,
    pub event_type: String,
    pub severity: Severity,
    pub subscriber: HardwareId,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dispatch {
    /// Emergency alerts for active subscribers, ready to inject at the
    /// backhaul server.
    pub push: Vec<Message>,
    pub portal: Vec<PortalEntry>,
}

fn matches(event: &EventRecord, sub: &AlertSubscription) -> bool {
    sub.event_types.contains(&event.event_type) && sub.area.disc().intersects(&event.area.disc())
}

/// Routes one event to its subscribers. Each (subscriber, mode) pair is
/// served at most once even if several subscriptions match.
pub fn dispatch_alerts(
    event: &EventRecord,
    subs: &[AlertSubscription],
    factory: &mut MessageFactory,
    server: HardwareId,
    t: SimTime,
    ttl: u64,
) -> Dispatch {
    let mut out = Dispatch::default();
    let mut served = BTreeSet::new();
    for sub in subs.iter().filter(|s| matches(event, s)) {
        if !served.insert((sub.subscriber, sub.mode)) {
            continue;
        }
        match sub.mode {
            Mode::Active => {
                let payload = format!(
                    "{} {} {} at {},{} r {}",
                    event.id,
                    event.event_type,
                    event.severity.name(),
                    event.area.centre.x,
                    event.area.centre.y,
                    event.area.radius
                );
                let msg = factory
                    .new_message(
                        server,
                        Address::Unicast(sub.subscriber),
                        Priority::Emergency,
                        Sensitivity::LowSensitive,
                        BTreeSet::from([sub.subscriber]),
                        payload.into_bytes(),
                        t,
                        ttl,
                    )
                    .expect("readers and ttl are set");
                out.push.push(msg);
            }
            Mode::Passive => out.portal.push(PortalEntry {
                time: t,
                event: event.id,
                event_type: event.event_type.clone(),
                severity: event.severity,
                subscriber: sub.subscriber,
            }),
        }
    }
    out
}

/// Remembers what has gone out so an event never alerts a subscriber twice
/// through the same channel.
#[derive(Clone, Debug, Default)]
pub struct AlertDesk {
    sent: BTreeSet<(EventId, HardwareId, Mode)>,
}

impl AlertDesk {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn dispatch(
        &mut self,
        event: &EventRecord,
        subs: &[AlertSubscription],
        factory: &mut MessageFactory,
        server: HardwareId,
        t: SimTime,
        ttl: u64,
    ) -> Dispatch {
        let fresh: Vec<AlertSubscription> = subs
            .iter()
            .filter(|s| !self.sent.contains(&(event.id, s.subscriber, s.mode)))
            .cloned()
            .collect();
        let out = dispatch_alerts(event, &fresh, factory, server, t, ttl);
        for m in &out.push {
            if let Address::Unicast(s) = m.destination {
                self.sent.insert((event.id, s, Mode::Active));
            }
        }
        for p in &out.portal {
            self.sent.insert((event.id, p.subscriber, Mode::Passive));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::super::parse_subscription;
    use super::*;
    use crate::msgcore::{ActivityCentre, CentreId, Position};
    use proptest::prelude::*;

    fn event(x: f64, y: f64, r: f64) -> EventRecord {
        EventRecord {
            id: EventId(7),
            rule: "flood".into(),
            event_type: "flood".into(),
            severity: Severity::EmergencyWarning,
            area: ActivityCentre::new(CentreId(0), Position::new(x, y), r).unwrap(),
            detected_at: 0,
            evidence: Vec::new(),
        }
    }

    #[test]
    fn active_and_passive() {
        let subs = vec![
            parse_subscription("sub 12 area 100,0,50 types flood mode active").unwrap(),
            parse_subscription("sub 13 area 0,100,50 types flood,fire mode passive").unwrap(),
        ];
        let d = dispatch_alerts(
            &event(0.0, 0.0, 100.0),
            &subs,
            &mut MessageFactory::new(),
            HardwareId(99),
            5,
            600,
        );
        assert_eq!(d.push.len(), 1);
        let m = &d.push[0];
        assert_eq!(m.destination, Address::Unicast(HardwareId(12)));
        assert_eq!(m.priority, Priority::Emergency);
        assert_eq!(m.sensitivity, Sensitivity::LowSensitive);
        assert_eq!(m.label.readers, BTreeSet::from([HardwareId(12)]));
        assert_eq!(m.source, HardwareId(99));
        assert_eq!(d.portal.len(), 1);
        assert_eq!(d.portal[0].subscriber, HardwareId(13));
    }

    #[test]
    fn disjoint_area_gets_nothing() {
        let subs = vec![parse_subscription("sub 12 area 1000,0,50 types flood mode active").unwrap()];
        let d = dispatch_alerts(
            &event(0.0, 0.0, 100.0),
            &subs,
            &mut MessageFactory::new(),
            HardwareId(99),
            5,
            600,
        );
        assert_eq!(d, Dispatch::default());
    }

    #[test]
    fn exactly_once() {
        let subs = vec![
            parse_subscription("sub 12 area 0,0,50 types flood mode active").unwrap(),
            parse_subscription("sub 12 area 10,0,50 types flood mode active").unwrap(),
        ];
        let mut desk = AlertDesk::new();
        let mut f = MessageFactory::new();
        let ev = event(0.0, 0.0, 100.0);
        assert_eq!(desk.dispatch(&ev, &subs, &mut f, HardwareId(99), 5, 600).push.len(), 1);
        assert_eq!(desk.dispatch(&ev, &subs, &mut f, HardwareId(99), 6, 600).push.len(), 0);
    }

    fn arb_sub() -> impl Strategy<Value = AlertSubscription> {
        (
            1u64..6,
            -500.0..500.0f64,
            -500.0..500.0f64,
            1.0..300.0f64,
            any::<bool>(),
            any::<bool>(),
        )
            .prop_map(|(id, x, y, r, flood, active)| AlertSubscription {
                subscriber: HardwareId(id),
                area: ActivityCentre::new(CentreId(id), Position::new(x, y), r).unwrap(),
                event_types: if flood {
                    BTreeSet::from(["flood".to_string(), "fire".to_string()])
                } else {
                    BTreeSet::from(["fire".to_string()])
                },
                mode: if active { Mode::Active } else { Mode::Passive },
            })
    }

    proptest! {
        #[test]
        fn dispatch_equals_naive_predicate(subs in proptest::collection::vec(arb_sub(), 10)) {
            let ev = event(0.0, 0.0, 150.0);
            let d = dispatch_alerts(&ev, &subs, &mut MessageFactory::new(), HardwareId(99), 0, 60);
            let mut want_push = BTreeSet::new();
            let mut want_portal = BTreeSet::new();
            for s in &subs {
                let dx = s.area.centre.x;
                let dy = s.area.centre.y;
                let hit = (dx * dx + dy * dy).sqrt() <= s.area.radius + 150.0
                    && s.event_types.contains("flood");
                if hit {
                    match s.mode {
                        Mode::Active => { want_push.insert(s.subscriber); }
                        Mode::Passive => { want_portal.insert(s.subscriber); }
                    }
                }
            }
            let got_push: Vec<HardwareId> = d.push.iter().map(|m| match m.destination {
                Address::Unicast(h) => h,
                Address::Centre(_) => unreachable!(),
            }).collect();
            let got_portal: Vec<HardwareId> = d.portal.iter().map(|p| p.subscriber).collect();
            prop_assert_eq!(got_push.len(), want_push.len());
            prop_assert_eq!(got_portal.len(), want_portal.len());
            prop_assert_eq!(got_push.into_iter().collect::<BTreeSet<_>>(), want_push);
            prop_assert_eq!(got_portal.into_iter().collect::<BTreeSet<_>>(), want_portal);
        }

        #[test]
        fn intersection_is_symmetric(a in arb_sub(), b in arb_sub()) {
            prop_assert_eq!(a.area.disc().intersects(&b.area.disc()), b.area.disc().intersects(&a.area.disc()));
        }
    }
}
