//! Bundles: collector-sealed batches carried between islands.
//!
//! The canonical serialization below is what the integrity tag covers. It is
//! big-endian and length-prefixed so tags are portable:
//!
//! ```text
//! bundle_id        16  (collector:u64, seq:u64)
//! origin_island     8
//! origin_collector  8
//! sealed_at         8  milliseconds
//! count             4
//! count x message:  len:u32, then each field as len:u32 + bytes, in order
//!                   id(16) source(8) destination(1+8) priority(1)
//!                   sensitivity(1) label payload created_at(8, ms) ttl(8, ms)
//! label:            n_readers:u32, readers(8 each), n_writers:u32, writers(8 each)
//! ```

use std::collections::BTreeSet;
use std::fmt;

use super::node::{accept, NodeState};
use super::{Action, DtnError, Env, IslandId, Item, Journal, Role};
use crate::msgcore::{Address, CentreId, FlowLabel, HardwareId, Message, MessageId, Priority, Sensitivity, SimTime};
use crate::secstream::{protect, Window};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BundleId {
    pub collector: HardwareId,
    pub seq: u64,
}

impl fmt::Display for BundleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "b{}-{}", self.collector, self.seq)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Bundle {
    pub bundle_id: BundleId,
    pub origin_island: IslandId,
    pub origin_collector: HardwareId,
    pub messages: Vec<Message>,
    pub sealed_at: SimTime,
    /// Key interval used for the tag.
    pub key_interval: u64,
    pub integrity_tag: Vec<u8>,
}

impl Bundle {
    /// Best (most urgent) priority inside the bundle.
    pub fn priority(&self) -> Priority {
        self.messages.iter().map(|m| m.priority).min().unwrap_or(Priority::Low)
    }

    pub fn ids(&self) -> Vec<MessageId> {
        self.messages.iter().map(|m| m.id).collect()
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&self.bundle_id.collector.0.to_be_bytes());
        out.extend_from_slice(&self.bundle_id.seq.to_be_bytes());
        out.extend_from_slice(&self.origin_island.0.to_be_bytes());
        out.extend_from_slice(&self.origin_collector.0.to_be_bytes());
        out.extend_from_slice(&(self.sealed_at * 1000).to_be_bytes());
        out.extend_from_slice(&(self.messages.len() as u32).to_be_bytes());
        for m in &self.messages {
            let rec = encode_message(m);
            out.extend_from_slice(&(rec.len() as u32).to_be_bytes());
            out.extend_from_slice(&rec);
        }
        out
    }

    /// Rebuilds a bundle from its canonical bytes plus the envelope (tag and
    /// key interval) that travels alongside.
    pub fn from_wire(bytes: &[u8], integrity_tag: Vec<u8>, key_interval: u64) -> Result<Self, DtnError> {
        let mut r = Reader::new(bytes);
        let bundle_id = BundleId {
            collector: HardwareId(r.u64()?),
            seq: r.u64()?,
        };
        let origin_island = IslandId(r.u64()?);
        let origin_collector = HardwareId(r.u64()?);
        let sealed_at = millis_to_secs(r.u64()?)?;
        let count = r.u32()? as usize;
        let mut messages = Vec::with_capacity(count.min(4096));
        for _ in 0..count {
            let rec = r.prefixed()?;
            messages.push(decode_message(rec)?);
        }
        r.finish()?;
        if messages.is_empty() {
            return Err(DtnError::Malformed("empty bundle"));
        }
        let ids: BTreeSet<_> = messages.iter().map(|m| m.id).collect();
        if ids.len() != messages.len() {
            return Err(DtnError::Malformed("duplicate message id in bundle"));
        }
        Ok(Self {
            bundle_id,
            origin_island,
            origin_collector,
            messages,
            sealed_at,
            key_interval,
            integrity_tag,
        })
    }

    fn expected_tag(&self, env: &mut Env<'_>) -> Option<Vec<u8>> {
        if !Window::HISTORY.admits(env.interval, self.key_interval) {
            return None;
        }
        let key = env.keys.key(self.key_interval);
        protect(&self.encode(), Sensitivity::LowSensitive, key)
            .tag
            .map(|t| t.to_vec())
    }

    pub fn verify(&self, env: &mut Env<'_>) -> bool {
        self.expected_tag(env).is_some_and(|t| t == self.integrity_tag)
    }
}

fn millis_to_secs(ms: u64) -> Result<SimTime, DtnError> {
    if !ms.is_multiple_of(1000) {
        return Err(DtnError::Malformed("time is not a whole second"));
    }
    Ok(ms / 1000)
}

fn field(out: &mut Vec<u8>, bytes: &[u8]) {
    out.extend_from_slice(&(bytes.len() as u32).to_be_bytes());
    out.extend_from_slice(bytes);
}

fn encode_message(m: &Message) -> Vec<u8> {
    let mut out = Vec::with_capacity(128 + m.payload.len());
    let mut id = m.id.source.0.to_be_bytes().to_vec();
    id.extend_from_slice(&m.id.seq.to_be_bytes());
    field(&mut out, &id);
    field(&mut out, &m.source.0.to_be_bytes());
    let mut dest = Vec::with_capacity(9);
    match m.destination {
        Address::Unicast(h) => {
            dest.push(0);
            dest.extend_from_slice(&h.0.to_be_bytes());
        }
        Address::Centre(c) => {
            dest.push(1);
            dest.extend_from_slice(&c.0.to_be_bytes());
        }
    }
    field(&mut out, &dest);
    field(&mut out, &[m.priority.code()]);
    field(&mut out, &[m.sensitivity.code()]);
    let mut label = Vec::new();
    for set in [&m.label.readers, &m.label.writers] {
        label.extend_from_slice(&(set.len() as u32).to_be_bytes());
        for h in set {
            label.extend_from_slice(&h.0.to_be_bytes());
        }
    }
    field(&mut out, &label);
    field(&mut out, &m.payload);
    field(&mut out, &(m.created_at * 1000).to_be_bytes());
    field(&mut out, &(m.ttl * 1000).to_be_bytes());
    out
}

fn decode_message(rec: &[u8]) -> Result<Message, DtnError> {
    let mut r = Reader::new(rec);
    let id = {
        let mut f = Reader::new(r.fixed(16)?);
        MessageId {
            source: HardwareId(f.u64()?),
            seq: f.u64()?,
        }
    };
    let source = HardwareId(Reader::new(r.fixed(8)?).u64()?);
    let destination = {
        let d = r.fixed(9)?;
        let value = u64::from_be_bytes(d[1..9].try_into().expect("8 bytes"));
        match d[0] {
            0 => Address::Unicast(HardwareId(value)),
            1 => Address::Centre(CentreId(value)),
            _ => return Err(DtnError::Malformed("unknown address kind")),
        }
    };
    let priority = Priority::from_code(r.fixed(1)?[0]).ok_or(DtnError::Malformed("unknown priority"))?;
    let sensitivity = Sensitivity::from_code(r.fixed(1)?[0]).ok_or(DtnError::Malformed("unknown tier"))?;
    let label = {
        let mut l = Reader::new(r.prefixed()?);
        let mut sets = [BTreeSet::new(), BTreeSet::new()];
        for set in &mut sets {
            let n = l.u32()? as usize;
            let mut last = None;
            for _ in 0..n {
                let h = l.u64()?;
                // canonical form is strictly ascending
                if last.is_some_and(|prev| h <= prev) {
                    return Err(DtnError::Malformed("label entries not in canonical order"));
                }
                last = Some(h);
                set.insert(HardwareId(h));
            }
        }
        l.finish()?;
        let [readers, writers] = sets;
        FlowLabel { readers, writers }
    };
    let payload = r.prefixed()?.to_vec();
    let created_at = millis_to_secs(Reader::new(r.fixed(8)?).u64()?)?;
    let ttl = millis_to_secs(Reader::new(r.fixed(8)?).u64()?)?;
    r.finish()?;
    if id.source != source {
        return Err(DtnError::Malformed("id source does not match source"));
    }
    Ok(Message {
        id,
        source,
        destination,
        priority,
        sensitivity,
        label,
        payload,
        created_at,
        ttl,
    })
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Self { buf }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], DtnError> {
        if self.buf.len() < n {
            return Err(DtnError::Malformed("truncated"));
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    fn u32(&mut self) -> Result<u32, DtnError> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, DtnError> {
        Ok(u64::from_be_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn prefixed(&mut self) -> Result<&'a [u8], DtnError> {
        let n = self.u32()? as usize;
        self.take(n)
    }

    /// A length-prefixed field whose length must be exactly `n`.
    fn fixed(&mut self, n: usize) -> Result<&'a [u8], DtnError> {
        let f = self.prefixed()?;
        if f.len() != n {
            return Err(DtnError::Malformed("field has wrong length"));
        }
        Ok(f)
    }

    fn finish(&self) -> Result<(), DtnError> {
        if self.buf.is_empty() {
            Ok(())
        } else {
            Err(DtnError::Malformed("trailing bytes"))
        }
    }
}

/// Seals queued messages matching `pick` (in drain order, at most `limit`)
/// into a tagged bundle and removes them from the queue.
pub(crate) fn seal_where<F>(
    node: &mut NodeState,
    env: &mut Env<'_>,
    journal: &mut Journal,
    limit: Option<usize>,
    origin_island: IslandId,
    mut pick: F,
) -> Option<Bundle>
where
    F: FnMut(&super::Queued) -> bool,
{
    let chosen: Vec<MessageId> = node
        .queue
        .iter()
        .filter(|q| pick(q))
        .map(|q| q.msg.id)
        .take(limit.unwrap_or(usize::MAX))
        .collect();
    if chosen.is_empty() {
        return None;
    }
    let messages: Vec<Message> = chosen
        .iter()
        .map(|id| {
            node.release(*id);
            let q = node.queue.remove(*id).expect("chosen from queue");
            journal.depart(env.now, &q);
            q.msg
        })
        .collect();
    let bundle_id = BundleId {
        collector: node.id,
        seq: node.bundle_seq,
    };
    node.bundle_seq += 1;
    let mut bundle = Bundle {
        bundle_id,
        origin_island,
        origin_collector: node.id,
        messages,
        sealed_at: env.now,
        key_interval: env.interval,
        integrity_tag: Vec::new(),
    };
    let key = env.keys.key(env.interval);
    bundle.integrity_tag = protect(&bundle.encode(), Sensitivity::LowSensitive, key)
        .tag
        .expect("protected tier carries a tag")
        .to_vec();
    journal.sealed.push((bundle_id, node.id, chosen));
    Some(bundle)
}

fn is_collector(role: Role) -> bool {
    matches!(role, Role::Collector | Role::AuxCollector)
}

/// Seals every queued message addressed off-island (at most `limit`) into a
/// bundle, in priority order.
pub fn make_bundle(
    collector: &mut NodeState,
    env: &mut Env<'_>,
    journal: &mut Journal,
    limit: Option<usize>,
) -> Result<Bundle, DtnError> {
    if !is_collector(collector.role) {
        return Err(DtnError::WrongRole {
            node: collector.id,
            role: collector.role,
            needed: "collector",
        });
    }
    let island = collector.island;
    let directory = env.directory;
    let origin = island.unwrap_or(IslandId::BACKHAUL);
    seal_where(collector, env, journal, limit, origin, |q| {
        directory.destination_island(&q.msg.destination) != island
    })
    .ok_or(DtnError::NothingToBundle(collector.id))
}

/// Outcome counts of one ingest.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct IngestReport {
    pub queued: usize,
    pub delivered: usize,
    pub expired: usize,
    pub duplicates: usize,
    pub dropped: usize,
    pub tampered: bool,
}

pub(crate) fn unpack(
    node: &mut NodeState,
    bundle: Bundle,
    via_backhaul: bool,
    env: &mut Env<'_>,
    journal: &mut Journal,
) -> IngestReport {
    let mut report = IngestReport::default();
    if !bundle.verify(env) {
        journal.push(
            env.now,
            node.id,
            node.id,
            Item::Bundle(bundle.bundle_id),
            Action::DropTampered,
        );
        journal.tampered.extend(bundle.ids());
        report.tampered = true;
        return report;
    }
    for msg in bundle.messages {
        if msg.is_expired(env.now) {
            journal.push(env.now, node.id, node.id, Item::Message(msg.id), Action::DropTtl);
            report.expired += 1;
            continue;
        }
        let id = node.id;
        match accept(node, msg, id, Action::Unbundle, via_backhaul, env, journal) {
            super::node::Accepted::Queued => report.queued += 1,
            super::node::Accepted::Delivered => report.delivered += 1,
            super::node::Accepted::Duplicate => report.duplicates += 1,
            super::node::Accepted::Dropped => report.dropped += 1,
        }
    }
    report
}

/// Verifies and unbundles at a collector. A bad tag discards the whole
/// bundle; expired messages are dropped and known ids skipped.
pub fn ingest_bundle(
    collector: &mut NodeState,
    bundle: Bundle,
    env: &mut Env<'_>,
    journal: &mut Journal,
) -> Result<IngestReport, DtnError> {
    if !is_collector(collector.role) {
        return Err(DtnError::WrongRole {
            node: collector.id,
            role: collector.role,
            needed: "collector",
        });
    }
    Ok(unpack(collector, bundle, false, env, journal))
}

#[cfg(test)]
mod tests {
    use super::super::testutil::*;
    use super::super::Queued;
    use super::*;

    fn collector_with(fx: &mut Fixture, msgs: &[Message]) -> NodeState {
        let mut c = node(5, Role::Collector, Some(1));
        for m in msgs {
            c.seen.insert(m.id);
            c.queue.push(Queued::new(m.clone(), 0));
        }
        let _ = fx;
        c
    }

    #[test]
    fn partitions_local_and_remote() {
        let mut fx = Fixture::new();
        let m1 = fx.msg(1, 2, Priority::Normal, 0); // island 1
        let m2 = fx.msg(1, 12, Priority::Normal, 0); // island 2
        let mut c = collector_with(&mut fx, &[m1.clone(), m2.clone()]);
        let mut j = Journal::new();
        let b = make_bundle(&mut c, &mut fx.env(10), &mut j, None).unwrap();
        assert_eq!(b.ids(), vec![m2.id]);
        assert_eq!(queued_ids(&c), vec![m1.id]);
        assert_eq!(b.origin_island, IslandId(1));
        assert_eq!(b.origin_collector, HardwareId(5));
        assert_eq!(b.sealed_at, 10);
        assert!(!c.seen.contains(&m2.id));
    }

    #[test]
    fn bundle_keeps_priority_order() {
        let mut fx = Fixture::new();
        let m4 = fx.msg(1, 12, Priority::Low, 0);
        let m3 = fx.msg(1, 13, Priority::Emergency, 0);
        let mut c = collector_with(&mut fx, &[m4.clone(), m3.clone()]);
        let b = make_bundle(&mut c, &mut fx.env(0), &mut Journal::new(), None).unwrap();
        assert_eq!(b.ids(), vec![m3.id, m4.id]);
    }

    #[test]
    fn nothing_to_bundle() {
        let mut fx = Fixture::new();
        let m1 = fx.msg(1, 2, Priority::Normal, 0);
        let mut c = collector_with(&mut fx, &[m1]);
        assert_eq!(
            make_bundle(&mut c, &mut fx.env(0), &mut Journal::new(), None),
            Err(DtnError::NothingToBundle(HardwareId(5)))
        );
    }

    #[test]
    fn round_trip_ten() {
        let mut fx = Fixture::new();
        let msgs: Vec<_> = (0..10)
            .map(|i| fx.msg(1, 11 + (i % 3), Priority::ALL[(i % 4) as usize], i))
            .collect();
        let mut c = collector_with(&mut fx, &msgs);
        let order = queued_ids(&c);
        let b = make_bundle(&mut c, &mut fx.env(20), &mut Journal::new(), None).unwrap();
        assert_eq!(b.ids(), order);
        let mut far = node(15, Role::Collector, Some(2));
        let mut j = Journal::new();
        let report = ingest_bundle(&mut far, b, &mut fx.env(30), &mut j).unwrap();
        assert_eq!(report.queued, 10);
        assert_eq!(queued_ids(&far), order);
    }

    #[test]
    fn wire_round_trip() {
        let mut fx = Fixture::new();
        let msgs: Vec<_> = (0..4).map(|i| fx.msg(1, 12, Priority::High, i)).collect();
        let mut c = collector_with(&mut fx, &msgs);
        let b = make_bundle(&mut c, &mut fx.env(7), &mut Journal::new(), None).unwrap();
        let wire = b.encode();
        let back = Bundle::from_wire(&wire, b.integrity_tag.clone(), b.key_interval).unwrap();
        assert_eq!(back, b);
        assert_eq!(&wire[..8], &5u64.to_be_bytes());
        assert_eq!(&wire[32..40], &7000u64.to_be_bytes());
        assert_eq!(&wire[40..44], &4u32.to_be_bytes());
    }

    #[test]
    fn dedup_and_expiry_on_ingest() {
        let mut fx = Fixture::new();
        let fresh = fx.msg(1, 12, Priority::Normal, 0);
        let known = fx.msg(1, 13, Priority::Normal, 0);
        let mut stale = fx.msg(1, 14, Priority::Normal, 0);
        stale.ttl = 5;
        let mut c = collector_with(&mut fx, &[fresh.clone(), known.clone(), stale.clone()]);
        let b = make_bundle(&mut c, &mut fx.env(0), &mut Journal::new(), None).unwrap();
        let mut far = node(15, Role::Collector, Some(2));
        far.seen.insert(known.id);
        let mut j = Journal::new();
        let report = ingest_bundle(&mut far, b, &mut fx.env(10), &mut j).unwrap();
        assert_eq!(report.queued, 1);
        assert_eq!(report.duplicates, 1);
        assert_eq!(report.expired, 1);
        assert_eq!(queued_ids(&far), vec![fresh.id]);
        assert!(j
            .log
            .iter()
            .any(|l| l.action == Action::DropTtl && l.item == Item::Message(stale.id)));
    }

    #[test]
    fn every_flipped_byte_is_caught() {
        let mut fx = Fixture::new();
        let msgs: Vec<_> = (0..3).map(|i| fx.msg(1, 12, Priority::Normal, i)).collect();
        let mut c = collector_with(&mut fx, &msgs);
        let b = make_bundle(&mut c, &mut fx.env(0), &mut Journal::new(), None).unwrap();
        let wire = b.encode();
        for i in 0..wire.len() {
            let mut bad = wire.clone();
            bad[i] ^= 0xff;
            let mut far = node(15, Role::Collector, Some(2));
            let mut j = Journal::new();
            let queued = match Bundle::from_wire(&bad, b.integrity_tag.clone(), b.key_interval) {
                Ok(tampered) => {
                    let r = ingest_bundle(&mut far, tampered, &mut fx.env(1), &mut j).unwrap();
                    assert!(r.tampered, "byte {i} slipped through");
                    r.queued
                }
                Err(_) => 0,
            };
            assert_eq!(queued, 0);
            assert!(far.queue.is_empty());
        }
    }

    #[test]
    fn bad_tag_drops_whole_bundle() {
        let mut fx = Fixture::new();
        let msgs: Vec<_> = (0..3).map(|i| fx.msg(1, 12, Priority::Normal, i)).collect();
        let mut c = collector_with(&mut fx, &msgs);
        let mut b = make_bundle(&mut c, &mut fx.env(0), &mut Journal::new(), None).unwrap();
        b.integrity_tag[0] ^= 1;
        let mut far = node(15, Role::Collector, Some(2));
        let mut j = Journal::new();
        let r = ingest_bundle(&mut far, b.clone(), &mut fx.env(1), &mut j).unwrap();
        assert!(r.tampered);
        assert_eq!(j.log.len(), 1);
        assert_eq!(j.log[0].action, Action::DropTampered);
        assert_eq!(j.tampered, b.ids());
    }
}
