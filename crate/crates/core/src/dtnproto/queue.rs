use std::collections::{BTreeSet, VecDeque};

use crate::msgcore::{HardwareId, Message, MessageId, Priority, SimTime};

/// A message in custody plus per-custodian bookkeeping.
#[derive(Clone, Debug, PartialEq)]
pub struct Queued {
    pub msg: Message,
    pub enqueued_at: SimTime,
    /// Centre-addressed messages stay queued after delivery; members already
    /// served are remembered here.
    pub served: BTreeSet<HardwareId>,
    /// Recipients already logged as unable to read this message.
    pub rejected: BTreeSet<HardwareId>,
    /// Arrived from the backhaul server; never uploaded again.
    pub via_backhaul: bool,
}

impl Queued {
    pub fn new(msg: Message, enqueued_at: SimTime) -> Self {
        Self {
            msg,
            enqueued_at,
            served: BTreeSet::new(),
            rejected: BTreeSet::new(),
            via_backhaul: false,
        }
    }
}

/// Priority classes served strictly in order, FIFO inside a class.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MessageQueue {
    classes: [VecDeque<Queued>; 4],
}

impl MessageQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.classes.iter().map(VecDeque::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.iter().all(VecDeque::is_empty)
    }

    pub fn push(&mut self, q: Queued) {
        self.classes[q.msg.priority.code() as usize].push_back(q);
    }

    /// Drain order.
    pub fn iter(&self) -> impl Iterator<Item = &Queued> {
        self.classes.iter().flat_map(|c| c.iter())
    }

    pub fn contains(&self, id: MessageId) -> bool {
        self.iter().any(|q| q.msg.id == id)
    }

    pub fn get_mut(&mut self, id: MessageId) -> Option<&mut Queued> {
        self.classes
            .iter_mut()
            .flat_map(|c| c.iter_mut())
            .find(|q| q.msg.id == id)
    }

    pub fn remove(&mut self, id: MessageId) -> Option<Queued> {
        for class in &mut self.classes {
            if let Some(pos) = class.iter().position(|q| q.msg.id == id) {
                return class.remove(pos);
            }
        }
        None
    }

    /// Removes and returns every entry matching `pred`, in drain order.
    pub fn extract_if<F: FnMut(&Queued) -> bool>(&mut self, mut pred: F) -> Vec<Queued> {
        let mut out = Vec::new();
        for class in &mut self.classes {
            let mut keep = VecDeque::with_capacity(class.len());
            for q in class.drain(..) {
                if pred(&q) {
                    out.push(q);
                } else {
                    keep.push_back(q);
                }
            }
            *class = keep;
        }
        out
    }

    /// Ids in drain order.
    pub fn ids(&self) -> Vec<MessageId> {
        self.iter().map(|q| q.msg.id).collect()
    }

    /// Lowest-priority nonempty class, if any.
    pub fn lowest_class(&self) -> Option<Priority> {
        Priority::ALL
            .iter()
            .rev()
            .copied()
            .find(|p| !self.classes[p.code() as usize].is_empty())
    }

    /// Drops the oldest entry of `class`.
    pub fn pop_oldest(&mut self, class: Priority) -> Option<Queued> {
        self.classes[class.code() as usize].pop_front()
    }
}
