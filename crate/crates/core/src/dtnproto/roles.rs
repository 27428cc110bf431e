use std::collections::BTreeSet;

use super::{DtnError, IslandId, NodeState, Role};
use crate::msgcore::HardwareId;

/// Online collector of `island`, if any.
pub fn active_collector(island: IslandId, nodes: &[NodeState]) -> Option<HardwareId> {
    nodes
        .iter()
        .find(|n| n.island == Some(island) && n.role == Role::Collector && n.online)
        .map(|n| n.id)
}

/// Hands the collector role to a standby when the island's collector is
/// offline. The failed collector is demoted so that it comes back as the
/// standby. Returns the promoted node, or `None` when nothing needed doing.
pub fn promote_auxiliary(island: IslandId, nodes: &mut [NodeState]) -> Result<Option<HardwareId>, DtnError> {
    if active_collector(island, nodes).is_some() {
        return Ok(None);
    }
    let has_failed_collector = nodes
        .iter()
        .any(|n| n.island == Some(island) && n.role == Role::Collector);
    if !has_failed_collector {
        return Ok(None);
    }
    let aux = nodes
        .iter_mut()
        .filter(|n| n.island == Some(island) && n.role == Role::AuxCollector && n.online)
        .min_by_key(|n| n.id);
    let Some(aux) = aux else {
        return Err(DtnError::NoAuxiliary(island));
    };
    aux.role = Role::Collector;
    let promoted = aux.id;
    for n in nodes.iter_mut() {
        if n.island == Some(island) && n.role == Role::Collector && n.id != promoted {
            n.role = Role::AuxCollector;
        }
    }
    Ok(Some(promoted))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Registration {
    Accepted,
    /// The hardware id is already registered: a forged identity.
    Rejected,
}

pub fn register_node(registry: &mut BTreeSet<HardwareId>, id: HardwareId) -> Registration {
    if registry.insert(id) {
        Registration::Accepted
    } else {
        Registration::Rejected
    }
}

/// Registry that keeps count of sybil rejections.
#[derive(Clone, Debug, Default)]
pub struct Registry {
    pub ids: BTreeSet<HardwareId>,
    pub sybil_rejections: u64,
}

impl Registry {
    pub fn register(&mut self, id: HardwareId) -> Registration {
        let r = register_node(&mut self.ids, id);
        if r == Registration::Rejected {
            self.sybil_rejections += 1;
        }
        r
    }
}
