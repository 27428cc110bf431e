//! Backhaul path: collectors (and generators) that reach the internet push
//! traffic to the server, which re-bundles it per destination island.
//!
//! The server hands a collector every bundle for its own island. Bundles for
//! islands that have never uplinked are relayed through whichever collector
//! does uplink, so they can continue by super mule. A bundle is never relayed
//! through a collector that already carried one of its messages (its flow
//! label lists that collector as a writer), and messages that arrived by
//! relay are never uploaded again.

use std::collections::BTreeSet;

use super::bundle::{seal_where, unpack};
use super::node::accept;
use super::{Action, DtnError, Env, IslandId, Item, Journal, NodeState, Role};
use crate::msgcore::Message;

fn check_server(server: &NodeState) -> Result<(), DtnError> {
    if server.role != Role::BackhaulServer {
        return Err(DtnError::WrongRole {
            node: server.id,
            role: server.role,
            needed: "backhaul server",
        });
    }
    Ok(())
}

/// Accepts a message originating at the server (an alert). Call
/// [`server_flush`] afterwards to seal it for pickup.
pub fn server_inject(
    server: &mut NodeState,
    msg: Message,
    env: &Env<'_>,
    journal: &mut Journal,
) -> Result<(), DtnError> {
    check_server(server)?;
    let id = server.id;
    accept(server, msg, id, Action::Submit, false, env, journal);
    Ok(())
}

/// Seals the server's loose messages into one bundle per destination island.
pub fn server_flush(server: &mut NodeState, env: &mut Env<'_>, journal: &mut Journal) {
    let directory = env.directory;
    let targets: BTreeSet<IslandId> = server
        .queue
        .iter()
        .map(|q| {
            directory
                .destination_island(&q.msg.destination)
                .unwrap_or(IslandId::BACKHAUL)
        })
        .collect();
    for island in targets {
        let bundle = seal_where(server, env, journal, None, IslandId::BACKHAUL, |q| {
            directory
                .destination_island(&q.msg.destination)
                .unwrap_or(IslandId::BACKHAUL)
                == island
        });
        if let Some(b) = bundle {
            server.stored.entry(island).or_default().push(b);
        }
    }
}

pub fn try_uplink(
    node: &mut NodeState,
    server: &mut NodeState,
    env: &mut Env<'_>,
    journal: &mut Journal,
) -> Result<(), DtnError> {
    check_server(server)?;
    if !node.backhaul_available {
        return Err(DtnError::NoBackhaul(node.id));
    }
    if !node.online {
        return Err(DtnError::Offline(node.id));
    }
    match node.role {
        Role::Collector => {
            let island = node.island;
            let directory = env.directory;
            let origin = island.unwrap_or(IslandId::BACKHAUL);
            if let Some(b) = seal_where(node, env, journal, None, origin, |q| {
                !q.via_backhaul && directory.destination_island(&q.msg.destination) != island
            }) {
                node.bundles.push(b);
            }
            for bundle in std::mem::take(&mut node.bundles) {
                journal.push(
                    env.now,
                    node.id,
                    server.id,
                    Item::Bundle(bundle.bundle_id),
                    Action::UplinkUpload,
                );
                unpack(server, bundle, false, env, journal);
            }
            if let Some(i) = island {
                server.connected.insert(i);
            }
            server_flush(server, env, journal);

            let wanted: Vec<IslandId> = server
                .stored
                .keys()
                .copied()
                .filter(|k| *k != IslandId::BACKHAUL && (Some(*k) == island || !server.connected.contains(k)))
                .collect();
            for k in wanted {
                let own = Some(k) == island;
                let stored = server.stored.remove(&k).unwrap_or_default();
                let (take, keep): (Vec<_>, Vec<_>) = stored
                    .into_iter()
                    .partition(|b| own || !b.messages.iter().any(|m| m.label.writers.contains(&node.id)));
                if !keep.is_empty() {
                    server.stored.insert(k, keep);
                }
                for bundle in take {
                    journal.push(
                        env.now,
                        server.id,
                        node.id,
                        Item::Bundle(bundle.bundle_id),
                        Action::UplinkFetch,
                    );
                    unpack(node, bundle, true, env, journal);
                }
            }
        }
        Role::Generator => {
            let outgoing = node.queue.extract_if(|_| true);
            for q in outgoing {
                journal.depart(env.now, &q);
                node.release(q.msg.id);
                accept(server, q.msg, node.id, Action::UplinkUpload, false, env, journal);
            }
            server_flush(server, env, journal);
        }
        _ => {}
    }
    Ok(())
}
