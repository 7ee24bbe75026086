//! Idealized periodic hello-message exchange among 1-hop neighbors.
//!
//! Every hello tick each UAV broadcasts its id, position, announced next
//! waypoint, and the 5x5 pheromone patch around its current cell. Delivery is
//! lossless and same-tick to every other UAV within transmission range.
//! Receivers merge the patch into their private field and refresh their
//! neighbor table.

use std::collections::BTreeMap;

use crate::connectivity::{NeighborClaim, TxRange};
use crate::grid::{Cell, Vec2};
use crate::kinematics::UavState;
use crate::pheromone::{PheromoneField, PheromonePatch};

/// One periodic hello broadcast.
#[derive(Debug, Clone, PartialEq)]
pub struct HelloMessage {
    pub sender_id: u32,
    pub position: Vec2,
    pub next_waypoint_cell: Cell,
    pub patch: PheromonePatch,
    pub timestamp_s: f64,
}

/// Builds the hello message for one UAV at hello tick `t_s`: current
/// position, announced waypoint, and the pheromone patch centered at the
/// current cell.
pub fn build_hello(uav: &UavState, field: &PheromoneField, t_s: f64) -> HelloMessage {
    HelloMessage {
        sender_id: uav.id,
        position: uav.position,
        next_waypoint_cell: uav.next_waypoint_cell,
        patch: field.extract_patch(uav.current_cell),
        timestamp_s: t_s,
    }
}

/// Latest state heard from each neighbor. Entries older than two hello
/// periods are ignored on read.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborTable {
    hello_period_s: f64,
    entries: BTreeMap<u32, NeighborEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighborEntry {
    pub position: Vec2,
    pub next_waypoint_cell: Cell,
    pub timestamp_s: f64,
}

impl NeighborTable {
    pub fn new(hello_period_s: f64) -> Self {
        NeighborTable {
            hello_period_s,
            entries: BTreeMap::new(),
        }
    }

    /// Maximum age a table entry (or claim) may have before it is considered
    /// stale: two hello periods.
    pub fn max_age_s(&self) -> f64 {
        2.0 * self.hello_period_s
    }

    pub fn upsert(&mut self, msg: &HelloMessage) {
        self.entries.insert(
            msg.sender_id,
            NeighborEntry {
                position: msg.position,
                next_waypoint_cell: msg.next_waypoint_cell,
                timestamp_s: msg.timestamp_s,
            },
        );
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entry(&self, id: u32) -> Option<&NeighborEntry> {
        self.entries.get(&id)
    }

    /// Entries no older than two hello periods, in ascending id order.
    pub fn fresh_entries(&self, now_s: f64) -> impl Iterator<Item = (u32, &NeighborEntry)> {
        let max_age = self.max_age_s();
        self.entries
            .iter()
            .filter(move |(_, e)| now_s - e.timestamp_s <= max_age)
            .map(|(&id, e)| (id, e))
    }

    /// Fresh entries converted to waypoint claims for connectivity
    /// estimation.
    pub fn claims(&self, now_s: f64) -> Vec<NeighborClaim> {
        self.fresh_entries(now_s)
            .map(|(id, e)| NeighborClaim {
                id,
                next_waypoint_cell: e.next_waypoint_cell,
                timestamp_s: e.timestamp_s,
            })
            .collect()
    }
}

/// Range-gated same-tick delivery: receiver `i` gets the indices of all
/// messages whose sender is within the transmission range (inclusive),
/// excluding its own. `positions` must be index-aligned with `messages`.
pub fn deliver(
    messages: &[HelloMessage],
    positions: &[(u32, Vec2)],
    tx: TxRange,
) -> Vec<Vec<usize>> {
    debug_assert_eq!(messages.len(), positions.len());
    let mut inboxes = vec![Vec::new(); positions.len()];
    for i in 0..positions.len() {
        for j in 0..positions.len() {
            if i == j {
                continue;
            }
            if positions[i].1.distance(positions[j].1) <= tx.meters() {
                inboxes[i].push(j);
            }
        }
    }
    inboxes
}

/// Applies an inbox to the receiving UAV's private state: each message's
/// patch is max-merged into the field and the neighbor table is refreshed.
pub fn apply_inbox<'a>(
    table: &mut NeighborTable,
    field: &mut PheromoneField,
    inbox: impl Iterator<Item = &'a HelloMessage>,
) {
    for msg in inbox {
        field.merge_patch(&msg.patch);
        table.upsert(msg);
    }
}
