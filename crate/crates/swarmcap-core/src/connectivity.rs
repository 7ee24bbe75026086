//! Distance-weighted connectivity and disk-graph snapshot metrics.
//!
//! Link weight falls from 1 to 0 as the pair distance grows from 60% to 100%
//! of the transmission range; the weighted degree of a UAV sums those weights
//! over its neighbors. Snapshot metrics (number of connected components,
//! average node degree) are computed on the inclusive disk graph.

use thiserror::Error;

use crate::grid::{Cell, GridSpec, Vec2};

#[derive(Debug, Error, PartialEq)]
pub enum ConnectivityError {
    #[error("transmission range must be positive, got {0}")]
    NonPositiveRange(f64),
    #[error("average connectivity is undefined on an empty graph")]
    EmptyGraph,
}

/// Validated transmission range in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TxRange(f64);

impl TxRange {
    pub fn new(meters: f64) -> Result<Self, ConnectivityError> {
        if !(meters > 0.0) || !meters.is_finite() {
            return Err(ConnectivityError::NonPositiveRange(meters));
        }
        Ok(TxRange(meters))
    }

    pub fn meters(self) -> f64 {
        self.0
    }
}

/// Distance-weighted link weight: 1 within 60% of the range, falling
/// linearly as `2.5 * (1 - d / Tx)` out to the range, 0 beyond it.
pub fn gamma(distance_m: f64, tx: TxRange) -> f64 {
    debug_assert!(distance_m >= 0.0);
    let range = tx.meters();
    if distance_m <= 0.6 * range {
        1.0
    } else if distance_m <= range {
        2.5 * (1.0 - distance_m / range)
    } else {
        0.0
    }
}

/// Distance-weighted degree: the sum of link weights from `position` to each
/// neighbor position.
pub fn weighted_degree(position: Vec2, neighbors: &[Vec2], tx: TxRange) -> f64 {
    neighbors
        .iter()
        .map(|&n| gamma(position.distance(n), tx))
        .sum()
}

/// A neighbor's announced movement, as carried by its latest hello message.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighborClaim {
    pub id: u32,
    pub next_waypoint_cell: Cell,
    pub timestamp_s: f64,
}

/// Estimated weighted degree of this UAV at a candidate waypoint cell:
/// every fresh claim places its neighbor at the center of the announced
/// next-waypoint cell, and this UAV at the candidate cell center. Claims
/// older than `max_age_s` are dropped.
pub fn estimate_k_at(
    candidate: Cell,
    claims: &[NeighborClaim],
    grid: &GridSpec,
    tx: TxRange,
    now_s: f64,
    max_age_s: f64,
) -> f64 {
    let here = grid.center(candidate);
    claims
        .iter()
        .filter(|c| now_s - c.timestamp_s <= max_age_s)
        .map(|c| gamma(here.distance(grid.center(c.next_waypoint_cell)), tx))
        .sum()
}

/// Snapshot disk graph over UAV positions: an undirected edge links every
/// pair within the transmission range (inclusive).
#[derive(Debug, Clone, PartialEq)]
pub struct LinkGraph {
    ids: Vec<u32>,
    edges: Vec<(usize, usize)>,
    timestamp_s: f64,
}

impl LinkGraph {
    pub fn node_count(&self) -> usize {
        self.ids.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    /// Edges as index pairs into `ids`.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn timestamp_s(&self) -> f64 {
        self.timestamp_s
    }
}

/// Builds the snapshot graph at `timestamp_s` from `(id, position)` pairs.
pub fn build_graph(positions: &[(u32, Vec2)], tx: TxRange, timestamp_s: f64) -> LinkGraph {
    let mut edges = Vec::new();
    for i in 0..positions.len() {
        for j in i + 1..positions.len() {
            if positions[i].1.distance(positions[j].1) <= tx.meters() {
                edges.push((i, j));
            }
        }
    }
    LinkGraph {
        ids: positions.iter().map(|&(id, _)| id).collect(),
        edges,
        timestamp_s,
    }
}

/// Number of connected components (0 for an empty graph).
pub fn ncc(graph: &LinkGraph) -> usize {
    let mut dsu = DisjointSet::new(graph.node_count());
    for &(u, v) in &graph.edges {
        dsu.union(u, v);
    }
    dsu.component_count()
}

/// Average node degree, `2 * |E| / |V|`. Rejects the empty graph.
pub fn anc(graph: &LinkGraph) -> Result<f64, ConnectivityError> {
    if graph.node_count() == 0 {
        return Err(ConnectivityError::EmptyGraph);
    }
    Ok(2.0 * graph.edge_count() as f64 / graph.node_count() as f64)
}

struct DisjointSet {
    parent: Vec<usize>,
    rank: Vec<u8>,
    components: usize,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        DisjointSet {
            parent: (0..n).collect(),
            rank: vec![0; n],
            components: n,
        }
    }

    fn find(&mut self, mut node: usize) -> usize {
        let mut root = node;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        while self.parent[node] != node {
            let next = self.parent[node];
            self.parent[node] = root;
            node = next;
        }
        root
    }

    fn union(&mut self, a: usize, b: usize) {
        let mut a = self.find(a);
        let mut b = self.find(b);
        if a == b {
            return;
        }
        if self.rank[a] < self.rank[b] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b] = a;
        if self.rank[a] == self.rank[b] {
            self.rank[a] += 1;
        }
        self.components -= 1;
    }

    fn component_count(&self) -> usize {
        self.components
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn tx(m: f64) -> TxRange {
        TxRange::new(m).unwrap()
    }

    #[test]
    fn tx_range_rejects_non_positive() {
        assert_eq!(
            TxRange::new(0.0),
            Err(ConnectivityError::NonPositiveRange(0.0))
        );
        assert!(TxRange::new(-5.0).is_err());
        assert!(TxRange::new(1000.0).is_ok());
    }

    #[test]
    fn gamma_branches() {
        let t = tx(1000.0);
        assert_eq!(gamma(500.0, t), 1.0);
        assert_relative_eq!(gamma(800.0, t), 0.5, max_relative = 1e-12);
        assert_eq!(gamma(1001.0, t), 0.0);
    }

    #[test]
    fn gamma_is_continuous_at_branch_points() {
        let t = tx(1000.0);
        assert_relative_eq!(gamma(600.0, t), 1.0, max_relative = 1e-12);
        assert_relative_eq!(gamma(600.0 + 1e-9, t), 1.0, epsilon = 1e-8);
        assert!(gamma(1000.0, t).abs() < 1e-12);
    }

    #[test]
    fn weighted_degree_sums_links() {
        let t = tx(1000.0);
        let origin = Vec2::ZERO;
        assert_eq!(weighted_degree(origin, &[], t), 0.0);
        let close: Vec<Vec2> = (0..4).map(|i| Vec2::new(100.0 * (i + 1) as f64, 0.0)).collect();
        assert_relative_eq!(weighted_degree(origin, &close, t), 4.0, max_relative = 1e-12);
        let mixed = vec![Vec2::new(500.0, 0.0), Vec2::new(800.0, 0.0)];
        assert_relative_eq!(weighted_degree(origin, &mixed, t), 1.5, max_relative = 1e-12);
    }

    #[test]
    fn estimate_k_places_claims_at_cell_centers() {
        let g = GridSpec::new(60, 100.0).unwrap();
        let t = tx(1000.0);
        assert_eq!(estimate_k_at(Cell::new(30, 30), &[], &g, t, 10.0, 4.0), 0.0);

        // Claimed cell 3 cells east: centers are 300 m apart.
        let claims = [NeighborClaim {
            id: 1,
            next_waypoint_cell: Cell::new(33, 30),
            timestamp_s: 10.0,
        }];
        assert_relative_eq!(
            estimate_k_at(Cell::new(30, 30), &claims, &g, t, 10.0, 4.0),
            1.0,
            max_relative = 1e-12
        );

        // 9 cells east: 900 m apart.
        let claims = [NeighborClaim {
            id: 1,
            next_waypoint_cell: Cell::new(39, 30),
            timestamp_s: 10.0,
        }];
        assert_relative_eq!(
            estimate_k_at(Cell::new(30, 30), &claims, &g, t, 10.0, 4.0),
            0.25,
            max_relative = 1e-12
        );
    }

    #[test]
    fn estimate_k_drops_stale_claims() {
        let g = GridSpec::new(60, 100.0).unwrap();
        let t = tx(1000.0);
        let claims = [
            NeighborClaim {
                id: 1,
                next_waypoint_cell: Cell::new(31, 30),
                timestamp_s: 10.0,
            },
            NeighborClaim {
                id: 2,
                next_waypoint_cell: Cell::new(30, 31),
                timestamp_s: 5.9,
            },
        ];
        // Claim at t = 5.9 is older than 4 s at now = 10.
        assert_relative_eq!(
            estimate_k_at(Cell::new(30, 30), &claims, &g, t, 10.0, 4.0),
            1.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn build_graph_threshold_is_inclusive() {
        let t = tx(1000.0);
        let near = build_graph(
            &[(0, Vec2::ZERO), (1, Vec2::new(999.0, 0.0))],
            t,
            0.0,
        );
        assert_eq!(near.edge_count(), 1);
        let exact = build_graph(
            &[(0, Vec2::ZERO), (1, Vec2::new(1000.0, 0.0))],
            t,
            0.0,
        );
        assert_eq!(exact.edge_count(), 1);
        let far = build_graph(
            &[(0, Vec2::ZERO), (1, Vec2::new(1001.0, 0.0))],
            t,
            0.0,
        );
        assert_eq!(far.edge_count(), 0);
    }

    #[test]
    fn coincident_uavs_form_complete_graph() {
        let t = tx(1000.0);
        let positions: Vec<(u32, Vec2)> = (0..5).map(|i| (i, Vec2::new(10.0, 20.0))).collect();
        let g = build_graph(&positions, t, 0.0);
        assert_eq!(g.edge_count(), 10);
        assert_eq!(ncc(&g), 1);
        assert_relative_eq!(anc(&g).unwrap(), 4.0);
    }

    #[test]
    fn ncc_counts_components() {
        let t = tx(100.0);
        let isolated: Vec<(u32, Vec2)> =
            (0..6).map(|i| (i, Vec2::new(1000.0 * i as f64, 0.0))).collect();
        let g = build_graph(&isolated, t, 0.0);
        assert_eq!(ncc(&g), 6);
        assert_relative_eq!(anc(&g).unwrap(), 0.0);

        // Two cliques far apart.
        let mut positions = Vec::new();
        for i in 0..3 {
            positions.push((i, Vec2::new(10.0 * i as f64, 0.0)));
        }
        for i in 3..6 {
            positions.push((i, Vec2::new(10.0 * i as f64 + 5000.0, 0.0)));
        }
        assert_eq!(ncc(&build_graph(&positions, t, 0.0)), 2);
    }

    #[test]
    fn anc_path_graph() {
        let t = tx(100.0);
        let path: Vec<(u32, Vec2)> = (0..3).map(|i| (i, Vec2::new(90.0 * i as f64, 0.0))).collect();
        let g = build_graph(&path, t, 0.0);
        assert_eq!(g.edge_count(), 2);
        assert_relative_eq!(anc(&g).unwrap(), 4.0 / 3.0, max_relative = 1e-12);
    }

    #[test]
    fn anc_rejects_empty_graph() {
        let g = build_graph(&[], tx(100.0), 0.0);
        assert_eq!(anc(&g), Err(ConnectivityError::EmptyGraph));
        assert_eq!(ncc(&g), 0);
    }
}
