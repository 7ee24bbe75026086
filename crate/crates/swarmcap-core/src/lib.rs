//! Deterministic, seedable simulator for decentralized fixed-wing UAV swarm
//! area search.
//!
//! A swarm explores a square cell grid guided by digital repel pheromones.
//! Each UAV owns a private pheromone field, exchanges 5x5 map patches and
//! movement announcements over periodic hello messages, and picks its next
//! waypoint with one of three policies:
//!
//! * the connectivity-aware pheromone model, which trades coverage speed
//!   against staying connected to neighbors;
//! * a repel-pheromone baseline that maximizes coverage only;
//! * a chaotic ant-colony model blended with a flock-centering force.
//!
//! The engine runs a fixed-order discrete loop and reports coverage time,
//! Jain coverage fairness, and disk-graph connectivity metrics (number of
//! connected components and average node degree), with seeded batches
//! aggregated as mean and standard error.

pub mod comms;
pub mod connectivity;
pub mod engine;
pub mod grid;
pub mod kinematics;
pub mod pheromone;
pub mod policies;

pub use comms::{build_hello, deliver, HelloMessage, NeighborTable};
pub use connectivity::{
    anc, build_graph, estimate_k_at, gamma, ncc, weighted_degree, LinkGraph, NeighborClaim,
    TxRange,
};
pub use engine::{
    coverage_time, fairness, mean_sem, run, run_batch, run_batch_jobs, run_with_hooks,
    BatchResult, ConfigError, MeanSem, MetricSample, Policy, RunError, RunHooks, RunResult,
    ScanLedger, ScenarioConfig,
};
pub use grid::{Cell, GridError, GridSpec, Vec2};
pub use kinematics::{
    advance, candidate_waypoints, cells_traversed, discretize_heading, waypoint_reached,
    CollisionAvoider, Direction, UavState,
};
pub use pheromone::{FieldError, PheromoneField, PheromonePatch};
pub use policies::{
    best_candidate,
    cacoc2_select, cacoc2_velocity, cacoc_direction, cap_select, flock_force, pheromone_select,
    CandidateEvaluation, ChaoticState, Lar,
};
