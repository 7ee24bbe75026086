//! Waypoint-selection policies.
//!
//! Three mobility models share the same candidate fan and deposit rule but
//! score candidates differently:
//!
//! * connectivity-aware (`cap_select`): maximizes `W = alpha * (1 - P')`
//!   where `P'` is the look-ahead pheromone (clamped to `[0, 1]`) and
//!   `alpha` saturates at 1 once the estimated weighted degree reaches the
//!   tuning threshold `beta`;
//! * repel-pheromone baseline (`pheromone_select`): pure coverage, identical
//!   to the connectivity-aware rule with `alpha` fixed at 1;
//! * chaos-plus-flocking (`cacoc2_select`): left/ahead/right choice driven by
//!   the first return map of a Rossler attractor and blended with a flock
//!   force from neighbor headings.

use rand::Rng;

use crate::comms::NeighborTable;
use crate::connectivity::{estimate_k_at, TxRange};
use crate::grid::{Cell, GridSpec, Vec2};
use crate::kinematics::{bearing, candidate_waypoints, normalize_angle, Candidate, Direction, UavState};
use crate::pheromone::PheromoneField;

/// Magnitude of the repel pheromone deposited at each visited waypoint cell.
pub const DEPOSIT_MAGNITUDE: f64 = 1.0;

/// Connectivity gate: `k / beta` below the threshold, saturating at 1 once
/// `k >= beta`. With `beta = 0` the saturated branch always applies, which
/// degenerates to the pure-coverage baseline.
pub fn alpha(k: f64, beta: f64) -> f64 {
    debug_assert!(beta >= 0.0);
    if k >= beta {
        1.0
    } else {
        k / beta
    }
}

/// One scored candidate waypoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateEvaluation {
    pub cell: Cell,
    pub direction: Direction,
    pub turn_steps: i32,
    /// Raw look-ahead pheromone at the cell.
    pub look_ahead: f64,
    /// Estimated distance-weighted degree at the cell.
    pub k_estimate: f64,
    pub alpha: f64,
    /// Selection weight `alpha * (1 - clamp(look_ahead, 0, 1))`.
    pub weight: f64,
}

/// Scores the five forward candidates for the current state. The look-ahead
/// value is clamped to `[0, 1]` inside the weight so that the pinned border
/// (value above 1) cannot produce negative weights.
pub fn score_candidates(
    uav: &UavState,
    field: &PheromoneField,
    table: &NeighborTable,
    beta: f64,
    grid: &GridSpec,
    step_cells: u32,
    tx: TxRange,
    now_s: f64,
) -> [CandidateEvaluation; 5] {
    let claims = table.claims(now_s);
    let max_age = table.max_age_s();
    candidate_waypoints(uav.current_cell, uav.heading_rad, grid, step_cells).map(|cand| {
        let look_ahead = field.look_ahead(cand.cell);
        let k_estimate = estimate_k_at(cand.cell, &claims, grid, tx, now_s, max_age);
        let a = alpha(k_estimate, beta);
        CandidateEvaluation {
            cell: cand.cell,
            direction: cand.direction,
            turn_steps: cand.turn_steps,
            look_ahead,
            k_estimate,
            alpha: a,
            weight: a * (1.0 - look_ahead.clamp(0.0, 1.0)),
        }
    })
}

/// Argmax over candidate weights with the deterministic tie rule: prefer the
/// smaller absolute turn, then the lower direction index.
pub fn best_candidate(evals: &[CandidateEvaluation; 5]) -> &CandidateEvaluation {
    let mut best = &evals[0];
    for e in &evals[1..] {
        let better = e.weight > best.weight
            || (e.weight == best.weight
                && (e.turn_steps.abs() < best.turn_steps.abs()
                    || (e.turn_steps.abs() == best.turn_steps.abs()
                        && e.direction.index() < best.direction.index())));
        if better {
            best = e;
        }
    }
    best
}

/// Connectivity-aware waypoint selection. Deposits one unit of repel
/// pheromone at the current cell, scores the five candidates, and returns
/// the cell with the maximum weight.
pub fn cap_select(
    uav: &UavState,
    field: &mut PheromoneField,
    table: &NeighborTable,
    beta: f64,
    grid: &GridSpec,
    step_cells: u32,
    tx: TxRange,
    now_s: f64,
) -> Cell {
    field.mark_visited(uav.current_cell, DEPOSIT_MAGNITUDE);
    let evals = score_candidates(uav, field, table, beta, grid, step_cells, tx, now_s);
    best_candidate(&evals).cell
}

/// Repel-pheromone baseline: minimizes the (clamped) look-ahead pheromone.
/// Implemented as the connectivity-aware rule with the gate saturated, so the
/// candidate set, clamping, and tie rule are identical.
pub fn pheromone_select(
    uav: &UavState,
    field: &mut PheromoneField,
    grid: &GridSpec,
    step_cells: u32,
) -> Cell {
    field.mark_visited(uav.current_cell, DEPOSIT_MAGNITUDE);
    let empty = NeighborTable::new(1.0);
    let tx = TxRange::new(1.0).expect("static range");
    let evals = score_candidates(uav, field, &empty, 0.0, grid, step_cells, tx, 0.0);
    best_candidate(&evals).cell
}

/// Left / ahead / right, the action space of the chaotic model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lar {
    Left,
    Ahead,
    Right,
}

/// Direction choice of the chaotic model. The pheromone totals convert to
/// thresholds `p_dir = (total - pher_dir) / (2 * total)` and the return-map
/// value picks the band: right below `p_R`, left inside `(p_L, p_R + p_L)`,
/// ahead otherwise. A zero total falls back to uniform thirds.
pub fn cacoc_direction(pher_left: f64, pher_ahead: f64, pher_right: f64, rho: f64) -> Lar {
    debug_assert!(pher_left >= 0.0 && pher_ahead >= 0.0 && pher_right >= 0.0);
    let total = pher_left + pher_ahead + pher_right;
    let (p_left, p_right) = if total <= 0.0 {
        (1.0 / 3.0, 1.0 / 3.0)
    } else {
        (
            (total - pher_left) / (2.0 * total),
            (total - pher_right) / (2.0 * total),
        )
    };
    if rho < p_right {
        Lar::Right
    } else if rho > p_left && rho < p_right + p_left {
        Lar::Left
    } else {
        Lar::Ahead
    }
}

/// Classical chaotic-regime parameters of the Rossler system.
pub const ROSSLER_A: f64 = 0.2;
pub const ROSSLER_B: f64 = 0.2;
pub const ROSSLER_C: f64 = 5.7;

const RK4_STEP: f64 = 0.01;
const WARMUP_PEAKS: usize = 50;
const DIVERGENCE_LIMIT: f64 = 1e9;

/// Rossler attractor integrated with fixed-step RK4; successive local maxima
/// of `x` form the first return map, normalized to `[0, 1]` by the running
/// extrema of observed maxima. Construction discards 50 warm-up maxima so the
/// transient is absorbed and the extrema are seeded.
#[derive(Debug, Clone, PartialEq)]
pub struct ChaoticState {
    x: f64,
    y: f64,
    z: f64,
    peak_min: f64,
    peak_max: f64,
}

impl ChaoticState {
    pub fn new(x0: f64, y0: f64, z0: f64) -> Self {
        let mut state = ChaoticState {
            x: x0,
            y: y0,
            z: z0,
            peak_min: f64::INFINITY,
            peak_max: f64::NEG_INFINITY,
        };
        for _ in 0..WARMUP_PEAKS {
            let peak = state.next_peak();
            state.peak_min = state.peak_min.min(peak);
            state.peak_max = state.peak_max.max(peak);
        }
        state
    }

    /// Random initial conditions uniform in `[-5, 5]^3`.
    pub fn from_rng<R: Rng>(rng: &mut R) -> Self {
        let x = rng.gen_range(-5.0..5.0);
        let y = rng.gen_range(-5.0..5.0);
        let z = rng.gen_range(-5.0..5.0);
        ChaoticState::new(x, y, z)
    }

    /// Integrates to the next local maximum of `x` and returns it normalized
    /// to `[0, 1]` by the running extrema.
    pub fn next_rho(&mut self) -> f64 {
        let peak = self.next_peak();
        self.peak_min = self.peak_min.min(peak);
        self.peak_max = self.peak_max.max(peak);
        if self.peak_max > self.peak_min {
            ((peak - self.peak_min) / (self.peak_max - self.peak_min)).clamp(0.0, 1.0)
        } else {
            0.5
        }
    }

    fn next_peak(&mut self) -> f64 {
        let mut prev = self.x;
        self.rk4_step();
        let mut cur = self.x;
        // A peak is a sample that rose from its predecessor and falls to its
        // successor.
        loop {
            self.rk4_step();
            let next = self.x;
            if cur >= prev && next < cur {
                return cur;
            }
            prev = cur;
            cur = next;
        }
    }

    fn rk4_step(&mut self) {
        if self.x.abs() > DIVERGENCE_LIMIT
            || self.y.abs() > DIVERGENCE_LIMIT
            || self.z.abs() > DIVERGENCE_LIMIT
        {
            // Initial conditions outside the basin: restart near the attractor.
            self.x = 1.0;
            self.y = 1.0;
            self.z = 0.0;
        }
        let h = RK4_STEP;
        let (k1x, k1y, k1z) = rossler_rhs(self.x, self.y, self.z);
        let (k2x, k2y, k2z) = rossler_rhs(
            self.x + 0.5 * h * k1x,
            self.y + 0.5 * h * k1y,
            self.z + 0.5 * h * k1z,
        );
        let (k3x, k3y, k3z) = rossler_rhs(
            self.x + 0.5 * h * k2x,
            self.y + 0.5 * h * k2y,
            self.z + 0.5 * h * k2z,
        );
        let (k4x, k4y, k4z) = rossler_rhs(self.x + h * k3x, self.y + h * k3y, self.z + h * k3z);
        self.x += h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
        self.y += h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y);
        self.z += h / 6.0 * (k1z + 2.0 * k2z + 2.0 * k3z + k4z);
    }
}

fn rossler_rhs(x: f64, y: f64, z: f64) -> (f64, f64, f64) {
    (-y - z, x + ROSSLER_A * y, ROSSLER_B + z * (x - ROSSLER_C))
}

/// Flock force: the average of the fresh neighbors' announced movement
/// directions (unit vectors from their last position toward their announced
/// next-waypoint cell center). Zero when no fresh neighbor exists.
pub fn flock_force(table: &NeighborTable, grid: &GridSpec, now_s: f64) -> Vec2 {
    let mut sum = Vec2::ZERO;
    let mut count = 0usize;
    for (_, entry) in table.fresh_entries(now_s) {
        sum += (grid.center(entry.next_waypoint_cell) - entry.position).normalized();
        count += 1;
    }
    if count == 0 {
        Vec2::ZERO
    } else {
        sum * (1.0 / count as f64)
    }
}

/// Blends the chaotic direction with the flock force at constant speed:
/// `v * (f_c + f * f_flock) / |f_c + f * f_flock|`. A vanishing sum keeps the
/// chaotic direction.
pub fn cacoc2_velocity(f_c: Vec2, f_flock: Vec2, flocking: f64, speed: f64) -> Vec2 {
    debug_assert!(speed > 0.0);
    let sum = f_c + f_flock * flocking;
    let norm = sum.norm();
    if norm < 1e-12 {
        f_c * speed
    } else {
        sum * (speed / norm)
    }
}

/// Chaos-plus-flocking waypoint selection: deposits at the current cell,
/// picks left/ahead/right from the look-ahead pheromone at those candidates
/// and the next return-map value, blends with the flock force, and returns
/// the candidate whose rose bearing is closest to the blended velocity.
pub fn cacoc2_select(
    uav: &UavState,
    field: &mut PheromoneField,
    table: &NeighborTable,
    chaotic: &mut ChaoticState,
    flocking: f64,
    grid: &GridSpec,
    step_cells: u32,
    now_s: f64,
) -> Cell {
    field.mark_visited(uav.current_cell, DEPOSIT_MAGNITUDE);
    let cands = candidate_waypoints(uav.current_cell, uav.heading_rad, grid, step_cells);
    // Indices 1..=3 are the heading-45/heading/heading+45 candidates.
    let pher_left = field.look_ahead(cands[1].cell);
    let pher_ahead = field.look_ahead(cands[2].cell);
    let pher_right = field.look_ahead(cands[3].cell);
    let rho = chaotic.next_rho();
    let chosen = match cacoc_direction(pher_left, pher_ahead, pher_right, rho) {
        Lar::Left => cands[1],
        Lar::Ahead => cands[2],
        Lar::Right => cands[3],
    };
    let f_c = chosen.direction.unit();
    let f_flock = flock_force(table, grid, now_s);
    let velocity = cacoc2_velocity(f_c, f_flock, flocking, uav.speed_mps);
    nearest_bearing_candidate(&cands, bearing(Vec2::ZERO, velocity)).cell
}

/// Candidate whose rose direction is angularly closest to `target_bearing`;
/// ties prefer the smaller absolute turn, then the lower direction index.
fn nearest_bearing_candidate(cands: &[Candidate; 5], target_bearing: f64) -> &Candidate {
    let mut best = &cands[0];
    let mut best_err = normalize_angle(cands[0].direction.angle_rad() - target_bearing).abs();
    for c in &cands[1..] {
        let err = normalize_angle(c.direction.angle_rad() - target_bearing).abs();
        let better = err < best_err
            || (err == best_err
                && (c.turn_steps.abs() < best.turn_steps.abs()
                    || (c.turn_steps.abs() == best.turn_steps.abs()
                        && c.direction.index() < best.direction.index())));
        if better {
            best = c;
            best_err = err;
        }
    }
    best
}
