//! Fixed-wing point-mass motion on the cell grid.
//!
//! Headings are measured in radians from north (+y), increasing clockwise,
//! and discretize onto an 8-direction rose. Waypoint candidates fan out over
//! the five forward directions; flight toward the selected waypoint is
//! turn-rate limited at constant speed.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::{PI, TAU};

use crate::grid::{Cell, GridSpec, Vec2};

/// Default pairwise separation that triggers an avoidance maneuver.
pub const COLLISION_D_MIN_M: f64 = 30.0;
/// Separation at which an avoidance maneuver is released.
pub const COLLISION_RELEASE_M: f64 = 50.0;

/// One of the 8 compass directions. Index 0 points north (+y) and indices
/// increase clockwise in 45 degree steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Direction(u8);

const OFFSETS: [(i32, i32); 8] = [
    (0, 1),
    (1, 1),
    (1, 0),
    (1, -1),
    (0, -1),
    (-1, -1),
    (-1, 0),
    (-1, 1),
];

impl Direction {
    pub const COUNT: u8 = 8;

    pub fn new(index: i32) -> Self {
        Direction(index.rem_euclid(8) as u8)
    }

    pub fn index(self) -> u8 {
        self.0
    }

    /// Unit cell offset `(dx, dy)` for this direction.
    pub fn offset(self) -> (i32, i32) {
        OFFSETS[self.0 as usize]
    }

    /// Heading angle of this direction in radians.
    pub fn angle_rad(self) -> f64 {
        self.0 as f64 * PI / 4.0
    }

    /// Unit vector in map coordinates.
    pub fn unit(self) -> Vec2 {
        let a = self.angle_rad();
        Vec2::new(a.sin(), a.cos())
    }

    pub fn rotated(self, steps: i32) -> Direction {
        Direction::new(self.0 as i32 + steps)
    }
}

/// Normalizes an angle difference to `(-pi, pi]`.
pub fn normalize_angle(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Wraps a heading to `[0, 2*pi)`.
pub fn normalize_heading(a: f64) -> f64 {
    a.rem_euclid(TAU)
}

/// Bearing of `to` as seen from `from`: radians from north, clockwise.
pub fn bearing(from: Vec2, to: Vec2) -> f64 {
    normalize_heading((to.x - from.x).atan2(to.y - from.y))
}

/// Nearest of the 8 direction sectors. Exact sector boundaries
/// (22.5 + k * 45 degrees) round clockwise, i.e. to the higher index.
pub fn discretize_heading(heading_rad: f64) -> Direction {
    let sector = (normalize_heading(heading_rad) / (PI / 4.0) + 0.5).floor() as i32;
    Direction::new(sector)
}

/// A candidate next-waypoint cell together with its rose direction and the
/// signed turn (in 45 degree steps, -2..=2) relative to the current heading.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub cell: Cell,
    pub direction: Direction,
    pub turn_steps: i32,
}

/// The five forward candidate cells for the current heading: directions
/// `d-2..=d+2` scaled by `step_cells`. Candidates that would leave the grid
/// interior walk back along their offset ray until they are interior (with a
/// final component clamp as a failsafe), so all five results are interior.
pub fn candidate_waypoints(
    current_cell: Cell,
    heading_rad: f64,
    grid: &GridSpec,
    step_cells: u32,
) -> [Candidate; 5] {
    debug_assert!(step_cells >= 1);
    let d = discretize_heading(heading_rad);
    std::array::from_fn(|i| {
        let turn_steps = i as i32 - 2;
        let direction = d.rotated(turn_steps);
        let (dx, dy) = direction.offset();
        // Walk back along the offset ray to the farthest interior cell; if
        // the whole ray is exterior, clamp the full-step candidate instead.
        let mut cell = grid.clamp_interior(current_cell.offset(dx * step_cells as i32, dy * step_cells as i32));
        for k in (1..=step_cells as i32).rev() {
            let candidate = current_cell.offset(dx * k, dy * k);
            if grid.is_interior(candidate) {
                cell = candidate;
                break;
            }
        }
        Candidate {
            cell,
            direction,
            turn_steps,
        }
    })
}

/// Kinematic state of one UAV.
#[derive(Debug, Clone, PartialEq)]
pub struct UavState {
    pub id: u32,
    pub position: Vec2,
    pub heading_rad: f64,
    pub speed_mps: f64,
    pub max_turn_rate_rad_s: f64,
    pub current_cell: Cell,
    pub next_waypoint_cell: Cell,
    pub target_point: Vec2,
}

impl UavState {
    /// Spawns a UAV at `position` targeting its own cell center.
    pub fn new(
        id: u32,
        position: Vec2,
        heading_rad: f64,
        speed_mps: f64,
        max_turn_rate_rad_s: f64,
        grid: &GridSpec,
    ) -> Self {
        let cell = grid.cell_of(position);
        UavState {
            id,
            position,
            heading_rad: normalize_heading(heading_rad),
            speed_mps,
            max_turn_rate_rad_s,
            current_cell: cell,
            next_waypoint_cell: cell,
            target_point: grid.center(cell),
        }
    }

    /// Points the UAV at a new waypoint cell.
    pub fn set_waypoint(&mut self, cell: Cell, grid: &GridSpec) {
        self.next_waypoint_cell = cell;
        self.target_point = grid.center(cell);
    }
}

/// Advances one tick toward the target point: the heading turns by at most
/// `max_turn_rate * dt` toward the target bearing, then the position moves
/// `speed * dt` along the new heading. The position is clamped to map bounds
/// as a failsafe and `current_cell` is refreshed.
pub fn advance(state: &mut UavState, grid: &GridSpec, dt: f64) {
    debug_assert!(dt > 0.0);
    let desired = bearing(state.position, state.target_point);
    let max_turn = state.max_turn_rate_rad_s * dt;
    let delta = normalize_angle(desired - state.heading_rad).clamp(-max_turn, max_turn);
    advance_with_turn(state, grid, dt, delta);
}

/// Advances one tick with a forced heading change (used by collision
/// avoidance overrides). `turn_rad` is applied as-is.
pub fn advance_with_turn(state: &mut UavState, grid: &GridSpec, dt: f64, turn_rad: f64) {
    state.heading_rad = normalize_heading(state.heading_rad + turn_rad);
    let dir = Vec2::new(state.heading_rad.sin(), state.heading_rad.cos());
    state.position = grid.clamp_point(state.position + dir * (state.speed_mps * dt));
    state.current_cell = grid.cell_of(state.position);
}

/// True once the UAV is within half a cell of its target point (inclusive).
pub fn waypoint_reached(state: &UavState, grid: &GridSpec) -> bool {
    state.position.distance(state.target_point) <= grid.cell_size_m() / 2.0
}

/// Grid cells intersected by the segment `p0 -> p1`, in travel order and
/// without duplicates, starting at the cell containing `p0`.
///
/// Boundary crossings are processed at strictly increasing parameter t < 1;
/// a segment ending exactly on a cell boundary does not enter the next cell.
/// When the segment passes exactly through a lattice corner, the x crossing
/// is processed before the y crossing.
pub fn cells_traversed(p0: Vec2, p1: Vec2, grid: &GridSpec) -> Vec<Cell> {
    let size = grid.cell_size_m();
    let start = grid.cell_of(p0);
    let mut cells = vec![start];
    let d = p1 - p0;
    if d.x == 0.0 && d.y == 0.0 {
        return cells;
    }

    let mut cur = start;
    let (step_x, mut t_max_x, t_delta_x) = axis_params(p0.x, d.x, start.x, size);
    let (step_y, mut t_max_y, t_delta_y) = axis_params(p0.y, d.y, start.y, size);

    loop {
        if t_max_x <= t_max_y {
            if t_max_x >= 1.0 {
                break;
            }
            cur.x += step_x;
            t_max_x += t_delta_x;
        } else {
            if t_max_y >= 1.0 {
                break;
            }
            cur.y += step_y;
            t_max_y += t_delta_y;
        }
        if !grid.contains(cur) {
            break;
        }
        cells.push(cur);
    }
    cells
}

fn axis_params(origin: f64, delta: f64, cell: i32, size: f64) -> (i32, f64, f64) {
    if delta > 0.0 {
        let boundary = (cell + 1) as f64 * size;
        (1, (boundary - origin) / delta, size / delta)
    } else if delta < 0.0 {
        let boundary = cell as f64 * size;
        (-1, (boundary - origin) / delta, size / -delta)
    } else {
        (0, f64::INFINITY, f64::INFINITY)
    }
}

/// Pairwise collision-avoidance bookkeeping.
///
/// When two UAVs close within `d_min`, the higher-id UAV of the pair gets a
/// heading override (turn right at the maximum rate) that stays active until
/// its separation from that partner exceeds `release`. The lower-id UAV is
/// unaffected.
#[derive(Debug, Clone, Default)]
pub struct CollisionAvoider {
    engaged: BTreeMap<u32, BTreeSet<u32>>,
}

impl CollisionAvoider {
    pub fn new() -> Self {
        CollisionAvoider::default()
    }

    /// Updates engagements from the current positions and returns the ids
    /// whose heading is overridden this tick.
    pub fn update(
        &mut self,
        positions: &[(u32, Vec2)],
        d_min: f64,
        release: f64,
    ) -> BTreeSet<u32> {
        for i in 0..positions.len() {
            for j in i + 1..positions.len() {
                let (id_a, pa) = positions[i];
                let (id_b, pb) = positions[j];
                let (low, high) = if id_a < id_b { (id_a, id_b) } else { (id_b, id_a) };
                let dist = pa.distance(pb);
                if dist < d_min {
                    self.engaged.entry(high).or_default().insert(low);
                } else if dist > release {
                    if let Some(partners) = self.engaged.get_mut(&high) {
                        partners.remove(&low);
                        if partners.is_empty() {
                            self.engaged.remove(&high);
                        }
                    }
                }
            }
        }
        self.engaged.keys().copied().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn grid60() -> GridSpec {
        GridSpec::new(60, 100.0).unwrap()
    }

    #[test]
    fn direction_offsets_rotate_clockwise_from_north() {
        assert_eq!(Direction::new(0).offset(), (0, 1));
        assert_eq!(Direction::new(2).offset(), (1, 0));
        assert_eq!(Direction::new(4).offset(), (0, -1));
        assert_eq!(Direction::new(6).offset(), (-1, 0));
        assert_eq!(Direction::new(-1), Direction::new(7));
    }

    #[test]
    fn discretize_sector_centers_and_ties() {
        assert_eq!(discretize_heading(0.0), Direction::new(0));
        assert_eq!(discretize_heading(90f64.to_radians()), Direction::new(2));
        assert_eq!(discretize_heading(44f64.to_radians()), Direction::new(1));
        // Exact boundary rounds clockwise.
        assert_eq!(discretize_heading(22.5f64.to_radians()), Direction::new(1));
        assert_eq!(discretize_heading(337.5f64.to_radians()), Direction::new(0));
    }

    #[test]
    fn candidates_match_heading_zero_fan() {
        let cands = candidate_waypoints(Cell::new(30, 30), 0.0, &grid60(), 1);
        let cells: Vec<Cell> = cands.iter().map(|c| c.cell).collect();
        assert_eq!(
            cells,
            vec![
                Cell::new(29, 30),
                Cell::new(29, 31),
                Cell::new(30, 31),
                Cell::new(31, 31),
                Cell::new(31, 30),
            ]
        );
        let dirs: Vec<u8> = cands.iter().map(|c| c.direction.index()).collect();
        assert_eq!(dirs, vec![6, 7, 0, 1, 2]);
    }

    #[test]
    fn candidates_south_heading_fan() {
        let cands = candidate_waypoints(Cell::new(30, 30), PI, &grid60(), 1);
        let dirs: Vec<u8> = cands.iter().map(|c| c.direction.index()).collect();
        assert_eq!(dirs, vec![2, 3, 4, 5, 6]);
    }

    #[test]
    fn candidates_scale_with_step() {
        let cands = candidate_waypoints(Cell::new(30, 30), 0.0, &grid60(), 4);
        assert_eq!(cands[2].cell, Cell::new(30, 34));
        assert_eq!(cands[0].cell, Cell::new(26, 30));
    }

    #[test]
    fn candidates_clamp_to_interior() {
        // Heading north one cell from the top of the interior.
        for step in [1u32, 4] {
            let cands = candidate_waypoints(Cell::new(30, 58), 0.0, &grid60(), step);
            for c in cands {
                assert!(grid60().is_interior(c.cell), "{c:?} not interior");
            }
        }
        // Corner case: every candidate still lands in the interior.
        let cands = candidate_waypoints(Cell::new(1, 1), PI, &grid60(), 4);
        for c in cands {
            assert!(grid60().is_interior(c.cell));
        }
    }

    #[test]
    fn advance_straight_keeps_heading() {
        let g = grid60();
        let mut s = UavState::new(0, Vec2::new(3050.0, 3000.0), 0.0, 20.0, 1.0, &g);
        s.set_waypoint(Cell::new(30, 35), &g); // center (3050, 3550), dead ahead
        advance(&mut s, &g, 0.1);
        assert_relative_eq!(s.heading_rad, 0.0, epsilon = 1e-12);
        assert_relative_eq!(s.position.y, 3002.0, epsilon = 1e-12);
        assert_relative_eq!(s.position.x, 3050.0, epsilon = 1e-12);
    }

    #[test]
    fn advance_turn_is_rate_limited() {
        let g = grid60();
        let rate = 60f64.to_radians();
        let mut s = UavState::new(0, Vec2::new(3050.0, 3050.0), 0.0, 20.0, rate, &g);
        // Target directly behind.
        s.set_waypoint(Cell::new(30, 20), &g);
        let before = s.heading_rad;
        advance(&mut s, &g, 0.1);
        let turned = normalize_angle(s.heading_rad - before).abs();
        assert_relative_eq!(turned.to_degrees(), 6.0, epsilon = 1e-9);
    }

    #[test]
    fn advance_converges_to_reachable_target() {
        let g = grid60();
        let rate = 60f64.to_radians();
        let mut s = UavState::new(0, Vec2::new(3050.0, 3050.0), 0.0, 20.0, rate, &g);
        s.set_waypoint(Cell::new(32, 32), &g);
        let mut reached = false;
        for _ in 0..2000 {
            advance(&mut s, &g, 0.1);
            if waypoint_reached(&s, &g) {
                reached = true;
                break;
            }
        }
        assert!(reached, "UAV failed to converge to waypoint");
    }

    #[test]
    fn waypoint_reached_is_inclusive_at_half_cell() {
        let g = grid60();
        let mut s = UavState::new(0, Vec2::new(3050.0, 3050.0), 0.0, 20.0, 1.0, &g);
        s.set_waypoint(Cell::new(30, 30), &g); // center (3050, 3050)
        assert!(waypoint_reached(&s, &g));
        s.position = Vec2::new(3050.0, 3100.0); // exactly half a cell away
        assert!(waypoint_reached(&s, &g));
        s.position = Vec2::new(3050.0, 3150.0); // a full cell away
        assert!(!waypoint_reached(&s, &g));
    }

    #[test]
    fn traversal_single_cell() {
        let g = grid60();
        let p = Vec2::new(250.0, 250.0);
        assert_eq!(cells_traversed(p, p, &g), vec![Cell::new(2, 2)]);
    }

    #[test]
    fn traversal_horizontal_boundary_end() {
        let g = grid60();
        // 250 m east from a cell center: ends exactly on the 300 m boundary,
        // which does not count as entering the next cell.
        let cells = cells_traversed(Vec2::new(50.0, 50.0), Vec2::new(300.0, 50.0), &g);
        assert_eq!(
            cells,
            vec![Cell::new(0, 0), Cell::new(1, 0), Cell::new(2, 0)]
        );
    }

    #[test]
    fn traversal_corner_rule_x_first() {
        let g = grid60();
        let cells = cells_traversed(Vec2::new(50.0, 50.0), Vec2::new(150.0, 150.0), &g);
        assert_eq!(
            cells,
            vec![Cell::new(0, 0), Cell::new(1, 0), Cell::new(1, 1)]
        );
    }

    #[test]
    fn traversal_is_8_connected() {
        let g = grid60();
        let cells = cells_traversed(Vec2::new(120.0, 80.0), Vec2::new(635.0, 411.0), &g);
        assert_eq!(cells.first(), Some(&Cell::new(1, 0)));
        assert_eq!(cells.last(), Some(&Cell::new(6, 4)));
        for w in cells.windows(2) {
            let dx = (w[1].x - w[0].x).abs();
            let dy = (w[1].y - w[0].y).abs();
            assert!(dx <= 1 && dy <= 1 && dx + dy >= 1);
        }
    }

    #[test]
    fn collision_override_targets_higher_id() {
        let mut avoider = CollisionAvoider::new();
        let positions = vec![
            (0u32, Vec2::new(0.0, 0.0)),
            (1u32, Vec2::new(20.0, 0.0)),
            (2u32, Vec2::new(500.0, 0.0)),
        ];
        let overrides = avoider.update(&positions, COLLISION_D_MIN_M, COLLISION_RELEASE_M);
        assert_eq!(overrides.into_iter().collect::<Vec<_>>(), vec![1]);
    }

    #[test]
    fn collision_override_releases_beyond_release_distance() {
        let mut avoider = CollisionAvoider::new();
        let close = vec![(0u32, Vec2::new(0.0, 0.0)), (1u32, Vec2::new(20.0, 0.0))];
        assert_eq!(
            avoider
                .update(&close, COLLISION_D_MIN_M, COLLISION_RELEASE_M)
                .len(),
            1
        );
        // Between d_min and release: still engaged.
        let mid = vec![(0u32, Vec2::new(0.0, 0.0)), (1u32, Vec2::new(40.0, 0.0))];
        assert_eq!(
            avoider
                .update(&mid, COLLISION_D_MIN_M, COLLISION_RELEASE_M)
                .len(),
            1
        );
        let far = vec![(0u32, Vec2::new(0.0, 0.0)), (1u32, Vec2::new(60.0, 0.0))];
        assert!(avoider
            .update(&far, COLLISION_D_MIN_M, COLLISION_RELEASE_M)
            .is_empty());
    }

    #[test]
    fn collision_three_close_uavs_override_two_highest() {
        let mut avoider = CollisionAvoider::new();
        let positions = vec![
            (4u32, Vec2::new(0.0, 0.0)),
            (7u32, Vec2::new(10.0, 0.0)),
            (9u32, Vec2::new(5.0, 8.0)),
        ];
        let overrides = avoider.update(&positions, COLLISION_D_MIN_M, COLLISION_RELEASE_M);
        assert_eq!(overrides.into_iter().collect::<Vec<_>>(), vec![7, 9]);
    }

    #[test]
    fn no_overrides_when_separated() {
        let mut avoider = CollisionAvoider::new();
        let positions = vec![(0u32, Vec2::new(0.0, 0.0)), (1u32, Vec2::new(100.0, 0.0))];
        assert!(avoider
            .update(&positions, COLLISION_D_MIN_M, COLLISION_RELEASE_M)
            .is_empty());
    }
}
