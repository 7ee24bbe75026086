//! Discrete-time simulation loop, scenario configuration, metrics, and
//! seeded multi-run aggregation.
//!
//! A run is strictly single-threaded and a pure function of its
//! configuration (seed included): identical configs produce bit-identical
//! results. Batches fan independent runs out over a small worker pool and
//! report per-metric means with standard errors.
//!
//! Within a tick the order is fixed: motion, scan, waypoint decisions in
//! ascending id, pheromone step (decision-interval cadence), hello exchange,
//! metric sampling.

use std::collections::BTreeSet;
use std::io::Write;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::comms::{apply_inbox, build_hello, deliver, HelloMessage, NeighborTable};
use crate::connectivity::{anc, build_graph, ncc, TxRange};
use crate::grid::{Cell, GridSpec, Vec2};
use crate::kinematics::{
    advance, advance_with_turn, cells_traversed, waypoint_reached, CollisionAvoider, UavState,
    COLLISION_D_MIN_M, COLLISION_RELEASE_M,
};
use crate::pheromone::PheromoneField;
use crate::policies::{cacoc2_select, cap_select, pheromone_select, ChaoticState, DEPOSIT_MAGNITUDE};

/// Spacing of the initial deployment row.
pub const SPAWN_SPACING_M: f64 = 50.0;
/// Per-axis position scatter of the deployment row.
pub const SPAWN_JITTER_M: f64 = 25.0;
/// Heading scatter of the deployment row, degrees either side of north.
pub const SPAWN_JITTER_DEG: f64 = 10.0;

/// Waypoint-selection policy of a scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Policy {
    /// Connectivity-aware pheromone selection with tuning threshold `beta`.
    Cap { beta: f64 },
    /// Repel-pheromone baseline (pure coverage).
    Pheromone,
    /// Chaotic direction choice blended with a flock force of weight
    /// `flocking`.
    Cacoc2 { flocking: f64 },
    /// Holds position; diagnostic stub for connectivity tests.
    Frozen,
}

impl Policy {
    pub fn name(&self) -> &'static str {
        match self {
            Policy::Cap { .. } => "cap",
            Policy::Pheromone => "pheromone",
            Policy::Cacoc2 { .. } => "cacoc2",
            Policy::Frozen => "frozen",
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("{field} {message}, got {value}")]
    Invalid {
        field: &'static str,
        message: &'static str,
        value: f64,
    },
    #[error("at least one seed is required")]
    NoSeeds,
}

fn invalid(field: &'static str, message: &'static str, value: f64) -> ConfigError {
    ConfigError::Invalid {
        field,
        message,
        value,
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("trace write failed: {0}")]
    Io(#[from] std::io::Error),
}

/// Full description of one seeded run.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub grid: GridSpec,
    pub n_uavs: usize,
    pub speed_mps: f64,
    pub tx_range_m: f64,
    pub policy: Policy,
    pub evaporation_rate: f64,
    pub diffusion_rate: f64,
    pub boundary_pheromone: f64,
    pub sim_time_s: f64,
    /// Nominal waypoint interval. Sets the candidate step distance and the
    /// pheromone update cadence; actual waypoint decisions are arrival
    /// events.
    pub decision_interval_s: f64,
    pub hello_period_s: f64,
    pub metric_sample_period_s: f64,
    pub dt_s: f64,
    pub coverage_target: f64,
    pub max_turn_rate_deg_s: f64,
    pub seed: u64,
}

impl ScenarioConfig {
    /// Baseline scenario: 6 km x 6 km map of 100 m cells, 1 km transmission
    /// range, 0.006 evaporation/diffusion, boundary pheromone 4, 8000 s of
    /// simulated time, 2 s hellos, 10 s metric samples, 0.1 s ticks, 90%
    /// coverage target, 60 deg/s turn rate.
    pub fn baseline(policy: Policy, n_uavs: usize, speed_mps: f64, seed: u64) -> Self {
        ScenarioConfig {
            grid: GridSpec::new(60, 100.0).expect("static grid"),
            n_uavs,
            speed_mps,
            tx_range_m: 1000.0,
            policy,
            evaporation_rate: 0.006,
            diffusion_rate: 0.006,
            boundary_pheromone: 4.0,
            sim_time_s: 8000.0,
            decision_interval_s: Self::default_decision_interval(speed_mps),
            hello_period_s: 2.0,
            metric_sample_period_s: 10.0,
            dt_s: 0.1,
            coverage_target: 0.9,
            max_turn_rate_deg_s: 60.0,
            seed,
        }
    }

    /// Nominal waypoint interval by speed: 5 s below 30 m/s, 10 s above.
    pub fn default_decision_interval(speed_mps: f64) -> f64 {
        if speed_mps >= 30.0 {
            10.0
        } else {
            5.0
        }
    }

    /// Candidate step distance in cells:
    /// `max(1, round(speed * decision_interval / cell_size))`.
    pub fn step_cells(&self) -> u32 {
        let cells = self.speed_mps * self.decision_interval_s / self.grid.cell_size_m();
        (cells.round() as i64).max(1) as u32
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        let mut c = self.clone();
        c.seed = seed;
        c
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n_uavs < 1 {
            return Err(invalid("n_uavs", "must be at least 1", self.n_uavs as f64));
        }
        if !(self.speed_mps > 0.0) || !self.speed_mps.is_finite() {
            return Err(invalid("speed_mps", "must be positive", self.speed_mps));
        }
        if !(self.tx_range_m > 0.0) || !self.tx_range_m.is_finite() {
            return Err(invalid(
                "transmission_range_m",
                "must be positive",
                self.tx_range_m,
            ));
        }
        if !(0.0..=1.0).contains(&self.evaporation_rate) {
            return Err(invalid(
                "evaporation_rate",
                "must lie in [0, 1]",
                self.evaporation_rate,
            ));
        }
        if !(0.0..=1.0).contains(&self.diffusion_rate) {
            return Err(invalid(
                "diffusion_rate",
                "must lie in [0, 1]",
                self.diffusion_rate,
            ));
        }
        if !(self.boundary_pheromone >= 0.0) || !self.boundary_pheromone.is_finite() {
            return Err(invalid(
                "boundary_pheromone",
                "must be non-negative",
                self.boundary_pheromone,
            ));
        }
        if !(self.sim_time_s > 0.0) || !self.sim_time_s.is_finite() {
            return Err(invalid("sim_time_s", "must be positive", self.sim_time_s));
        }
        if !(self.dt_s > 0.0) || self.dt_s > 1.0 {
            return Err(invalid("dt_s", "must lie in (0, 1]", self.dt_s));
        }
        if !divides(self.dt_s, 1.0) {
            return Err(invalid("dt_s", "must divide 1 second", self.dt_s));
        }
        if !(self.decision_interval_s > 0.0)
            || !self.decision_interval_s.is_finite()
            || !divides(self.dt_s, self.decision_interval_s)
        {
            return Err(invalid(
                "decision_interval_s",
                "must be a positive multiple of dt_s",
                self.decision_interval_s,
            ));
        }
        if !(self.hello_period_s > 0.0) || !divides(self.dt_s, self.hello_period_s) {
            return Err(invalid(
                "hello_period_s",
                "must be a positive multiple of dt_s",
                self.hello_period_s,
            ));
        }
        if !(self.metric_sample_period_s > 0.0) || !divides(self.dt_s, self.metric_sample_period_s)
        {
            return Err(invalid(
                "metric_sample_period_s",
                "must be a positive multiple of dt_s",
                self.metric_sample_period_s,
            ));
        }
        if !divides(self.dt_s, self.sim_time_s) {
            return Err(invalid(
                "sim_time_s",
                "must be a multiple of dt_s",
                self.sim_time_s,
            ));
        }
        if !(self.coverage_target > 0.0 && self.coverage_target <= 1.0) {
            return Err(invalid(
                "coverage_target",
                "must lie in (0, 1]",
                self.coverage_target,
            ));
        }
        if !(self.max_turn_rate_deg_s > 0.0) || !self.max_turn_rate_deg_s.is_finite() {
            return Err(invalid(
                "max_turn_rate_deg_s",
                "must be positive",
                self.max_turn_rate_deg_s,
            ));
        }
        match self.policy {
            Policy::Cap { beta } => {
                if !(beta >= 0.0) || !beta.is_finite() {
                    return Err(invalid("beta", "must be non-negative", beta));
                }
            }
            Policy::Cacoc2 { flocking } => {
                if !(flocking >= 0.0) || !flocking.is_finite() {
                    return Err(invalid("f", "must be non-negative", flocking));
                }
            }
            Policy::Pheromone | Policy::Frozen => {}
        }
        Ok(())
    }
}

fn divides(small: f64, large: f64) -> bool {
    let ratio = large / small;
    (ratio - ratio.round()).abs() < 1e-6 && ratio.round() >= 1.0
}

/// Per-cell scan bookkeeping for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanLedger {
    grid: GridSpec,
    counts: Vec<u64>,
    first_scan_s: Vec<f64>,
    covered: usize,
}

impl ScanLedger {
    pub fn new(grid: GridSpec) -> Self {
        let n = grid.cell_count();
        ScanLedger {
            grid,
            counts: vec![0; n],
            first_scan_s: vec![f64::NAN; n],
            covered: 0,
        }
    }

    /// Records one scan of `cell` at time `t_s`.
    pub fn record(&mut self, cell: Cell, t_s: f64) {
        let idx = self.grid.index(cell);
        self.counts[idx] += 1;
        if self.first_scan_s[idx].is_nan() {
            self.first_scan_s[idx] = t_s;
            self.covered += 1;
        }
    }

    pub fn cell_count(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Number of cells scanned at least once.
    pub fn covered_cells(&self) -> usize {
        self.covered
    }

    pub fn covered_fraction(&self) -> f64 {
        self.covered as f64 / self.cell_count() as f64
    }

    /// First-scan time per cell; NaN marks never-scanned cells.
    pub fn first_scan_times(&self) -> &[f64] {
        &self.first_scan_s
    }
}

/// Jain's fairness index over per-cell scan counts:
/// `(sum x)^2 / (n * sum x^2)`, with 0 for an all-zero ledger.
pub fn fairness(ledger: &ScanLedger) -> f64 {
    let sum: f64 = ledger.counts.iter().map(|&x| x as f64).sum();
    if sum == 0.0 {
        return 0.0;
    }
    let sum_sq: f64 = ledger.counts.iter().map(|&x| (x as f64) * (x as f64)).sum();
    sum * sum / (ledger.cell_count() as f64 * sum_sq)
}

/// Earliest time at which `target` of all cells have been scanned at least
/// once, or `(sim_time, censored = true)` if never reached.
pub fn coverage_time(ledger: &ScanLedger, target: f64, sim_time_s: f64) -> (f64, bool) {
    debug_assert!(target > 0.0 && target <= 1.0);
    let needed = ((target * ledger.cell_count() as f64) - 1e-9).ceil().max(1.0) as usize;
    let mut times: Vec<f64> = ledger
        .first_scan_s
        .iter()
        .copied()
        .filter(|t| !t.is_nan())
        .collect();
    if times.len() < needed {
        return (sim_time_s, true);
    }
    times.sort_by(|a, b| a.partial_cmp(b).expect("finite times"));
    (times[needed - 1], false)
}

/// One 10 s metric sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricSample {
    pub t_s: f64,
    pub ncc: usize,
    pub anc: f64,
    pub covered_fraction: f64,
}

/// Metrics of one seeded run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub config: ScenarioConfig,
    pub tc_s: f64,
    pub tc_censored: bool,
    pub fairness: f64,
    pub ncc_mean: f64,
    pub anc_mean: f64,
    /// Means over samples up to the coverage time only.
    pub ncc_mean_to_tc: f64,
    pub anc_mean_to_tc: f64,
    pub samples: Vec<MetricSample>,
}

/// A waypoint decision, for trajectory-equivalence checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecisionEvent {
    pub t_s: f64,
    pub uav_id: u32,
    pub cell: Cell,
}

/// Optional per-run instrumentation sinks.
#[derive(Default)]
pub struct RunHooks<'a> {
    /// CSV rows `t,uav_id,x,y,heading_deg`, one per UAV per tick.
    pub trajectory: Option<&'a mut dyn Write>,
    /// CSV rows `t,sender,receiver_count`, one per sender per hello tick.
    pub messages: Option<&'a mut dyn Write>,
    /// Every waypoint decision in execution order.
    pub decisions: Option<&'a mut Vec<DecisionEvent>>,
}

/// Runs one seeded scenario.
pub fn run(config: &ScenarioConfig) -> Result<RunResult, RunError> {
    run_with_hooks(config, RunHooks::default())
}

/// Runs one seeded scenario with instrumentation hooks attached.
pub fn run_with_hooks(config: &ScenarioConfig, hooks: RunHooks<'_>) -> Result<RunResult, RunError> {
    config.validate()?;
    let mut sim = Sim::new(config);
    sim.run(hooks)?;
    Ok(sim.finish())
}

struct Sim<'c> {
    config: &'c ScenarioConfig,
    grid: GridSpec,
    tx: TxRange,
    step_cells: u32,
    uavs: Vec<UavState>,
    fields: Vec<PheromoneField>,
    tables: Vec<NeighborTable>,
    chaotic: Vec<Option<ChaoticState>>,
    avoider: CollisionAvoider,
    ledger: ScanLedger,
    last_scan_cell: Vec<Cell>,
    samples: Vec<MetricSample>,
}

impl<'c> Sim<'c> {
    fn new(config: &'c ScenarioConfig) -> Self {
        let grid = config.grid;
        let tx = TxRange::new(config.tx_range_m).expect("validated range");
        let n = config.n_uavs;
        let turn_rate = config.max_turn_rate_deg_s.to_radians();

        // Row deployment at the mid-bottom of the map, heading north, with
        // per-seed launch scatter. Each UAV draws from its own substream
        // (seed xor hashed id), so adding UAVs leaves existing streams
        // untouched.
        let spawn_y = 2.0 * grid.cell_size_m();
        let mut uavs = Vec::with_capacity(n);
        let mut fields = Vec::with_capacity(n);
        let mut tables = Vec::with_capacity(n);
        let mut chaotic = Vec::with_capacity(n);
        for i in 0..n {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ splitmix64(i as u64));
            use rand::Rng;
            let jitter_x = rng.gen_range(-SPAWN_JITTER_M..SPAWN_JITTER_M);
            let jitter_y = rng.gen_range(-SPAWN_JITTER_M..SPAWN_JITTER_M);
            let heading = rng
                .gen_range(-SPAWN_JITTER_DEG..SPAWN_JITTER_DEG)
                .to_radians();
            let x = grid.width_m() / 2.0 + (i as f64 - (n as f64 - 1.0) / 2.0) * SPAWN_SPACING_M;
            let position = grid.clamp_point(Vec2::new(x + jitter_x, spawn_y + jitter_y));
            uavs.push(UavState::new(
                i as u32,
                position,
                heading,
                config.speed_mps,
                turn_rate,
                &grid,
            ));
            fields.push(
                PheromoneField::new(
                    grid,
                    config.evaporation_rate,
                    config.diffusion_rate,
                    config.boundary_pheromone,
                )
                .expect("validated rates"),
            );
            tables.push(NeighborTable::new(config.hello_period_s));
            chaotic.push(match config.policy {
                Policy::Cacoc2 { .. } => Some(ChaoticState::from_rng(&mut rng)),
                _ => None,
            });
        }

        let mut ledger = ScanLedger::new(grid);
        let mut last_scan_cell = Vec::with_capacity(n);
        for uav in &uavs {
            ledger.record(uav.current_cell, 0.0);
            last_scan_cell.push(uav.current_cell);
        }

        Sim {
            config,
            grid,
            tx,
            step_cells: config.step_cells(),
            uavs,
            fields,
            tables,
            chaotic,
            avoider: CollisionAvoider::new(),
            ledger,
            last_scan_cell,
            samples: Vec::new(),
        }
    }

    fn run(&mut self, mut hooks: RunHooks<'_>) -> Result<(), RunError> {
        let dt = self.config.dt_s;
        let n_ticks = (self.config.sim_time_s / dt).round() as u64;
        // Evaporation/diffusion rates are per update interval; the field
        // updates on the waypoint-interval cadence.
        let field_step_ticks = (self.config.decision_interval_s / dt).round() as u64;
        let hello_ticks = (self.config.hello_period_s / dt).round() as u64;
        let metric_ticks = (self.config.metric_sample_period_s / dt).round() as u64;

        // t = 0: initial decisions, first hello exchange, first sample.
        for i in 0..self.uavs.len() {
            self.decide(i, 0.0, &mut hooks);
        }
        self.exchange_hellos(0.0, &mut hooks)?;
        self.sample(0.0);
        self.write_trajectory(0.0, &mut hooks)?;

        for tick in 0..n_ticks {
            let t_end = (tick + 1) as f64 * dt;

            let positions = self.positions();
            let overrides =
                self.avoider
                    .update(&positions, COLLISION_D_MIN_M, COLLISION_RELEASE_M);
            self.move_and_scan(dt, t_end, &overrides);
            self.write_trajectory(t_end, &mut hooks)?;

            for i in 0..self.uavs.len() {
                if waypoint_reached(&self.uavs[i], &self.grid) {
                    self.decide(i, t_end, &mut hooks);
                }
            }

            if (tick + 1) % field_step_ticks == 0 {
                for field in &mut self.fields {
                    field.step();
                }
            }
            if (tick + 1) % hello_ticks == 0 {
                self.exchange_hellos(t_end, &mut hooks)?;
            }
            if (tick + 1) % metric_ticks == 0 {
                self.sample(t_end);
            }
        }
        Ok(())
    }

    fn positions(&self) -> Vec<(u32, Vec2)> {
        self.uavs.iter().map(|u| (u.id, u.position)).collect()
    }

    fn move_and_scan(&mut self, dt: f64, t_end: f64, overrides: &BTreeSet<u32>) {
        for i in 0..self.uavs.len() {
            let uav = &mut self.uavs[i];
            let p0 = uav.position;
            if overrides.contains(&uav.id) {
                // Collision avoidance: hold a full-rate right turn.
                let turn = uav.max_turn_rate_rad_s * dt;
                advance_with_turn(uav, &self.grid, dt, turn);
            } else {
                advance(uav, &self.grid, dt);
            }
            for cell in cells_traversed(p0, uav.position, &self.grid) {
                if cell != self.last_scan_cell[i] {
                    self.ledger.record(cell, t_end);
                    self.last_scan_cell[i] = cell;
                    // Every scanned cell is marked in the scanner's own map.
                    self.fields[i].mark_visited(cell, DEPOSIT_MAGNITUDE);
                }
            }
        }
    }

    fn decide(&mut self, i: usize, t_s: f64, hooks: &mut RunHooks<'_>) {
        // Decisions are made from the cell containing the reached target.
        self.uavs[i].current_cell = self.uavs[i].next_waypoint_cell;
        let uav = &self.uavs[i];
        let cell = match self.config.policy {
            Policy::Cap { beta } => cap_select(
                uav,
                &mut self.fields[i],
                &self.tables[i],
                beta,
                &self.grid,
                self.step_cells,
                self.tx,
                t_s,
            ),
            Policy::Pheromone => {
                pheromone_select(uav, &mut self.fields[i], &self.grid, self.step_cells)
            }
            Policy::Cacoc2 { flocking } => cacoc2_select(
                uav,
                &mut self.fields[i],
                &self.tables[i],
                self.chaotic[i].as_mut().expect("cacoc2 state"),
                flocking,
                &self.grid,
                self.step_cells,
                t_s,
            ),
            Policy::Frozen => uav.current_cell,
        };
        self.uavs[i].set_waypoint(cell, &self.grid);
        if let Some(events) = hooks.decisions.as_deref_mut() {
            events.push(DecisionEvent {
                t_s,
                uav_id: self.uavs[i].id,
                cell,
            });
        }
    }

    fn exchange_hellos(&mut self, t_s: f64, hooks: &mut RunHooks<'_>) -> Result<(), RunError> {
        let messages: Vec<HelloMessage> = self
            .uavs
            .iter()
            .zip(&self.fields)
            .map(|(uav, field)| build_hello(uav, field, t_s))
            .collect();
        let positions = self.positions();
        let inboxes = deliver(&messages, &positions, self.tx);

        if let Some(log) = hooks.messages.as_deref_mut() {
            let mut receivers = vec![0usize; messages.len()];
            for inbox in &inboxes {
                for &sender in inbox {
                    receivers[sender] += 1;
                }
            }
            for (sender, count) in receivers.iter().enumerate() {
                writeln!(log, "{},{},{}", t_s, self.uavs[sender].id, count)?;
            }
        }

        for (i, inbox) in inboxes.iter().enumerate() {
            apply_inbox(
                &mut self.tables[i],
                &mut self.fields[i],
                inbox.iter().map(|&j| &messages[j]),
            );
        }
        Ok(())
    }

    fn sample(&mut self, t_s: f64) {
        let graph = build_graph(&self.positions(), self.tx, t_s);
        self.samples.push(MetricSample {
            t_s,
            ncc: ncc(&graph),
            anc: anc(&graph).expect("at least one UAV"),
            covered_fraction: self.ledger.covered_fraction(),
        });
    }

    fn write_trajectory(&self, t_s: f64, hooks: &mut RunHooks<'_>) -> Result<(), RunError> {
        if let Some(out) = hooks.trajectory.as_deref_mut() {
            for uav in &self.uavs {
                writeln!(
                    out,
                    "{},{},{},{},{}",
                    t_s,
                    uav.id,
                    uav.position.x,
                    uav.position.y,
                    uav.heading_rad.to_degrees()
                )?;
            }
        }
        Ok(())
    }

    fn finish(self) -> RunResult {
        let (tc_s, tc_censored) =
            coverage_time(&self.ledger, self.config.coverage_target, self.config.sim_time_s);
        let all = &self.samples;
        let to_tc: Vec<&MetricSample> = all.iter().filter(|s| s.t_s <= tc_s + 1e-9).collect();
        let mean_of = |samples: &[&MetricSample], f: &dyn Fn(&MetricSample) -> f64| -> f64 {
            samples.iter().map(|s| f(s)).sum::<f64>() / samples.len() as f64
        };
        let all_refs: Vec<&MetricSample> = all.iter().collect();
        RunResult {
            tc_s,
            tc_censored,
            fairness: fairness(&self.ledger),
            ncc_mean: mean_of(&all_refs, &|s| s.ncc as f64),
            anc_mean: mean_of(&all_refs, &|s| s.anc),
            ncc_mean_to_tc: mean_of(&to_tc, &|s| s.ncc as f64),
            anc_mean_to_tc: mean_of(&to_tc, &|s| s.anc),
            samples: self.samples,
            config: self.config.clone(),
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Sample mean and standard error of the mean (`stddev / sqrt(n)`, with the
/// n-1 variance denominator; 0 for a single value).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanSem {
    pub mean: f64,
    pub sem: f64,
}

pub fn mean_sem(values: &[f64]) -> MeanSem {
    assert!(!values.is_empty(), "mean_sem of empty slice");
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return MeanSem { mean, sem: 0.0 };
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    MeanSem {
        mean,
        sem: (var / n).sqrt(),
    }
}

/// Aggregate of one scenario over several seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchResult {
    /// Per-seed results, ordered like the input seed list.
    pub runs: Vec<RunResult>,
    pub tc: MeanSem,
    pub fairness: MeanSem,
    pub ncc: MeanSem,
    pub anc: MeanSem,
    pub ncc_to_tc: MeanSem,
    pub anc_to_tc: MeanSem,
    pub censored_runs: usize,
}

impl BatchResult {
    fn from_runs(runs: Vec<RunResult>) -> Self {
        let collect = |f: &dyn Fn(&RunResult) -> f64| -> Vec<f64> { runs.iter().map(f).collect() };
        BatchResult {
            tc: mean_sem(&collect(&|r| r.tc_s)),
            fairness: mean_sem(&collect(&|r| r.fairness)),
            ncc: mean_sem(&collect(&|r| r.ncc_mean)),
            anc: mean_sem(&collect(&|r| r.anc_mean)),
            ncc_to_tc: mean_sem(&collect(&|r| r.ncc_mean_to_tc)),
            anc_to_tc: mean_sem(&collect(&|r| r.anc_mean_to_tc)),
            censored_runs: runs.iter().filter(|r| r.tc_censored).count(),
            runs,
        }
    }
}

/// Runs one scenario once per seed and aggregates. Runs execute on a worker
/// pool sized by the available parallelism; results are ordered by seed
/// position regardless of completion order.
pub fn run_batch(config: &ScenarioConfig, seeds: &[u64]) -> Result<BatchResult, RunError> {
    let jobs = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1);
    run_batch_jobs(config, seeds, jobs)
}

/// `run_batch` with an explicit worker count.
pub fn run_batch_jobs(
    config: &ScenarioConfig,
    seeds: &[u64],
    jobs: usize,
) -> Result<BatchResult, RunError> {
    if seeds.is_empty() {
        return Err(ConfigError::NoSeeds.into());
    }
    config.validate()?;
    let jobs = jobs.max(1).min(seeds.len());

    let mut slots: Vec<Option<RunResult>> = seeds.iter().map(|_| None).collect();
    if jobs == 1 {
        for (i, &seed) in seeds.iter().enumerate() {
            slots[i] = Some(run(&config.with_seed(seed))?);
        }
    } else {
        let next = AtomicUsize::new(0);
        let (sender, receiver) = mpsc::channel();
        std::thread::scope(|scope| {
            for _ in 0..jobs {
                let sender = sender.clone();
                let next = &next;
                scope.spawn(move || loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    if i >= seeds.len() {
                        break;
                    }
                    let result = run(&config.with_seed(seeds[i]));
                    if sender.send((i, result)).is_err() {
                        break;
                    }
                });
            }
        });
        drop(sender);
        for (i, result) in receiver {
            slots[i] = Some(result?);
        }
    }

    let runs: Vec<RunResult> = slots.into_iter().map(|r| r.expect("all seeds ran")).collect();
    Ok(BatchResult::from_runs(runs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn small_config(policy: Policy, n_uavs: usize, sim_time_s: f64, seed: u64) -> ScenarioConfig {
        let mut c = ScenarioConfig::baseline(policy, n_uavs, 20.0, seed);
        c.grid = GridSpec::new(12, 100.0).unwrap();
        c.sim_time_s = sim_time_s;
        c
    }

    #[test]
    fn validate_rejects_out_of_range_fields() {
        let mut c = ScenarioConfig::baseline(Policy::Pheromone, 5, 20.0, 1);
        c.evaporation_rate = 2.0;
        match c.validate() {
            Err(ConfigError::Invalid { field, .. }) => assert_eq!(field, "evaporation_rate"),
            other => panic!("expected evaporation error, got {other:?}"),
        }
        let mut c = ScenarioConfig::baseline(Policy::Pheromone, 5, 20.0, 1);
        c.hello_period_s = 0.25; // not a multiple of dt = 0.1
        assert!(c.validate().is_err());
        let mut c = ScenarioConfig::baseline(Policy::Cap { beta: -1.0 }, 5, 20.0, 1);
        assert!(matches!(
            c.validate(),
            Err(ConfigError::Invalid { field: "beta", .. })
        ));
        c.policy = Policy::Cap { beta: 2.0 };
        assert!(c.validate().is_ok());
    }

    #[test]
    fn step_cells_matches_speed_and_interval() {
        let c = ScenarioConfig::baseline(Policy::Pheromone, 5, 20.0, 1);
        assert_eq!(c.decision_interval_s, 5.0);
        assert_eq!(c.step_cells(), 1);
        let c = ScenarioConfig::baseline(Policy::Pheromone, 5, 40.0, 1);
        assert_eq!(c.decision_interval_s, 10.0);
        assert_eq!(c.step_cells(), 4);
    }

    #[test]
    fn fairness_hand_values() {
        let grid = GridSpec::new(3, 100.0).unwrap();

        // All 9 cells scanned twice.
        let mut ledger = ScanLedger::new(grid);
        for y in 0..3 {
            for x in 0..3 {
                ledger.record(Cell::new(x, y), 1.0);
                ledger.record(Cell::new(x, y), 2.0);
            }
        }
        assert_relative_eq!(fairness(&ledger), 1.0, max_relative = 1e-12);

        // Exactly one of 9 cells scanned.
        let mut ledger = ScanLedger::new(grid);
        ledger.record(Cell::new(1, 1), 1.0);
        assert_relative_eq!(fairness(&ledger), 1.0 / 9.0, max_relative = 1e-12);

        // Counts (2, 1, 1, 0) over 4 cells: 16 / (4 * 6) = 2/3.
        let grid2 = GridSpec::new(2, 100.0);
        assert!(grid2.is_err()); // grids are at least 3x3; emulate with raw counts
        let mut ledger = ScanLedger::new(grid);
        ledger.record(Cell::new(0, 0), 1.0);
        ledger.record(Cell::new(0, 0), 2.0);
        ledger.record(Cell::new(1, 0), 1.0);
        ledger.record(Cell::new(2, 0), 1.0);
        // counts (2,1,1,0,...,0) over 9 cells: 16 / (9 * 6) = 8/27.
        assert_relative_eq!(fairness(&ledger), 16.0 / 54.0, max_relative = 1e-12);
        assert_relative_eq!(fairness(&ScanLedger::new(grid)), 0.0);
    }

    #[test]
    fn coverage_time_examples() {
        let grid = GridSpec::new(3, 100.0).unwrap();

        // 90% of 9 cells = 9 cells (ceil of 8.1); synthetic full cover at 1750.
        let mut ledger = ScanLedger::new(grid);
        for y in 0..3 {
            for x in 0..3 {
                let t = if x == 2 && y == 2 { 1750.0 } else { 100.0 + x as f64 };
                ledger.record(Cell::new(x, y), t);
            }
        }
        assert_eq!(coverage_time(&ledger, 0.9, 8000.0), (1750.0, false));

        // Never reached: censored at sim time.
        let mut ledger = ScanLedger::new(grid);
        ledger.record(Cell::new(0, 0), 5.0);
        assert_eq!(coverage_time(&ledger, 0.9, 8000.0), (8000.0, true));

        // Tiny target satisfied by the first scan.
        assert_eq!(coverage_time(&ledger, 0.1, 8000.0), (5.0, false));
    }

    #[test]
    fn mean_sem_examples() {
        let single = mean_sem(&[5.0]);
        assert_eq!(single.mean, 5.0);
        assert_eq!(single.sem, 0.0);

        let same = mean_sem(&[2.0, 2.0, 2.0]);
        assert_eq!(same.sem, 0.0);

        let spread = mean_sem(&[1.0, 2.0, 3.0]);
        assert_relative_eq!(spread.mean, 2.0);
        assert_relative_eq!(spread.sem, 1.0 / 3f64.sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn single_uav_covers_and_stays_one_component() {
        let mut c = small_config(Policy::Pheromone, 1, 4000.0, 7);
        c.metric_sample_period_s = 50.0;
        let result = run(&c).unwrap();
        // Waypoints only target interior cells, so on a 12x12 grid the
        // reachable fraction tops out near the interior share (100/144).
        // Covering 65% of all cells means nearly the whole interior.
        assert!(
            result.samples.last().unwrap().covered_fraction >= 0.65,
            "coverage stalled at {}",
            result.samples.last().unwrap().covered_fraction
        );
        assert!(result.samples.iter().all(|s| s.ncc == 1));
        assert!(result.samples.iter().all(|s| s.anc == 0.0));
    }

    #[test]
    fn frozen_pair_in_range_keeps_anc_one() {
        let c = small_config(Policy::Frozen, 2, 60.0, 1);
        let result = run(&c).unwrap();
        // Two UAVs spawn 50 m apart and hold position: one component, one
        // link each, at every sample.
        assert!(result.samples.iter().all(|s| s.ncc == 1));
        assert!(result.samples.iter().all(|s| s.anc == 1.0));
        assert!(result.tc_censored);
        assert_eq!(result.tc_s, 60.0);
    }

    #[test]
    fn rerun_is_bit_identical() {
        let c = small_config(Policy::Cap { beta: 2.0 }, 3, 120.0, 42);
        let a = run(&c).unwrap();
        let b = run(&c).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn different_seeds_change_cacoc2_runs() {
        let a = run(&small_config(Policy::Cacoc2 { flocking: 0.3 }, 3, 120.0, 1)).unwrap();
        let b = run(&small_config(Policy::Cacoc2 { flocking: 0.3 }, 3, 120.0, 2)).unwrap();
        assert_ne!(a.samples, b.samples);
    }

    #[test]
    fn cap_beta_zero_matches_pheromone_decisions() {
        let cap = small_config(Policy::Cap { beta: 0.0 }, 3, 300.0, 11);
        let pher = small_config(Policy::Pheromone, 3, 300.0, 11);

        let mut cap_events = Vec::new();
        run_with_hooks(
            &cap,
            RunHooks {
                decisions: Some(&mut cap_events),
                ..Default::default()
            },
        )
        .unwrap();

        let mut pher_events = Vec::new();
        run_with_hooks(
            &pher,
            RunHooks {
                decisions: Some(&mut pher_events),
                ..Default::default()
            },
        )
        .unwrap();

        assert!(!cap_events.is_empty());
        assert_eq!(cap_events, pher_events);
    }

    #[test]
    fn run_batch_orders_results_by_seed() {
        let c = small_config(Policy::Pheromone, 2, 60.0, 0);
        let batch = run_batch_jobs(&c, &[3, 1, 2], 2).unwrap();
        assert_eq!(batch.runs.len(), 3);
        assert_eq!(batch.runs[0].config.seed, 3);
        assert_eq!(batch.runs[1].config.seed, 1);
        assert_eq!(batch.runs[2].config.seed, 2);
        assert_eq!(batch.censored_runs, 3);
        // Identical dynamics (pheromone policy ignores the seed): SEM 0.
        assert_eq!(batch.tc.sem, 0.0);
    }

    #[test]
    fn run_batch_single_seed_has_zero_sem() {
        let c = small_config(Policy::Pheromone, 2, 60.0, 0);
        let batch = run_batch_jobs(&c, &[9], 4).unwrap();
        assert_eq!(batch.runs.len(), 1);
        assert_eq!(batch.tc.sem, 0.0);
        assert_eq!(batch.tc.mean, batch.runs[0].tc_s);
    }

    #[test]
    fn run_batch_rejects_empty_seed_list() {
        let c = small_config(Policy::Pheromone, 2, 60.0, 0);
        assert!(matches!(
            run_batch_jobs(&c, &[], 2),
            Err(RunError::Config(ConfigError::NoSeeds))
        ));
    }

    #[test]
    fn trajectory_hook_rows_and_bounds() {
        let c = small_config(Policy::Cap { beta: 2.0 }, 2, 30.0, 5);
        let mut trace = Vec::new();
        run_with_hooks(
            &c,
            RunHooks {
                trajectory: Some(&mut trace),
                ..Default::default()
            },
        )
        .unwrap();
        let text = String::from_utf8(trace).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        // (1 initial + 300 ticks) * 2 UAVs.
        assert_eq!(lines.len(), 301 * 2);
        for line in lines {
            let parts: Vec<&str> = line.split(',').collect();
            assert_eq!(parts.len(), 5);
            let x: f64 = parts[2].parse().unwrap();
            let y: f64 = parts[3].parse().unwrap();
            assert!((0.0..=1200.0).contains(&x));
            assert!((0.0..=1200.0).contains(&y));
        }
    }

    #[test]
    fn message_log_counts_receivers() {
        let c = small_config(Policy::Frozen, 3, 4.0, 5);
        let mut log = Vec::new();
        run_with_hooks(
            &c,
            RunHooks {
                messages: Some(&mut log),
                ..Default::default()
            },
        )
        .unwrap();
        let text = String::from_utf8(log).unwrap();
        // Hellos at t = 0, 2, 4 with 3 senders each.
        assert_eq!(text.lines().count(), 9);
        // All three UAVs are within range of each other (50 m spacing).
        for line in text.lines() {
            assert!(line.ends_with(",2"), "unexpected row {line}");
        }
    }

    #[test]
    fn covered_fraction_is_monotone() {
        let c = small_config(Policy::Pheromone, 2, 300.0, 3);
        let result = run(&c).unwrap();
        for w in result.samples.windows(2) {
            assert!(w[1].covered_fraction >= w[0].covered_fraction);
        }
    }
}
