//! Digital repel-pheromone grid.
//!
//! Each UAV owns a private field over the full C x C map. Deposits
//! accumulate into a pending buffer and become visible at the next
//! [`PheromoneField::step`], which applies the synchronous evaporate/diffuse
//! update over the previous values. A virtual ring just outside the map
//! holds a fixed repulsive value: off-map neighbor reads (for both diffusion
//! inflow and the look-ahead average) return `boundary_value`, so edge cells
//! accumulate a standing repulsion that pushes UAVs back inward while every
//! map cell remains scannable.

use std::io::{self, Write};

use thiserror::Error;

use crate::grid::{Cell, GridSpec};

/// Patch half-width: hello messages carry the 5x5 window around the sender.
pub const PATCH_RADIUS: i32 = 2;

const PATCH_SIDE: usize = (2 * PATCH_RADIUS as usize) + 1;

/// Errors from field construction.
#[derive(Debug, Error, PartialEq)]
pub enum FieldError {
    #[error("evaporation_rate must lie in [0, 1], got {0}")]
    EvaporationOutOfRange(f64),
    #[error("diffusion_rate must lie in [0, 1], got {0}")]
    DiffusionOutOfRange(f64),
    #[error("boundary_pheromone must be non-negative and finite, got {0}")]
    BadBoundaryValue(f64),
}

/// Per-cell repel pheromone intensities with evaporation/diffusion dynamics.
#[derive(Debug, Clone, PartialEq)]
pub struct PheromoneField {
    grid: GridSpec,
    values: Vec<f64>,
    pending: Vec<f64>,
    evaporation_rate: f64,
    diffusion_rate: f64,
    boundary_value: f64,
}

impl PheromoneField {
    /// Builds an all-zero field. Rates must lie in `[0, 1]`; the grid itself
    /// already guarantees at least 3 cells per side.
    pub fn new(
        grid: GridSpec,
        evaporation_rate: f64,
        diffusion_rate: f64,
        boundary_value: f64,
    ) -> Result<Self, FieldError> {
        if !(0.0..=1.0).contains(&evaporation_rate) || !evaporation_rate.is_finite() {
            return Err(FieldError::EvaporationOutOfRange(evaporation_rate));
        }
        if !(0.0..=1.0).contains(&diffusion_rate) || !diffusion_rate.is_finite() {
            return Err(FieldError::DiffusionOutOfRange(diffusion_rate));
        }
        if !(boundary_value >= 0.0) || !boundary_value.is_finite() {
            return Err(FieldError::BadBoundaryValue(boundary_value));
        }
        let n = grid.cell_count();
        Ok(PheromoneField {
            grid,
            values: vec![0.0; n],
            pending: vec![0.0; n],
            evaporation_rate,
            diffusion_rate,
            boundary_value,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn evaporation_rate(&self) -> f64 {
        self.evaporation_rate
    }

    pub fn diffusion_rate(&self) -> f64 {
        self.diffusion_rate
    }

    pub fn boundary_value(&self) -> f64 {
        self.boundary_value
    }

    /// Raw row-major values, `C` rows of `C` columns.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Pheromone value at a cell. Cells outside the map read as the fixed
    /// boundary value (the virtual repulsive wall).
    pub fn value(&self, cell: Cell) -> f64 {
        if self.grid.contains(cell) {
            self.values[self.grid.index(cell)]
        } else {
            self.boundary_value
        }
    }

    /// Accumulates a deposit that becomes visible at the next `step`.
    /// Deposits on the outermost map ring (or off the map) are ignored; the
    /// edge ring is shaped by the wall, not by visits.
    pub fn deposit(&mut self, cell: Cell, amount: f64) {
        debug_assert!(amount >= 0.0, "deposit amount must be non-negative");
        if self.grid.is_interior(cell) {
            self.pending[self.grid.index(cell)] += amount;
        }
    }

    /// Marks a visited cell: tops the pending deposit up so the cell holds
    /// the full repel magnitude after the next update. Repeat visits within
    /// an interval do not stack (repel marks have unit maximum), so a marked
    /// cell converges to `magnitude` instead of accumulating past it.
    pub fn mark_visited(&mut self, cell: Cell, magnitude: f64) {
        debug_assert!(magnitude >= 0.0);
        if self.grid.is_interior(cell) {
            let idx = self.grid.index(cell);
            let top_up = (magnitude - self.values[idx]).max(0.0);
            if top_up > self.pending[idx] {
                self.pending[idx] = top_up;
            }
        }
    }

    /// Synchronous evaporate/diffuse update over the pre-step values.
    ///
    /// For every cell:
    /// `p' = (1 - evap) * ((1 - diff) * p + pending + diff/8 * sum(8 neighbors))`
    ///
    /// The neighbor sum excludes the cell itself; neighbors outside the map
    /// contribute the boundary value, so the wall continuously injects
    /// repulsion into the edge ring. Shares diffusing off the map are lost.
    /// Pending deposits reset to zero.
    pub fn step(&mut self) {
        let c = self.grid.cells_per_side();
        let keep = 1.0 - self.diffusion_rate;
        let evap = 1.0 - self.evaporation_rate;
        let share = self.diffusion_rate / 8.0;

        let old = &self.values;
        let mut next = vec![0.0; old.len()];
        for y in 0..c {
            let row = y * c;
            for x in 0..c {
                let idx = row + x;
                let neighbors = if x >= 1 && x + 1 < c && y >= 1 && y + 1 < c {
                    old[idx - c - 1]
                        + old[idx - c]
                        + old[idx - c + 1]
                        + old[idx - 1]
                        + old[idx + 1]
                        + old[idx + c - 1]
                        + old[idx + c]
                        + old[idx + c + 1]
                } else {
                    self.edge_neighbor_sum(old, x as i32, y as i32)
                };
                next[idx] = evap * (keep * old[idx] + self.pending[idx] + share * neighbors);
            }
        }
        self.values = next;
        self.pending.iter_mut().for_each(|p| *p = 0.0);
    }

    fn edge_neighbor_sum(&self, old: &[f64], x: i32, y: i32) -> f64 {
        let mut sum = 0.0;
        for dy in -1..=1 {
            for dx in -1..=1 {
                if dx == 0 && dy == 0 {
                    continue;
                }
                let cell = Cell::new(x + dx, y + dy);
                sum += if self.grid.contains(cell) {
                    old[self.grid.index(cell)]
                } else {
                    self.boundary_value
                };
            }
        }
        sum
    }

    /// Look-ahead pheromone: weighted average of a cell and its eight
    /// neighbors, `(4 * p(cell) + sum(neighbors)) / 12`. Neighbors outside
    /// the map contribute the boundary value.
    pub fn look_ahead(&self, cell: Cell) -> f64 {
        debug_assert!(self.grid.contains(cell), "look_ahead cell outside map");
        let mut sum = 4.0 * self.value(cell);
        for dy in -1..=1 {
            for dx in -1..=1 {
                if dx == 0 && dy == 0 {
                    continue;
                }
                sum += self.value(cell.offset(dx, dy));
            }
        }
        sum / 12.0
    }

    /// Copies the 5x5 window centered at `center`; entries falling outside
    /// the map are flagged absent.
    pub fn extract_patch(&self, center: Cell) -> PheromonePatch {
        debug_assert!(self.grid.contains(center), "patch center outside map");
        let mut patch = PheromonePatch::empty(center);
        for dy in -PATCH_RADIUS..=PATCH_RADIUS {
            for dx in -PATCH_RADIUS..=PATCH_RADIUS {
                let cell = center.offset(dx, dy);
                if self.grid.contains(cell) {
                    patch.set(dx, dy, self.values[self.grid.index(cell)]);
                }
            }
        }
        patch
    }

    /// Merges a received patch: every present entry raises the local value to
    /// `max(local, remote)`. Edge-ring cells are left untouched (their shape
    /// comes from the wall), so merging never lowers a value and repeated
    /// merges are idempotent.
    pub fn merge_patch(&mut self, patch: &PheromonePatch) {
        for (cell, value) in patch.entries() {
            if self.grid.is_interior(cell) {
                let idx = self.grid.index(cell);
                if value > self.values[idx] {
                    self.values[idx] = value;
                }
            }
        }
    }

    /// Sum of all cell values on the map.
    pub fn total_mass(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Writes the field as a CSV matrix: `C` rows (y = 0 first) of `C`
    /// comma-separated values with 6 decimal places.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        let c = self.grid.cells_per_side();
        for y in 0..c {
            for x in 0..c {
                if x > 0 {
                    write!(out, ",")?;
                }
                write!(out, "{:.6}", self.values[y * c + x])?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// A 5x5 window of pheromone values exchanged in hello messages.
#[derive(Debug, Clone, PartialEq)]
pub struct PheromonePatch {
    center: Cell,
    values: [[f64; PATCH_SIDE]; PATCH_SIDE],
    present: [[bool; PATCH_SIDE]; PATCH_SIDE],
}

impl PheromonePatch {
    fn empty(center: Cell) -> Self {
        PheromonePatch {
            center,
            values: [[0.0; PATCH_SIDE]; PATCH_SIDE],
            present: [[false; PATCH_SIDE]; PATCH_SIDE],
        }
    }

    pub fn center(&self) -> Cell {
        self.center
    }

    /// Window half-width in cells; the window side is `2 * radius + 1`.
    pub const fn radius() -> i32 {
        PATCH_RADIUS
    }

    fn set(&mut self, dx: i32, dy: i32, value: f64) {
        let (i, j) = Self::slot(dx, dy);
        self.values[j][i] = value;
        self.present[j][i] = true;
    }

    fn slot(dx: i32, dy: i32) -> (usize, usize) {
        ((dx + PATCH_RADIUS) as usize, (dy + PATCH_RADIUS) as usize)
    }

    /// Value at window offset `(dx, dy)` from the center, if present.
    pub fn get(&self, dx: i32, dy: i32) -> Option<f64> {
        let (i, j) = Self::slot(dx, dy);
        self.present[j][i].then(|| self.values[j][i])
    }

    pub fn present_count(&self) -> usize {
        self.present.iter().flatten().filter(|&&p| p).count()
    }

    /// Iterates present entries as `(map cell, value)`.
    pub fn entries(&self) -> impl Iterator<Item = (Cell, f64)> + '_ {
        (-PATCH_RADIUS..=PATCH_RADIUS).flat_map(move |dy| {
            (-PATCH_RADIUS..=PATCH_RADIUS).filter_map(move |dx| {
                self.get(dx, dy).map(|v| (self.center.offset(dx, dy), v))
            })
        })
    }
}
