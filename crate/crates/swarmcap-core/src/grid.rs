//! Map geometry: a square grid of scan cells plus the small vector type used
//! for positions in meters.

use std::ops::{Add, AddAssign, Mul, Sub};

use thiserror::Error;

/// Errors from grid construction.
#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("cells_per_side must be at least 3, got {0}")]
    TooFewCells(usize),
    #[error("cell_size_m must be positive and finite, got {0}")]
    BadCellSize(f64),
    #[error("map width {width_m} m is not a whole number of {cell_size_m} m cells")]
    NotDivisible { width_m: f64, cell_size_m: f64 },
}

/// 2-D point or vector in meters. `x` grows east, `y` grows north.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    /// Unit vector in the same direction; the zero vector stays zero.
    pub fn normalized(self) -> Vec2 {
        let n = self.norm();
        if n == 0.0 {
            Vec2::ZERO
        } else {
            Vec2::new(self.x / n, self.y / n)
        }
    }

    pub fn distance(self, other: Vec2) -> f64 {
        (self - other).norm()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, rhs: Vec2) {
        self.x += rhs.x;
        self.y += rhs.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

/// Grid cell coordinates: column `x` (east), row `y` (north).
///
/// Intermediate arithmetic may leave the map; cells held by simulation state
/// are always in-map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    pub x: i32,
    pub y: i32,
}

impl Cell {
    pub fn new(x: i32, y: i32) -> Self {
        Cell { x, y }
    }

    pub fn offset(self, dx: i32, dy: i32) -> Cell {
        Cell::new(self.x + dx, self.y + dy)
    }
}

/// Square search area divided into `C x C` cells of equal side length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    cells_per_side: usize,
    cell_size_m: f64,
}

impl GridSpec {
    /// Builds a grid of `cells_per_side` x `cells_per_side` cells.
    pub fn new(cells_per_side: usize, cell_size_m: f64) -> Result<Self, GridError> {
        if cells_per_side < 3 {
            return Err(GridError::TooFewCells(cells_per_side));
        }
        if !(cell_size_m > 0.0) || !cell_size_m.is_finite() {
            return Err(GridError::BadCellSize(cell_size_m));
        }
        Ok(GridSpec {
            cells_per_side,
            cell_size_m,
        })
    }

    /// Builds a grid from a square map width; the width must be a whole
    /// number of cells.
    pub fn from_map(width_m: f64, cell_size_m: f64) -> Result<Self, GridError> {
        if !(cell_size_m > 0.0) || !cell_size_m.is_finite() {
            return Err(GridError::BadCellSize(cell_size_m));
        }
        let cells = width_m / cell_size_m;
        let rounded = cells.round();
        if (cells - rounded).abs() > 1e-9 * cells.max(1.0) {
            return Err(GridError::NotDivisible {
                width_m,
                cell_size_m,
            });
        }
        GridSpec::new(rounded as usize, cell_size_m)
    }

    pub fn cells_per_side(&self) -> usize {
        self.cells_per_side
    }

    pub fn cell_size_m(&self) -> f64 {
        self.cell_size_m
    }

    pub fn width_m(&self) -> f64 {
        self.cells_per_side as f64 * self.cell_size_m
    }

    pub fn height_m(&self) -> f64 {
        self.width_m()
    }

    pub fn cell_count(&self) -> usize {
        self.cells_per_side * self.cells_per_side
    }

    /// Cell containing a point. Points on the map edge clamp to the outermost
    /// cell, so every in-map point maps to a valid cell.
    pub fn cell_of(&self, p: Vec2) -> Cell {
        let hi = self.cells_per_side as i32 - 1;
        let cx = (p.x / self.cell_size_m).floor() as i32;
        let cy = (p.y / self.cell_size_m).floor() as i32;
        Cell::new(cx.clamp(0, hi), cy.clamp(0, hi))
    }

    /// Center point of a cell in meters.
    pub fn center(&self, c: Cell) -> Vec2 {
        Vec2::new(
            (c.x as f64 + 0.5) * self.cell_size_m,
            (c.y as f64 + 0.5) * self.cell_size_m,
        )
    }

    pub fn contains(&self, c: Cell) -> bool {
        let n = self.cells_per_side as i32;
        c.x >= 0 && c.x < n && c.y >= 0 && c.y < n
    }

    /// Interior cells are everything except the outermost ring.
    pub fn is_interior(&self, c: Cell) -> bool {
        let n = self.cells_per_side as i32;
        c.x >= 1 && c.x < n - 1 && c.y >= 1 && c.y < n - 1
    }

    /// Component-wise clamp into the interior region.
    pub fn clamp_interior(&self, c: Cell) -> Cell {
        let hi = self.cells_per_side as i32 - 2;
        Cell::new(c.x.clamp(1, hi), c.y.clamp(1, hi))
    }

    /// Clamp a point into the map rectangle.
    pub fn clamp_point(&self, p: Vec2) -> Vec2 {
        Vec2::new(p.x.clamp(0.0, self.width_m()), p.y.clamp(0.0, self.height_m()))
    }

    /// Row-major index of an in-map cell.
    pub fn index(&self, c: Cell) -> usize {
        debug_assert!(self.contains(c), "cell {c:?} outside grid");
        c.y as usize * self.cells_per_side + c.x as usize
    }
}
