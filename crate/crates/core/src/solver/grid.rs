use serde::{Deserialize, Serialize};

use super::{Result, SolverError};

/// Smallest admissible number of cells.
pub const MIN_CELLS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Periodic,
    FixedEnds,
}

/// Uniform grid on [0, L) with `cells` intervals of width dx = L / cells.
///
/// Periodic grids carry `cells` nodes (node `cells` is node 0). Fixed-end grids
/// carry `cells + 1` nodes; the first and last are pinned to zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    length: f64,
    cells: usize,
    bc: Boundary,
}

impl Grid {
    pub fn new(length: f64, cells: usize, bc: Boundary) -> Result<Self> {
        if !(length > 0.0 && length.is_finite()) {
            return Err(SolverError::Config(format!("domain length must be > 0, got {length}")));
        }
        if cells < MIN_CELLS {
            return Err(SolverError::Config(format!("need at least {MIN_CELLS} cells, got {cells}")));
        }
        Ok(Self { length, cells, bc })
    }

    pub fn length(&self) -> f64 {
        self.length
    }
    pub fn cells(&self) -> usize {
        self.cells
    }
    pub fn bc(&self) -> Boundary {
        self.bc
    }
    pub fn dx(&self) -> f64 {
        self.length / self.cells as f64
    }

    /// Number of stored nodes.
    pub fn nodes(&self) -> usize {
        match self.bc {
            Boundary::Periodic => self.cells,
            Boundary::FixedEnds => self.cells + 1,
        }
    }

    pub fn x(&self, j: usize) -> f64 {
        j as f64 * self.dx()
    }

    pub fn is_pinned(&self, j: usize) -> bool {
        self.bc == Boundary::FixedEnds && (j == 0 || j == self.cells)
    }

    /// Same grid with the cell count multiplied by `factor`.
    pub fn refined(&self, factor: usize) -> Self {
        Self { cells: self.cells * factor, ..*self }
    }

    pub fn with_cells(&self, cells: usize) -> Result<Self> {
        Self::new(self.length, cells, self.bc)
    }

    /// Map a (possibly unwrapped) abscissa into [0, L) for periodic grids.
    pub fn wrap(&self, x: f64) -> f64 {
        match self.bc {
            Boundary::Periodic => {
                let r = x.rem_euclid(self.length);
                // rem_euclid can round up to exactly L
                if r >= self.length { 0.0 } else { r }
            }
            Boundary::FixedEnds => x,
        }
    }

    /// Resolve an unwrapped node index to storage, or None when it falls off a
    /// fixed-end grid.
    pub(crate) fn resolve(&self, j: isize) -> Option<usize> {
        match self.bc {
            Boundary::Periodic => Some(j.rem_euclid(self.cells as isize) as usize),
            Boundary::FixedEnds => (0..=self.cells as isize).contains(&j).then_some(j as usize),
        }
    }
}
