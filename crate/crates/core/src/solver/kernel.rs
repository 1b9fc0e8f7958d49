//! Regularized delta used both to spread the bead's force onto the string and
//! to read string quantities back at the bead.
//!
//! Kernels are cardinal B-splines of degree 1 (hat), 2 and 3. Their weights
//! form a partition of unity, so `Σ w_j dx = 1` for every bead position.

use serde::{Deserialize, Serialize};

use super::grid::{Boundary, Grid};
use super::{Result, SolverError};

/// Spline degree of the regularized delta; the support covers `width + 1`
/// nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct KernelWidth(u8);

impl KernelWidth {
    pub const HAT: KernelWidth = KernelWidth(1);
    pub const QUADRATIC: KernelWidth = KernelWidth(2);
    pub const CUBIC: KernelWidth = KernelWidth(3);

    pub fn new(width: u8) -> Result<Self> {
        match width {
            1..=3 => Ok(Self(width)),
            _ => Err(SolverError::Config(format!("kernel width must be 1, 2 or 3, got {width}"))),
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }

    pub fn support(self) -> usize {
        self.0 as usize + 1
    }
}

impl Default for KernelWidth {
    fn default() -> Self {
        Self::HAT
    }
}

impl TryFrom<u8> for KernelWidth {
    type Error = SolverError;
    fn try_from(v: u8) -> Result<Self> {
        Self::new(v)
    }
}

impl From<KernelWidth> for u8 {
    fn from(k: KernelWidth) -> u8 {
        k.0
    }
}

fn bspline(width: KernelWidth, r: f64) -> f64 {
    let a = r.abs();
    match width.0 {
        1 => (1.0 - a).max(0.0),
        2 => {
            if a < 0.5 {
                0.75 - a * a
            } else if a < 1.5 {
                0.5 * (1.5 - a) * (1.5 - a)
            } else {
                0.0
            }
        }
        _ => {
            if a < 1.0 {
                (4.0 - 6.0 * a * a + 3.0 * a * a * a) / 6.0
            } else if a < 2.0 {
                let b = 2.0 - a;
                b * b * b / 6.0
            } else {
                0.0
            }
        }
    }
}

/// dB/dr and d²B/dr² of the spline; the hat's curvature (point masses at
/// the knots) is dropped.
fn bspline_derivatives(width: KernelWidth, r: f64) -> (f64, f64) {
    let a = r.abs();
    let sg = r.signum();
    match width.0 {
        1 => {
            if a < 1.0 {
                (-sg, 0.0)
            } else {
                (0.0, 0.0)
            }
        }
        2 => {
            if a < 0.5 {
                (-2.0 * r, -2.0)
            } else if a < 1.5 {
                (-sg * (1.5 - a), 1.0)
            } else {
                (0.0, 0.0)
            }
        }
        _ => {
            if a < 1.0 {
                (sg * (-2.0 * a + 1.5 * a * a), -2.0 + 3.0 * a)
            } else if a < 2.0 {
                let b = 2.0 - a;
                (-sg * 0.5 * b * b, b)
            } else {
                (0.0, 0.0)
            }
        }
    }
}

/// Nodes and fractions (`w_j dx`) of the kernel centered on one bead position,
/// with the fractions' first and second derivatives in the bead position
/// (scaled by dx and dx²).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stencil {
    pub(crate) nodes: [usize; 4],
    pub(crate) fractions: [f64; 4],
    pub(crate) slopes: [f64; 4],
    pub(crate) curvatures: [f64; 4],
    pub(crate) len: usize,
    pub(crate) dx: f64,
}

impl Stencil {
    pub fn build(x: f64, grid: &Grid, width: KernelWidth) -> Result<Self> {
        if !x.is_finite() {
            return Err(SolverError::NonFinite { t: f64::NAN, what: "bead position" });
        }
        let dx = grid.dx();
        let xi = grid.wrap(x) / dx;
        let first = match width.0 {
            1 => xi.floor() as isize,
            2 => (xi + 0.5).floor() as isize - 1,
            _ => xi.floor() as isize - 1,
        };
        let len = width.support();
        let mut nodes = [0usize; 4];
        let mut fractions = [0.0; 4];
        let mut slopes = [0.0; 4];
        let mut curvatures = [0.0; 4];
        for k in 0..len {
            let j = first + k as isize;
            let stored = grid.resolve(j).ok_or(SolverError::BeadOutsideDomain { x })?;
            if grid.bc() == Boundary::FixedEnds && grid.is_pinned(stored) {
                return Err(SolverError::BeadOutsideDomain { x });
            }
            nodes[k] = stored;
            fractions[k] = bspline(width, xi - j as f64);
            (slopes[k], curvatures[k]) = bspline_derivatives(width, xi - j as f64);
        }
        Ok(Self { nodes, fractions, slopes, curvatures, len, dx })
    }

    /// (node, fraction) pairs, fractions summing to one.
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.nodes[..self.len].iter().copied().zip(self.fractions[..self.len].iter().copied())
    }

    /// (node, fraction, d fraction/dx · dx, d² fraction/dx² · dx²).
    pub(crate) fn iter_derivatives(&self) -> impl Iterator<Item = (usize, f64, f64, f64)> + '_ {
        (0..self.len).map(|k| (self.nodes[k], self.fractions[k], self.slopes[k], self.curvatures[k]))
    }

    /// Kernel-weighted average Σ w_j f_j dx.
    pub fn interpolate(&self, f: &[f64]) -> f64 {
        self.iter().map(|(j, a)| a * f[j]).sum()
    }

    /// Σ w_j² dx, the self-overlap of the kernel.
    pub fn self_overlap(&self) -> f64 {
        self.fractions[..self.len].iter().map(|a| a * a).sum::<f64>() / self.dx
    }

    pub fn first_node(&self) -> usize {
        self.nodes[0]
    }

    pub fn last_node(&self) -> usize {
        self.nodes[self.len - 1]
    }
}

/// Delta weights `(node, w_j)` with `Σ w_j dx = 1`; zero weights are dropped.
pub fn deposit_kernel(x_p: f64, grid: &Grid, width: KernelWidth) -> Result<Vec<(usize, f64)>> {
    let st = Stencil::build(x_p, grid, width)?;
    let dx = grid.dx();
    Ok(st.iter().filter(|&(_, a)| a != 0.0).map(|(j, a)| (j, a / dx)).collect())
}
