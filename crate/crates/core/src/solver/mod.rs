//! Time-domain integrator for the coupled string + bead system.
//!
//! The string is discretized by second-order finite differences on a uniform
//! grid; the bead is a point particle whose transverse position is slaved to
//! the string through a regularized delta. The concatenated state
//! `(u, ∂ₜu, x_p, ẋ_p)` is advanced by classical RK4.

mod coupling;
mod grid;
mod init;
mod integrator;
mod kernel;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytic::{AnalyticError, PhysicalParams};

pub use coupling::{interpolate, interpolate_with, probe_state, kink_force_estimate, normal_force, prescribed_normal_force, BeadProbe, Interpolated};
pub use grid::{Boundary, Grid, MIN_CELLS};
pub use init::{
    commensurate_length, init_from_analytic, init_pulse, init_zero, PulseDirection, PulseSpec,
};
pub use integrator::{
    rhs, rk4_step, run, run_with_reference, step_rk4, Integrator, RunOutput, RunStatus, Snapshot, StateDerivative,
    TrajectorySample,
};
pub use kernel::{deposit_kernel, KernelWidth, Stencil};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("time step {dt} violates the CFL bound: dt c / dx = {courant:.4} > {limit}")]
    Cfl { dt: f64, courant: f64, limit: f64 },
    #[error("bead at x = {x} has its kernel outside the movable part of the string")]
    BeadOutsideDomain { x: f64 },
    #[error("non-finite {what} at t = {t}")]
    NonFinite { t: f64, what: &'static str },
    #[error("field wavelengths do not fit the periodic domain of length {length}; nearest commensurate lengths: {suggestions:?}")]
    Incommensurate { length: f64, suggestions: Vec<f64> },
    #[error("analytic field does not vanish at the pinned ends (|u| = {value:e})")]
    BoundaryMismatch { value: f64 },
    #[error("kink estimator unavailable: bead within {nodes} nodes of a pinned end")]
    KinkUnavailable { nodes: usize },
    #[error(transparent)]
    Analytic(#[from] AnalyticError),
}

pub type Result<T> = std::result::Result<T, SolverError>;

/// How the bead's reaction force enters the string equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Explicit source term -(N/λ) δ_h(x - x_p) with N from the closed-form
    /// constraint force.
    #[default]
    SourceSplit,
    /// The bead loads the kernel nodes as a local density defect
    /// λ̃ = λ + m_p δ_h / (1 + s²); its spring and convective terms act as a
    /// forcing on the same nodes.
    VariableDensity,
}

/// How the slopes seen by the bead are formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeDerivatives {
    /// Kernel average of centered differences: s = Σ w_j D₀u_j dx. Momentum
    /// exchange is exact; the energy ledger closes to O(dx²).
    #[default]
    Centered,
    /// Exact derivatives of the interpolant z_p = Σ w_j u_j dx with respect to
    /// the bead position. The semi-discrete system is then the Euler-Lagrange
    /// flow of a discrete Lagrangian and conserves energy exactly; momentum
    /// closes to O(dx²). Needs a kernel of width 2 or 3.
    Kernel,
    /// Centered slopes, with z_p carried as its own variable and held on the
    /// string by the velocity constraint ż_p = Σ w_j v_j dx + ẋ_p s. The
    /// constraint force does no work and exchanges momentum through the same
    /// s the string feels, so energy and momentum are both exact up to time
    /// stepping. z_p departs from the interpolated string by O(dx²).
    Conservative,
}

/// How string and bead are advanced relative to one another.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coupling {
    /// One RK4 flow for the concatenated state.
    #[default]
    Monolithic,
    /// String update with the bead frozen, then bead update on the new string.
    /// First order in the coupling.
    Alternating,
    /// N forced to zero: free string and inertial bead.
    Decoupled,
}

/// Longitudinal potential V(x) acting on the bead.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "snake_case")]
pub enum Potential {
    #[default]
    None,
    /// V = a (x - x0)²
    Harmonic { amplitude: f64, center: f64 },
    /// V = a cos(2π (x - x0) / period)
    CosineLattice { amplitude: f64, period: f64, center: f64 },
}

impl Potential {
    pub fn value(&self, x: f64) -> f64 {
        match *self {
            Potential::None => 0.0,
            Potential::Harmonic { amplitude, center } => amplitude * (x - center) * (x - center),
            Potential::CosineLattice { amplitude, period, center } => {
                amplitude * (2.0 * std::f64::consts::PI * (x - center) / period).cos()
            }
        }
    }

    pub fn gradient(&self, x: f64) -> f64 {
        match *self {
            Potential::None => 0.0,
            Potential::Harmonic { amplitude, center } => 2.0 * amplitude * (x - center),
            Potential::CosineLattice { amplitude, period, center } => {
                let k = 2.0 * std::f64::consts::PI / period;
                -amplitude * k * (k * (x - center)).sin()
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Potential::None => Ok(()),
            Potential::Harmonic { amplitude, center } if amplitude.is_finite() && center.is_finite() => Ok(()),
            Potential::CosineLattice { amplitude, period, center }
                if amplitude.is_finite() && center.is_finite() && period > 0.0 && period.is_finite() =>
            {
                Ok(())
            }
            _ => Err(SolverError::Config(format!("invalid potential {self:?}"))),
        }
    }
}

/// Default Courant number.
pub const DEFAULT_CFL: f64 = 0.5;
/// Largest Courant number accepted.
pub const MAX_CFL: f64 = 0.9;
/// A run aborts when total energy exceeds this multiple of its initial value.
pub const DEFAULT_INSTABILITY_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub params: PhysicalParams,
    pub grid: Grid,
    pub dt: f64,
    pub t_end: f64,
    pub cfl_target: f64,
    pub kernel_width: KernelWidth,
    pub scheme: Scheme,
    pub probe: ProbeDerivatives,
    pub coupling: Coupling,
    pub potential: Potential,
    /// Steps between snapshots and diagnostics records.
    pub output_stride: usize,
    pub instability_factor: f64,
}

impl SimConfig {
    /// Configuration whose step is the largest one not exceeding `cfl * dx / c`
    /// that lands exactly on `t_end`.
    pub fn new(params: PhysicalParams, grid: Grid, t_end: f64, cfl: f64) -> Result<Self> {
        if !(t_end > 0.0 && t_end.is_finite()) {
            return Err(SolverError::Config(format!("t_end must be > 0, got {t_end}")));
        }
        let dt_max = cfl * grid.dx() / params.c();
        let steps = (t_end / dt_max).ceil().max(1.0);
        let cfg = Self {
            params,
            grid,
            dt: t_end / steps,
            t_end,
            cfl_target: cfl,
            kernel_width: KernelWidth::default(),
            scheme: Scheme::default(),
            probe: ProbeDerivatives::default(),
            coupling: Coupling::default(),
            potential: Potential::default(),
            output_stride: 100,
            instability_factor: DEFAULT_INSTABILITY_FACTOR,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_kernel(mut self, width: KernelWidth) -> Self {
        self.kernel_width = width;
        self
    }
    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }
    pub fn with_probe(mut self, probe: ProbeDerivatives) -> Self {
        self.probe = probe;
        self
    }
    pub fn with_coupling(mut self, coupling: Coupling) -> Self {
        self.coupling = coupling;
        self
    }
    pub fn with_potential(mut self, potential: Potential) -> Self {
        self.potential = potential;
        self
    }
    pub fn with_stride(mut self, stride: usize) -> Self {
        self.output_stride = stride.max(1);
        self
    }
    pub fn with_params(mut self, params: PhysicalParams) -> Self {
        self.params = params;
        self
    }

    /// Same physics on a grid refined by `factor`, with dt scaled alike.
    pub fn refined(&self, factor: usize) -> Self {
        Self {
            grid: self.grid.refined(factor),
            dt: self.dt / factor as f64,
            output_stride: self.output_stride.saturating_mul(factor),
            ..*self
        }
    }

    pub fn courant(&self) -> f64 {
        self.dt.abs() * self.params.c() / self.grid.dx()
    }

    /// Number of fixed steps needed to reach `t_end`.
    pub fn steps(&self) -> usize {
        (self.t_end / self.dt.abs()).round().max(0.0) as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cfl_target > 0.0 && self.cfl_target <= MAX_CFL) {
            return Err(SolverError::Config(format!(
                "cfl target must lie in (0, {MAX_CFL}], got {}",
                self.cfl_target
            )));
        }
        if !(self.dt != 0.0 && self.dt.is_finite()) {
            return Err(SolverError::Config(format!("time step must be finite and nonzero, got {}", self.dt)));
        }
        let courant = self.courant();
        if courant > self.cfl_target * (1.0 + 1e-12) {
            return Err(SolverError::Cfl { dt: self.dt, courant, limit: self.cfl_target });
        }
        if !(self.instability_factor > 1.0) {
            return Err(SolverError::Config("instability factor must exceed 1".into()));
        }
        if self.probe == ProbeDerivatives::Kernel && self.kernel_width == KernelWidth::HAT {
            return Err(SolverError::Config("kernel-derivative probing needs kernel width 2 or 3".into()));
        }
        if self.output_stride == 0 {
            return Err(SolverError::Config("output stride must be >= 1".into()));
        }
        self.potential.validate()
    }
}

/// Discretized string: displacement and transverse velocity per node.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl FieldState {
    pub fn zeros(grid: &Grid) -> Self {
        Self { u: vec![0.0; grid.nodes()], v: vec![0.0; grid.nodes()] }
    }
}

/// Bead abscissa and horizontal velocity. The transverse position is read
/// from the string through the kernel, except under
/// [`ProbeDerivatives::Conservative`] which carries it in `z_p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassletState {
    /// Abscissa, wrapped into [0, L) on periodic grids.
    pub x_p: f64,
    pub vx_p: f64,
    /// Number of times the bead has crossed the periodic seam (signed).
    pub wraps: i64,
    /// Stored transverse position; None means "on the interpolated string".
    pub z_p: Option<f64>,
}

impl MassletState {
    pub fn new(x_p: f64, vx_p: f64) -> Self {
        Self { x_p, vx_p, wraps: 0, z_p: None }
    }

    pub fn unwrapped(&self, grid: &Grid) -> f64 {
        self.x_p + self.wraps as f64 * grid.length()
    }

    pub fn mach(&self, c: f64) -> f64 {
        self.vx_p.abs() / c
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub t: f64,
    pub field: FieldState,
    pub bead: MassletState,
}

impl SimState {
    /// Transverse bead position: the stored value if any, else u(x_p) read
    /// through the kernel.
    pub fn z_p(&self, config: &SimConfig) -> Result<f64> {
        Ok(probe_state(self, config)?.u)
    }

    pub fn is_finite(&self) -> bool {
        self.bead.x_p.is_finite()
            && self.bead.vx_p.is_finite()
            && self.bead.z_p.is_none_or(f64::is_finite)
            && self.field.u.iter().chain(&self.field.v).all(|a| a.is_finite())
    }
}
