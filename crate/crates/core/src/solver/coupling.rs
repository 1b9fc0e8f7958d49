//! Bead-string coupling: kernel probes of the field at the bead and the
//! normal force that keeps the bead on the string.

use super::grid::Grid;
use super::kernel::{KernelWidth, Stencil};
use super::{FieldState, ProbeDerivatives, Result, SimConfig, SimState, SolverError};

/// Field quantities read at the bead through the kernel.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Interpolated {
    /// u at the bead, i.e. z_p.
    pub u: f64,
    /// ∂ₓu (slope s).
    pub ux: f64,
    /// ∂ₓ²u as seen by the moving bead (convective term).
    pub uxx: f64,
    /// Kernel average of the discrete Laplacian D₂u.
    pub lap: f64,
    /// ∂ₜu.
    pub v: f64,
    /// ∂ₜ∂ₓu.
    pub vx: f64,
}

/// Kernel stencil together with the interpolated field at the bead.
#[derive(Debug, Clone, Copy)]
pub struct BeadProbe {
    pub stencil: Stencil,
    pub at: Interpolated,
}

impl BeadProbe {
    pub(crate) fn new(
        u: &[f64],
        v: &[f64],
        x_p: f64,
        grid: &Grid,
        width: KernelWidth,
        mode: ProbeDerivatives,
    ) -> Result<Self> {
        let stencil = Stencil::build(x_p, grid, width)?;
        let dx = grid.dx();
        let inv_2dx = 0.5 / dx;
        let inv_dx2 = 1.0 / (dx * dx);
        let mut at = Interpolated::default();
        match mode {
            ProbeDerivatives::Centered => {
                for (j, a) in stencil.iter() {
                    let (jm, jp) = neighbours(grid, j);
                    at.u += a * u[j];
                    at.ux += a * (u[jp] - u[jm]) * inv_2dx;
                    at.lap += a * (u[jp] - 2.0 * u[j] + u[jm]) * inv_dx2;
                    at.v += a * v[j];
                    at.vx += a * (v[jp] - v[jm]) * inv_2dx;
                }
                at.uxx = at.lap;
            }
            ProbeDerivatives::Kernel => {
                let inv_dx = 1.0 / dx;
                for (j, a, d1, d2) in stencil.iter_derivatives() {
                    let (jm, jp) = neighbours(grid, j);
                    at.u += a * u[j];
                    at.ux += d1 * u[j] * inv_dx;
                    at.uxx += d2 * u[j] * inv_dx2;
                    at.lap += a * (u[jp] - 2.0 * u[j] + u[jm]) * inv_dx2;
                    at.v += a * v[j];
                    at.vx += d1 * v[j] * inv_dx;
                }
            }
            ProbeDerivatives::Conservative => {
                // uxx and vx are chosen so that 2ẋ vx + ẋ² uxx is the exact
                // time derivative of ẋ s and Σ w_j v_j dx along the bead path
                let inv_dx = 1.0 / dx;
                for (j, a, d1, _) in stencil.iter_derivatives() {
                    let (jm, jp) = neighbours(grid, j);
                    let d0u = (u[jp] - u[jm]) * inv_2dx;
                    at.u += a * u[j];
                    at.ux += a * d0u;
                    at.uxx += d1 * d0u * inv_dx;
                    at.lap += a * (u[jp] - 2.0 * u[j] + u[jm]) * inv_dx2;
                    at.v += a * v[j];
                    at.vx += 0.5 * (a * (v[jp] - v[jm]) * inv_2dx + d1 * v[j] * inv_dx);
                }
            }
        }
        Ok(Self { stencil, at })
    }

    /// Transverse bead velocity from the material derivative ż_p = ∂ₜu + ẋ_p ∂ₓu.
    pub fn z_dot(&self, vx_p: f64) -> f64 {
        self.at.v + vx_p * self.at.ux
    }

    /// Convective part of z̈_p: 2ẋ ∂ₜ∂ₓu + ẋ² ∂ₓ²u.
    pub fn convective(&self, vx_p: f64) -> f64 {
        2.0 * vx_p * self.at.vx + vx_p * vx_p * self.at.uxx
    }
}

/// Storage indices of the left and right neighbours of a movable node.
#[inline]
pub(crate) fn neighbours(grid: &Grid, j: usize) -> (usize, usize) {
    let n = grid.cells();
    match grid.bc() {
        super::Boundary::Periodic => (if j == 0 { n - 1 } else { j - 1 }, if j + 1 == n { 0 } else { j + 1 }),
        super::Boundary::FixedEnds => (j - 1, j + 1),
    }
}

/// u, ∂ₓu, ∂ₜu (and second derivatives) at `x_p`, using the same kernel that
/// deposits the bead's force.
pub fn interpolate(field: &FieldState, x_p: f64, grid: &Grid, width: KernelWidth) -> Result<Interpolated> {
    interpolate_with(field, x_p, grid, width, ProbeDerivatives::Centered)
}

/// As [`interpolate`], with the derivative rule chosen explicitly.
pub fn interpolate_with(
    field: &FieldState,
    x_p: f64,
    grid: &Grid,
    width: KernelWidth,
    mode: ProbeDerivatives,
) -> Result<Interpolated> {
    Ok(BeadProbe::new(&field.u, &field.v, x_p, grid, width, mode)?.at)
}

/// Probe for a full state, with u replaced by the stored bead height when
/// the state carries one.
pub fn probe_state(state: &SimState, config: &SimConfig) -> Result<Interpolated> {
    let mut at = interpolate_with(&state.field, state.bead.x_p, &config.grid, config.kernel_width, config.probe)?;
    if let Some(z) = state.bead.z_p {
        at.u = z;
    }
    Ok(at)
}

/// Normal force N exerted by the bead on the string, as used by the
/// configured scheme.
pub fn normal_force(state: &SimState, config: &SimConfig) -> Result<f64> {
    Ok(super::integrator::rhs(state, config)?.normal_force)
}

/// N from the explicit closure N = [m_p(a + ω_p² z_p) - s V'] / (1 + s²)
/// where `a` is the free-string material acceleration at the bead. It ignores
/// the string's response to N itself within the kernel.
pub fn prescribed_normal_force(state: &SimState, config: &SimConfig) -> Result<f64> {
    let at = probe_state(state, config)?;
    let params = &config.params;
    let c2 = params.c() * params.c();
    let vx = state.bead.vx_p;
    let a = c2 * at.lap + 2.0 * vx * at.vx + vx * vx * at.uxx;
    let w2 = params.omega_p() * params.omega_p();
    let s = at.ux;
    let dv = config.potential.gradient(state.bead.x_p);
    Ok((params.m_p() * (a + w2 * at.u) - s * dv) / (1.0 + s * s))
}

/// N from the slope jump across the kernel, T (∂ₓu|₊ - ∂ₓu|₋), with one-sided
/// slopes taken one node outside the support on each side.
pub fn kink_force_estimate(state: &SimState, config: &SimConfig) -> Result<f64> {
    let grid = &config.grid;
    let st = Stencil::build(state.bead.x_p, grid, config.kernel_width)?;
    let support = config.kernel_width.support();
    let first = st.first_node() as isize;
    // unwrap the last node relative to the first on periodic grids
    let last = first + support as isize - 1;
    let resolve = |j: isize| grid.resolve(j).ok_or(SolverError::KinkUnavailable { nodes: support });
    let u = &state.field.u;
    let dx = grid.dx();
    let slope = |a: isize| -> Result<f64> { Ok((u[resolve(a + 1)?] - u[resolve(a)?]) / dx) };
    // face slopes at first-1.5, first-2.5 and last+1.5, last+2.5 (in nodes),
    // extrapolated linearly to the bead so smooth curvature cancels
    let xi = (grid.wrap(state.bead.x_p) / dx - first as f64).rem_euclid(grid.cells() as f64);
    let (l1, l2) = (slope(first - 2)?, slope(first - 3)?);
    let (r1, r2) = (slope(last + 1)?, slope(last + 2)?);
    let left = l1 + (l1 - l2) * (xi + 1.5);
    let right = r1 - (r2 - r1) * (last as f64 - first as f64 + 1.5 - xi);
    Ok(config.params.tension() * (right - left))
}
