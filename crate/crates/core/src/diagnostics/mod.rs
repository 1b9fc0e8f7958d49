//! Conservation ledgers, transparency metrics and refinement studies.

mod convergence;

use serde::{Deserialize, Serialize};

use crate::analytic::{wrap_phase, AnalyticError, PhysicalParams, TransparencySolution};
use crate::solver::{
    probe_state, Boundary, FieldState, Grid, Interpolated, MassletState, RunOutput, SimConfig, SimState,
    TrajectorySample,
};

pub use convergence::{
    convergence_study, fit_order, spatial_convergence, temporal_convergence, ConvergenceStudy, OrderFit,
    TrajectoryMetric,
};

/// Per-node energy density ε, momentum density g_x, energy flux S_x = c² g_x
/// and momentum flux T_xx = ε.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Densities {
    pub energy: Vec<f64>,
    pub momentum: Vec<f64>,
    pub energy_flux: Vec<f64>,
    pub momentum_flux: Vec<f64>,
}

/// Pointwise densities of the discrete field.
///
/// The gradient part of ε averages the squared slopes of the two faces around
/// each node, so that Σ dx ε is exactly the energy conserved by the centered
/// Laplacian.
pub fn energy_momentum_densities(field: &FieldState, grid: &Grid, params: &PhysicalParams) -> Densities {
    let n = grid.nodes();
    let dx = grid.dx();
    let (t, lambda) = (params.tension(), params.lambda());
    let c2 = params.c() * params.c();
    let mut d = Densities {
        energy: vec![0.0; n],
        momentum: vec![0.0; n],
        energy_flux: vec![0.0; n],
        momentum_flux: vec![0.0; n],
    };
    let u = &field.u;
    let v = &field.v;
    for j in 0..n {
        let (left, right) = match grid.bc() {
            Boundary::Periodic => (u[(j + n - 1) % n], u[(j + 1) % n]),
            Boundary::FixedEnds => (if j == 0 { u[0] } else { u[j - 1] }, if j + 1 == n { u[j] } else { u[j + 1] }),
        };
        let fwd = (right - u[j]) / dx;
        let bwd = (u[j] - left) / dx;
        let eps = 0.5 * lambda * v[j] * v[j] + 0.25 * t * (fwd * fwd + bwd * bwd);
        let slope = (right - left) / (2.0 * dx);
        let g = -(t / c2) * v[j] * slope;
        d.energy[j] = eps;
        d.momentum[j] = g;
        d.energy_flux[j] = c2 * g;
        d.momentum_flux[j] = eps;
    }
    d
}

/// Energy and momentum split into the sub-ledgers that are separately
/// constant in the transparency regime.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Invariants {
    pub e_field: f64,
    /// ½ m ẋ_p²
    pub e_kin: f64,
    /// ½ m (ż_p² + ω_p² z_p²)
    pub e_clock: f64,
    /// V(x_p)
    pub e_potential: f64,
    pub p_field: f64,
    pub p_particle: f64,
    pub e_total: f64,
    pub p_total: f64,
}

/// Invariants from raw slices; used by the run loop to avoid copies.
pub fn invariants_from_parts(
    u: &[f64],
    v: &[f64],
    bead: &MassletState,
    at: &Interpolated,
    config: &SimConfig,
) -> Invariants {
    let grid = &config.grid;
    let params = &config.params;
    let n = grid.nodes();
    let dx = grid.dx();
    let (t, lambda) = (params.tension(), params.lambda());
    let c2 = params.c() * params.c();
    let mut kinetic = 0.0;
    let mut strain = 0.0;
    let mut momentum = 0.0;
    let faces = match grid.bc() {
        Boundary::Periodic => n,
        Boundary::FixedEnds => n - 1,
    };
    for j in 0..faces {
        let jp = if j + 1 == n { 0 } else { j + 1 };
        let d = u[jp] - u[j];
        strain += d * d;
    }
    for j in 0..n {
        kinetic += v[j] * v[j];
        let (jm, jp) = match grid.bc() {
            Boundary::Periodic => ((j + n - 1) % n, (j + 1) % n),
            Boundary::FixedEnds if j == 0 || j + 1 == n => continue,
            Boundary::FixedEnds => (j - 1, j + 1),
        };
        momentum += v[j] * (u[jp] - u[jm]);
    }
    let e_field = 0.5 * lambda * kinetic * dx + 0.5 * t * strain / dx;
    let p_field = -(t / c2) * momentum * 0.5;
    let m = params.m_p();
    let zdot = at.v + bead.vx_p * at.ux;
    let w = params.omega_p();
    let e_kin = 0.5 * m * bead.vx_p * bead.vx_p;
    let e_clock = 0.5 * m * (zdot * zdot + w * w * at.u * at.u);
    let e_potential = config.potential.value(bead.x_p);
    let p_particle = m * bead.vx_p;
    Invariants {
        e_field,
        e_kin,
        e_clock,
        e_potential,
        p_field,
        p_particle,
        e_total: e_field + e_kin + e_clock + e_potential,
        p_total: p_field + p_particle,
    }
}

/// Full ledger for a state.
pub fn invariants(state: &SimState, config: &SimConfig) -> crate::solver::Result<Invariants> {
    let at = probe_state(state, config)?;
    Ok(invariants_from_parts(&state.field.u, &state.field.v, &state.bead, &at, config))
}

/// Total energy and momentum (E_total, P_total).
pub fn global_invariants(state: &SimState, config: &SimConfig) -> crate::solver::Result<(f64, f64)> {
    let inv = invariants(state, config)?;
    Ok((inv.e_total, inv.p_total))
}

/// Snapshot of the conservation ledger and coupling state at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub normal_force: f64,
    pub e_field: f64,
    pub e_kin: f64,
    pub e_clock: f64,
    pub e_potential: f64,
    pub e_total: f64,
    pub p_field: f64,
    pub p_particle: f64,
    pub p_total: f64,
    pub mach: f64,
    /// |z_p - u(x_p)|. Zero by construction since z_p is read from the field.
    pub constraint_residual: f64,
    pub phase_lock_error: Option<f64>,
}

impl DiagnosticsRecord {
    pub fn new(sample: &TrajectorySample, inv: &Invariants, reference: Option<&TransparencySolution>) -> Self {
        Self {
            t: sample.t,
            normal_force: sample.normal_force,
            e_field: inv.e_field,
            e_kin: inv.e_kin,
            e_clock: inv.e_clock,
            e_potential: inv.e_potential,
            e_total: inv.e_total,
            p_field: inv.p_field,
            p_particle: inv.p_particle,
            p_total: inv.p_total,
            mach: sample.mach,
            constraint_residual: 0.0,
            phase_lock_error: reference.map(|sol| sample_phase_error(sample, sol)),
        }
    }

    /// Flags a supersonic bead; the solver itself imposes no barrier.
    pub fn supersonic(&self) -> bool {
        self.mach >= 1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransparencyResidual {
    /// max |N| / (m_p ω_p² A)
    pub max_abs_n_normalized: f64,
    /// max |ẋ_p(t) - ẋ_p(0)|, relative to |ẋ_p(0)| when that is nonzero
    pub velocity_drift: f64,
}

/// How far a run is from the N = 0 regime. `amplitude` is the clock amplitude
/// A of the seeding solution; when it vanishes `fallback` (the field amplitude
/// B) is used instead.
pub fn transparency_residual(run: &RunOutput, params: &PhysicalParams, amplitude: f64, fallback: f64) -> TransparencyResidual {
    let a = if amplitude != 0.0 { amplitude.abs() } else { fallback.abs() };
    let scale = params.m_p() * params.omega_p() * params.omega_p() * a;
    let max_n = run.trajectory.iter().map(|s| s.normal_force.abs()).fold(0.0, f64::max);
    let max_abs_n_normalized = if max_n == 0.0 { 0.0 } else { max_n / scale };
    let v0 = run.trajectory.first().map_or(0.0, |s| s.vx_p);
    let dv = run.trajectory.iter().map(|s| (s.vx_p - v0).abs()).fold(0.0, f64::max);
    let velocity_drift = if v0 != 0.0 { dv / v0.abs() } else { dv };
    TransparencyResidual { max_abs_n_normalized, velocity_drift }
}

/// Convenience wrapper normalizing by the solution's own A (or B).
pub fn transparency_residual_for(run: &RunOutput, sol: &TransparencySolution) -> TransparencyResidual {
    transparency_residual(run, &run.config.params, sol.amplitude, sol.b)
}

fn sample_phase_error(sample: &TrajectorySample, sol: &TransparencySolution) -> f64 {
    let s = sol.carrier_phase().at(sample.t, sample.x_unwrapped);
    wrap_phase(s - (sol.clock_pulsation * sample.t + sol.phi)).abs()
}

/// max over samples of the wrapped |S(t, x_p(t)) - (ω_clock t + φ)|.
pub fn phase_lock_error(run: &RunOutput, sol: &TransparencySolution) -> Result<f64, AnalyticError> {
    check_regime(run, sol, "phase_lock_error")?;
    Ok(run.trajectory.iter().map(|s| sample_phase_error(s, sol)).fold(0.0, f64::max))
}

/// max over samples of the wrapped difference between the bead's own
/// oscillation phase, read from (z_p, ż_p), and ω_clock t + φ. Unlike
/// [`phase_lock_error`] this sees errors in the transverse motion too.
pub fn clock_phase_error(run: &RunOutput, sol: &TransparencySolution) -> Result<f64, AnalyticError> {
    check_regime(run, sol, "clock_phase_error")?;
    let w = sol.clock_pulsation;
    if w <= 0.0 || sol.amplitude == 0.0 {
        return Err(AnalyticError::Singular("clock phase undefined without oscillation"));
    }
    let flip = if sol.amplitude < 0.0 { std::f64::consts::PI } else { 0.0 };
    Ok(run
        .trajectory
        .iter()
        .map(|s| {
            let theta = (-s.z_dot / w).atan2(s.z_p) + flip;
            wrap_phase(theta - (w * s.t + sol.phi)).abs()
        })
        .fold(0.0, f64::max))
}

fn check_regime(run: &RunOutput, sol: &TransparencySolution, op: &'static str) -> Result<(), AnalyticError> {
    match &run.reference {
        Some(r) if r.regime != sol.regime => Err(AnalyticError::Unsupported { op, regime: sol.regime }),
        _ => Ok(()),
    }
}

/// max |x_p(t) - (v_p t + x_init)| over the run.
pub fn trajectory_error(run: &RunOutput, sol: &TransparencySolution) -> f64 {
    run.trajectory.iter().map(|s| (s.x_unwrapped - sol.trajectory(s.t)).abs()).fold(0.0, f64::max)
}

/// max |x_p^a(t) - x_p^b(t)| over common samples.
pub fn trajectory_distance(a: &RunOutput, b: &RunOutput) -> f64 {
    a.trajectory
        .iter()
        .zip(&b.trajectory)
        .map(|(p, q)| (p.x_unwrapped - q.x_unwrapped).abs())
        .fold(0.0, f64::max)
}

/// Relative drift of the recorded total energy and momentum.
///
/// Energy drift is max |E(t) - E(0)| / |E(0)|. Momentum drift is normalized
/// by |P(0)| when the momentum is not small compared to E(0)/c, otherwise by
/// E(0)/c.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Drift {
    pub energy: f64,
    pub momentum: f64,
}

pub fn conservation_drift(run: &RunOutput) -> Drift {
    let Some(first) = run.diagnostics.first() else {
        return Drift { energy: 0.0, momentum: 0.0 };
    };
    let c = run.config.params.c();
    let e0 = first.e_total;
    let p0 = first.p_total;
    let p_scale = if p0.abs() > 1e-3 * e0.abs() / c { p0.abs() } else { e0.abs() / c };
    let rel = |d: f64, s: f64| if s > 0.0 { d / s } else { d };
    let de = run.diagnostics.iter().map(|r| (r.e_total - e0).abs()).fold(0.0, f64::max);
    let dp = run.diagnostics.iter().map(|r| (r.p_total - p0).abs()).fold(0.0, f64::max);
    Drift { energy: rel(de, e0.abs()), momentum: rel(dp, p_scale) }
}

/// Relative spread max|q - q(0)| / |q(0)| of each transparency constant of
/// motion: field energy, bead kinetic energy, clock energy, field momentum,
/// bead momentum. Quantities starting at zero are reported absolutely.
pub fn ledger_flatness(run: &RunOutput) -> [f64; 5] {
    let getters: [fn(&DiagnosticsRecord) -> f64; 5] =
        [|r| r.e_field, |r| r.e_kin, |r| r.e_clock, |r| r.p_field, |r| r.p_particle];
    getters.map(|g| {
        let Some(first) = run.diagnostics.first() else { return 0.0 };
        let q0 = g(first);
        let d = run.diagnostics.iter().map(|r| (g(r) - q0).abs()).fold(0.0, f64::max);
        if q0 != 0.0 { d / q0.abs() } else { d }
    })
}

/// Semi-discrete power balance at one state: the rate of change of the field
/// energy and the power the bead's force injects, -N ∫ δ_h ∂ₜu dx. They agree
/// to rounding for the source-split scheme.
pub fn field_power_balance(state: &SimState, config: &SimConfig) -> crate::solver::Result<(f64, f64)> {
    let d = crate::solver::rhs(state, config)?;
    let grid = &config.grid;
    let params = &config.params;
    let (t, lambda) = (params.tension(), params.lambda());
    let dx = grid.dx();
    let n = grid.nodes();
    let u = &state.field.u;
    let v = &state.field.v;
    // dE/dt = Σ dx λ v ∂ₜv + Σ_faces T (Δu/dx)(Δv/dx) dx
    let mut rate = 0.0;
    for j in 0..n {
        rate += lambda * v[j] * d.dv[j] * dx;
    }
    let faces = match grid.bc() {
        Boundary::Periodic => n,
        Boundary::FixedEnds => n - 1,
    };
    for j in 0..faces {
        let jp = if j + 1 == n { 0 } else { j + 1 };
        rate += t * (u[jp] - u[j]) * (d.du[jp] - d.du[j]) / dx;
    }
    let at = probe_state(state, config)?;
    Ok((rate, -d.normal_force * at.v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{eval_field, eval_field_dt, make_bradyon_from_lab};
    use crate::solver::{init_pulse, run, Coupling, KernelWidth, PulseDirection, PulseSpec};
    use std::f64::consts::PI;

    fn params() -> PhysicalParams {
        PhysicalParams::natural(1.0, 1.0).unwrap()
    }

    #[test]
    fn zero_field_has_zero_densities() {
        let g = Grid::new(1.0, 32, Boundary::Periodic).unwrap();
        let d = energy_momentum_densities(&FieldState::zeros(&g), &g, &params());
        assert!(d.energy.iter().chain(&d.momentum).all(|a| *a == 0.0));
        let cfg = SimConfig::new(params(), g, 1.0, 0.5).unwrap();
        let st = SimState { t: 0.0, field: FieldState::zeros(&g), bead: MassletState::new(0.5, 0.0) };
        assert_eq!(global_invariants(&st, &cfg).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn right_going_wave_carries_momentum_eps_over_c() {
        let err = |cells| {
            let g = Grid::new(1.0, cells, Boundary::Periodic).unwrap();
            let k = 2.0 * PI;
            let mut f = FieldState::zeros(&g);
            for j in 0..g.nodes() {
                f.u[j] = (k * g.x(j)).cos();
                f.v[j] = k * (k * g.x(j)).sin();
            }
            let d = energy_momentum_densities(&f, &g, &params());
            d.energy.iter().zip(&d.momentum).map(|(e, p)| (p - e).abs()).fold(0.0, f64::max)
        };
        let (e1, e2) = (err(64), err(128));
        assert!((e1 / e2).log2() > 1.9);
        let g = Grid::new(1.0, 64, Boundary::Periodic).unwrap();
        let d = energy_momentum_densities(&FieldState { u: vec![1.0; 64], v: vec![0.5; 64] }, &g, &params());
        assert!(d.energy_flux.iter().zip(&d.momentum).all(|(s, p)| *s == *p));
        assert!(d.momentum_flux == d.energy);
    }

    #[test]
    fn densities_sum_to_ledger() {
        let g = Grid::new(1.0, 50, Boundary::FixedEnds).unwrap();
        let cfg = SimConfig::new(params(), g, 1.0, 0.5).unwrap();
        let p = PulseSpec { amplitude: 0.1, center: 0.3, width: 0.05, direction: PulseDirection::Right };
        let st = init_pulse(&cfg, &p, 0.7, 0.0).unwrap();
        let d = energy_momentum_densities(&st.field, &g, &cfg.params);
        let inv = invariants(&st, &cfg).unwrap();
        let e: f64 = d.energy.iter().sum::<f64>() * g.dx();
        let m: f64 = d.momentum.iter().sum::<f64>() * g.dx();
        assert!((e - inv.e_field).abs() < 1e-12 * e);
        assert!((m - inv.p_field).abs() < 1e-12 * m.abs());
    }

    #[test]
    fn analytic_field_energy_is_flat() {
        let omega = 2.0 * PI / 10.0;
        let pp = PhysicalParams::natural(1.0, omega * 0.99).unwrap();
        let sol = make_bradyon_from_lab(&pp, 1.0, omega, 0.0, 0.0, 0.1, 0.1).unwrap();
        let g = Grid::new(100.0, 2048, Boundary::Periodic).unwrap();
        let energy = |t: f64| {
            let mut f = FieldState::zeros(&g);
            for j in 0..g.nodes() {
                f.u[j] = eval_field(&sol, t, g.x(j));
                f.v[j] = eval_field_dt(&sol, t, g.x(j));
            }
            energy_momentum_densities(&f, &g, &pp).energy.iter().sum::<f64>() * g.dx()
        };
        let e0 = energy(0.0);
        for t in [3.0, 17.0, 55.5] {
            assert!((energy(t) - e0).abs() < 1e-10 * e0);
        }
    }

    #[test]
    fn power_balance_is_exact_for_source_split() {
        let g = Grid::new(2.0, 200, Boundary::FixedEnds).unwrap();
        let pp = PhysicalParams::natural(0.7, 5.0).unwrap();
        for width in 1..=3 {
            let cfg = SimConfig::new(pp, g, 1.0, 0.5).unwrap().with_kernel(KernelWidth::new(width).unwrap());
            let p = PulseSpec { amplitude: 0.05, center: 0.9, width: 0.1, direction: PulseDirection::Right };
            let st = init_pulse(&cfg, &p, 1.0137, 0.2).unwrap();
            let (rate, power) = field_power_balance(&st, &cfg).unwrap();
            assert!(power.abs() > 1e-6);
            assert!((rate - power).abs() < 1e-10 * power.abs(), "{rate} {power}");
        }
    }

    #[test]
    fn resting_bead_on_flat_string_is_transparent() {
        let g = Grid::new(1.0, 64, Boundary::Periodic).unwrap();
        let cfg = SimConfig::new(params(), g, 0.5, 0.5).unwrap().with_coupling(Coupling::Monolithic);
        let st = SimState { t: 0.0, field: FieldState::zeros(&g), bead: MassletState::new(0.5, 0.0) };
        let out = run(&cfg, &st).unwrap();
        let r = transparency_residual(&out, &cfg.params, 0.0, 1.0);
        assert_eq!((r.max_abs_n_normalized, r.velocity_drift), (0.0, 0.0));
        assert!(out.trajectory.iter().all(|s| s.x_p == 0.5));
    }
}
