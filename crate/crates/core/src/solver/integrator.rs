//! Right-hand side of the semi-discrete system and the RK4 driver.

use crate::analytic::TransparencySolution;
use crate::diagnostics::{self, DiagnosticsRecord};

use super::coupling::BeadProbe;
use super::grid::Boundary;
use super::kernel::Stencil;
use super::{Coupling, FieldState, MassletState, ProbeDerivatives, Result, Scheme, SimConfig, SimState, SolverError};

/// Time derivatives of the full state.
#[derive(Debug, Clone, PartialEq)]
pub struct StateDerivative {
    pub du: Vec<f64>,
    pub dv: Vec<f64>,
    pub dx_p: f64,
    pub dvx_p: f64,
    /// Rate of the stored bead height (zero unless it is carried).
    pub dz_p: f64,
    pub normal_force: f64,
}

/// Which half of the state is held fixed during an alternating sub-step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Freeze {
    Nothing,
    Bead,
    Field,
}

/// Evaluate the packed right-hand side. `y = [u, v, x_p, vx_p, z_p]`, where
/// the last slot is only read under the conservative probe.
/// Returns the normal force and the probe taken at the bead.
fn eval(cfg: &SimConfig, y: &[f64], dy: &mut [f64], freeze: Freeze) -> Result<(f64, BeadProbe)> {
    let grid = &cfg.grid;
    let n = grid.nodes();
    let (u, rest) = y.split_at(n);
    let (v, bead) = rest.split_at(n);
    let (x_p, vx_p, z_p) = (bead[0], bead[1], bead[2]);
    let (du, rest) = dy.split_at_mut(n);
    let (dv, dbead) = rest.split_at_mut(n);

    let params = &cfg.params;
    let c2 = params.c() * params.c();
    let dx = grid.dx();
    let k = c2 / (dx * dx);

    match grid.bc() {
        Boundary::Periodic => {
            dv[0] = k * (u[n - 1] - 2.0 * u[0] + u[1]);
            for j in 1..n - 1 {
                dv[j] = k * (u[j - 1] - 2.0 * u[j] + u[j + 1]);
            }
            dv[n - 1] = k * (u[n - 2] - 2.0 * u[n - 1] + u[0]);
            du.copy_from_slice(v);
        }
        Boundary::FixedEnds => {
            dv[0] = 0.0;
            dv[n - 1] = 0.0;
            for j in 1..n - 1 {
                dv[j] = k * (u[j - 1] - 2.0 * u[j] + u[j + 1]);
            }
            du.copy_from_slice(v);
            du[0] = 0.0;
            du[n - 1] = 0.0;
        }
    }

    let mut probe = BeadProbe::new(u, v, x_p, grid, cfg.kernel_width, cfg.probe)?;
    let carried = cfg.probe == ProbeDerivatives::Conservative;
    if carried {
        probe.at.u = z_p;
    }
    let at = &probe.at;
    let m = params.m_p();
    let lambda = params.lambda();
    let w2 = params.omega_p() * params.omega_p();
    let s = at.ux;
    let dpot = cfg.potential.gradient(x_p);
    let conv = probe.convective(vx_p);
    let inv_dx = 1.0 / dx;

    let normal = match (cfg.coupling, cfg.scheme) {
        (Coupling::Decoupled, _) => 0.0,
        (_, Scheme::SourceSplit) => {
            // the string's own response to N inside the kernel is included, so
            // N solves the constraint exactly at the semi-discrete level
            let overlap = probe.stencil.self_overlap();
            let n_force = (m * (c2 * at.lap + conv + w2 * at.u) - s * dpot) / (1.0 + s * s + m * overlap / lambda);
            for (j, a) in probe.stencil.iter() {
                dv[j] -= n_force / lambda * a * inv_dx;
            }
            n_force
        }
        (_, Scheme::VariableDensity) => {
            let denom = 1.0 + s * s;
            let forcing = (m * (conv + w2 * at.u) - s * dpot) / denom;
            let mut acc = 0.0;
            for (j, a) in probe.stencil.iter() {
                let w = a * inv_dx;
                let loaded = lambda + m * w / denom;
                // dv[j] holds c² D₂u = T D₂u / λ
                dv[j] = (lambda * dv[j] - w * forcing) / loaded;
                acc += a * dv[j];
            }
            (m * (acc + conv + w2 * at.u) - s * dpot) / denom
        }
    };

    dbead[0] = vx_p;
    dbead[1] = (-s * normal - dpot) / m;
    dbead[2] = if carried { probe.z_dot(vx_p) } else { 0.0 };

    match freeze {
        Freeze::Nothing => {}
        Freeze::Bead => {
            dbead[..3].fill(0.0);
        }
        Freeze::Field => {
            du.fill(0.0);
            dv.fill(0.0);
        }
    }
    if !normal.is_finite() {
        return Err(SolverError::NonFinite { t: f64::NAN, what: "normal force" });
    }
    Ok((normal, probe))
}

/// Time derivatives of `state` under `config`.
pub fn rhs(state: &SimState, config: &SimConfig) -> Result<StateDerivative> {
    check_shape(state, config)?;
    let y = pack(state, config)?;
    let mut dy = vec![0.0; y.len()];
    let n = config.grid.nodes();
    let (normal, _) = eval(config, &y, &mut dy, Freeze::Nothing)?;
    Ok(StateDerivative {
        du: dy[..n].to_vec(),
        dv: dy[n..2 * n].to_vec(),
        dx_p: dy[2 * n],
        dvx_p: dy[2 * n + 1],
        dz_p: dy[2 * n + 2],
        normal_force: normal,
    })
}

fn check_shape(state: &SimState, config: &SimConfig) -> Result<()> {
    let n = config.grid.nodes();
    if state.field.u.len() != n || state.field.v.len() != n {
        return Err(SolverError::Config(format!(
            "field has {} / {} entries, grid expects {n}",
            state.field.u.len(),
            state.field.v.len()
        )));
    }
    Ok(())
}

fn pack(state: &SimState, config: &SimConfig) -> Result<Vec<f64>> {
    let z = match state.bead.z_p {
        Some(z) => z,
        None => Stencil::build(state.bead.x_p, &config.grid, config.kernel_width)?.interpolate(&state.field.u),
    };
    let mut y = Vec::with_capacity(2 * state.field.u.len() + 3);
    y.extend_from_slice(&state.field.u);
    y.extend_from_slice(&state.field.v);
    y.extend_from_slice(&[state.bead.x_p, state.bead.vx_p, z]);
    Ok(y)
}

/// One classical RK4 step of `y' = f(t, y)`, reusing the caller's buffers.
/// `k` must hold four vectors and `tmp` one, all of `y.len()`.
pub fn rk4_step<F>(f: &mut F, t: f64, dt: f64, y: &mut [f64], k: &mut [Vec<f64>; 4], tmp: &mut [f64]) -> Result<()>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    let [k1, k2, k3, k4] = k;
    f(t, y, k1)?;
    for i in 0..y.len() {
        tmp[i] = y[i] + 0.5 * dt * k1[i];
    }
    f(t + 0.5 * dt, tmp, k2)?;
    for i in 0..y.len() {
        tmp[i] = y[i] + 0.5 * dt * k2[i];
    }
    f(t + 0.5 * dt, tmp, k3)?;
    for i in 0..y.len() {
        tmp[i] = y[i] + dt * k3[i];
    }
    f(t + dt, tmp, k4)?;
    let h6 = dt / 6.0;
    for i in 0..y.len() {
        y[i] += h6 * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]);
    }
    Ok(())
}

/// Reusable RK4 stepper for one configuration.
pub struct Integrator {
    config: SimConfig,
    y: Vec<f64>,
    k: [Vec<f64>; 4],
    tmp: Vec<f64>,
    t: f64,
    wraps: i64,
}

impl Integrator {
    pub fn new(config: SimConfig, state: &SimState) -> Result<Self> {
        check_shape(state, &config)?;
        let y = pack(state, &config)?;
        let len = y.len();
        Ok(Self {
            config,
            y,
            k: [vec![0.0; len], vec![0.0; len], vec![0.0; len], vec![0.0; len]],
            tmp: vec![0.0; len],
            t: state.t,
            wraps: state.bead.wraps,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    /// Normal force and probe at the current state.
    pub fn probe(&mut self) -> Result<(f64, BeadProbe)> {
        eval(&self.config, &self.y, &mut self.k[0], Freeze::Nothing)
    }

    /// Advance by `dt` (which may be negative).
    pub fn step(&mut self, dt: f64) -> Result<()> {
        let cfg = self.config;
        let t = self.t;
        match cfg.coupling {
            Coupling::Monolithic | Coupling::Decoupled => {
                let mut f = |_t: f64, y: &[f64], dy: &mut [f64]| eval(&cfg, y, dy, Freeze::Nothing).map(|_| ());
                rk4_step(&mut f, t, dt, &mut self.y, &mut self.k, &mut self.tmp)?;
            }
            Coupling::Alternating => {
                let mut field = |_t: f64, y: &[f64], dy: &mut [f64]| eval(&cfg, y, dy, Freeze::Bead).map(|_| ());
                rk4_step(&mut field, t, dt, &mut self.y, &mut self.k, &mut self.tmp)?;
                let mut bead = |_t: f64, y: &[f64], dy: &mut [f64]| eval(&cfg, y, dy, Freeze::Field).map(|_| ());
                rk4_step(&mut bead, t, dt, &mut self.y, &mut self.k, &mut self.tmp)?;
            }
        }
        self.t = t + dt;
        let n = cfg.grid.nodes();
        if cfg.grid.bc() == Boundary::Periodic {
            let x = self.y[2 * n];
            let l = cfg.grid.length();
            let turns = (x / l).floor();
            if turns != 0.0 {
                self.wraps += turns as i64;
                self.y[2 * n] = cfg.grid.wrap(x);
            }
        }
        if !self.y[2 * n].is_finite() || !self.y[2 * n + 1].is_finite() {
            return Err(SolverError::NonFinite { t: self.t, what: "bead state" });
        }
        Ok(())
    }

    pub fn state(&self) -> SimState {
        let n = self.config.grid.nodes();
        SimState {
            t: self.t,
            field: FieldState { u: self.y[..n].to_vec(), v: self.y[n..2 * n].to_vec() },
            bead: self.bead(),
        }
    }

    fn bead(&self) -> MassletState {
        let n = self.config.grid.nodes();
        let z_p = (self.config.probe == ProbeDerivatives::Conservative).then(|| self.y[2 * n + 2]);
        MassletState { x_p: self.y[2 * n], vx_p: self.y[2 * n + 1], wraps: self.wraps, z_p }
    }

    fn field_slices(&self) -> (&[f64], &[f64]) {
        let n = self.config.grid.nodes();
        (&self.y[..n], &self.y[n..2 * n])
    }
}

/// One RK4 step of the coupled system from `state`.
pub fn step_rk4(state: &SimState, dt: f64, config: &SimConfig) -> Result<SimState> {
    let mut it = Integrator::new(*config, state)?;
    it.step(dt)?;
    Ok(it.state())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySample {
    pub t: f64,
    pub x_p: f64,
    pub x_unwrapped: f64,
    pub vx_p: f64,
    pub z_p: f64,
    pub z_dot: f64,
    pub normal_force: f64,
    pub mach: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunStatus {
    Completed,
    /// Total energy grew beyond the configured multiple of its initial value.
    Unstable { t: f64, energy_ratio: f64 },
    /// Integration stopped on an error (non-finite values, bead left the grid).
    Aborted { t: f64, error: SolverError },
}

impl RunStatus {
    pub fn is_completed(&self) -> bool {
        matches!(self, RunStatus::Completed)
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub config: SimConfig,
    pub status: RunStatus,
    pub trajectory: Vec<TrajectorySample>,
    pub snapshots: Vec<Snapshot>,
    pub diagnostics: Vec<DiagnosticsRecord>,
    pub final_state: SimState,
    /// Analytic solution the run was seeded from, if any.
    pub reference: Option<TransparencySolution>,
}

/// Integrate `init` to `config.t_end` with fixed steps.
pub fn run(config: &SimConfig, init: &SimState) -> Result<RunOutput> {
    run_with_reference(config, init, None)
}

/// As [`run`], recording the phase-lock error against `reference` in every
/// diagnostics record.
pub fn run_with_reference(
    config: &SimConfig,
    init: &SimState,
    reference: Option<&TransparencySolution>,
) -> Result<RunOutput> {
    config.validate()?;
    let mut it = Integrator::new(*config, init)?;
    let steps = config.steps();
    let stride = config.output_stride.max(1);
    let mut trajectory = Vec::with_capacity(steps + 1);
    let mut snapshots = Vec::new();
    let mut diagnostics = Vec::new();
    let mut status = RunStatus::Completed;
    let mut e0 = None;

    for i in 0..=steps {
        let (normal, probe) = match it.probe() {
            Ok(p) => p,
            Err(e) => {
                status = RunStatus::Aborted { t: it.time(), error: e };
                break;
            }
        };
        let bead = it.bead();
        let t = it.time();
        let sample = TrajectorySample {
            t,
            x_p: bead.x_p,
            x_unwrapped: bead.unwrapped(&config.grid),
            vx_p: bead.vx_p,
            z_p: probe.at.u,
            z_dot: probe.z_dot(bead.vx_p),
            normal_force: normal,
            mach: bead.mach(config.params.c()),
        };
        trajectory.push(sample);
        let (u, v) = it.field_slices();
        let inv = diagnostics::invariants_from_parts(u, v, &bead, &probe.at, config);
        let e_ref = *e0.get_or_insert(inv.e_total);
        let blown = !inv.e_total.is_finite() || (e_ref > 0.0 && inv.e_total > config.instability_factor * e_ref);
        // the sample that stops the run is always recorded
        if i % stride == 0 || i == steps || blown {
            let record = DiagnosticsRecord::new(&sample, &inv, reference);
            diagnostics.push(record);
            snapshots.push(Snapshot { t, u: u.to_vec(), v: v.to_vec() });
            if !u.iter().chain(v).all(|a| a.is_finite()) {
                status = RunStatus::Aborted { t, error: SolverError::NonFinite { t, what: "field" } };
                break;
            }
        }
        if !inv.e_total.is_finite() {
            status = RunStatus::Aborted { t, error: SolverError::NonFinite { t, what: "energy" } };
            break;
        }
        if e_ref > 0.0 && inv.e_total > config.instability_factor * e_ref {
            status = RunStatus::Unstable { t, energy_ratio: inv.e_total / e_ref };
            break;
        }
        if i == steps {
            break;
        }
        if let Err(e) = it.step(config.dt) {
            let t = it.time();
            status = RunStatus::Aborted {
                t,
                error: match e {
                    SolverError::NonFinite { what, .. } => SolverError::NonFinite { t, what },
                    other => other,
                },
            };
            break;
        }
    }

    Ok(RunOutput {
        config: *config,
        status,
        trajectory,
        snapshots,
        diagnostics,
        final_state: it.state(),
        reference: reference.copied(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{self, PhysicalParams};
    use crate::solver::{init_from_analytic, Grid, KernelWidth};
    use std::f64::consts::PI;

    fn free_config(cells: usize, t_end: f64) -> SimConfig {
        let params = PhysicalParams::natural(1.0, 1.0).unwrap();
        let grid = Grid::new(1.0, cells, Boundary::Periodic).unwrap();
        SimConfig::new(params, grid, t_end, 0.5).unwrap().with_coupling(Coupling::Decoupled)
    }

    fn plane_wave(cfg: &SimConfig, k: f64, t: f64) -> SimState {
        let g = &cfg.grid;
        let mut field = FieldState::zeros(g);
        for j in 0..g.nodes() {
            field.u[j] = 1e-3 * (k * (g.x(j) - t)).cos();
            field.v[j] = 1e-3 * k * (k * (g.x(j) - t)).sin();
        }
        SimState { t, field, bead: MassletState::new(0.5, 0.0) }
    }

    #[test]
    fn zero_state_is_fixed() {
        let cfg = free_config(64, 0.1).with_coupling(Coupling::Monolithic);
        let st = SimState { t: 0.0, field: FieldState::zeros(&cfg.grid), bead: MassletState::new(0.3, 0.0) };
        let d = rhs(&st, &cfg).unwrap();
        assert!(d.du.iter().chain(&d.dv).all(|a| *a == 0.0));
        assert_eq!((d.dx_p, d.dvx_p, d.normal_force), (0.0, 0.0, 0.0));
        let next = step_rk4(&st, cfg.dt, &cfg).unwrap();
        assert_eq!(next.field, st.field);
        assert_eq!(next.bead.x_p, 0.3);
    }

    #[test]
    fn plane_wave_returns_after_one_period() {
        let err = |cells| {
            let cfg = free_config(cells, 1.0);
            let k = 2.0 * PI;
            let out = run(&cfg, &plane_wave(&cfg, k, 0.0)).unwrap();
            let exact = plane_wave(&cfg, k, 1.0);
            out.final_state.field.u.iter().zip(&exact.field.u).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        };
        let (e1, e2) = (err(64), err(128));
        assert!(e2 < 1e-6);
        assert!((e1 / e2).log2() > 1.9);
    }

    #[test]
    fn analytic_time_derivative_matches() {
        let params = PhysicalParams::natural(1.0, 2.0 * PI / 10.0 / analytic::gamma_factor(0.1, 1.0).unwrap().powi(2)).unwrap();
        let sol = analytic::make_bradyon_from_lab(&params, 1e-2, 2.0 * PI / 10.0, 0.0, 0.0, 0.1, 0.1).unwrap();
        let err = |cells| {
            let grid = Grid::new(100.0, cells, Boundary::Periodic).unwrap();
            let cfg = SimConfig::new(params, grid, 1.0, 0.5).unwrap();
            let st = init_from_analytic(&sol, &cfg).unwrap();
            let d = rhs(&st, &cfg).unwrap();
            let h = 1e-4;
            (0..grid.nodes())
                .map(|j| {
                    let x = grid.x(j);
                    let utt = (analytic::eval_field_dt(&sol, h, x) - analytic::eval_field_dt(&sol, -h, x)) / (2.0 * h);
                    (d.dv[j] - utt).abs()
                })
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (err(1024), err(2048));
        assert!((e1 / e2).log2() > 1.8, "{e1} {e2}");
    }

    #[test]
    fn spring_only_bead_on_flat_clamped_string() {
        // with a harmonic longitudinal potential and a flat string the bead
        // is a plain oscillator x'' = -2a (x - x0) / m
        let params = PhysicalParams::natural(2.0, 1.0).unwrap();
        let grid = Grid::new(1.0, 16, Boundary::FixedEnds).unwrap();
        let a = 0.5;
        let x0 = 0.5;
        let err = |dt: f64| {
            let mut cfg = SimConfig::new(params, grid, 1.0, 0.5).unwrap().with_potential(super::super::Potential::Harmonic {
                amplitude: a,
                center: x0,
            });
            cfg.dt = dt;
            cfg.t_end = 1.0;
            let st = SimState { t: 0.0, field: FieldState::zeros(&grid), bead: MassletState::new(x0 + 0.1, 0.0) };
            let out = run(&cfg, &st).unwrap();
            let w = (2.0 * a / 2.0f64).sqrt();
            out.trajectory.iter().map(|s| (s.x_p - x0 - 0.1 * (w * s.t).cos()).abs()).fold(0.0, f64::max)
        };
        let (e1, e2) = (err(1.0 / 64.0), err(1.0 / 128.0));
        assert!(e2 < 1e-9);
        assert!((e1 / e2).log2() > 3.8, "{e1} {e2}");
    }

    #[test]
    fn alternating_mode_tracks_monolithic() {
        let params = PhysicalParams::natural(1.0, 2.0 * PI / 10.0 / analytic::gamma_factor(0.1, 1.0).unwrap().powi(2)).unwrap();
        let sol = analytic::make_bradyon_from_lab(&params, 1e-2, 2.0 * PI / 10.0, 0.0, 0.0, 0.1, 0.1).unwrap();
        let grid = Grid::new(100.0, 1024, Boundary::Periodic).unwrap();
        let cfg = SimConfig::new(params, grid, 10.0, 0.5).unwrap().with_kernel(KernelWidth::CUBIC);
        let st = init_from_analytic(&sol, &cfg).unwrap();
        let a = run(&cfg, &st).unwrap();
        let b = run(&cfg.with_coupling(Coupling::Alternating), &st).unwrap();
        assert!(a.status.is_completed() && b.status.is_completed());
        let d = (a.final_state.bead.x_p - b.final_state.bead.x_p).abs();
        assert!(d < 1e-4, "{d}");
    }

    #[test]
    fn periodic_wrap_counts_turns() {
        let cfg = free_config(64, 2.0);
        let st = SimState { t: 0.0, field: FieldState::zeros(&cfg.grid), bead: MassletState::new(0.9, 0.7) };
        let out = run(&cfg, &st).unwrap();
        let last = out.trajectory.last().unwrap();
        assert!(last.x_p >= 0.0 && last.x_p < 1.0);
        assert!((last.x_unwrapped - 2.3).abs() < 1e-12);
        assert_eq!(out.final_state.bead.wraps, 2);
    }
}
