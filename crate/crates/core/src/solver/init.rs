//! Initial states: analytic transparency data, localized pulses, rest.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::analytic::{eval_field, eval_field_dt, TransparencySolution};

use super::grid::Boundary;
use super::kernel::Stencil;
use super::{FieldState, MassletState, Result, SimConfig, SimState, SolverError};

/// Relative tolerance on κL/2π being an integer.
const COMMENSURATE_RTOL: f64 = 1e-9;
const MAX_DENOMINATOR: u64 = 100_000;

/// Best rational approximation p/q of `r > 0` with q ≤ `max_den`, by
/// continued fractions.
fn rational_approx(r: f64, max_den: u64) -> (u64, u64) {
    let (mut p0, mut q0, mut p1, mut q1) = (0u64, 1u64, 1u64, 0u64);
    let mut x = r;
    loop {
        let a = x.floor();
        if a > 1e12 {
            break;
        }
        let a = a as u64;
        let (p2, q2) = (a * p1 + p0, a * q1 + q0);
        if q2 > max_den {
            break;
        }
        (p0, q0, p1, q1) = (p1, q1, p2, q2);
        let frac = x - a as f64;
        if frac < 1e-12 || ((p1 as f64 / q1 as f64) - r).abs() <= COMMENSURATE_RTOL * r {
            break;
        }
        x = 1.0 / frac;
    }
    (p1, q1.max(1))
}

/// Distinct nonzero |κ| of the travelling waves in `sol`.
fn wavenumbers(sol: &TransparencySolution) -> Vec<f64> {
    let mut ks: Vec<f64> = sol.spatial_wavenumbers().iter().map(|k| k.abs()).filter(|k| *k > 0.0).collect();
    ks.sort_by(f64::total_cmp);
    ks.dedup_by(|a, b| (*a - *b).abs() <= COMMENSURATE_RTOL * b.abs());
    ks
}

/// Shortest periodic domain holding an integer number of every wavelength in
/// the field, or None when the field is uniform in x or the ratio is not
/// rational with a small denominator.
pub fn commensurate_length(sol: &TransparencySolution) -> Option<f64> {
    let ks = wavenumbers(sol);
    match ks.as_slice() {
        [] => None,
        [k] => Some(2.0 * PI / k),
        [k1, k2] => {
            // L = a 2π/k1 = b 2π/k2  ⇒  a/b = k1/k2
            let (a, b) = rational_approx(k1 / k2, MAX_DENOMINATOR);
            let len = a as f64 * 2.0 * PI / k1;
            let check = b as f64 * 2.0 * PI / k2;
            ((len - check).abs() <= 1e-9 * len).then_some(len)
        }
        _ => None,
    }
}

fn fits(length: f64, sol: &TransparencySolution) -> bool {
    wavenumbers(sol).iter().all(|k| {
        let turns = k * length / (2.0 * PI);
        (turns - turns.round()).abs() <= COMMENSURATE_RTOL * turns.max(1.0)
    })
}

/// Sample the analytic field and place the bead on its trajectory at t = 0.
///
/// The transverse bead velocity is not stored: it follows from the field
/// through ż_p = ∂ₜu + ẋ_p ∂ₓu.
pub fn init_from_analytic(sol: &TransparencySolution, config: &SimConfig) -> Result<SimState> {
    let grid = &config.grid;
    if (sol.c - config.params.c()).abs() > 1e-12 * sol.c {
        return Err(SolverError::Config(format!(
            "solution built for c = {} but the string has c = {}",
            sol.c,
            config.params.c()
        )));
    }
    match grid.bc() {
        Boundary::Periodic => {
            if !fits(grid.length(), sol) {
                let suggestions = match commensurate_length(sol) {
                    Some(base) => {
                        let r = (grid.length() / base).floor().max(1.0);
                        let mut s = vec![r * base, (r + 1.0) * base];
                        if r > 1.0 {
                            s.insert(0, (r - 1.0) * base);
                        }
                        s
                    }
                    None => Vec::new(),
                };
                return Err(SolverError::Incommensurate { length: grid.length(), suggestions });
            }
        }
        Boundary::FixedEnds => {
            // the analytic field must vanish at both walls for all t; check a
            // few instants spread over the slowest period
            let slowest = [sol.carrier_phase().rate.abs(), sol.envelope_phase().rate.abs()]
                .into_iter()
                .filter(|w| *w > 0.0)
                .fold(f64::INFINITY, f64::min);
            let span = if slowest.is_finite() { 2.0 * PI / slowest } else { 1.0 };
            let mut worst: f64 = 0.0;
            for i in 0..8 {
                let t = span * i as f64 / 8.0;
                for x in [0.0, grid.length()] {
                    worst = worst.max(eval_field(sol, t, x).abs());
                }
            }
            if worst > 1e-12 * sol.b.abs().max(f64::MIN_POSITIVE) {
                return Err(SolverError::BoundaryMismatch { value: worst });
            }
        }
    }
    let mut field = FieldState::zeros(grid);
    for j in 0..grid.nodes() {
        if grid.is_pinned(j) {
            continue;
        }
        let x = grid.x(j);
        field.u[j] = eval_field(sol, 0.0, x);
        field.v[j] = eval_field_dt(sol, 0.0, x);
    }
    let bead = place_bead(sol.x_init, sol.speed, config)?;
    Ok(SimState { t: 0.0, field, bead })
}

fn place_bead(x: f64, vx: f64, config: &SimConfig) -> Result<MassletState> {
    let grid = &config.grid;
    if !(x.is_finite() && vx.is_finite()) {
        return Err(SolverError::Config(format!("bead state must be finite, got x = {x}, v = {vx}")));
    }
    let bead = match grid.bc() {
        Boundary::Periodic => {
            let wraps = (x / grid.length()).floor() as i64;
            MassletState { x_p: grid.wrap(x), vx_p: vx, wraps, z_p: None }
        }
        Boundary::FixedEnds => MassletState::new(x, vx),
    };
    Stencil::build(bead.x_p, grid, config.kernel_width)?;
    Ok(bead)
}

/// Flat string at rest and a bead at `x_p` moving at `vx_p`.
pub fn init_zero(config: &SimConfig, x_p: f64, vx_p: f64) -> Result<SimState> {
    Ok(SimState { t: 0.0, field: FieldState::zeros(&config.grid), bead: place_bead(x_p, vx_p, config)? })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PulseDirection {
    #[default]
    Right,
    Left,
    /// Zero initial velocity: splits into two half-height pulses.
    Standing,
}

/// Gaussian pulse u = a exp(-(x - x0)² / 2σ²).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseSpec {
    pub amplitude: f64,
    pub center: f64,
    pub width: f64,
    pub direction: PulseDirection,
}

/// Pulse on the string and a bead at `x_p` moving at `vx_p`.
pub fn init_pulse(config: &SimConfig, pulse: &PulseSpec, x_p: f64, vx_p: f64) -> Result<SimState> {
    if !(pulse.width > 0.0 && pulse.amplitude.is_finite() && pulse.center.is_finite()) {
        return Err(SolverError::Config(format!("invalid pulse {pulse:?}")));
    }
    let grid = &config.grid;
    let c = config.params.c();
    let sign = match pulse.direction {
        PulseDirection::Right => 1.0,
        PulseDirection::Left => -1.0,
        PulseDirection::Standing => 0.0,
    };
    let mut field = FieldState::zeros(grid);
    for j in 0..grid.nodes() {
        if grid.is_pinned(j) {
            continue;
        }
        let mut d = grid.x(j) - pulse.center;
        if grid.bc() == Boundary::Periodic {
            d -= (d / grid.length()).round() * grid.length();
        }
        let r = d / pulse.width;
        let u = pulse.amplitude * (-0.5 * r * r).exp();
        field.u[j] = u;
        // u = f(x ∓ ct) ⇒ ∂ₜu = ∓c f'
        field.v[j] = sign * c * u * d / (pulse.width * pulse.width);
    }
    Ok(SimState { t: 0.0, field, bead: place_bead(x_p, vx_p, config)? })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{make_bradyon_from_lab, make_surfer, make_tachyon_from_lab, PhysicalParams, SurferDirection};
    use crate::solver::{Grid, KernelWidth};

    fn fig2() -> (PhysicalParams, TransparencySolution) {
        let omega = 2.0 * PI / 10.0;
        let gamma2 = 1.0 / (1.0 - 0.01);
        let params = PhysicalParams::natural(1.0, omega / gamma2).unwrap();
        (params, make_bradyon_from_lab(&params, 1.0, omega, 0.0, 0.0, 0.1, 0.1).unwrap())
    }

    #[test]
    fn fig2_domain() {
        let (_, sol) = fig2();
        assert!((commensurate_length(&sol).unwrap() - 100.0).abs() < 1e-9);
    }

    #[test]
    fn fig3_domain() {
        let params = PhysicalParams::natural(1.0, 1.0).unwrap();
        let sol = make_tachyon_from_lab(&params, 1.0, 2.0 * PI, 0.0, 0.0, 10.0, 0.0).unwrap();
        assert!((commensurate_length(&sol).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn rational_approximation() {
        assert_eq!(rational_approx(11.0 / 9.0, 1000), (11, 9));
        assert_eq!(rational_approx(3.0, 1000), (3, 1));
        assert_eq!(rational_approx(0.5, 1000), (1, 2));
    }

    #[test]
    fn incommensurate_domain_is_rejected() {
        let (params, sol) = fig2();
        let grid = Grid::new(95.0, 1024, Boundary::Periodic).unwrap();
        let cfg = SimConfig::new(params, grid, 1.0, 0.5).unwrap();
        match init_from_analytic(&sol, &cfg) {
            Err(SolverError::Incommensurate { suggestions, .. }) => {
                assert!(suggestions.iter().any(|l| (l - 100.0).abs() < 1e-9));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn initial_state_samples_the_field() {
        let (params, sol) = fig2();
        let grid = Grid::new(100.0, 4096, Boundary::Periodic).unwrap();
        let cfg = SimConfig::new(params, grid, 1.0, 0.5).unwrap().with_kernel(KernelWidth::CUBIC);
        let st = init_from_analytic(&sol, &cfg).unwrap();
        assert_eq!(st.bead.x_p, 0.1);
        assert_eq!(st.bead.vx_p, 0.1);
        assert!((st.field.u[7] - eval_field(&sol, 0.0, grid.x(7))).abs() < 1e-15);
        // z_p reproduces the clock A cos φ to interpolation accuracy
        let z = st.z_p(&cfg).unwrap();
        assert!((z - sol.clock(0.0)).abs() < 1e-4);
    }

    #[test]
    fn surfer_on_periodic_domain() {
        let params = PhysicalParams::natural(1.0, 2.0 * PI).unwrap();
        let sol = make_surfer(0.01, 2.0 * PI, 0.0, 0.5, 0.25, 1.0, SurferDirection::Forward).unwrap();
        let l = commensurate_length(&sol).unwrap();
        assert!((l - 0.5).abs() < 1e-12);
        let grid = Grid::new(1.0, 256, Boundary::Periodic).unwrap();
        let cfg = SimConfig::new(params, grid, 1.0, 0.5).unwrap();
        assert!(init_from_analytic(&sol, &cfg).is_ok());
    }

    #[test]
    fn fixed_ends_need_vanishing_walls() {
        let (params, sol) = fig2();
        let grid = Grid::new(100.0, 1024, Boundary::FixedEnds).unwrap();
        let cfg = SimConfig::new(params, grid, 1.0, 0.5).unwrap();
        assert!(matches!(init_from_analytic(&sol, &cfg), Err(SolverError::BoundaryMismatch { .. })));
    }

    #[test]
    fn right_moving_pulse() {
        let params = PhysicalParams::natural(1.0, 1.0).unwrap();
        let grid = Grid::new(4.0, 400, Boundary::FixedEnds).unwrap();
        let cfg = SimConfig::new(params, grid, 1.0, 0.5).unwrap();
        let p = PulseSpec { amplitude: 0.05, center: 1.0, width: 0.1, direction: PulseDirection::Right };
        let st = init_pulse(&cfg, &p, 2.0, 0.0).unwrap();
        // v = -c u_x for a right-going wave
        let j = 95;
        let ux = (st.field.u[j + 1] - st.field.u[j - 1]) / (2.0 * grid.dx());
        assert!((st.field.v[j] + ux).abs() < 1e-2 * ux.abs());
        assert_eq!(st.field.u[0], 0.0);
    }
}
