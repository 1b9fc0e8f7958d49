//! Closed-form transparency solutions of the string-masslet system.
//!
//! When the normal force between bead and string vanishes, the string obeys the
//! free wave equation, the bead moves uniformly, and its transverse motion is a
//! harmonic clock. This module builds those solutions (subsonic "bradyon",
//! supersonic "tachyon", and the single-wave "surfer") and evaluates the
//! kinematic quantities attached to them: phases, phase and group velocities,
//! the Doppler split into counter-propagating waves, the guidance velocity and
//! the de Broglie-style periods and wavelengths.
//!
//! Everything here is a pure function of immutable records.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative tolerance used to decide whether a supplied spring pulsation matches
/// the one a transparency solution requires.
pub const SPRING_MATCH_RTOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticError {
    #[error("invalid physical parameter: {0}")]
    InvalidParameter(String),
    #[error("speed {speed} outside the allowed range for {what} (c = {c})")]
    Domain { what: &'static str, speed: f64, c: f64 },
    #[error("{op} is not defined for the {regime:?} regime")]
    Unsupported { op: &'static str, regime: Regime },
    #[error("singular evaluation: {0}")]
    Singular(&'static str),
}

pub type Result<T> = std::result::Result<T, AnalyticError>;

/// Material constants of the string and the bead.
///
/// The sound speed is derived once from tension and density; the stored tension
/// is then restated as `c * c * lambda` so that `c² λ = T` holds bit for bit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    lambda: f64,
    tension: f64,
    c: f64,
    m_p: f64,
    omega_p: f64,
}

impl PhysicalParams {
    pub fn new(lambda: f64, tension: f64, m_p: f64, omega_p: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(AnalyticError::InvalidParameter(format!("linear density must be > 0, got {lambda}")));
        }
        if !(tension > 0.0 && tension.is_finite()) {
            return Err(AnalyticError::InvalidParameter(format!("tension must be > 0, got {tension}")));
        }
        let c = (tension / lambda).sqrt();
        Self::from_speed(lambda, c, m_p, omega_p)
    }

    /// Build from density and sound speed; tension is derived.
    pub fn from_speed(lambda: f64, c: f64, m_p: f64, omega_p: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(AnalyticError::InvalidParameter(format!("linear density must be > 0, got {lambda}")));
        }
        if !(c > 0.0 && c.is_finite()) {
            return Err(AnalyticError::InvalidParameter(format!("sound speed must be > 0, got {c}")));
        }
        if !(m_p > 0.0 && m_p.is_finite()) {
            return Err(AnalyticError::InvalidParameter(format!("particle mass must be > 0, got {m_p}")));
        }
        if !(omega_p >= 0.0 && omega_p.is_finite()) {
            return Err(AnalyticError::InvalidParameter(format!("spring pulsation must be >= 0, got {omega_p}")));
        }
        Ok(Self { lambda, tension: c * c * lambda, c, m_p, omega_p })
    }

    /// c = 1, λ = 1 (so T = 1).
    pub fn natural(m_p: f64, omega_p: f64) -> Result<Self> {
        Self::from_speed(1.0, 1.0, m_p, omega_p)
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    pub fn tension(&self) -> f64 {
        self.tension
    }
    pub fn c(&self) -> f64 {
        self.c
    }
    pub fn m_p(&self) -> f64 {
        self.m_p
    }
    pub fn omega_p(&self) -> f64 {
        self.omega_p
    }
    /// Spring stiffness k_p = m_p ω_p².
    pub fn stiffness(&self) -> f64 {
        self.m_p * self.omega_p * self.omega_p
    }

    pub fn with_omega_p(self, omega_p: f64) -> Result<Self> {
        Self::from_speed(self.lambda, self.c, self.m_p, omega_p)
    }

    pub fn with_mass(self, m_p: f64) -> Result<Self> {
        Self::from_speed(self.lambda, self.c, m_p, self.omega_p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    Bradyon,
    Tachyon,
    Surfer,
}

/// Which free pulse a surfer rides: `Forward` is a +x-going wave f(t - x/c),
/// `Backward` its mirror g(t + x/c).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum SurferDirection {
    #[default]
    Forward,
    Backward,
}

/// A phase that is affine in (t, x): `rate * t + wavenumber * x + offset`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffinePhase {
    pub rate: f64,
    pub wavenumber: f64,
    pub offset: f64,
}

impl AffinePhase {
    pub fn at(&self, t: f64, x: f64) -> f64 {
        self.rate * t + self.wavenumber * x + self.offset
    }
}

/// Outcome of comparing the spring pulsation a solution needs with the one the
/// bead actually has. A mismatch is informational: one field can carry beads
/// with different springs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpringCheck {
    pub required: f64,
    pub supplied: f64,
    pub matched: bool,
}

impl SpringCheck {
    fn new(required: f64, supplied: f64) -> Self {
        let scale = required.abs().max(f64::MIN_POSITIVE);
        Self { required, supplied, matched: (required - supplied).abs() <= SPRING_MATCH_RTOL * scale }
    }
}

/// Closed-form transparency solution.
///
/// Field naming follows the bradyonic case; for tachyons `omega_lab`, `k_lab`,
/// `gamma` and `clock_pulsation` hold Ω, K, Γ_p and Ω_p. For the surfer,
/// `b` is the wave amplitude A, `omega_prime` the bead clock pulsation,
/// `omega_lab` the carrier pulsation ω_p/(1 ∓ v/c), `gamma` is 1 and
/// `eta`/`xi` are zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransparencySolution {
    pub regime: Regime,
    pub b: f64,
    pub omega_prime: f64,
    pub eta: f64,
    pub xi: f64,
    /// v_p for bradyons and surfers (signed), w_p for tachyons.
    pub speed: f64,
    pub x_init: f64,
    pub c: f64,
    pub gamma: f64,
    pub omega_lab: f64,
    pub k_lab: f64,
    /// Clock amplitude A.
    pub amplitude: f64,
    /// Clock phase φ, canonical representative in (-π, π].
    pub phi: f64,
    pub clock_pulsation: f64,
    /// Action-dimensioned scale used by [`debroglie_quantities`].
    pub q: f64,
    pub direction: SurferDirection,
    pub spring: SpringCheck,
}

/// γ_p = (1 - v²/c²)^(-1/2).
pub fn gamma_factor(v: f64, c: f64) -> Result<f64> {
    if !(c > 0.0) || !(v.abs() < c) {
        return Err(AnalyticError::Domain { what: "gamma_factor (requires |v| < c)", speed: v, c });
    }
    let beta = v / c;
    Ok(1.0 / ((1.0 - beta) * (1.0 + beta)).sqrt())
}

/// Γ_p = (w²/c² - 1)^(-1/2).
pub fn tachyon_gamma(w: f64, c: f64) -> Result<f64> {
    if !(c > 0.0) || !(w > c) {
        return Err(AnalyticError::Domain { what: "tachyon_gamma (requires w > c)", speed: w, c });
    }
    let beta = w / c;
    Ok(1.0 / ((beta - 1.0) * (beta + 1.0)).sqrt())
}

/// Wrap an angle to (-π, π].
pub fn wrap_phase(a: f64) -> f64 {
    if a > -PI && a <= PI {
        return a;
    }
    let two_pi = 2.0 * PI;
    let mut r = a.rem_euclid(two_pi);
    if r > PI {
        r -= two_pi;
    }
    r
}

fn check_amplitude(b: f64) -> Result<()> {
    if !(b > 0.0 && b.is_finite()) {
        return Err(AnalyticError::InvalidParameter(format!("amplitude must be > 0, got {b}")));
    }
    Ok(())
}

fn check_finite(name: &str, value: f64) -> Result<()> {
    if !value.is_finite() {
        return Err(AnalyticError::InvalidParameter(format!("{name} must be finite, got {value}")));
    }
    Ok(())
}

/// Bradyonic solution from the co-moving pulsation ω′.
pub fn make_bradyon(
    params: &PhysicalParams,
    b: f64,
    omega_prime: f64,
    eta: f64,
    xi: f64,
    v_p: f64,
    x_init: f64,
) -> Result<TransparencySolution> {
    let c = params.c();
    if !(v_p >= 0.0 && v_p < c) {
        return Err(AnalyticError::Domain { what: "bradyon (requires 0 <= v_p < c)", speed: v_p, c });
    }
    let gamma = gamma_factor(v_p, c)?;
    bradyon_with(params, b, omega_prime, omega_prime * gamma, eta, xi, v_p, x_init)
}

/// Bradyonic solution from the laboratory pulsation ω = ω′γ_p, keeping ω
/// exactly as given.
pub fn make_bradyon_from_lab(
    params: &PhysicalParams,
    b: f64,
    omega_lab: f64,
    eta: f64,
    xi: f64,
    v_p: f64,
    x_init: f64,
) -> Result<TransparencySolution> {
    let c = params.c();
    if !(v_p >= 0.0 && v_p < c) {
        return Err(AnalyticError::Domain { what: "bradyon (requires 0 <= v_p < c)", speed: v_p, c });
    }
    let gamma = gamma_factor(v_p, c)?;
    bradyon_with(params, b, omega_lab / gamma, omega_lab, eta, xi, v_p, x_init)
}

#[allow(clippy::too_many_arguments)]
fn bradyon_with(
    params: &PhysicalParams,
    b: f64,
    omega_prime: f64,
    omega: f64,
    eta: f64,
    xi: f64,
    v_p: f64,
    x_init: f64,
) -> Result<TransparencySolution> {
    check_amplitude(b)?;
    for (n, v) in [("omega_prime", omega_prime), ("eta", eta), ("xi", xi), ("x_init", x_init)] {
        check_finite(n, v)?;
    }
    if !(omega_prime > 0.0) {
        return Err(AnalyticError::InvalidParameter(format!("omega_prime must be > 0, got {omega_prime}")));
    }
    let c = params.c();
    let gamma = gamma_factor(v_p, c)?;
    let k = omega * v_p / (c * c);
    let clock = omega_prime / gamma;
    let amplitude = b * (omega * x_init / c + xi).cos();
    let phi = wrap_phase(eta - omega * x_init * v_p / (c * c));
    Ok(TransparencySolution {
        regime: Regime::Bradyon,
        b,
        omega_prime,
        eta,
        xi,
        speed: v_p,
        x_init,
        c,
        gamma,
        omega_lab: omega,
        k_lab: k,
        amplitude,
        phi,
        clock_pulsation: clock,
        q: 1.0,
        direction: SurferDirection::Forward,
        spring: SpringCheck::new(clock, params.omega_p()),
    })
}

/// Tachyonic solution from the co-moving pulsation ω′.
///
/// The clock phase is φ = ξ + ω′Γ_p X_init w_p / c², the value for which the
/// field evaluated on the trajectory equals A cos(Ω_p t + φ).
pub fn make_tachyon(
    params: &PhysicalParams,
    b: f64,
    omega_prime: f64,
    eta: f64,
    xi: f64,
    w_p: f64,
    x_init: f64,
) -> Result<TransparencySolution> {
    let gamma = tachyon_gamma(w_p, params.c())?;
    tachyon_with(params, b, omega_prime, omega_prime * gamma, eta, xi, w_p, x_init)
}

/// Tachyonic solution from the laboratory pulsation Ω = ω′Γ_p, keeping Ω
/// exactly as given.
pub fn make_tachyon_from_lab(
    params: &PhysicalParams,
    b: f64,
    omega_lab: f64,
    eta: f64,
    xi: f64,
    w_p: f64,
    x_init: f64,
) -> Result<TransparencySolution> {
    let gamma = tachyon_gamma(w_p, params.c())?;
    tachyon_with(params, b, omega_lab / gamma, omega_lab, eta, xi, w_p, x_init)
}

#[allow(clippy::too_many_arguments)]
fn tachyon_with(
    params: &PhysicalParams,
    b: f64,
    omega_prime: f64,
    omega: f64,
    eta: f64,
    xi: f64,
    w_p: f64,
    x_init: f64,
) -> Result<TransparencySolution> {
    check_amplitude(b)?;
    for (n, v) in [("omega_prime", omega_prime), ("eta", eta), ("xi", xi), ("x_init", x_init)] {
        check_finite(n, v)?;
    }
    if !(omega_prime > 0.0) {
        return Err(AnalyticError::InvalidParameter(format!("omega_prime must be > 0, got {omega_prime}")));
    }
    let c = params.c();
    let gamma = tachyon_gamma(w_p, c)?;
    let k = omega * w_p / (c * c);
    let clock = omega_prime / gamma;
    let amplitude = b * (omega * x_init / c - eta).cos();
    let phi = wrap_phase(xi + omega * x_init * w_p / (c * c));
    Ok(TransparencySolution {
        regime: Regime::Tachyon,
        b,
        omega_prime,
        eta,
        xi,
        speed: w_p,
        x_init,
        c,
        gamma,
        omega_lab: omega,
        k_lab: k,
        amplitude,
        phi,
        clock_pulsation: clock,
        q: 1.0,
        direction: SurferDirection::Forward,
        spring: SpringCheck::new(clock, params.omega_p()),
    })
}

/// The tachyon carried by the same field as `brad`: w_p = c²/v_p, same ω′, B,
/// η and ξ. The tachyon starts at `x_init`.
pub fn matched_tachyon(
    params: &PhysicalParams,
    brad: &TransparencySolution,
    x_init: f64,
) -> Result<TransparencySolution> {
    if brad.regime != Regime::Bradyon {
        return Err(AnalyticError::Unsupported { op: "matched_tachyon", regime: brad.regime });
    }
    if brad.speed <= 0.0 {
        return Err(AnalyticError::Singular("a bead at rest has no tachyonic partner"));
    }
    let c = brad.c;
    make_tachyon(params, brad.b, brad.omega_prime, brad.eta, brad.xi, c * c / brad.speed, x_init)
}

/// Bead surfing a single monochromatic free wave.
pub fn make_surfer(
    amplitude: f64,
    omega_p: f64,
    phi: f64,
    v_p: f64,
    x_init: f64,
    c: f64,
    direction: SurferDirection,
) -> Result<TransparencySolution> {
    for (n, v) in [("amplitude", amplitude), ("omega_p", omega_p), ("phi", phi), ("x_init", x_init)] {
        check_finite(n, v)?;
    }
    if !(c > 0.0) {
        return Err(AnalyticError::InvalidParameter(format!("sound speed must be > 0, got {c}")));
    }
    let doppler = match direction {
        SurferDirection::Forward if v_p < c => 1.0 - v_p / c,
        SurferDirection::Backward if v_p > -c => 1.0 + v_p / c,
        _ => return Err(AnalyticError::Domain { what: "surfer (requires the bead to stay behind the wave)", speed: v_p, c }),
    };
    let carrier = omega_p / doppler;
    let sign = match direction {
        SurferDirection::Forward => 1.0,
        SurferDirection::Backward => -1.0,
    };
    Ok(TransparencySolution {
        regime: Regime::Surfer,
        b: amplitude,
        omega_prime: omega_p,
        eta: 0.0,
        xi: 0.0,
        speed: v_p,
        x_init,
        c,
        gamma: 1.0,
        omega_lab: carrier,
        k_lab: sign * carrier / c,
        amplitude,
        phi: wrap_phase(phi),
        clock_pulsation: omega_p,
        q: 1.0,
        direction,
        spring: SpringCheck::new(omega_p, omega_p),
    })
}

impl TransparencySolution {
    pub fn with_q(mut self, q: f64) -> Self {
        self.q = q;
        self
    }

    /// Carrier (phase-wave) phase S as an affine function of (t, x).
    pub fn carrier_phase(&self) -> AffinePhase {
        match self.regime {
            // S = ω t - k x + η
            Regime::Bradyon => AffinePhase { rate: self.omega_lab, wavenumber: -self.k_lab, offset: self.eta },
            // S = K x - Ω t + ξ
            Regime::Tachyon => AffinePhase { rate: -self.omega_lab, wavenumber: self.k_lab, offset: self.xi },
            // S = κ (t ∓ x/c ± x_init/c) + φ
            Regime::Surfer => AffinePhase {
                rate: self.omega_lab,
                wavenumber: -self.k_lab,
                offset: self.k_lab * self.x_init + self.phi,
            },
        }
    }

    /// Envelope (group-wave) phase Φ. Constant zero for the surfer.
    pub fn envelope_phase(&self) -> AffinePhase {
        let c = self.c;
        match self.regime {
            // Φ = (ω/c)(x - v t) + ξ
            Regime::Bradyon => AffinePhase {
                rate: -self.omega_lab * self.speed / c,
                wavenumber: self.omega_lab / c,
                offset: self.xi,
            },
            // Φ = -(Ω/c)(x - w t) + η
            Regime::Tachyon => AffinePhase {
                rate: self.omega_lab * self.speed / c,
                wavenumber: -self.omega_lab / c,
                offset: self.eta,
            },
            Regime::Surfer => AffinePhase { rate: 0.0, wavenumber: 0.0, offset: 0.0 },
        }
    }

    /// Field amplitude multiplying cos S cos Φ.
    fn field_amplitude(&self) -> f64 {
        self.b
    }

    /// Bead abscissa at time t on the uniform trajectory.
    pub fn trajectory(&self, t: f64) -> f64 {
        self.speed * t + self.x_init
    }

    /// Transverse clock displacement A cos(ω_clock t + φ).
    pub fn clock(&self, t: f64) -> f64 {
        self.amplitude * (self.clock_pulsation * t + self.phi).cos()
    }

    /// The two travelling-wave wavenumbers contained in the field (signed).
    pub fn spatial_wavenumbers(&self) -> [f64; 2] {
        let s = self.carrier_phase().wavenumber;
        let p = self.envelope_phase().wavenumber;
        [s + p, s - p]
    }
}

/// Pointwise field u(t, x).
pub fn eval_field(sol: &TransparencySolution, t: f64, x: f64) -> f64 {
    let s = sol.carrier_phase().at(t, x);
    let p = sol.envelope_phase().at(t, x);
    sol.field_amplitude() * s.cos() * p.cos()
}

/// Analytic ∂ₜu.
pub fn eval_field_dt(sol: &TransparencySolution, t: f64, x: f64) -> f64 {
    let sp = sol.carrier_phase();
    let pp = sol.envelope_phase();
    let (s, p) = (sp.at(t, x), pp.at(t, x));
    -sol.field_amplitude() * (sp.rate * s.sin() * p.cos() + pp.rate * s.cos() * p.sin())
}

/// Analytic ∂ₓu.
pub fn eval_field_dx(sol: &TransparencySolution, t: f64, x: f64) -> f64 {
    let sp = sol.carrier_phase();
    let pp = sol.envelope_phase();
    let (s, p) = (sp.at(t, x), pp.at(t, x));
    -sol.field_amplitude() * (sp.wavenumber * s.sin() * p.cos() + pp.wavenumber * s.cos() * p.sin())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasePair {
    pub s: f64,
    pub phi: f64,
}

pub fn phases(sol: &TransparencySolution, t: f64, x: f64) -> Result<PhasePair> {
    if sol.regime == Regime::Surfer {
        return Err(AnalyticError::Unsupported { op: "phases", regime: sol.regime });
    }
    Ok(PhasePair { s: sol.carrier_phase().at(t, x), phi: sol.envelope_phase().at(t, x) })
}

/// Normalized dispersion residual (ω² - k²c² ∓ ω′²)/ω′², sign by regime.
pub fn dispersion_residual(sol: &TransparencySolution) -> Result<f64> {
    dispersion_residual_of(sol.regime, sol.omega_lab, sol.k_lab, sol.omega_prime, sol.c)
}

/// Same residual for an arbitrary (ω, k) pair.
pub fn dispersion_residual_of(regime: Regime, omega: f64, k: f64, omega_prime: f64, c: f64) -> Result<f64> {
    let mass_term = match regime {
        Regime::Bradyon => omega_prime * omega_prime,
        Regime::Tachyon => -omega_prime * omega_prime,
        Regime::Surfer => return Err(AnalyticError::Unsupported { op: "dispersion_residual", regime }),
    };
    let kc = k * c;
    Ok(((omega - kc) * (omega + kc) - mass_term) / (omega_prime * omega_prime))
}

/// (v_phase, v_group). A bead at rest has an unbounded phase velocity,
/// reported as `f64::INFINITY`.
pub fn velocities(sol: &TransparencySolution) -> Result<(f64, f64)> {
    match sol.regime {
        Regime::Bradyon | Regime::Tachyon => {
            let c2 = sol.c * sol.c;
            let v_phase = if sol.speed == 0.0 { f64::INFINITY } else { c2 / sol.speed };
            Ok((v_phase, sol.speed))
        }
        Regime::Surfer => Err(AnalyticError::Unsupported { op: "velocities", regime: sol.regime }),
    }
}

/// Two counter-propagating plane waves whose sum is the bradyonic field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DopplerPair {
    pub omega_plus: f64,
    pub omega_minus: f64,
    pub amp: f64,
    pub phase_plus: f64,
    pub phase_minus: f64,
    pub c: f64,
}

impl DopplerPair {
    /// +x-going, blue-shifted component.
    pub fn u_plus(&self, t: f64, x: f64) -> f64 {
        self.amp * (self.omega_plus * (t - x / self.c) + self.phase_plus).cos()
    }
    /// -x-going, red-shifted component.
    pub fn u_minus(&self, t: f64, x: f64) -> f64 {
        self.amp * (self.omega_minus * (t + x / self.c) + self.phase_minus).cos()
    }
    pub fn eval(&self, t: f64, x: f64) -> f64 {
        self.u_plus(t, x) + self.u_minus(t, x)
    }
}

pub fn doppler_decompose(sol: &TransparencySolution) -> Result<DopplerPair> {
    if sol.regime != Regime::Bradyon {
        return Err(AnalyticError::Unsupported { op: "doppler_decompose", regime: sol.regime });
    }
    let beta = sol.speed / sol.c;
    Ok(DopplerPair {
        omega_plus: sol.omega_lab * (1.0 + beta),
        omega_minus: sol.omega_lab * (1.0 - beta),
        amp: 0.5 * sol.b,
        phase_plus: sol.eta - sol.xi,
        phase_minus: sol.eta + sol.xi,
        c: sol.c,
    })
}

/// Guidance law v = -c² ∂ₓS / ∂ₜS for a phase with the given gradient.
pub fn guidance_from_gradient(ds_dt: f64, ds_dx: f64, c: f64) -> Result<f64> {
    if ds_dt == 0.0 {
        return Err(AnalyticError::Singular("guidance formula needs a nonzero time derivative of the phase"));
    }
    Ok(-c * c * ds_dx / ds_dt)
}

pub fn guidance_velocity(sol: &TransparencySolution, _t: f64, _x: f64) -> Result<f64> {
    if sol.regime != Regime::Bradyon {
        return Err(AnalyticError::Unsupported { op: "guidance_velocity", regime: sol.regime });
    }
    // S is affine, so its gradient does not depend on (t, x).
    let s = sol.carrier_phase();
    guidance_from_gradient(s.rate, s.wavenumber, sol.c)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeBroglie {
    pub h_p: f64,
    pub p_p: f64,
    pub lambda_phase: f64,
    pub t_phase: f64,
    pub lambda_group: f64,
    pub t_group: f64,
}

/// Energy/momentum identified with Qω, Qk and the phase/group periods.
/// Periods that diverge for a bead at rest are `f64::INFINITY`.
pub fn debroglie_quantities(sol: &TransparencySolution, q: f64) -> Result<DeBroglie> {
    if !(q > 0.0) {
        return Err(AnalyticError::InvalidParameter(format!("Q must be > 0, got {q}")));
    }
    let c = sol.c;
    let base = 2.0 * PI / sol.omega_lab;
    let ratio = |num: f64| if sol.speed == 0.0 { f64::INFINITY } else { num / sol.speed };
    match sol.regime {
        Regime::Bradyon => Ok(DeBroglie {
            h_p: q * sol.omega_lab,
            p_p: q * sol.k_lab,
            lambda_phase: base * ratio(c * c),
            t_phase: base,
            lambda_group: base * c,
            t_group: base * ratio(c),
        }),
        Regime::Tachyon => Ok(DeBroglie {
            h_p: q * sol.omega_lab,
            p_p: q * sol.k_lab,
            lambda_phase: base * (c * c / sol.speed),
            t_phase: base,
            lambda_group: base * c,
            t_group: base * (c / sol.speed),
        }),
        Regime::Surfer => Err(AnalyticError::Unsupported { op: "debroglie_quantities", regime: sol.regime }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn fig2() -> TransparencySolution {
        let params = PhysicalParams::natural(1.0, 0.0).unwrap();
        make_bradyon_from_lab(&params, 1.0, 2.0 * PI / 10.0, 0.0, 0.0, 0.1, 0.1).unwrap()
    }

    fn fig3() -> TransparencySolution {
        let params = PhysicalParams::natural(1.0, 0.0).unwrap();
        make_tachyon_from_lab(&params, 1.0, 2.0 * PI, 0.0, 0.0, 10.0, 0.0).unwrap()
    }

    #[test]
    fn gamma_values() {
        assert_eq!(gamma_factor(0.0, 1.0).unwrap(), 1.0);
        // mpmath, 30 digits
        assert!((gamma_factor(0.1, 1.0).unwrap() - 1.005_037_815_259_212).abs() < 1e-15);
        assert!((gamma_factor(0.99, 1.0).unwrap() - 7.088_812_050_083_359).abs() < 1e-13);
        assert!(gamma_factor(1.0, 1.0).is_err());
        assert!(gamma_factor(2.0, 1.0).is_err());
    }

    #[test]
    fn tachyon_gamma_values() {
        assert!((tachyon_gamma(10.0, 1.0).unwrap() - 0.100_503_781_525_921_2).abs() < 1e-16);
        assert!((tachyon_gamma(2f64.sqrt() * 3.0, 3.0).unwrap() - 1.0).abs() < 1e-14);
        assert!((tachyon_gamma(1.01, 1.0).unwrap() - 7.053_456_158_585_983).abs() < 1e-12);
        assert!(tachyon_gamma(1.0, 1.0).is_err());
        assert!(tachyon_gamma(0.5, 1.0).is_err());
    }

    #[test]
    fn tachyon_gamma_matches_bradyon_partner() {
        for &v in &[0.05, 0.1, 0.3, 0.7, 0.95] {
            let big = tachyon_gamma(1.0 / v, 1.0).unwrap();
            let small = gamma_factor(v, 1.0).unwrap() * v;
            assert!((big - small).abs() <= 64.0 * f64::EPSILON * big, "v={v}");
        }
    }

    #[test]
    fn fig2_derived_pulsations() {
        let sol = fig2();
        assert!((sol.omega_lab - 0.628_318_530_717_958_6).abs() < 1e-15);
        assert!((sol.omega_prime - 0.625_169_044_565_658_7).abs() < 1e-15);
        assert!((sol.clock_pulsation - 0.622_035_345_410_779).abs() < 1e-15);
        assert!((sol.amplitude - 0.998_026_728_428_271_6).abs() < 1e-15);
        assert!((sol.phi + 0.006_283_185_307_179_586).abs() < 1e-17, "{:e}", sol.phi + 0.006_283_185_307_179_586);
        assert!(!sol.spring.matched);
    }

    #[test]
    fn bradyon_at_rest_is_a_standing_wave() {
        let params = PhysicalParams::natural(1.0, 2.0).unwrap();
        let sol = make_bradyon(&params, 1.0, 2.0, 0.0, 0.0, 0.0, 0.3).unwrap();
        assert_eq!(sol.omega_lab, 2.0);
        assert_eq!(sol.clock_pulsation, 2.0);
        assert_eq!(sol.k_lab, 0.0);
        assert!(sol.spring.matched);
        let d = doppler_decompose(&sol).unwrap();
        assert_eq!(d.omega_plus, d.omega_minus);
    }

    #[test]
    fn fig3_derived_quantities() {
        let sol = fig3();
        assert!((sol.k_lab - 62.831_853_071_795_86).abs() < 1e-12);
        assert!((2.0 * PI / sol.k_lab - 0.1).abs() < 1e-16);
        assert!((sol.omega_prime - 62.516_904_456_565_87).abs() < 1e-12);
        assert!((sol.clock_pulsation - 622.035_345_410_779).abs() < 1e-10);
        assert_eq!(sol.amplitude, 1.0);
        let db = debroglie_quantities(&sol, 1.0).unwrap();
        assert_eq!(db.lambda_phase, 0.1);
        assert_eq!(db.lambda_group, 1.0);
        assert_eq!(db.t_phase, 1.0);
        assert_eq!(db.t_group, 0.1);
    }

    #[test]
    fn domain_errors() {
        let params = PhysicalParams::natural(1.0, 1.0).unwrap();
        assert!(make_bradyon(&params, 1.0, 1.0, 0.0, 0.0, 1.0, 0.0).is_err());
        assert!(make_bradyon(&params, 0.0, 1.0, 0.0, 0.0, 0.5, 0.0).is_err());
        assert!(make_tachyon(&params, 1.0, 1.0, 0.0, 0.0, 1.0, 0.0).is_err());
        assert!(make_surfer(1.0, 1.0, 0.0, 1.0, 0.0, 1.0, SurferDirection::Forward).is_err());
        assert!(make_surfer(1.0, 1.0, 0.0, -1.0, 0.0, 1.0, SurferDirection::Backward).is_err());
        assert!(PhysicalParams::new(0.0, 1.0, 1.0, 1.0).is_err());
        assert!(PhysicalParams::new(1.0, 1.0, 1.0, -1.0).is_err());
    }

    #[test]
    fn tension_is_restated_exactly() {
        let p = PhysicalParams::new(0.37, 2.9, 1.0, 1.0).unwrap();
        assert_eq!(p.c() * p.c() * p.lambda(), p.tension());
    }

    #[test]
    fn surfer_values() {
        let sol = make_surfer(1.0, 1.0, 0.0, 0.0, 0.0, 1.0, SurferDirection::Forward).unwrap();
        assert_eq!(eval_field(&sol, 0.0, 0.0), 1.0);
        let sol = make_surfer(1.0, 1.0, 0.0, 0.5, 0.0, 1.0, SurferDirection::Forward).unwrap();
        assert_eq!(sol.omega_lab, 2.0);
        let t = PI;
        let on = eval_field(&sol, t, sol.trajectory(t));
        assert!((on - (PI).cos()).abs() < 1e-14);
        let back = make_surfer(0.7, 1.3, 0.4, 0.3, 0.2, 1.0, SurferDirection::Backward).unwrap();
        for i in 0..50 {
            let t = 0.37 * i as f64;
            let on = eval_field(&back, t, back.trajectory(t));
            assert!((on - back.clock(t)).abs() < 1e-12);
        }
        assert!(phases(&sol, 0.0, 0.0).is_err());
    }

    #[test]
    fn field_on_trajectory_is_the_clock() {
        let sol = fig2();
        assert!((eval_field(&sol, 0.0, sol.x_init) - sol.amplitude * sol.phi.cos()).abs() < 1e-15);
        let tach = fig3();
        for i in 0..200 {
            let t = 0.013 * i as f64;
            let on = eval_field(&tach, t, tach.speed * t);
            assert!((on - tach.amplitude * (tach.clock_pulsation * t + tach.phi).cos()).abs() < 1e-10);
        }
    }

    #[test]
    fn tachyon_clock_phase_with_offsets() {
        let params = PhysicalParams::natural(1.0, 0.0).unwrap();
        let sol = make_tachyon(&params, 1.3, 2.1, 0.4, -0.9, 3.0, 0.37).unwrap();
        for i in 0..100 {
            let t = 0.05 * i as f64;
            let on = eval_field(&sol, t, sol.trajectory(t));
            assert!((on - sol.clock(t)).abs() < 1e-12, "t={t}");
        }
    }

    #[test]
    fn analytic_derivatives_match_finite_differences() {
        let params = PhysicalParams::natural(1.0, 0.0).unwrap();
        let sols = [
            fig2(),
            make_tachyon(&params, 0.5, 1.7, 0.2, 0.3, 2.5, 0.1).unwrap(),
            make_surfer(0.8, 1.1, 0.2, 0.4, 0.0, 1.0, SurferDirection::Forward).unwrap(),
        ];
        let h = 1e-5;
        for sol in &sols {
            for &(t, x) in &[(0.3, 0.7), (1.9, -2.2), (4.0, 11.0)] {
                let fd_t = (eval_field(sol, t + h, x) - eval_field(sol, t - h, x)) / (2.0 * h);
                let fd_x = (eval_field(sol, t, x + h) - eval_field(sol, t, x - h)) / (2.0 * h);
                assert!((fd_t - eval_field_dt(sol, t, x)).abs() < 1e-8);
                assert!((fd_x - eval_field_dx(sol, t, x)).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn phases_at_origin() {
        let sol = fig2();
        let p = phases(&sol, 0.0, 0.0).unwrap();
        assert_eq!((p.s, p.phi), (0.0, 0.0));
    }

    #[test]
    fn dispersion_identities() {
        assert!(dispersion_residual(&fig2()).unwrap().abs() < 1e-14);
        assert!(dispersion_residual(&fig3()).unwrap().abs() < 1e-14);
        let sol = make_surfer(1.0, 1.0, 0.0, 0.0, 0.0, 1.0, SurferDirection::Forward).unwrap();
        assert!(dispersion_residual(&sol).is_err());
    }

    #[test]
    fn dispersion_sensitivity_is_first_order() {
        // d(residual)/dk = -2 k c² / ω′², checked against a perturbation
        let sol = fig2();
        let dk = 1e-7;
        let r = dispersion_residual_of(Regime::Bradyon, sol.omega_lab, sol.k_lab + dk, sol.omega_prime, sol.c).unwrap();
        let predicted = -2.0 * sol.k_lab * dk / (sol.omega_prime * sol.omega_prime);
        assert!((r - predicted).abs() < 1e-3 * predicted.abs());
    }

    #[test]
    fn phase_and_group_velocities() {
        let (vph, vg) = velocities(&fig2()).unwrap();
        assert!((vph - 10.0).abs() < 1e-12 && (vg - 0.1).abs() < 1e-15);
        let (vph, vg) = velocities(&fig3()).unwrap();
        assert!((vph - 0.1).abs() < 1e-15 && vg == 10.0);
        let params = PhysicalParams::natural(1.0, 0.0).unwrap();
        let rest = make_bradyon(&params, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0).unwrap();
        assert_eq!(velocities(&rest).unwrap().0, f64::INFINITY);
    }

    #[test]
    fn doppler_values() {
        let sol = fig2();
        let d = doppler_decompose(&sol).unwrap();
        assert!((d.omega_minus - 0.9 * sol.omega_lab).abs() < 1e-15);
        assert!((d.omega_plus - 1.1 * sol.omega_lab).abs() < 1e-15);
        assert!(doppler_decompose(&fig3()).is_err());
    }

    #[test]
    fn doppler_reconstruction_brute_force() {
        let params = PhysicalParams::natural(1.0, 0.0).unwrap();
        let sol = make_bradyon(&params, 2.0, 0.9, 0.3, -1.1, 0.45, 0.2).unwrap();
        let d = doppler_decompose(&sol).unwrap();
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        for _ in 0..1000 {
            let t = rng.gen_range(-50.0..50.0);
            let x = rng.gen_range(-50.0..50.0);
            assert!((d.eval(t, x) - eval_field(&sol, t, x)).abs() < 1e-12 * sol.b);
        }
    }

    #[test]
    fn guidance() {
        let sol = fig2();
        let v = guidance_velocity(&sol, 3.0, 4.0).unwrap();
        assert!((v - 0.1).abs() <= 1e-14 * 0.1);
        let params = PhysicalParams::natural(1.0, 0.0).unwrap();
        let rest = make_bradyon(&params, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0).unwrap();
        assert_eq!(guidance_velocity(&rest, 0.0, 0.0).unwrap(), 0.0);
        let s = sol.carrier_phase();
        let doubled = guidance_from_gradient(s.rate, 2.0 * s.wavenumber, sol.c).unwrap();
        assert!((doubled - 0.2).abs() < 1e-14);
        assert!(guidance_from_gradient(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn debroglie_fig2_ratio() {
        let db = debroglie_quantities(&fig2(), 1.0).unwrap();
        assert!((db.lambda_phase / db.lambda_group - 10.0).abs() < 1e-12);
        assert!((db.p_p * db.lambda_phase - 2.0 * PI).abs() < 1e-12);
        assert!(debroglie_quantities(&fig2(), 0.0).is_err());
    }

    #[test]
    fn wrap_phase_range() {
        assert_eq!(wrap_phase(PI), PI);
        assert_eq!(wrap_phase(-PI), PI);
        assert!((wrap_phase(3.0 * PI + 0.1) - (-PI + 0.1)).abs() < 1e-12);
    }
}
