//! Configuration file schema, presets and resolution into a runnable setup.
//!
//! Layers are merged as flags > file > seed scenario > built-in defaults.
//! Units are natural: c = sqrt(tension / lambda), 1 unless lambda or tension
//! say otherwise.

use anyhow::{anyhow, bail, Context, Result};
use masslet::analytic::{
    debroglie_quantities, make_bradyon, make_bradyon_from_lab, make_surfer, make_tachyon, make_tachyon_from_lab,
    PhysicalParams, SurferDirection, TransparencySolution,
};
use masslet::solver::{
    commensurate_length, init_from_analytic, init_pulse, init_zero, Boundary, Coupling, Grid, KernelWidth, Potential,
    ProbeDerivatives, PulseDirection, PulseSpec, Scheme, SimConfig, SimState,
};
use serde::{Deserialize, Serialize};
use std::path::Path;
use toml::{Table, Value};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub string: StringSection,
    pub particle: ParticleSection,
    pub init: InitSection,
    pub numerics: NumericsSection,
    pub potential: PotentialSection,
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StringSection {
    /// Linear mass density.
    pub lambda: f64,
    pub tension: f64,
    /// Domain length; analytic seeds default to the smallest length that
    /// holds whole field periods.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub length: Option<f64>,
    /// Number of grid cells.
    pub nodes: usize,
    pub bc: Boundary,
}

impl Default for StringSection {
    fn default() -> Self {
        Self { lambda: 1.0, tension: 1.0, length: None, nodes: 4096, bc: Boundary::Periodic }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParticleSection {
    pub mass: f64,
    /// Spring pulsation; analytic seeds default to the matched clock pulsation.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega_p: Option<f64>,
    /// Multiplies omega_p; 1 keeps the spring as configured.
    pub detuning: f64,
    pub x_init: f64,
    /// v_p for bradyons and surfers, w_p for tachyons.
    pub speed: f64,
}

impl Default for ParticleSection {
    fn default() -> Self {
        Self { mass: 1.0, omega_p: None, detuning: 1.0, x_init: 0.0, speed: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMode {
    AnalyticBradyon,
    AnalyticTachyon,
    Surfer,
    Pulse,
    #[default]
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    #[default]
    Forward,
    Backward,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitSection {
    pub mode: InitMode,
    /// Field amplitude B (wave amplitude for the surfer).
    #[serde(alias = "B")]
    pub b: f64,
    /// Co-moving pulsation; exactly one of this and omega_lab for analytic
    /// bradyons and tachyons, and the clock pulsation for the surfer.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega_prime: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega_lab: Option<f64>,
    pub eta: f64,
    pub xi: f64,
    /// Surfer clock phase and wave direction.
    pub phi: f64,
    pub direction: Direction,
    pub pulse_amplitude: f64,
    pub pulse_center: f64,
    pub pulse_width: f64,
    pub pulse_direction: PulseDirection,
}

impl Default for InitSection {
    fn default() -> Self {
        Self {
            mode: InitMode::Zero,
            b: 0.01,
            omega_prime: None,
            omega_lab: None,
            eta: 0.0,
            xi: 0.0,
            phi: 0.0,
            direction: Direction::Forward,
            pulse_amplitude: 0.01,
            pulse_center: 0.0,
            pulse_width: 0.1,
            pulse_direction: PulseDirection::Right,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NumericsSection {
    /// Explicit step; when absent the largest step within cfl that lands on
    /// t_end is used.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    pub cfl: f64,
    /// Analytic seeds default to one group period.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    pub kernel_width: u8,
    pub scheme: Scheme,
    pub probe: ProbeDerivatives,
    pub coupling: Coupling,
    pub output_stride: usize,
    pub instability_factor: f64,
}

impl Default for NumericsSection {
    fn default() -> Self {
        Self {
            dt: None,
            cfl: masslet::solver::DEFAULT_CFL,
            t_end: None,
            kernel_width: 1,
            scheme: Scheme::default(),
            probe: ProbeDerivatives::default(),
            coupling: Coupling::default(),
            output_stride: 100,
            instability_factor: masslet::solver::DEFAULT_INSTABILITY_FACTOR,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    #[default]
    None,
    Harmonic,
    CosineLattice,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PotentialSection {
    pub profile: Profile,
    pub amplitude: f64,
    pub center: f64,
    /// Lattice period, cosine_lattice only.
    pub period: f64,
}

impl Default for PotentialSection {
    fn default() -> Self {
        Self { profile: Profile::None, amplitude: 0.0, center: 0.0, period: 1.0 }
    }
}

impl PotentialSection {
    fn potential(&self) -> Potential {
        match self.profile {
            Profile::None => Potential::None,
            Profile::Harmonic => Potential::Harmonic { amplitude: self.amplitude, center: self.center },
            Profile::CosineLattice => {
                Potential::CosineLattice { amplitude: self.amplitude, period: self.period, center: self.center }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub directory: Option<String>,
    /// Approximate number of snapshots; overrides numerics.output_stride.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snapshots: Option<usize>,
}

pub const SEEDS: [&str; 4] = ["bradyon_fig2", "tachyon_fig3", "conservation", "surfer"];

/// Preset tables for `--seed-scenario`; they mirror the validation scenarios.
pub fn seed(name: &str) -> Result<Table> {
    let text = match name {
        "bradyon_fig2" | "dispersion" | "convergence" => {
            r#"
            [particle]
            mass = 1.0
            x_init = 0.1
            speed = 0.1
            [init]
            mode = "analytic_bradyon"
            b = 0.01
            omega_lab = 0.6283185307179586
            [numerics]
            kernel_width = 3
            probe = "conservative"
            "#
        }
        "tachyon_fig3" => {
            r#"
            [particle]
            mass = 1.0
            x_init = 0.0
            speed = 10.0
            [init]
            mode = "analytic_tachyon"
            b = 0.0001
            omega_lab = 6.283185307179586
            "#
        }
        "conservation" => {
            r#"
            [string]
            length = 4.0
            bc = "fixed_ends"
            [particle]
            mass = 1.0
            omega_p = 6.283185307179586
            x_init = 2.0
            [init]
            mode = "pulse"
            pulse_amplitude = 0.01
            pulse_center = 1.0
            pulse_width = 0.1
            pulse_direction = "right"
            [numerics]
            t_end = 1.8
            kernel_width = 3
            probe = "conservative"
            "#
        }
        "surfer" => {
            r#"
            [string]
            length = 1.0
            nodes = 1024
            [particle]
            speed = 0.5
            x_init = 0.5
            [init]
            mode = "surfer"
            b = 0.001
            omega_prime = 3.141592653589793
            [numerics]
            t_end = 1.0
            "#
        }
        _ => bail!("unknown seed scenario {name:?}; known: {}", SEEDS.join(", ")),
    };
    Ok(text.parse::<Table>().expect("seed presets are valid TOML"))
}

/// Overlay `top` onto `base`, section by section.
pub fn merge(base: &mut Table, top: Table) {
    for (k, v) in top {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(t)) => merge(b, t),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Parse a `key=value` override. The value is read as a TOML literal and
/// falls back to a bare string.
pub fn parse_override(spec: &str) -> Result<(String, Value)> {
    let (key, raw) = spec.split_once('=').ok_or_else(|| anyhow!("override {spec:?} is not of the form key=value"))?;
    let key = key.trim();
    if key.is_empty() {
        bail!("override {spec:?} has an empty key");
    }
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()));
    Ok((key.to_string(), value))
}

/// Set a dotted key such as `particle.speed`.
pub fn set_key(table: &mut Table, key: &str, value: Value) -> Result<()> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().expect("split yields at least one part");
    let mut cur = table;
    for p in parts {
        let entry = cur.entry(p.to_string()).or_insert_with(|| Value::Table(Table::new()));
        cur = entry.as_table_mut().ok_or_else(|| anyhow!("key {key:?}: {p:?} is not a section"))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

/// Command-line layers on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Layers<'a> {
    pub config: Option<&'a Path>,
    pub seed: Option<&'a str>,
    pub overrides: &'a [String],
    pub out: Option<&'a Path>,
}

impl Layers<'_> {
    pub fn table(&self) -> Result<Table> {
        let mut table = match self.seed {
            Some(name) => seed(name)?,
            None => Table::new(),
        };
        if let Some(path) = self.config {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let file: Table = text.parse().with_context(|| format!("parsing {}", path.display()))?;
            merge(&mut table, file);
        }
        for spec in self.overrides {
            let (k, v) = parse_override(spec)?;
            set_key(&mut table, &k, v)?;
        }
        if let Some(out) = self.out {
            set_key(&mut table, "output.directory", Value::String(out.display().to_string()))?;
        }
        Ok(table)
    }

    pub fn load(&self) -> Result<ConfigFile> {
        from_table(self.table()?)
    }
}

pub fn from_table(table: Table) -> Result<ConfigFile> {
    ConfigFile::deserialize(Value::Table(table)).map_err(|e| anyhow!("invalid configuration: {e}"))
}

#[cfg(test)]
pub fn parse(text: &str) -> Result<ConfigFile> {
    toml::from_str(text).map_err(|e| anyhow!("invalid configuration: {e}"))
}

impl ConfigFile {
    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("configuration serializes")
    }

    pub fn directory(&self) -> &str {
        self.output.directory.as_deref().unwrap_or("out")
    }
}

/// Everything a run needs, plus the configuration with all derived defaults
/// written back.
#[derive(Debug, Clone)]
pub struct Setup {
    pub file: ConfigFile,
    pub config: SimConfig,
    pub init: SimState,
    pub solution: Option<TransparencySolution>,
}

fn solution(file: &ConfigFile, params: &PhysicalParams) -> Result<Option<TransparencySolution>> {
    let (p, i) = (&file.particle, &file.init);
    let pulsation = || match (i.omega_prime, i.omega_lab) {
        (Some(w), None) => Ok((w, false)),
        (None, Some(w)) => Ok((w, true)),
        _ => Err(anyhow!("init needs exactly one of omega_prime and omega_lab")),
    };
    let sol = match i.mode {
        InitMode::AnalyticBradyon => match pulsation()? {
            (w, false) => make_bradyon(params, i.b, w, i.eta, i.xi, p.speed, p.x_init)?,
            (w, true) => make_bradyon_from_lab(params, i.b, w, i.eta, i.xi, p.speed, p.x_init)?,
        },
        InitMode::AnalyticTachyon => match pulsation()? {
            (w, false) => make_tachyon(params, i.b, w, i.eta, i.xi, p.speed, p.x_init)?,
            (w, true) => make_tachyon_from_lab(params, i.b, w, i.eta, i.xi, p.speed, p.x_init)?,
        },
        InitMode::Surfer => {
            let w = i.omega_prime.ok_or_else(|| anyhow!("surfer needs init.omega_prime (the clock pulsation)"))?;
            if i.omega_lab.is_some() {
                bail!("surfer takes init.omega_prime only");
            }
            let dir = match i.direction {
                Direction::Forward => SurferDirection::Forward,
                Direction::Backward => SurferDirection::Backward,
            };
            make_surfer(i.b, w, i.phi, p.speed, p.x_init, params.c(), dir)?
        }
        InitMode::Pulse | InitMode::Zero => return Ok(None),
    };
    Ok(Some(sol))
}

/// Resolve derived defaults and build the run. The returned `file` re-resolves
/// to the same setup.
pub fn resolve(file: &ConfigFile) -> Result<Setup> {
    let mut file = file.clone();
    let s = &file.string;
    let base = PhysicalParams::new(s.lambda, s.tension, file.particle.mass, 0.0)?;
    let sol = solution(&file, &base)?;
    let omega_p = match (file.particle.omega_p, &sol) {
        (Some(w), _) => w,
        (None, Some(sol)) => sol.clock_pulsation,
        (None, None) => 0.0,
    };
    file.particle.omega_p = Some(omega_p);
    if !(file.particle.detuning.is_finite() && file.particle.detuning >= 0.0) {
        bail!("particle.detuning must be finite and >= 0, got {}", file.particle.detuning);
    }
    let params = base.with_omega_p(omega_p * file.particle.detuning)?;

    let group = sol.as_ref().and_then(|sol| debroglie_quantities(sol, 1.0).ok());
    let length = match (file.string.length, &sol) {
        (Some(l), _) => l,
        (None, Some(sol)) => commensurate_length(sol)
            .or(group.map(|g| g.lambda_group))
            .filter(|l| l.is_finite())
            .ok_or_else(|| anyhow!("string.length is required for this initial condition"))?,
        (None, None) => bail!("string.length is required for {:?} initialization", file.init.mode),
    };
    file.string.length = Some(length);
    let t_end = match (file.numerics.t_end, group) {
        (Some(t), _) => t,
        (None, Some(g)) if g.t_group.is_finite() => g.t_group,
        _ => bail!("numerics.t_end is required for this initial condition"),
    };
    file.numerics.t_end = Some(t_end);

    let grid = Grid::new(length, file.string.nodes, file.string.bc)?;
    let n = &file.numerics;
    let mut config = SimConfig::new(params, grid, t_end, n.cfl)?
        .with_kernel(KernelWidth::new(n.kernel_width)?)
        .with_scheme(n.scheme)
        .with_probe(n.probe)
        .with_coupling(n.coupling)
        .with_potential(file.potential.potential());
    config.instability_factor = n.instability_factor;
    if let Some(dt) = n.dt {
        config.dt = dt;
    }
    config.output_stride = match file.output.snapshots {
        Some(0) => bail!("output.snapshots must be >= 1"),
        Some(k) => (config.steps() / k).max(1),
        None => n.output_stride,
    };
    file.numerics.output_stride = config.output_stride;
    config.validate()?;

    let (x, v) = (file.particle.x_init, file.particle.speed);
    let init = match (&sol, file.init.mode) {
        (Some(sol), _) => init_from_analytic(sol, &config)?,
        (None, InitMode::Pulse) => {
            let i = &file.init;
            let pulse = PulseSpec {
                amplitude: i.pulse_amplitude,
                center: i.pulse_center,
                width: i.pulse_width,
                direction: i.pulse_direction,
            };
            init_pulse(&config, &pulse, x, v)?
        }
        (None, _) => init_zero(&config, x, v)?,
    };
    Ok(Setup { file, config, init, solution: sol })
}
