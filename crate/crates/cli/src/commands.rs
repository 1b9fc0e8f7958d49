//! The five subcommands. Each returns the process exit code.

use crate::config::{self, resolve, ConfigFile, Setup};
use crate::output::{num, write_diagnostics, write_json, write_snapshots, write_table, write_text, write_trajectory};
use anyhow::{bail, Context, Result};
use masslet::analytic::{debroglie_quantities, dispersion_residual, eval_field, velocities, TransparencySolution};
use masslet::diagnostics::{
    conservation_drift, phase_lock_error, spatial_convergence, temporal_convergence, trajectory_error,
    transparency_residual_for, OrderFit, TrajectoryMetric,
};
use masslet::scenarios::{self, ValidationRow, SCENARIOS};
use masslet::solver::{run_with_reference, RunOutput, RunStatus};
use rayon::prelude::*;
use serde::Serialize;
use std::path::{Path, PathBuf};
use toml::Value;

pub const EXIT_OK: u8 = 0;
pub const EXIT_FAILED: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_UNSTABLE: u8 = 3;

/// Upper bound on the number of points in one sweep.
pub const MAX_SWEEP_POINTS: usize = 10_000;

fn prepare_dir(file: &ConfigFile) -> Result<PathBuf> {
    let dir = PathBuf::from(file.directory());
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    write_text(&dir.join("resolved_config.toml"), &file.to_toml())?;
    Ok(dir)
}

fn require_solution(setup: &Setup) -> Result<&TransparencySolution> {
    setup.solution.as_ref().ok_or_else(|| {
        anyhow::anyhow!("init.mode {:?} has no closed-form field; use an analytic or surfer mode", setup.file.init.mode)
    })
}

/// Tabulate the closed-form field at `times` and `positions` (defaults to the
/// grid nodes).
pub fn analytic(setup: &Setup, times: &[f64], positions: Option<&[f64]>) -> Result<u8> {
    let sol = require_solution(setup)?;
    let grid = &setup.config.grid;
    let xs: Vec<f64> = match positions {
        Some(p) => p.to_vec(),
        None => (0..grid.nodes()).map(|j| grid.x(j)).collect(),
    };
    let dir = prepare_dir(&setup.file)?;
    let (carrier, envelope) = (sol.carrier_phase(), sol.envelope_phase());
    let rows = times.iter().flat_map(|&t| {
        xs.iter().map(move |&x| {
            let (s, phi) = (carrier.at(t, x), envelope.at(t, x));
            [t, x, eval_field(sol, t, x), s, phi, sol.b * s.cos(), sol.b * phi.cos()].map(num).to_vec()
        })
    });
    write_table(&dir.join("field.csv"), &["t", "x", "u", "S", "Phi", "carrier", "envelope"], rows)?;

    let mut constants = vec![
        ("regime", format!("{:?}", sol.regime).to_lowercase()),
        ("b", num(sol.b)),
        ("omega_prime", num(sol.omega_prime)),
        ("omega", num(sol.omega_lab)),
        ("k", num(sol.k_lab)),
        ("gamma", num(sol.gamma)),
        ("amplitude", num(sol.amplitude)),
        ("phi", num(sol.phi)),
        ("clock_pulsation", num(sol.clock_pulsation)),
        ("speed", num(sol.speed)),
        ("x_init", num(sol.x_init)),
        ("c", num(sol.c)),
    ];
    if let Ok((vp, vg)) = velocities(sol) {
        constants.extend([("v_phase", num(vp)), ("v_group", num(vg))]);
    }
    if let Ok(db) = debroglie_quantities(sol, 1.0) {
        constants.extend([
            ("lambda_phase", num(db.lambda_phase)),
            ("t_phase", num(db.t_phase)),
            ("lambda_group", num(db.lambda_group)),
            ("t_group", num(db.t_group)),
        ]);
    }
    if let Ok(r) = dispersion_residual(sol) {
        constants.push(("dispersion_residual", num(r)));
    }
    let rows = constants.into_iter().map(|(k, v)| vec![k.to_string(), v]);
    write_table(&dir.join("constants.csv"), &["quantity", "value"], rows)?;
    Ok(EXIT_OK)
}

/// Per-run metrics, written as summary.json and used for sweep indices.
#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub status: &'static str,
    pub message: Option<String>,
    pub t_final: f64,
    pub steps: usize,
    pub max_abs_normal_force: f64,
    /// max |N| / (m ω_p² A) against the seeding solution.
    pub normal_force_residual: Option<f64>,
    pub trajectory_error: Option<f64>,
    pub phase_lock_error: Option<f64>,
    pub energy_drift: f64,
    pub momentum_drift: f64,
    pub supersonic: bool,
}

impl Summary {
    fn new(out: &RunOutput, sol: Option<&TransparencySolution>) -> Self {
        let (status, message) = match &out.status {
            RunStatus::Completed => ("completed", None),
            RunStatus::Unstable { t, energy_ratio } => {
                ("unstable", Some(format!("energy grew by {energy_ratio} at t = {t}")))
            }
            RunStatus::Aborted { error, .. } => ("aborted", Some(error.to_string())),
        };
        let drift = conservation_drift(out);
        Self {
            status,
            message,
            t_final: out.final_state.t,
            steps: out.config.steps(),
            max_abs_normal_force: out.trajectory.iter().map(|s| s.normal_force.abs()).fold(0.0, f64::max),
            normal_force_residual: sol.map(|s| transparency_residual_for(out, s).max_abs_n_normalized),
            trajectory_error: sol.map(|s| trajectory_error(out, s)),
            phase_lock_error: sol.and_then(|s| phase_lock_error(out, s).ok()),
            energy_drift: drift.energy,
            momentum_drift: drift.momentum,
            supersonic: out.diagnostics.iter().any(|r| r.supersonic()),
        }
    }

    pub fn exit_code(&self) -> u8 {
        if self.status == "completed" {
            EXIT_OK
        } else {
            EXIT_UNSTABLE
        }
    }
}

/// Run one setup and write its output directory. Outputs are written even
/// when the run stops early.
pub fn simulate_into(setup: &Setup, dir: &Path) -> Result<Summary> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    write_text(&dir.join("resolved_config.toml"), &setup.file.to_toml())?;
    let out = run_with_reference(&setup.config, &setup.init, setup.solution.as_ref())?;
    write_trajectory(&dir.join("trajectory.csv"), &out.trajectory)?;
    write_snapshots(&dir.join("snapshots.ndjson"), &out.snapshots)?;
    write_diagnostics(&dir.join("diagnostics.csv"), &out.diagnostics)?;
    let summary = Summary::new(&out, setup.solution.as_ref());
    write_json(&dir.join("summary.json"), &summary)?;
    Ok(summary)
}

pub fn simulate(setup: &Setup) -> Result<u8> {
    let dir = PathBuf::from(setup.file.directory());
    let summary = simulate_into(setup, &dir)?;
    println!(
        "{}: t = {}, max |N| = {}, energy drift {}, momentum drift {} -> {}",
        summary.status,
        num(summary.t_final),
        num(summary.max_abs_normal_force),
        num(summary.energy_drift),
        num(summary.momentum_drift),
        dir.display()
    );
    if let Some(m) = &summary.message {
        eprintln!("{m}");
    }
    Ok(summary.exit_code())
}

#[derive(Serialize)]
struct ValidationSummary<'a> {
    passed: bool,
    rows: &'a [ValidationRow],
}

fn print_table(rows: &[ValidationRow]) {
    let w0 = rows.iter().map(|r| r.scenario.len()).max().unwrap_or(0).max(8);
    let w1 = rows.iter().map(|r| r.metric.len()).max().unwrap_or(0).max(6);
    println!("{:w0$}  {:w1$}  {:>12}  {:>10}  result", "scenario", "metric", "value", "threshold");
    for r in rows {
        println!(
            "{:w0$}  {:w1$}  {:>12.4e}  {:>10.1e}  {}",
            r.scenario,
            r.metric,
            r.value,
            r.threshold,
            if r.passed { "PASS" } else { "FAIL" }
        );
    }
}

/// Run named validation scenarios (or `all`) and report a pass/fail table.
pub fn validate(name: &str, nodes: Option<usize>, json: bool, out: Option<&Path>) -> Result<u8> {
    let names: Vec<&str> = match name {
        "all" => SCENARIOS.to_vec(),
        n if SCENARIOS.contains(&n) => vec![n],
        n => bail!("unknown scenario {n:?}; known: {}, all", SCENARIOS.join(", ")),
    };
    let mut rows = Vec::new();
    for n in names {
        rows.extend(scenarios::validate(n, nodes)?);
    }
    let passed = rows.iter().all(|r| r.passed);
    let summary = ValidationSummary { passed, rows: &rows };
    if json {
        println!("{}", serde_json::to_string_pretty(&summary)?);
    } else {
        print_table(&rows);
        println!("{}", if passed { "all checks pass" } else { "some checks FAIL" });
    }
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        write_json(&dir.join("validation.json"), &summary)?;
        let table = rows.iter().map(|r| {
            vec![r.scenario.clone(), r.metric.clone(), num(r.value), num(r.threshold), r.passed.to_string()]
        });
        write_table(&dir.join("validation.csv"), &["scenario", "metric", "value", "threshold", "passed"], table)?;
    }
    Ok(if passed { EXIT_OK } else { EXIT_FAILED })
}

#[derive(Serialize)]
struct ConvergenceSummary<'a> {
    spatial: Option<&'a OrderFit>,
    temporal: &'a OrderFit,
}

/// Spatial study against the closed form (analytic modes only) and temporal
/// self-convergence of the configured run.
pub fn convergence(setup: &Setup, levels: usize) -> Result<u8> {
    if levels < 3 {
        bail!("a convergence study needs at least 3 levels, got {levels}");
    }
    let dir = prepare_dir(&setup.file)?;
    let spatial = match &setup.solution {
        Some(sol) => Some(spatial_convergence(&setup.config, sol, levels, TrajectoryMetric::Position)?),
        None => None,
    };
    let temporal = temporal_convergence(&setup.config, &setup.init, levels)?;
    let mut rows = Vec::new();
    for (study, fit) in [("spatial", spatial.as_ref()), ("temporal", Some(&temporal))] {
        let Some(fit) = fit else { continue };
        for (i, (h, e)) in fit.spacings.iter().zip(&fit.errors).enumerate() {
            let order = i.checked_sub(1).and_then(|k| fit.pairwise.get(k)).map(|p| num(*p)).unwrap_or_default();
            rows.push(vec![study.to_string(), i.to_string(), num(*h), num(*e), order]);
        }
        let order = fit.order.map_or("undetermined".to_string(), |p| format!("{p:.3}"));
        println!("{study}: observed order {order}");
        if let Some(w) = &fit.warning {
            eprintln!("{study}: {w}");
        }
    }
    write_table(&dir.join("convergence.csv"), &["study", "level", "spacing", "error", "pairwise_order"], rows)?;
    write_json(&dir.join("convergence.json"), &ConvergenceSummary { spatial: spatial.as_ref(), temporal: &temporal })?;
    Ok(EXIT_OK)
}

/// One sweep axis: a dotted config key and its values.
#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub key: String,
    pub values: Vec<Value>,
}

/// `key=v1,v2,...` or `key=start:stop:count` (inclusive, evenly spaced).
pub fn parse_axis(spec: &str) -> Result<Axis> {
    let (key, raw) = spec.split_once('=').with_context(|| format!("axis {spec:?} is not of the form key=values"))?;
    let key = key.trim().to_string();
    let raw = raw.trim();
    let parts: Vec<&str> = raw.split(':').collect();
    let values = if parts.len() == 3 {
        let start: f64 = parts[0].trim().parse().with_context(|| format!("axis {key}: bad start"))?;
        let stop: f64 = parts[1].trim().parse().with_context(|| format!("axis {key}: bad stop"))?;
        let count: usize = parts[2].trim().parse().with_context(|| format!("axis {key}: bad count"))?;
        match count {
            0 => bail!("axis {key}: count must be >= 1"),
            1 => vec![Value::Float(start)],
            _ => (0..count)
                .map(|i| Value::Float(start + (stop - start) * i as f64 / (count - 1) as f64))
                .collect(),
        }
    } else {
        raw.split(',')
            .map(|v| {
                let (_, value) = config::parse_override(&format!("{key}={v}"))?;
                match value {
                    Value::Integer(_) | Value::Float(_) => Ok(value),
                    other => bail!("axis {key}: value {other} is not numeric"),
                }
            })
            .collect::<Result<_>>()?
    };
    if values.is_empty() {
        bail!("axis {key} has no values");
    }
    Ok(Axis { key, values })
}

fn value_text(v: &Value) -> String {
    match v {
        Value::Float(f) => num(*f),
        other => other.to_string(),
    }
}

/// Cartesian product of the axes over a template, the first axis varying
/// slowest. Every point is resolved before anything runs.
pub fn sweep(template: toml::Table, axes: &[Axis], out: &Path) -> Result<u8> {
    if axes.is_empty() {
        bail!("a sweep needs at least one --axis");
    }
    let total = axes.iter().try_fold(1usize, |acc, a| acc.checked_mul(a.values.len()));
    let total = match total {
        Some(n) if n <= MAX_SWEEP_POINTS => n,
        _ => bail!("sweep has more than {MAX_SWEEP_POINTS} points"),
    };
    let width = total.saturating_sub(1).to_string().len().max(4);
    let mut points = Vec::with_capacity(total);
    for index in 0..total {
        let mut rem = index;
        let mut picks = vec![0; axes.len()];
        for (k, a) in axes.iter().enumerate().rev() {
            picks[k] = rem % a.values.len();
            rem /= a.values.len();
        }
        let name = format!("point_{index:0width$}");
        let mut table = template.clone();
        for (a, &p) in axes.iter().zip(&picks) {
            config::set_key(&mut table, &a.key, a.values[p].clone())?;
        }
        let dir = out.join(&name);
        config::set_key(&mut table, "output.directory", Value::String(dir.display().to_string()))?;
        let file = config::from_table(table).with_context(|| name.clone())?;
        let setup = resolve(&file).with_context(|| name.clone())?;
        let values: Vec<String> = axes.iter().zip(&picks).map(|(a, &p)| value_text(&a.values[p])).collect();
        points.push((name, values, setup));
    }

    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let results: Vec<Result<Summary>> =
        points.par_iter().map(|(name, _, setup)| simulate_into(setup, &out.join(name))).collect();

    let mut header = vec!["point".to_string()];
    header.extend(axes.iter().map(|a| a.key.clone()));
    header.extend(
        ["status", "max_abs_N", "normal_force_residual", "energy_drift", "momentum_drift"].map(String::from),
    );
    let mut rows = Vec::with_capacity(total);
    let mut code = EXIT_OK;
    for ((name, values, _), result) in points.iter().zip(results) {
        let s = result?;
        code = code.max(s.exit_code());
        let mut row = vec![name.clone()];
        row.extend(values.iter().cloned());
        row.extend([
            s.status.to_string(),
            num(s.max_abs_normal_force),
            s.normal_force_residual.map(num).unwrap_or_default(),
            num(s.energy_drift),
            num(s.momentum_drift),
        ]);
        rows.push(row);
    }
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_table(&out.join("index.csv"), &header, rows)?;
    println!("{total} runs -> {}", out.join("index.csv").display());
    Ok(code)
}
