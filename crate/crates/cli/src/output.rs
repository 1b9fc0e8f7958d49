//! File writers. Every float is printed in its shortest round-trip form.

use anyhow::{Context, Result};
use masslet::diagnostics::DiagnosticsRecord;
use masslet::solver::{Snapshot, TrajectorySample};
use serde::Serialize;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

/// Shortest representation that reads back to the same double; exponent
/// notation for very small or very large magnitudes.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || !x.is_finite() || (1e-3..1e16).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

pub fn write_table(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush().with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn write_trajectory(path: &Path, samples: &[TrajectorySample]) -> Result<()> {
    let header = ["t", "x_p", "vx_p", "z_p", "N", "Ma", "x_unwrapped"];
    let rows = samples
        .iter()
        .map(|s| [s.t, s.x_p, s.vx_p, s.z_p, s.normal_force, s.mach, s.x_unwrapped].map(num).to_vec());
    write_table(path, &header, rows)
}

pub fn write_diagnostics(path: &Path, records: &[DiagnosticsRecord]) -> Result<()> {
    let header = [
        "t",
        "N",
        "E_field",
        "E_kin",
        "E_clock",
        "E_potential",
        "E_total",
        "P_field",
        "P_particle",
        "P_total",
        "Ma",
        "constraint_residual",
        "phase_lock_error",
        "supersonic",
    ];
    let rows = records.iter().map(|r| {
        let mut row = [
            r.t,
            r.normal_force,
            r.e_field,
            r.e_kin,
            r.e_clock,
            r.e_potential,
            r.e_total,
            r.p_field,
            r.p_particle,
            r.p_total,
            r.mach,
            r.constraint_residual,
        ]
        .map(num)
        .to_vec();
        row.push(r.phase_lock_error.map(num).unwrap_or_default());
        row.push(r.supersonic().to_string());
        row
    });
    write_table(path, &header, rows)
}

#[derive(Serialize)]
struct SnapshotRecord<'a> {
    t: f64,
    u: &'a [f64],
    v: &'a [f64],
}

pub fn write_snapshots(path: &Path, snapshots: &[Snapshot]) -> Result<()> {
    let mut w = create(path)?;
    for s in snapshots {
        serde_json::to_writer(&mut w, &SnapshotRecord { t: s.t, u: &s.u, v: &s.v })?;
        w.write_all(b"\n")?;
    }
    w.flush().with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush().with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}
