//! End-to-end behaviour of the `masslet` binary.

use std::path::Path;
use std::process::{Command, Output};

fn masslet(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_masslet")).current_dir(dir).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn read(path: impl AsRef<Path>) -> String {
    std::fs::read_to_string(path.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", path.as_ref().display()))
}

const SMALL_BRADYON: [&str; 4] = ["--seed-scenario", "bradyon_fig2", "--override", "string.nodes=256"];

fn simulate(dir: &Path, out: &str, extra: &[&str]) -> Output {
    let mut args = vec!["simulate", "--out", out];
    args.extend(SMALL_BRADYON);
    args.extend(extra);
    masslet(dir, &args)
}

fn column(csv: &str, name: &str) -> Vec<f64> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let k = header.iter().position(|h| *h == name).unwrap();
    lines.map(|l| l.split(',').nth(k).unwrap().parse().unwrap()).collect()
}

#[test]
fn simulate_writes_all_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = simulate(tmp.path(), "run", &[]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let dir = tmp.path().join("run");
    for f in ["trajectory.csv", "snapshots.ndjson", "diagnostics.csv", "resolved_config.toml", "summary.json"] {
        assert!(dir.join(f).is_file(), "{f}");
    }
    let traj = read(dir.join("trajectory.csv"));
    assert!(traj.starts_with("t,x_p,vx_p,z_p,N,Ma"));
    // transparent bradyon: x_p affine in t
    let (t, x) = (column(&traj, "t"), column(&traj, "x_unwrapped"));
    let worst = t.iter().zip(&x).map(|(t, x)| (x - (0.1 + 0.1 * t)).abs()).fold(0.0, f64::max);
    assert!(worst < 1e-3, "{worst}");
    let first: serde_json::Value = serde_json::from_str(read(dir.join("snapshots.ndjson")).lines().next().unwrap()).unwrap();
    assert_eq!(first["u"].as_array().unwrap().len(), 256);
}

#[test]
fn resolved_config_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&simulate(tmp.path(), "a", &[])), 0);
    let resolved = tmp.path().join("a/resolved_config.toml");
    let out = masslet(tmp.path(), &["simulate", "--config", resolved.to_str().unwrap(), "--out", "b"]);
    assert_eq!(code(&out), 0);
    let strip = |s: String| s.lines().filter(|l| !l.starts_with("directory")).collect::<Vec<_>>().join("\n");
    assert_eq!(strip(read(tmp.path().join("a/resolved_config.toml"))), strip(read(tmp.path().join("b/resolved_config.toml"))));
    assert_eq!(read(tmp.path().join("a/trajectory.csv")), read(tmp.path().join("b/trajectory.csv")));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let extra = ["--override", "particle.detuning=2"];
    assert_eq!(code(&simulate(tmp.path(), "a", &extra)), 0);
    assert_eq!(code(&simulate(tmp.path(), "b", &extra)), 0);
    for f in ["trajectory.csv", "diagnostics.csv", "snapshots.ndjson"] {
        assert_eq!(std::fs::read(tmp.path().join("a").join(f)).unwrap(), std::fs::read(tmp.path().join("b").join(f)).unwrap());
    }
}

#[test]
fn detuned_run_shows_a_normal_force_and_succeeds() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&simulate(tmp.path(), "m", &[])), 0);
    assert_eq!(code(&simulate(tmp.path(), "d", &["--override", "particle.detuning=0.5"])), 0);
    let max_n = |d: &str| column(&read(tmp.path().join(d).join("trajectory.csv")), "N").iter().fold(0.0f64, |a, n| a.max(n.abs()));
    assert!(max_n("d") > 100.0 * max_n("m"));
}

#[test]
fn zero_init_gives_zero_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let args = [
        "simulate", "--out", "z", "--override", "string.length=1", "--override", "string.nodes=64", "--override",
        "numerics.t_end=0.5", "--override", "particle.omega_p=3", "--override", "particle.x_init=0.5",
    ];
    assert_eq!(code(&masslet(tmp.path(), &args)), 0);
    let traj = read(tmp.path().join("z/trajectory.csv"));
    for name in ["vx_p", "z_p", "N"] {
        assert!(column(&traj, name).iter().all(|v| *v == 0.0), "{name}");
    }
    for line in read(tmp.path().join("z/snapshots.ndjson")).lines() {
        let rec: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(rec["u"].as_array().unwrap().iter().chain(rec["v"].as_array().unwrap()).all(|v| v.as_f64() == Some(0.0)));
    }
}

#[test]
fn single_point_sweep_matches_simulate() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&simulate(tmp.path(), "sim", &["--override", "particle.speed=0.2"])), 0);
    let mut args = vec!["sweep", "--out", "sw", "--axis", "particle.speed=0.2"];
    args.extend(SMALL_BRADYON);
    assert_eq!(code(&masslet(tmp.path(), &args)), 0);
    for f in ["trajectory.csv", "diagnostics.csv", "snapshots.ndjson", "summary.json"] {
        assert_eq!(read(tmp.path().join("sim").join(f)), read(tmp.path().join("sw/point_0000").join(f)), "{f}");
    }
    let index = read(tmp.path().join("sw/index.csv"));
    assert!(index.starts_with("point,particle.speed,status,max_abs_N"));
    assert_eq!(index.lines().count(), 2);
}

#[test]
fn detuning_sweep_is_best_when_matched() {
    let tmp = tempfile::tempdir().unwrap();
    let mut args = vec!["sweep", "--out", "sw", "--axis", "particle.detuning=0.5,1.0,2.0"];
    args.extend(SMALL_BRADYON);
    assert_eq!(code(&masslet(tmp.path(), &args)), 0);
    let index = read(tmp.path().join("sw/index.csv"));
    let names: Vec<&str> = index.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(names, ["point_0000", "point_0001", "point_0002"]);
    let r = column(&index, "normal_force_residual");
    assert!(r[1] < r[0] && r[1] < r[2], "{r:?}");
}

#[test]
fn unknown_keys_fail_before_anything_is_written() {
    let tmp = tempfile::tempdir().unwrap();
    let out = simulate(tmp.path(), "bad", &["--override", "particle.mas=2"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("mas"));
    assert!(!tmp.path().join("bad").exists());
    let mut args = vec!["sweep", "--out", "sw", "--axis", "particle.spede=0.1,0.2"];
    args.extend(SMALL_BRADYON);
    assert_eq!(code(&masslet(tmp.path(), &args)), 2);
    assert!(!tmp.path().join("sw").exists());
}

#[test]
fn cfl_violation_is_refused() {
    let tmp = tempfile::tempdir().unwrap();
    let out = simulate(tmp.path(), "cfl", &["--override", "numerics.dt=1.0"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("CFL"));
    assert!(!tmp.path().join("cfl").exists());
}

#[test]
fn instability_keeps_partial_outputs() {
    // a supersonic bead with the conservative probe on a fine grid blows up
    let tmp = tempfile::tempdir().unwrap();
    let args = [
        "simulate", "--out", "u", "--seed-scenario", "tachyon_fig3", "--override", "string.nodes=2048", "--override",
        "numerics.kernel_width=3", "--override", "numerics.probe=conservative",
    ];
    assert_eq!(code(&masslet(tmp.path(), &args)), 3);
    let summary: serde_json::Value = serde_json::from_str(&read(tmp.path().join("u/summary.json"))).unwrap();
    assert_eq!(summary["status"], "unstable");
    assert!(summary["energy_drift"].as_f64().unwrap() > 1.0);
    let t = column(&read(tmp.path().join("u/trajectory.csv")), "t");
    assert!(t.len() > 1 && *t.last().unwrap() < 0.1);
}

#[test]
fn validate_reports_pass_and_fail() {
    let tmp = tempfile::tempdir().unwrap();
    let ok = masslet(tmp.path(), &["validate", "dispersion", "--out", "v"]);
    assert_eq!(code(&ok), 0);
    assert!(String::from_utf8_lossy(&ok.stdout).contains("PASS"));
    let json: serde_json::Value = serde_json::from_str(&read(tmp.path().join("v/validation.json"))).unwrap();
    assert_eq!(json["passed"], true);

    let coarse = masslet(tmp.path(), &["validate", "bradyon_fig2", "--nodes", "32", "--json"]);
    assert_eq!(code(&coarse), 1);
    let json: serde_json::Value = serde_json::from_slice(&coarse.stdout).unwrap();
    let failed: Vec<_> = json["rows"].as_array().unwrap().iter().filter(|r| r["passed"] == false).collect();
    assert!(!failed.is_empty());
    assert!(failed.iter().all(|r| r["value"].as_f64().unwrap() > r["threshold"].as_f64().unwrap()));

    assert_eq!(code(&masslet(tmp.path(), &["validate", "nope"])), 2);
    assert_eq!(code(&masslet(tmp.path(), &["validate"])), 2);
    assert_eq!(code(&masslet(tmp.path(), &["validate", "--seed-scenario", "dispersion"])), 0);
}

#[test]
fn analytic_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let args = ["analytic", "--seed-scenario", "tachyon_fig3", "--times", "0,0.08", "--positions", "0:1:11", "--out", "a"];
    assert_eq!(code(&masslet(tmp.path(), &args)), 0);
    let field = read(tmp.path().join("a/field.csv"));
    assert!(field.starts_with("t,x,u,S,Phi,carrier,envelope\n"));
    assert_eq!(field.lines().count(), 23);
    let constants = read(tmp.path().join("a/constants.csv"));
    assert!(constants.contains("lambda_phase,0.1\n") && constants.contains("lambda_group,1\n"));

    // a bead at rest: the envelope does not move
    let args = [
        "analytic", "--seed-scenario", "bradyon_fig2", "--override", "particle.speed=0", "--override",
        "numerics.t_end=1", "--override", "string.length=100", "--times", "0,3.5", "--positions", "0:10:21", "--out", "r",
    ];
    let out = masslet(tmp.path(), &args);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let env = column(&read(tmp.path().join("r/field.csv")), "envelope");
    let (a, b) = env.split_at(21);
    assert!(a.iter().zip(b).all(|(p, q)| (p - q).abs() < 1e-15));

    let out = masslet(tmp.path(), &["analytic", "--seed-scenario", "conservation", "--out", "p"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn convergence_writes_orders() {
    let tmp = tempfile::tempdir().unwrap();
    let mut args = vec!["convergence", "--levels", "3", "--out", "c"];
    args.extend(SMALL_BRADYON);
    assert_eq!(code(&masslet(tmp.path(), &args)), 0);
    let json: serde_json::Value = serde_json::from_str(&read(tmp.path().join("c/convergence.json"))).unwrap();
    assert!(json["spatial"]["order"].as_f64().unwrap() > 1.8);
    assert!((json["temporal"]["order"].as_f64().unwrap() - 4.0).abs() < 0.3);
}
