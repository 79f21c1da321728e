use std::path::Path;
use std::process::{Command, Output};

use arrayrecoil_cli::manifest::{Manifest, Status};
use serde_json::{json, Value};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_arrayrecoil"))
}

fn run(sub: &str, dir: &Path, config: &Value) -> Output {
    let cfg = dir.join("config.json");
    std::fs::write(&cfg, serde_json::to_string_pretty(config).unwrap()).unwrap();
    bin().arg(sub).arg("--config").arg(&cfg).arg("--out").arg(dir.join("out")).output().unwrap()
}

fn manifest(dir: &Path) -> Manifest {
    Manifest::read(&dir.join("out")).unwrap().expect("manifest present")
}

fn small_array(n: usize) -> Value {
    json!({ "kind": "array", "nx": n, "ny": n, "spacing": 0.5 })
}

#[test]
fn empty_geometry_is_a_schema_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run("eigenmodes", dir.path(), &json!({ "geometry": { "kind": "array", "nx": 0, "ny": 3, "spacing": 0.5 } }));
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["kind"], "schema");
    let m = manifest(dir.path());
    assert_eq!(m.status, Status::Error);
    assert_eq!(m.error.unwrap().exit_code, 2);
}

#[test]
fn malformed_json_is_a_schema_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("config.json");
    std::fs::write(&cfg, "{ \"geometry\": ").unwrap();
    let out = bin().arg("decay").arg("--config").arg(&cfg).arg("--out").arg(dir.path().join("out")).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_config_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .arg("eigenmodes")
        .arg("--config")
        .arg(dir.path().join("absent.json"))
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn eigenmodes_table_and_manifest_hashes() {
    let dir = tempfile::tempdir().unwrap();
    let out = run("eigenmodes", dir.path(), &json!({ "geometry": small_array(3) }));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = std::fs::read_to_string(dir.path().join("out/modes.csv")).unwrap();
    let rows: Vec<&str> = table.lines().collect();
    assert_eq!(rows[0], "mode,gamma,shift,kinetic_z,kinetic_z_law");
    assert_eq!(rows.len(), 10);
    let gamma_sum: f64 = rows[1..].iter().map(|r| r.split(',').nth(1).unwrap().parse::<f64>().unwrap()).sum();
    assert!((gamma_sum - 9.0).abs() < 1e-8);
    let m = manifest(dir.path());
    assert_eq!(m.status, Status::Ok);
    for f in &m.files {
        let data = std::fs::read(dir.path().join("out").join(&f.path)).unwrap();
        assert_eq!(arrayrecoil_cli::manifest::sha256_hex(&data), f.sha256);
    }
}

#[test]
fn single_atom_decay_deposits_one_recoil() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = json!({
        "geometry": small_array(1),
        "decay": { "initial": { "kind": "atom", "index": 0 } },
    });
    let out = run("decay", dir.path(), &cfg);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = std::fs::read_to_string(dir.path().join("out/recoil.csv")).unwrap();
    let row: Vec<f64> = table.lines().nth(1).unwrap().split(',').skip(4).map(|t| t.parse().unwrap()).collect();
    assert!((row[9] - 1.0).abs() < 1e-3, "total {}", row[9]);
    assert!((row[8] - 0.4).abs() < 1e-3, "z {}", row[8]);
}

#[test]
fn runs_are_byte_identical() {
    let cfg = json!({
        "geometry": small_array(2),
        "drive": { "rabi": 0.02, "profile": { "kind": "gaussian", "width": 2.0 } },
        "numerics": { "dt": 0.02, "epsilon_decay": 1e-8, "max_time": 200.0 },
    });
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let out = run("pulse", d.path(), &cfg);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for name in ["recoil.csv", "excitation_heatmap.json", "summary.json"] {
        let x = std::fs::read(a.path().join("out").join(name)).unwrap();
        let y = std::fs::read(b.path().join("out").join(name)).unwrap();
        assert_eq!(x, y, "{name}");
    }
    let summary: Value = serde_json::from_slice(&std::fs::read(a.path().join("out/summary.json")).unwrap()).unwrap();
    assert!((summary["corner_over_max_kinetic_z"].as_f64().unwrap() - 1.0).abs() < 1e-9);
}

#[test]
fn steady_reports_reflectance() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = json!({
        "geometry": small_array(3),
        "drive": { "rabi": 0.01, "profile": { "kind": "cw" } },
    });
    let out = run("steady", dir.path(), &cfg);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: Value = serde_json::from_slice(&std::fs::read(dir.path().join("out/summary.json")).unwrap()).unwrap();
    let r = summary["reflectance"].as_f64().unwrap();
    assert!(r > 0.0 && r < 1.5, "{r}");
}

fn detuning_sweep(points: usize) -> Value {
    json!({
        "geometry": small_array(2),
        "drive": { "rabi": 0.01, "profile": { "kind": "cw" } },
        "sweep": {
            "axes": [{ "parameter": "detuning", "start": -1.0, "stop": 1.0, "points": points }],
            "quantity": "mode_weights",
        },
    })
}

#[test]
fn sweep_resumes_from_completed_points() {
    let full = tempfile::tempdir().unwrap();
    let out = run("sweep", full.path(), &detuning_sweep(5));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let reference = std::fs::read_to_string(full.path().join("out/sweep.csv")).unwrap();
    assert_eq!(manifest(full.path()).completed_points, vec![0, 1, 2, 3, 4]);

    // Simulate an interruption after two points, with a half-written third.
    let part = tempfile::tempdir().unwrap();
    std::fs::create_dir_all(part.path().join("out")).unwrap();
    let keep: Vec<&str> = reference.lines().filter(|l| l.starts_with("point") || l.starts_with("0,") || l.starts_with("1,")).collect();
    let mut text = keep.join("\n") + "\n";
    text.push_str("2,0.0,weight,0,garbage\n");
    std::fs::write(part.path().join("out/sweep.csv"), text).unwrap();
    let mut m = manifest(full.path());
    m.status = Status::Running;
    m.completed_points = vec![0, 1];
    m.files.clear();
    m.write(&part.path().join("out")).unwrap();

    let out = run("sweep", part.path(), &detuning_sweep(5));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read_to_string(part.path().join("out/sweep.csv")).unwrap(), reference);
    assert_eq!(manifest(part.path()).completed_points, vec![0, 1, 2, 3, 4]);
}

#[test]
fn changed_config_starts_sweep_over() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run("sweep", dir.path(), &detuning_sweep(3)).status.success());
    assert!(run("sweep", dir.path(), &detuning_sweep(4)).status.success());
    let text = std::fs::read_to_string(dir.path().join("out/sweep.csv")).unwrap();
    let points: std::collections::BTreeSet<&str> = text.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(points.len(), 4);
}

#[test]
fn single_point_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let out = run("sweep", dir.path(), &detuning_sweep(1));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("out/sweep.csv")).unwrap();
    assert_eq!(text.lines().count(), 1 + 3 * 4);
}

#[test]
fn two_axis_sweep_covers_the_grid() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = json!({
        "geometry": small_array(2),
        "drive": { "rabi": 0.01, "profile": { "kind": "cw" } },
        "sweep": {
            "axes": [
                { "parameter": "spacing", "values": [0.4, 0.6] },
                { "parameter": "detuning", "values": [-0.5, 0.0, 0.5] },
            ],
            "quantity": "steady",
        },
    });
    let out = run("sweep", dir.path(), &cfg);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("out/sweep.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), "point,spacing,detuning,quantity,index,value");
    assert_eq!(text.lines().count(), 1 + 6 * 2);
}

#[test]
fn validate_and_schema() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, serde_json::to_string(&json!({ "experiment": "eigenmodes", "geometry": small_array(2) })).unwrap()).unwrap();
    let out = bin().arg("validate").arg("--config").arg(&cfg).output().unwrap();
    assert!(out.status.success());
    let out = bin().arg("validate").arg("--config").arg(&cfg).args(["--experiment", "pulse"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = bin().args(["validate", "--schema"]).output().unwrap();
    let schema: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(schema.get("properties").is_some());
}

#[test]
fn small_cavity_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = json!({
        "geometry": { "kind": "cavity", "nx": 3, "ny": 3, "spacing": 0.8, "separation": 2.0, "curvature": { "kind": "flat" } },
    });
    let out = run("cavity", dir.path(), &cfg);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: Value = serde_json::from_slice(&std::fs::read(dir.path().join("out/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["atoms"], 18);
    assert!(summary["most_subradiant"]["gamma"].as_f64().unwrap() < 1.0);
}
