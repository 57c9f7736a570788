use std::path::Path;
use std::process::{Command, Output};

use evsample::io::{from_json, read_tradeoff_csv, to_json, DesignReport};
use evsample::lqg::design_lqg;
use evsample::plants::integrator_example;
use tempfile::TempDir;

const INTEGRATOR: &str = include_str!("../../../configs/integrator.toml");

/// The `[plant]` table of the shipped integrator config.
fn integrator_plant() -> &'static str {
    INTEGRATOR.split("[bound]").next().unwrap()
}

fn run(dir: &Path, config: &str, args: &[&str]) -> Output {
    let path = dir.join("run.toml");
    std::fs::write(&path, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_evsample"))
        .args(args)
        .arg("--config")
        .arg(&path)
        .arg("--out")
        .arg(dir.join("out"))
        .arg("--quiet")
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

#[test]
fn design_json_round_trips() {
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), integrator_plant(), &["design"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(dir.path().join("out/design.json")).unwrap();
    let report: DesignReport = from_json(&text).unwrap();
    assert_eq!(to_json(&report).unwrap() + "\n", text);
    let plant = integrator_example();
    let fresh = DesignReport::new(&plant, design_lqg(&plant).unwrap());
    assert!((report.gamma0 - fresh.gamma0).abs() <= 1e-12 * fresh.gamma0);
}

#[test]
fn unstabilizable_plant_exits_2() {
    let cfg = r#"
        [plant]
        A = [[1.0, 0.0], [0.0, 1.0]]
        B_w = [[1.0, 0.0], [0.0, 0.0]]
        B_u = [[1.0], [0.0]]
        C_z = [[1.0, 0.0], [0.0, 0.0]]
        D_zu = [[0.0], [1.0]]
        C_y = [[1.0, 1.0]]
        D_yw = [[0.0, 1.0]]
    "#;
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), cfg, &["design"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("stabilizable"));
}

#[test]
fn nonpositive_rho_exits_2() {
    let dir = TempDir::new().unwrap();
    let cfg = format!("{}\n[bound]\nrho = [1.0, 0.0]\n", integrator_plant());
    assert_eq!(code(&run(dir.path(), &cfg, &["bound"])), 2);
    let cfg = format!("{}\n[bound]\nrho = [-1.0]\n", integrator_plant());
    assert_eq!(code(&run(dir.path(), &cfg, &["bound"])), 2);
}

#[test]
fn missing_config_exits_1() {
    let out = Command::new(env!("CARGO_BIN_EXE_evsample")).arg("ratio").output().unwrap();
    assert_eq!(code(&out), 1);
    let out = Command::new(env!("CARGO_BIN_EXE_evsample"))
        .args(["ratio", "--config", "/nonexistent/run.toml"])
        .output()
        .unwrap();
    assert_eq!(code(&out), 1);
    let out = Command::new(env!("CARGO_BIN_EXE_evsample")).arg("frobnicate").output().unwrap();
    assert_eq!(code(&out), 1);
}

#[test]
fn ratio_reports_bounds() {
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), integrator_plant(), &["ratio"]);
    assert_eq!(code(&out), 0);
    let text = std::fs::read_to_string(dir.path().join("out/ratio.json")).unwrap();
    let v: std::collections::BTreeMap<String, json_view::Value> = from_json(&text).unwrap();
    assert_eq!(v["within_bounds"], json_view::Value::Bool(true));
    let ratio = match v["J_ratio"] {
        json_view::Value::Num(x) => x,
        _ => panic!("J_ratio is not a number"),
    };
    assert!((ratio - 2.6323).abs() < 1e-3);
}

/// Minimal untyped view of the ratio report.
mod json_view {
    use serde::Deserialize;

    #[derive(Debug, PartialEq, Deserialize)]
    #[serde(untagged)]
    pub enum Value {
        Bool(bool),
        Num(f64),
    }
}

#[test]
fn ratio_needs_integrator() {
    let cfg = r#"
        [reset_system]
        A = [[0.0, 1.0], [0.0, 0.0]]
        Q = [[1.0, 0.0], [0.0, 1.0]]
        R = [[1.0, 0.0], [0.0, 1.0]]
    "#;
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&run(dir.path(), cfg, &["ratio"])), 2);
}

#[test]
fn single_period_gives_one_row() {
    let cfg = format!(
        "{}\n[sim]\nhorizon = 20.0\nn_reps = 4\n\n[tradeoff]\nperiodic_h = [0.3]\n",
        integrator_plant()
    );
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), &cfg, &["tradeoff", "--seed", "7"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let rows = read_tradeoff_csv(std::fs::File::open(dir.path().join("out/tradeoff.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].scheme, "periodic");
    assert_eq!(rows[0].param, 0.3);
}

#[test]
fn reruns_are_byte_identical() {
    let cfg = format!(
        "{}\n[sim]\nhorizon = 20.0\nn_reps = 4\nseed = 3\n\n[tradeoff]\nperiodic_h = [0.1, 0.4]\nrho = [0.1, 1.0]\n",
        integrator_plant()
    );
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    assert_eq!(code(&run(a.path(), &cfg, &["tradeoff"])), 0);
    assert_eq!(code(&run(b.path(), &cfg, &["tradeoff"])), 0);
    let read = |d: &TempDir| std::fs::read(d.path().join("out/tradeoff.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_eq!(read_tradeoff_csv(read(&a).as_slice()).unwrap().len(), 4);
}

#[test]
fn grid_bound_writes_grid_and_boundary() {
    let cfg = r#"
        [reset_system]
        A = [[0.0, 1.0], [0.0, 0.0]]
        Q = [[1.0, 0.0], [0.0, 1.0]]
        R = [[1.0, 0.0], [0.0, 1.0]]

        [bound]
        J = [1.0]

        [grid]
        n_cells = [48, 48]
    "#;
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), cfg, &["bound"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let grid =
        evsample::io::read_grid_csv(std::fs::File::open(dir.path().join("out/grid_0.csv")).unwrap()).unwrap();
    assert_eq!(grid.spec.n_cells, [48, 48]);
    let poly =
        evsample::io::read_polyline_csv(std::fs::File::open(dir.path().join("out/boundary_0.csv")).unwrap())
            .unwrap();
    assert!(poly.len() > 10);
}

#[test]
fn too_small_domain_exits_4() {
    let cfg = r#"
        [reset_system]
        A = [[0.0, 1.0], [0.0, 0.0]]
        Q = [[1.0, 0.0], [0.0, 1.0]]
        R = [[1.0, 0.0], [0.0, 1.0]]

        [bound]
        J = [1.0]

        [grid]
        half_width = [0.3, 0.3]
        n_cells = [32, 32]
    "#;
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&run(dir.path(), cfg, &["bound"])), 4);
}
