use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const SECTION4: [&str; 10] = ["--a1", "0.3", "--m1", "1.6666666666666667", "--d1", "0.4", "--a2", "0.9", "--d2", "0.01"];

fn foodchain(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_foodchain")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn with_section4(extra: &[&str]) -> Vec<String> {
    let mut v: Vec<String> = extra[..1].iter().map(|s| s.to_string()).collect();
    v.extend(SECTION4.iter().map(|s| s.to_string()));
    v.extend(extra[1..].iter().map(|s| s.to_string()));
    v
}

fn run(args: &[String]) -> Output {
    foodchain(&args.iter().map(String::as_str).collect::<Vec<_>>())
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn classify_rounded_table_row() {
    let o = foodchain(&["classify", "--a1", "0.3", "--m1", "1.6667", "--d1", "0.4", "--a2", "0.9", "--d2", "0.01", "--m2", "0.042"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("case          II.2.b.iv"), "{}", stdout(&o));
}

#[test]
fn classify_json_carries_report_and_config() {
    let o = run(&with_section4(&["classify", "--m2", "0.033", "--format", "json"]));
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["result"]["label"], "II.2.b.iii");
    assert_eq!(v["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(v["config"]["params"]["m2"], 0.033);
    for key in ["known_result", "lambda1", "lambda2", "p_lambda1", "p_max", "hopf_threshold", "boundary_flags", "equilibria"] {
        assert!(v["result"].get(key).is_some(), "{key}");
    }
}

#[test]
fn break_even_above_one_is_case_one() {
    let o = foodchain(&["classify", "--a1", "1.0", "--m1", "0.5", "--d1", "0.3", "--a2", "0.5", "--d2", "0.1", "--m2", "0.5"]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    assert!(s.contains("case          I\n") && s.contains("Ex GAS"), "{s}");
    assert!(s.contains("lambda1       1.5\n"), "{s}");
}

#[test]
fn predator_that_cannot_grow_dies_out() {
    let o = foodchain(&["classify", "--a1", "0.3", "--m1", "0.3", "--d1", "0.4", "--a2", "0.9", "--d2", "0.01", "--m2", "0.042"]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    assert!(s.contains("case          I\n") && s.contains("y and z die out (m1 <= d1)"), "{s}");
    assert!(s.contains("lambda1       undefined"), "{s}");
}

#[test]
fn boundary_case_warns() {
    // lambda1 = 1 exactly
    let o = foodchain(&["classify", "--a1", "1", "--m1", "0.6", "--d1", "0.3", "--a2", "0.5", "--d2", "0.1", "--m2", "0.5"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stderr).contains("lambda1 = 1"));
}

#[test]
fn bad_input_exits_with_two() {
    let o = run(&with_section4(&["classify", "--m2", "-0.042"]));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("m2"));
    let o = foodchain(&["classify", "--a1", "0.3"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&with_section4(&["simulate", "--m2", "0.033", "--x0", "-0.5", "--y0", "0", "--z0", "0"]));
    assert_eq!(o.status.code(), Some(2));
    let o = run(&with_section4(&["classify", "--m2", "0.033", "--format", "both"]));
    assert_eq!(o.status.code(), Some(2));
    let o = foodchain(&["sweep", "--a1", "0.3"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn numerical_failure_exits_with_three() {
    let o = run(&with_section4(&[
        "simulate", "--m2", "0.033", "--x0", "0.5", "--y0", "0.1", "--z0", "0.1", "--max-step", "1e-30", "--t-end", "10",
        "--t-transient", "1",
    ]));
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn inline_flags_override_parameter_file() {
    let dir = tempfile::tempdir().unwrap();
    let params = dir.path().join("p.json");
    fs::write(&params, r#"{"a1": 0.3, "m1": 1.6666666666666667, "d1": 0.4, "a2": 0.9, "d2": 0.01, "m2": 0.033}"#).unwrap();
    let p = params.to_str().unwrap();
    let o = foodchain(&["classify", "--params", p]);
    assert!(stdout(&o).contains("II.2.b.iii"));
    let o = foodchain(&["classify", "--params", p, "--m2", "0.042"]);
    assert!(stdout(&o).contains("II.2.b.iv"));
}

#[test]
fn simulate_writes_trajectory_and_reruns_bit_for_bit() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let o = run(&with_section4(&[
        "simulate", "--m2", "0.033", "--x0", "0.5266", "--y0", "0.3913", "--z0", "0.8546", "--t-end", "400", "--t-transient",
        "200", "--out-dir", a.to_str().unwrap(),
    ]));
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = read_json(&a.join("verdict.json"));
    assert_eq!(v["result"]["verdict"]["kind"], "equilibrium");
    let csv = fs::read_to_string(a.join("trajectory.csv")).unwrap();
    assert!(csv.lines().any(|l| l == "t,x,y,z"));
    assert!(csv.starts_with("# {\"tool\":\"foodchain\""));

    let cfg = a.join("verdict.json");
    let o = foodchain(&["simulate", "--config", cfg.to_str().unwrap(), "--out-dir", b.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["verdict.json", "trajectory.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn floquet_at_large_m2_has_positive_transversal_average() {
    let o = run(&with_section4(&["floquet", "--m2", "0.065", "--format", "json"]));
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let ta = v["result"]["floquet"]["transversal_average"].as_f64().unwrap();
    assert!(ta > 0.0, "{ta}");
    assert_eq!(v["result"]["floquet"]["multipliers"].as_array().unwrap().len(), 3);
}

#[test]
fn sweep_is_inclusive() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&with_section4(&[
        "sweep", "--param", "m2", "--from", "0.02", "--to", "0.15", "--step", "0.001", "--t-end", "60", "--t-transient",
        "30", "--out-dir", dir.path().to_str().unwrap(),
    ]));
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "m2,lambda2,case,n_interior,n_stable_interior,transversal_average,attractor,y_tail_min,y_tail_max");
    assert_eq!(rows.len() - 1, 131);
    let v = read_json(&dir.path().join("sweep.json"));
    assert_eq!(v["result"]["records"].as_array().unwrap().len(), 131);
}

#[test]
fn reproduce_table3_writes_report_directory() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t3");
    let o = foodchain(&["reproduce", "table3", "--out-dir", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let v = read_json(&out.join("table3.json"));
    let rows = v["result"]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    let lib = foodchain::scenarios::run_table3(foodchain::model::DEFAULT_CLASS_EPS).unwrap();
    for (row, want) in rows.iter().zip(&lib.rows) {
        assert_eq!(row["label"], want.label.as_str());
    }
    assert_eq!(rows[1]["label"], "II.2.b.iv");
    assert_eq!(rows[2]["label"], "II.2.b.iv");
    assert!(out.join("table3.csv").exists());
}

#[test]
fn basin_lists_every_grid_point() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&with_section4(&[
        "basin", "--m2", "0.033", "--grid-n", "2", "--t-end", "400", "--t-transient", "200", "--out-dir",
        dir.path().to_str().unwrap(),
    ]));
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = read_json(&dir.path().join("basin.json"));
    let n = v["result"]["points"].as_array().unwrap().len();
    let csv = fs::read_to_string(dir.path().join("basin.csv")).unwrap();
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), n + 1);
}
