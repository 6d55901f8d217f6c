use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;
use typecount::exact::ewens_oracle;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_typecount"))
}

fn write_measure(dir: &Path, name: &str, json: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, json).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn data_lines(stdout: &[u8]) -> Vec<String> {
    String::from_utf8(stdout.to_vec()).unwrap().lines().filter(|l| !l.starts_with('#')).map(str::to_string).collect()
}

#[test]
fn dist_kingman_matches_ewens() {
    let dir = TempDir::new().unwrap();
    let m = write_measure(dir.path(), "k.json", r#"{"kind":"lambda","kingman_mass":1}"#);
    let out = run(&["dist", "--measure", m.to_str().unwrap(), "--rate", "0.5", "--n", "10"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout.clone()).unwrap();
    assert!(text.starts_with(&format!("# typecount {}\n# config: {{", typecount::VERSION)));
    let lines = data_lines(&out.stdout);
    assert_eq!(lines[0], "m,k,probability");
    assert_eq!(lines.len(), 56);
    let oracle = ewens_oracle(1.0, 10).unwrap();
    for line in lines.iter().filter(|l| l.starts_with("10,")) {
        let f: Vec<&str> = line.split(',').collect();
        let k: usize = f[1].parse().unwrap();
        let p: f64 = f[2].parse().unwrap();
        assert!((p - oracle[k - 1]).abs() < 1e-12);
    }
}

#[test]
fn limit_on_kingman_is_a_condition_failure() {
    let dir = TempDir::new().unwrap();
    let m = write_measure(dir.path(), "k.json", r#"{"kind":"lambda","kingman_mass":1}"#);
    let out = run(&["limit", "--measure", m.to_str().unwrap(), "--rate", "1"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cond2"));
}

#[test]
fn crosscheck_half_half_passes() {
    let dir = TempDir::new().unwrap();
    let m = write_measure(dir.path(), "d.json", r#"{"kind":"xi","atoms":[{"x":[0.5,0.5],"weight":1}]}"#);
    let out = run(&["crosscheck", "--measure", m.to_str().unwrap(), "--n", "50"]);
    assert_eq!(out.status.code(), Some(0));
    let lines = data_lines(&out.stdout);
    let row = lines.iter().find(|l| l.starts_with("row_sum_vs_total_rate,")).unwrap();
    let v: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
    assert!(v < 1e-10);
}

#[test]
fn crosscheck_reports_tolerance_failures() {
    let dir = TempDir::new().unwrap();
    let m = write_measure(dir.path(), "b.json", r#"{"kind":"lambda","beta":[{"a":1.5,"b":0.5,"weight":1}]}"#);
    let out = run(&["crosscheck", "--measure", m.to_str().unwrap(), "--n", "30", "--tol-scale", "1e-40"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn invalid_inputs_exit_two() {
    let dir = TempDir::new().unwrap();
    let bad = write_measure(dir.path(), "bad.json", r#"{"kind":"xi","atoms":[{"x":[0.5,0.6],"weight":1}]}"#);
    let out = run(&["dist", "--measure", bad.to_str().unwrap(), "--rate", "1", "--n", "5"]);
    assert_eq!(out.status.code(), Some(2));
    let good = write_measure(dir.path(), "k.json", r#"{"kind":"lambda","kingman_mass":1}"#);
    let out = run(&["dist", "--measure", good.to_str().unwrap(), "--rate", "-1", "--n", "5"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["simulate", "--measure", good.to_str().unwrap(), "--rate", "1", "--n", "5", "--reps", "0"]);
    assert_eq!(out.status.code(), Some(2));
    let star = write_measure(dir.path(), "s.json", r#"{"kind":"lambda","star_mass":1}"#);
    let out = run(&["fpsample", "--measure", star.to_str().unwrap(), "--rate", "1", "--reps", "5", "--epsilon", "1.5"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["dist", "--measure", "/nonexistent/m.json", "--rate", "1", "--n", "5"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn simulate_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let m = write_measure(dir.path(), "b.json", r#"{"kind":"lambda","beta":[{"a":2,"b":1,"weight":1}]}"#);
    let mut outputs = Vec::new();
    for i in 0..2 {
        let out_path = dir.path().join(format!("summary{i}.csv"));
        let dump_path = dir.path().join(format!("dump{i}.csv"));
        let out = run(&[
            "simulate",
            "--measure",
            m.to_str().unwrap(),
            "--rate",
            "1",
            "--n",
            "50",
            "--reps",
            "300",
            "--seed",
            "12",
            "--out",
            out_path.to_str().unwrap(),
            "--dump",
            dump_path.to_str().unwrap(),
        ]);
        assert!(out.status.success());
        outputs.push((fs::read(&out_path).unwrap(), fs::read_to_string(&dump_path).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);
    let dump: Vec<&str> = outputs[0].1.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(dump[0], "rep,k_n,k_n1,m_n,n_n,c_n,i_n");
    assert_eq!(dump.len(), 301);
}

#[test]
fn json_artifacts_echo_config() {
    let dir = TempDir::new().unwrap();
    let m = write_measure(dir.path(), "d.json", r#"{"kind":"xi","atoms":[{"x":[0.5,0.5],"weight":1}]}"#);
    let out = run(&[
        "fpsample", "--measure", m.to_str().unwrap(), "--rate", "1", "--reps", "100", "--seed", "3", "--format", "json",
    ]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["version"], typecount::VERSION);
    assert_eq!(v["config"]["seed"], 3);
    assert_eq!(v["config"]["measure"]["kind"], "xi");
    assert_eq!(v["result"]["values"].as_array().unwrap().len(), 100);

    let out = run(&["limit", "--measure", m.to_str().unwrap(), "--rate", "1", "--jmax", "3", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let mean = v["result"]["law"]["moments"][1].as_f64().unwrap();
    assert!((mean - 1.0 / 3.0).abs() < 1e-15);
}

#[test]
fn rates_and_totals_files() {
    let dir = TempDir::new().unwrap();
    let m = write_measure(dir.path(), "k.json", r#"{"kind":"lambda","kingman_mass":1}"#);
    let totals = dir.path().join("totals.csv");
    let out = run(&["rates", "--measure", m.to_str().unwrap(), "--n", "3", "--totals", totals.to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(data_lines(&out.stdout).join("\n"), "m,k,g_mk,r_mk\n2,1,1,1\n3,1,0,0\n3,2,3,1");
    let t = fs::read_to_string(totals).unwrap();
    let lines: Vec<&str> = t.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(lines, vec!["m,g_m,row_sum", "2,1,1", "3,3,3"]);
}

#[test]
fn exact_mode_prints_fractions() {
    let dir = TempDir::new().unwrap();
    let m = write_measure(dir.path(), "s.json", r#"{"kind":"lambda","star_mass":1}"#);
    let out = run(&["dist", "--measure", m.to_str().unwrap(), "--rate", "1", "--n", "2", "--exact"]);
    assert!(out.status.success());
    assert_eq!(data_lines(&out.stdout), vec!["m,k,probability,exact", "1,1,1,1", "2,1,0.3333333333333333,1/3", "2,2,0.6666666666666666,2/3"]);
    let b = write_measure(dir.path(), "b.json", r#"{"kind":"lambda","beta":[{"a":2,"b":1,"weight":1}]}"#);
    let out = run(&["dist", "--measure", b.to_str().unwrap(), "--rate", "1", "--n", "5", "--exact"]);
    assert_eq!(out.status.code(), Some(2));
}
