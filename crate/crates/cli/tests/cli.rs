use std::process::Command;

fn hfnet(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_hfnet")).args(args).output().expect("binary runs")
}

fn path(dir: &tempfile::TempDir, name: &str) -> String {
    dir.path().join(name).to_str().unwrap().to_string()
}

#[test]
fn build_then_eval() {
    let dir = tempfile::tempdir().unwrap();
    let net = path(&dir, "sq.relunet");
    let report = path(&dir, "sq.json");
    let out = hfnet(&["build", "--builder", "square", "--eps", "1e-3", "--out", &net, "--report", &report]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(summary["summary"]["certified"], true);

    let out = hfnet(&["eval", &net, "--grid", "0:1:5"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "x0,y0");
    assert_eq!(lines.len(), 6);
    for l in &lines[1..] {
        let v: Vec<f64> = l.split(',').map(|s| s.parse().unwrap()).collect();
        assert!((v[1] - v[0] * v[0]).abs() <= 1e-3, "{l}");
    }
}

#[test]
fn eval_points_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let net = path(&dir, "m.relunet");
    assert!(hfnet(&["build", "--builder", "multiply", "--eps", "1e-2", "--out", &net]).status.success());
    let pts = path(&dir, "pts.csv");
    std::fs::write(&pts, "1,2\n-3,0.5\n").unwrap();
    let out = hfnet(&["eval", &net, "--input", &pts]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<Vec<f64>> = text.lines().skip(1).map(|l| l.split(',').map(|s| s.parse().unwrap()).collect()).collect();
    assert!((rows[0][2] - 2.0).abs() <= 1e-2 && (rows[1][2] + 1.5).abs() <= 1e-2);
}

#[test]
fn bad_inputs_fail_cleanly() {
    let out = hfnet(&["build", "--builder", "nope", "--out", "/dev/null"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown builder"));
    let dir = tempfile::tempdir().unwrap();
    let bad = path(&dir, "bad.relunet");
    std::fs::write(&bad, "relunet 1\nlayers x\n").unwrap();
    let out = hfnet(&["eval", &bad, "--grid", "0:1:3"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn sweep_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = path(&dir, "sweep.json");
    std::fs::write(&cfg, r#"{"id":"exp","builder":"exp_decay","eps":[0.1,0.01,0.001]}"#).unwrap();
    let out = hfnet(&["sweep", "--config", &cfg, "--out", dir.path().to_str().unwrap(), "--jobs", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("exp.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("exp.json")).unwrap()).unwrap();
    assert_eq!(json["rows"].as_array().unwrap().len(), 3);
    assert!(json.get("total_seconds").is_none());
    assert!(dir.path().join("exp.meta.json").exists());
}

#[test]
fn solve_matches_series() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = path(&dir, "p.json");
    std::fs::write(&cfg, r#"{"curve":{"kind":"circle","radius":1.0},"kappa":4.0,"n":128}"#).unwrap();
    let out_dir = path(&dir, "solved");
    let out = hfnet(&["solve", "--config", &cfg, "--out", &out_dir, "--grid", "16"]);
    let trace = format!("{out_dir}/trace.csv");
    let ff = format!("{out_dir}/far_field.csv");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mie = path(&dir, "mie.csv");
    assert!(hfnet(&["oracle", "mie", "--kappa", "4", "--grid", "128", "--out", &mie]).status.success());
    let parse = |p: &str| -> Vec<Vec<f64>> {
        std::fs::read_to_string(p)
            .unwrap()
            .lines()
            .skip(1)
            .map(|l| l.split(',').map(|s| s.parse().unwrap()).collect())
            .collect()
    };
    let (a, b) = (parse(&trace), parse(&mie));
    assert_eq!(a.len(), 128);
    for (x, y) in a.iter().zip(&b) {
        assert!((x[0] - y[0]).abs() < 1e-12);
        assert!((x[1] - y[1]).abs() < 1e-8 && (x[2] - y[2]).abs() < 1e-8);
    }
    assert_eq!(parse(&ff).len(), 16);
}

#[test]
fn oracle_tables() {
    let out = hfnet(&["oracle", "airy", "--grid", "0:1:3"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let first: Vec<f64> = text.lines().nth(1).unwrap().split(',').map(|s| s.parse().unwrap()).collect();
    assert!((first[1] - 0.355_028_053_887_817_2).abs() < 1e-12);
    let out = hfnet(&["oracle", "bessel-j", "--grid", "1:2:2", "--order", "1"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let first: Vec<f64> = text.lines().nth(1).unwrap().split(',').map(|s| s.parse().unwrap()).collect();
    assert!((first[1] - 0.440_050_585_744_933_5).abs() < 1e-12);
}

#[test]
fn verify_selected_criterion() {
    let out = hfnet(&["verify", "--only", "3"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("PASS criterion  3"), "{text}");
}

#[test]
fn malformed_sweep_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = path(&dir, "bad.json");
    std::fs::write(&cfg, r#"{"id":"bad","builder":"square","eps":[]}"#).unwrap();
    let out_dir = path(&dir, "out");
    let out = hfnet(&["sweep", "--config", &cfg, "--out", &out_dir]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!std::path::Path::new(&out_dir).exists());
}

#[test]
fn uncertified_sweep_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = path(&dir, "floor.json");
    std::fs::write(&cfg, r#"{"id":"floor","builder":"fock","kappas":[1],"eps":[0.1]}"#).unwrap();
    let out = hfnet(&["sweep", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let csv = std::fs::read_to_string(dir.path().join("floor.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().contains("false"));
}

#[test]
fn eval_reproduces_saved_network_bits() {
    let dir = tempfile::tempdir().unwrap();
    let net = path(&dir, "c.relunet");
    assert!(hfnet(&["build", "--builder", "cos", "--eps", "1e-2", "--out", &net]).status.success());
    let a = hfnet(&["eval", &net, "--grid", "-6:6:97"]).stdout;
    let copy = path(&dir, "copy.relunet");
    let parsed = hfnet::format::load(&net).unwrap();
    hfnet::format::save(&parsed, &copy).unwrap();
    assert_eq!(std::fs::read(&net).unwrap(), std::fs::read(&copy).unwrap());
    assert_eq!(a, hfnet(&["eval", &copy, "--grid", "-6:6:97"]).stdout);
}
