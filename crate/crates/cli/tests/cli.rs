use std::path::Path;
use std::process::{Command, Output};

fn entropy(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_entropy"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    assert!(
        o.status.success(),
        "exit {:?}: {}",
        o.status,
        String::from_utf8_lossy(&o.stderr)
    );
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn value(line_block: &str) -> f64 {
    line_block
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .nth(1)
        .unwrap()
        .parse()
        .unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn estimate_plugin_and_mm() {
    let dir = tempfile::tempdir().unwrap();
    let h = write(dir.path(), "h.csv", "symbol,count\n0,3\n1,2\n");
    let out = stdout(&entropy(&[
        "estimate", "--input", &h, "--k", "2", "--method", "plugin",
    ]));
    assert!(out.starts_with("method,estimate_nats\nplugin,"));
    assert!((value(&out) - 0.6730116670092565).abs() < 1e-12);
    let out = stdout(&entropy(&[
        "estimate", "--input", &h, "--k", "2", "--method", "mm",
    ]));
    assert!((value(&out) - 0.7730116670092565).abs() < 1e-12);
    let out = stdout(&entropy(&[
        "estimate", "--input", &h, "--k", "2", "--method", "plugin", "--bits",
    ]));
    assert!(out.starts_with("method,estimate_bits\n"));
    assert!((value(&out) - 0.9709505944546686).abs() < 1e-12);
}

#[test]
fn estimate_poly_stays_in_range() {
    let dir = tempfile::tempdir().unwrap();
    let text: String = (0..500).map(|i| format!("{i},{}\n", 1 + i % 3)).collect();
    let h = write(dir.path(), "h.csv", &text);
    let out = stdout(&entropy(&["estimate", "--input", &h, "--k", "1000"]));
    let v = value(&out);
    assert!((0.0..=(1000f64).ln()).contains(&v), "{v}");
    let out = stdout(&entropy(&[
        "estimate", "--input", &h, "--k", "1000", "--split", "--seed", "3",
    ]));
    assert!((0.0..=(1000f64).ln()).contains(&value(&out)));
    let out = stdout(&entropy(&[
        "estimate",
        "--input",
        &h,
        "--k",
        "1000",
        "--adaptive",
    ]));
    assert!(value(&out) >= 0.0);
}

#[test]
fn estimate_rejects_bad_configuration() {
    let dir = tempfile::tempdir().unwrap();
    let h = write(dir.path(), "h.csv", "0,3\n5,2\n");
    for args in [
        vec!["estimate", "--input", &h, "--k", "3"],
        vec!["estimate", "--input", &h, "--k", "10", "--n", "4"],
        vec!["estimate", "--input", &h, "--k", "10", "--c0", "-1"],
        vec!["estimate", "--input", "/nonexistent/h.csv", "--k", "10"],
        vec!["estimate", "--input", &h, "--k", "10", "--method", "jvhw"],
    ] {
        let o = entropy(&args);
        assert!(!o.status.success(), "{args:?} should fail");
        assert!(!o.stderr.is_empty());
    }
    let bad = write(dir.path(), "bad.csv", "0,3\n1,x\n");
    let o = entropy(&["estimate", "--input", &bad, "--k", "10"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
}

#[test]
fn simulate_is_reproducible_across_threads() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, threads: &str| {
        let out = dir.path().join(name);
        stdout(&entropy(&[
            "simulate",
            "--k",
            "1000",
            "--dists",
            "uniform,zipf:1",
            "--n-grid",
            "50,200",
            "--trials",
            "8",
            "--seed",
            "11",
            "--threads",
            threads,
            "--no-timing",
            "--out",
            out.to_str().unwrap(),
        ]));
        std::fs::read(out).unwrap()
    };
    let a = run("a.csv", "1");
    let b = run("b.csv", "4");
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("dist,n,method,rmse,bias,std,wall_time\n"));
    assert_eq!(text.lines().count(), 1 + 2 * 2 * 3);
}

#[test]
fn simulate_rejects_bad_configuration() {
    for args in [
        vec!["simulate", "--n-grid", "0,10"],
        vec!["simulate", "--n-grid", "10", "--dists", "zipf:-1"],
        vec!["simulate", "--n-grid", "10", "--dists", "mix", "--k", "101"],
        vec!["simulate", "--n-grid", "10", "--trials", "0"],
        vec!["simulate", "--n-grid", "10", "--threads", "0"],
    ] {
        assert!(!entropy(&args).status.success(), "{args:?} should fail");
    }
}

#[test]
fn remez_tables_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = stdout(&entropy(&[
        "remez",
        "--degrees",
        "2:4",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]));
    assert_eq!(out.lines().count(), 3);
    let text = std::fs::read_to_string(dir.path().join("phi_L4.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("degree,interval_a,interval_b,error"));
    assert!(lines.next().unwrap().starts_with("4,"));
    assert_eq!(lines.count(), 5);
    assert!(!entropy(&["remez", "--degrees", "401"]).status.success());
    assert!(!entropy(&["remez", "--degrees", "1,2"]).status.success());
}

#[test]
fn lowerbound_emits_tables() {
    let out = stdout(&entropy(&[
        "lowerbound",
        "--L",
        "1",
        "--eta",
        "0.1",
        "--emit",
        "pair",
    ]));
    assert!(out.contains("# X\natom,weight\n"));
    assert!(out.contains("# X'\natom,weight\n"));
    let out = stdout(&entropy(&[
        "lowerbound",
        "--emit",
        "scan",
        "--c",
        "0.2",
        "--l-values",
        "10,20",
    ]));
    assert_eq!(out.lines().count(), 3);
    assert!(out.starts_with("L,error\n10,"));
    let out = stdout(&entropy(&["lowerbound", "--emit", "tv", "--scale", "0.1"]));
    let fields: Vec<f64> = out
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .map(|f| f.parse().unwrap())
        .collect();
    assert!(fields[1] >= 0.0 && fields[1] <= 1.0);
    assert!(!entropy(&["lowerbound", "--L", "0"]).status.success());
    assert!(!entropy(&["lowerbound", "--eta", "1.5"]).status.success());
}
