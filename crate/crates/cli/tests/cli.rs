use std::path::Path;
use std::process::{Command, Output};

fn mrho(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mrho"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn compute_writes_report_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = mrho(dir.path(), &["compute", "--t-max", "50"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.starts_with("m_rho = "), "{stdout}");

    let report = json(&dir.path().join("m_rho_report.json"));
    for key in ["params", "m_rho", "n_total", "n_regular", "n_escaped", "weighted_total", "weighted_regular", "lambda_stats", "tool_version"] {
        assert!(report.get(key).is_some(), "missing {key}");
    }
    assert_eq!(report["params"]["t_max"], 50.0);
    assert!(report["params"].get("workers").is_none());

    let csv = std::fs::read_to_string(dir.path().join("ftle.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "index,x1_0,y1_0,x2_0,y2_0,rho0,lambda_max,escaped,regular");
    assert_eq!(csv.lines().count(), 26);
    let side = json(&dir.path().join("ftle.csv.params.json"));
    assert_eq!(side["params"], report["params"]);
}

#[test]
fn integrable_regime_reports_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = mrho(dir.path(), &["compute", "--alpha", "0", "--out", "r.json"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&dir.path().join("r.json"))["m_rho"], 1.0);
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), "dt = 0.01\nt-max = 30\ngrid-nx = 3\n").unwrap();
    let out = mrho(dir.path(), &["compute", "--config", "c.toml", "--dt", "0.005"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let p = &json(&dir.path().join("m_rho_report.json"))["params"];
    assert_eq!(p["dt"], 0.005);
    assert_eq!(p["t_max"], 30.0);
    assert_eq!(p["grid_nx"], 3);
}

#[test]
fn unknown_config_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), "tmax = 30\n").unwrap();
    let out = mrho(dir.path(), &["compute", "--config", "c.toml"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("tmax") && err.contains("t-max"), "{err}");
}

#[test]
fn invalid_values_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["compute", "--dt", "-0.01"][..],
        &["compute", "--grid-nx", "0"],
        &["compute", "--method", "leapfrog"],
        &["poincare", "--quad-nodes", "63"],
        &["compute", "--tol", "0.005"],
        &["no-such-command"],
    ] {
        let out = mrho(dir.path(), args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
    }
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0, "nothing written on config errors");
}

#[test]
fn all_escaped_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = mrho(dir.path(), &["compute", "--alpha", "0.5"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&dir.path().join("m_rho_report.json"))["m_rho"], 0.0);
}

#[test]
fn verify_divergence_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = mrho(dir.path(), &["verify-divergence", "--samples", "100"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("max |div(rho V)|"));
}

#[test]
fn trajectory_writes_one_csv_per_alpha() {
    let dir = tempfile::tempdir().unwrap();
    let out = mrho(dir.path(), &["trajectory", "--t-max", "10", "--traj-csv", "t/traj.csv"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for a in ["0", "0.1", "0.5"] {
        let text = std::fs::read_to_string(dir.path().join(format!("t/traj_alpha{a}.csv"))).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t,x1,y1,x2,y2"));
        let first: Vec<f64> = lines.next().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
        assert_eq!(first, vec![0.0, 0.5, 0.5, 0.7, 0.0]);
        // 1000 steps, stride 10, plus the initial state.
        assert_eq!(text.lines().count(), 1 + 101);
    }
}

#[test]
fn poincare_scaling_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = mrho(dir.path(), &["poincare", "--out", "p.csv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(dir.path().join("p.csv")).unwrap();
    assert_eq!(text.lines().next(), Some("epsilon,map_I,map_theta1,oracle_I,oracle_theta1,error"));
    let errors: Vec<f64> = text.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse().unwrap()).collect();
    for w in errors.windows(2) {
        let r = w[0] / w[1];
        assert!((3.5..=4.5).contains(&r), "{r}");
    }
}

#[test]
fn diagnose_report_shape() {
    let dir = tempfile::tempdir().unwrap();
    let out = mrho(dir.path(), &["diagnose"]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&dir.path().join("diagnostics.json"));
    for k in ["min", "argmin", "pass"] {
        assert!(r["wronskian"].get(k).is_some());
    }
    assert!(r["resonance"]["p"].is_array());
    assert!(r["fourier"]["coefficients"].is_array());
    assert_eq!(r["nonpersistence"]["verdict"], "inconclusive");
    assert!(r["nonpersistence"].get("condition1").is_some());
    assert!(r["nonpersistence"].get("condition2").is_some());
}

#[test]
fn sweep_csv_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = mrho(dir.path(), &["sweep", "--alphas", "0,0.2", "--t-max", "20", "--grid-nx", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(text.lines().next(), Some("alpha,m_rho,n_regular,n_escaped"));
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn reports_do_not_depend_on_workers() {
    let dir = tempfile::tempdir().unwrap();
    let mut reports = Vec::new();
    for w in ["1", "3"] {
        let (r, c) = (format!("r{w}.json"), format!("f{w}.csv"));
        let out = mrho(dir.path(), &["compute", "--t-max", "40", "--workers", w, "--out", &r, "--ftle-csv", &c]);
        assert_eq!(out.status.code(), Some(0));
        reports.push((std::fs::read(dir.path().join(r)).unwrap(), std::fs::read(dir.path().join(c)).unwrap()));
    }
    assert_eq!(reports[0], reports[1]);
}

#[test]
fn help_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(mrho(dir.path(), &["--help"]).status.code(), Some(0));
}
