use serde_json::Value;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bubbleforge"))
        .args(args)
        .env_remove("BUBBLEFORGE_THREADS")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("valid json")
}

#[test]
fn interval_of_moebius_map() {
    let v = json(&run(&["interval", "--map", "moebius:a=0.5"]));
    assert!((v["left_lift"].as_f64().unwrap() + 1.0 / 6.0).abs() < 1e-10);
    assert!((v["right_lift"].as_f64().unwrap() - 1.0 / 6.0).abs() < 1e-10);
    assert_eq!(v["rational"], "0/1");
}

#[test]
fn interior_tau_of_rotation_is_omega() {
    let v = json(&run(&["tau", "--map", "rot:c=0", "--omega", "-0.3+0.2i"]));
    let tau = &v["tau"];
    assert!((tau[0].as_f64().unwrap() + 0.3).abs() < 1e-12);
    assert!((tau[1].as_f64().unwrap() - 0.2).abs() < 1e-12);
    assert_eq!(v["kind"], "interior");
}

#[test]
fn boundary_tau_picks_route_by_map() {
    let mob = json(&run(&["tau", "--omega", "0"]));
    assert_eq!(mob["details"]["route"], "limit");
    let im = mob["tau"][1].as_f64().unwrap();
    assert!((im - 3f64.ln() / std::f64::consts::TAU).abs() < 1e-8);

    let pert = json(&run(&[
        "tau",
        "--omega",
        "0.05",
        "--map",
        "moebius:a=0.5+sin:n=3,eps=0.005",
    ]));
    assert_eq!(pert["details"]["route"], "glued");
    assert!(pert["tau"][1].as_f64().unwrap() > 0.0);
}

#[test]
fn bubble_csv_has_parabolic_ends() {
    let out = run(&["bubble", "--samples", "11", "--format", "csv"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows.len(), 12);
    assert!(rows[1].ends_with(",parabolic") && rows[11].ends_with(",parabolic"));
    assert!(rows[2..11].iter().all(|r| r.ends_with(",ok")));
}

#[test]
fn thread_count_does_not_change_output() {
    let one = run(&[
        "bubble",
        "--samples",
        "9",
        "--format",
        "csv",
        "--threads",
        "1",
    ]);
    let two = Command::new(env!("CARGO_BIN_EXE_bubbleforge"))
        .args(["bubble", "--samples", "9", "--format", "csv"])
        .env("BUBBLEFORGE_THREADS", "2")
        .output()
        .unwrap();
    assert!(one.status.success() && two.status.success());
    assert_eq!(one.stdout, two.stdout);
}

#[test]
fn parse_errors_exit_with_precondition_code() {
    let out = run(&["rot", "--map", "moebius:a=x"]);
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "parse");
    assert!(err["message"].as_str().unwrap().contains("position 10"));
}

#[test]
fn unreachable_tolerance_exits_with_solver_code() {
    let out = run(&[
        "tau",
        "--map",
        "trig:b1=0.05",
        "--omega",
        "0.1+0.01i",
        "--tol",
        "1e-300",
    ]);
    assert_eq!(
        out.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn figure1_writes_panels() {
    let dir = tempfile::tempdir().unwrap();
    let v = json(&run(&[
        "figure1",
        "--samples",
        "401",
        "--out",
        dir.path().to_str().unwrap(),
    ]));
    let panels = v["panels"].as_array().unwrap();
    assert_eq!(panels.len(), 6);
    for p in panels {
        let n = p["n"].as_u64().unwrap();
        let crossings = p["self_crossings"].as_u64().unwrap();
        assert_eq!(crossings == 0, n <= 2, "n = {n}");
        let svg = std::fs::read_to_string(dir.path().join(format!("fig1_n{n}.svg"))).unwrap();
        assert!(svg.starts_with("<svg") || svg.starts_with("<?xml"));
    }
    assert!(dir.path().join("figure1.json").exists());
}
