use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_covert-relay"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

/// A reduced scenario file (6 + 6 slots) written into `dir`.
fn small_scenario(dir: &Path) -> String {
    let out = run(&["scenario", "print-default"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap().replace("n1 = 50", "n1 = 6").replace("n2 = 50", "n2 = 6");
    let path = dir.join("small.toml");
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn print_default_is_a_loadable_scenario() {
    let out = run(&["scenario", "print-default"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("n1 = 50") && text.contains("[rotor]"));
    covert_relay::scenario::load_scenario(&text).unwrap();
}

#[test]
fn missing_scenario_exits_with_status_two() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("x.csv");
    let out = run(&["solve", "--scenario", "/no/such/file.toml", "--out", out_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("scenario not found"));
    assert!(!out_path.exists());
}

#[test]
fn solve_writes_solution_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let scn = small_scenario(dir.path());
    let out_path = dir.path().join("sol.csv");
    let out = run(&["solve", "--scenario", &scn, "--mode", "prop", "--out", out_path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("mode=prop csee="));

    let sol = fs::read_to_string(&out_path).unwrap();
    let lines: Vec<&str> = sol.lines().collect();
    assert_eq!(lines[0], "slot,phase,x,y,p_src,p_relay");
    assert_eq!(lines.len(), 1 + 13);
    let trace = fs::read_to_string(dir.path().join("sol.trace.csv")).unwrap();
    assert!(trace.starts_with("iter,phi,alpha,obj_alpha,obj_power,obj_traj,status\n0,"));
}

#[test]
fn ben2_solution_is_the_straight_line() {
    let dir = tempfile::tempdir().unwrap();
    let scn = small_scenario(dir.path());
    let out_path = dir.path().join("b2.csv");
    let out = run(&["solve", "--scenario", &scn, "--mode", "ben2", "--out", out_path.to_str().unwrap()]);
    assert!(out.status.success());
    let text = fs::read_to_string(&out_path).unwrap();
    for (k, line) in text.lines().skip(1).enumerate() {
        let f: Vec<&str> = line.split(',').collect();
        let (x, y): (f64, f64) = (f[2].parse().unwrap(), f[3].parse().unwrap());
        assert!((x - 700.0 * k as f64 / 12.0).abs() < 1e-9, "{line}");
        assert_eq!(y, 350.0);
    }
}

#[test]
fn sweep_is_byte_stable() {
    let dir = tempfile::tempdir().unwrap();
    let scn = small_scenario(dir.path());
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        let out = run(&[
            "sweep", "--scenario", &scn, "--param", "r_uncertainty", "--values", "5,15", "--mode", "prop,ben2",
            "--seed", "3", "--out", p.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let text = fs::read(&a).unwrap();
    assert_eq!(text, fs::read(&b).unwrap());
    let text = String::from_utf8(text).unwrap();
    assert_eq!(text.lines().count(), 5);
    assert!(text.lines().nth(3).unwrap().starts_with("ben2,r_uncertainty,5,"));
}

#[test]
fn sweep_rejects_non_monotone_values() {
    let out = run(&["sweep", "--param", "period", "--values", "30,30"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("strictly monotone"));
}

#[test]
fn verify_energy_bound_passes() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("v.csv");
    let out = run(&["verify", "energy-bound", "--out", p.to_str().unwrap()]);
    assert!(out.status.success());
    let text = fs::read_to_string(&p).unwrap();
    assert!(text.starts_with("suite,check,residual,tolerance,pass\nenergy-bound,"));
    assert!(text.trim_end().ends_with(",true"));
}

#[test]
fn unknown_suite_fails() {
    let out = run(&["verify", "everything"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown verification suite"));
}

#[test]
fn oracle_alpha_reports_both_answers() {
    let dir = tempfile::tempdir().unwrap();
    let scn = small_scenario(dir.path());
    let out = run(&["oracle-alpha", "--scenario", &scn]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("phi,alpha_pdsa,alpha_grid,objective_pdsa,objective_grid,case\n"));
    assert_eq!(text.lines().count(), 2);
}
