use std::path::Path;
use std::process::{Command, Output};

use barrier_lab::builtin::{scenario, to_json};
use barrier_lab::config::{CbfConfig, TaskConfig};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_barrier-lab"));
    c.env_remove("BARRIER_LAB_THREADS");
    c
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// Builtin config keeping only the analysis tasks.
fn light(name: &str) -> barrier_lab::ScenarioConfig {
    let mut cfg = scenario(name).unwrap();
    cfg.tasks.retain(|t| {
        matches!(
            t,
            TaskConfig::Equilibria(_) | TaskConfig::Jacobians(_) | TaskConfig::Equivalence(_)
        )
    });
    cfg
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn run(config: &Path, out: &Path) -> Output {
    bin()
        .args(["run", "--config"])
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

#[test]
fn emit_config_round_trips() {
    let o = bin().args(["scenario", "fig3-h2a2", "--emit-config"]).output().unwrap();
    assert!(o.status.success());
    let cfg = barrier_lab::parse_config("stdout", &stdout(&o)).unwrap();
    assert_eq!(cfg, scenario("fig3-h2a2").unwrap());
}

#[test]
fn describe_marks_the_active_pair() {
    let o = bin().args(["scenario", "fig2"]).output().unwrap();
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("* cbf 0: h1,alpha1"), "{text}");
    assert!(text.contains("note: penalty p = 1"), "{text}");
}

#[test]
fn unknown_scenario_exits_2() {
    let o = bin().args(["scenario", "fig9"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("fig3-h1a2"));
}

#[test]
fn unknown_builtin_system_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let text = to_json(&light("fig3")).replace("\"single_integrator\"", "\"double_integrator\"");
    let line = text.lines().position(|l| l.contains("double_integrator")).unwrap() + 1;
    let p = write(dir.path(), "bad.json", &text);
    let o = run(&p, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("system.builtin.name"), "{err}");
    assert!(err.contains(&format!("bad.json:{line}:")), "{err}");
    assert!(err.contains("double_integrator"), "{err}");
}

#[test]
fn unknown_field_is_rejected_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let text = to_json(&light("fig3")).replacen("\"radius\": 1.0", "\"radius\": 1.0,\n        \"radios\": 2.0", 1);
    let line = text.lines().position(|l| l.contains("radios")).unwrap() + 1;
    let p = write(dir.path(), "typo.json", &text);
    let o = run(&p, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains(&format!("typo.json:{line}:")), "{err}");
    assert!(err.contains("radios"), "{err}");
}

#[test]
fn out_of_range_index_is_anchored_at_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = light("fig3");
    if let TaskConfig::Equivalence(t) = cfg.tasks.iter_mut().find(|t| t.name() == "equivalence").unwrap() {
        t.pairs = vec![[0, 1], [0, 7]];
    }
    let text = to_json(&cfg);
    let p = write(dir.path(), "range.json", &text);
    let o = run(&p, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("tasks[2].equivalence.pairs[1]"), "{err}");
    let reported: usize = err.split(':').nth(2).unwrap().parse().unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[reported - 1].trim_start().starts_with('['), "line {reported}: {}", lines[reported - 1]);
    assert!(lines[reported].contains('0') && lines[reported + 1].contains('7'));
}

#[test]
fn invalid_value_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let text = to_json(&light("fig2")).replace("\"penalty\": 1.0", "\"penalty\": -1.0");
    let p = write(dir.path(), "neg.json", &text);
    let o = run(&p, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("controller.clf_cbf_qp.penalty"), "{}", stderr(&o));
}

#[test]
fn malformed_json_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "broken.json", "{\n  \"schema_version\": 1,\n  \"name\": \n}\n");
    let o = run(&p, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("broken.json:4:"), "{}", stderr(&o));
}

#[test]
fn task_error_exits_1_and_keeps_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = light("fig3");
    cfg.tasks.retain(|t| t.name() == "equilibria");
    let mut sim = match scenario("fig3").unwrap().tasks.into_iter().find(|t| t.name() == "simulate").unwrap() {
        TaskConfig::Simulate(s) => s,
        _ => unreachable!(),
    };
    sim.initial = vec![vec![2.5, 0.01]];
    sim.random = 0;
    sim.horizon = 0.1;
    cfg.tasks.push(TaskConfig::Simulate(sim));
    let p = write(dir.path(), "unsafe.json", &to_json(&cfg));
    let out = dir.path().join("out");
    let o = run(&p, &out);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(stderr(&o).contains("outside the safe set") || stderr(&o).contains("safe set"), "{}", stderr(&o));
    assert!(out.join("equilibria.json").exists());
    assert!(out.join("summary.txt").exists());
    assert!(std::fs::read_to_string(out.join("trajectory.json")).unwrap().contains("errors"));
}

#[test]
fn runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = light("fig2");
    cfg.tasks.push(TaskConfig::Simulate(barrier_lab::config::SimulateTask {
        initial: vec![],
        random: 4,
        bounds: Some(vec![[-5.0, 5.0], [-5.0, 5.0]]),
        horizon: 1.0,
        dt: 1e-2,
        filtered: true,
        record_stride: 1,
        invariance_tol: 1e-6,
        prefix: "trajectory".into(),
    }));
    let p = write(dir.path(), "det.json", &to_json(&cfg));
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(run(&p, &a).status.success());
    let o = bin()
        .env("BARRIER_LAB_THREADS", "1")
        .args(["run", "--config"])
        .arg(&p)
        .arg("--out")
        .arg(&b)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["equilibria.json", "spectra.json", "jacobians.json", "equivalence.json", "trajectory.json", "trajectory_003.csv"] {
        let x = std::fs::read(a.join(f)).unwrap();
        let y = std::fs::read(b.join(f)).unwrap();
        assert!(x == y, "{f} differs");
    }
}

#[test]
fn bad_thread_count_exits_2() {
    let o = bin().env("BARRIER_LAB_THREADS", "zero").args(["scenario", "fig3"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("BARRIER_LAB_THREADS"));
}

#[test]
fn compare_fig2_passes() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "fig2.json", &to_json(&light("fig2")));
    let out = dir.path().join("cmp");
    let o = bin().args(["compare", "--config"]).arg(&p).arg("--out").arg(&out).output().unwrap();
    assert!(o.status.success(), "{}{}", stdout(&o), stderr(&o));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("invariance_report.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], true);
    assert_eq!(report["checks"].as_array().unwrap().len(), 3);
}

#[test]
fn compare_rejects_a_different_safe_set() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = light("fig3");
    if let CbfConfig::Ball(b) = &mut cfg.cbfs[2] {
        b.radius = 1.2;
    }
    let p = write(dir.path(), "radius.json", &to_json(&cfg));
    let o = bin()
        .args(["compare", "--config"])
        .arg(&p)
        .arg("--out")
        .arg(dir.path().join("cmp"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("precondition") || stderr(&o).contains("zero set"), "{}", stderr(&o));
}
