use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn graspforge(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_graspforge"))
        .args(args)
        .current_dir(dir)
        .env_remove("GRASPFORGE_THREADS")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// A cheap study: one object, one trial per design.
fn small_config(dir: &Path) {
    fs::write(dir.join("small.toml"), "m = 1\nobjects = [\"box_50x10\"]\n").unwrap();
}

fn without_wall_ms(jsonl: &str) -> Vec<serde_json::Value> {
    jsonl
        .lines()
        .map(|l| {
            let mut v: serde_json::Value = serde_json::from_str(l).unwrap();
            v.as_object_mut().unwrap().remove("wall_ms");
            v
        })
        .collect()
}

#[test]
fn single_iteration_writes_one_line() {
    let tmp = tempfile::tempdir().unwrap();
    small_config(tmp.path());
    let o = graspforge(&["optimize", "--config", "small.toml", "--iters", "1", "--seed", "4", "--out", "s"], tmp.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let log = fs::read_to_string(tmp.path().join("s/study.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 1);
    let v: serde_json::Value = serde_json::from_str(log.trim()).unwrap();
    assert_eq!(v["index"], 0);
    for f in ["best.json", "report.csv", "config.toml"] {
        assert!(tmp.path().join("s").join(f).exists(), "{f}");
    }
}

#[test]
fn resumed_study_matches_clean_run() {
    let tmp = tempfile::tempdir().unwrap();
    small_config(tmp.path());
    let run = |args: &[&str]| {
        let o = graspforge(args, tmp.path());
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    };
    run(&["optimize", "--config", "small.toml", "--iters", "12", "--seed", "8", "--out", "clean"]);
    run(&["optimize", "--config", "small.toml", "--iters", "6", "--seed", "8", "--out", "split"]);
    run(&["optimize", "--iters", "12", "--out", "split", "--resume"]);
    let read = |d: &str, f: &str| fs::read_to_string(tmp.path().join(d).join(f)).unwrap();
    assert_eq!(read("clean", "best.json"), read("split", "best.json"));
    assert_eq!(read("clean", "report.csv"), read("split", "report.csv"));
    assert_eq!(
        without_wall_ms(&read("clean", "study.jsonl")),
        without_wall_ms(&read("split", "study.jsonl"))
    );
}

#[test]
fn existing_study_needs_resume() {
    let tmp = tempfile::tempdir().unwrap();
    small_config(tmp.path());
    let args = ["optimize", "--config", "small.toml", "--iters", "1", "--out", "s"];
    assert_eq!(code(&graspforge(&args, tmp.path())), 0);
    let o = graspforge(&args, tmp.path());
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("--resume"));
}

#[test]
fn written_config_reproduces_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    small_config(tmp.path());
    let o = graspforge(&["optimize", "--config", "small.toml", "--iters", "4", "--seed", "2", "--out", "a"], tmp.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = graspforge(&["optimize", "--config", "a/config.toml", "--out", "b"], tmp.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let read = |d: &str, f: &str| fs::read_to_string(tmp.path().join(d).join(f)).unwrap();
    assert_eq!(read("a", "config.toml"), read("b", "config.toml"));
    assert_eq!(without_wall_ms(&read("a", "study.jsonl")), without_wall_ms(&read("b", "study.jsonl")));
}

#[test]
fn thread_variable_overrides_flag() {
    let tmp = tempfile::tempdir().unwrap();
    small_config(tmp.path());
    let run = |threads: &str, out: &str| {
        Command::new(env!("CARGO_BIN_EXE_graspforge"))
            .args(["optimize", "--config", "small.toml", "--iters", "2", "--parallel", "3", "--out", out])
            .current_dir(tmp.path())
            .env("GRASPFORGE_THREADS", threads)
            .output()
            .unwrap()
    };
    assert_eq!(code(&run("2", "s")), 0);
    let cfg = fs::read_to_string(tmp.path().join("s/config.toml")).unwrap();
    assert!(cfg.contains("parallelism = 2"), "{cfg}");
    assert_eq!(code(&run("many", "t")), 1);
}

#[test]
fn config_errors_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    let o = graspforge(&["optimize", "--config", "missing.toml", "--out", "s"], tmp.path());
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("missing.toml"));

    fs::write(tmp.path().join("bad.toml"), "n_iterations = 5\n").unwrap();
    let o = graspforge(&["optimize", "--config", "bad.toml", "--out", "s"], tmp.path());
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("n_iterations"), "{}", stderr(&o));
}

fn optimum_params(dir: &Path) {
    let json = serde_json::to_string(&graspforge::DesignParams::table_optimum()).unwrap();
    fs::write(dir.join("opt.json"), json).unwrap();
}

#[test]
fn simulate_prints_result_and_renders() {
    let tmp = tempfile::tempdir().unwrap();
    optimum_params(tmp.path());
    let args = ["simulate", "--params", "opt.json", "--object", "box_50x10", "--seed", "1"];
    let o = graspforge(&[&args[..], &["--render", "r1"]].concat(), tmp.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let result: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let modes: Vec<_> = result["mode_trace"].as_array().unwrap().iter().map(|e| e["mode"].clone()).collect();
    assert_eq!(modes[..3], ["parallel", "pull_in", "power_grasp"]);
    assert!(tmp.path().join("r1/frames/00000.svg").exists());
    let svg = fs::read_to_string(tmp.path().join("r1/frames/00001.svg")).unwrap();
    assert!(svg.starts_with("<svg"));

    let o = graspforge(&[&args[..], &["--render", "r2"]].concat(), tmp.path());
    assert_eq!(code(&o), 0);
    let trace = |d: &str| fs::read(tmp.path().join(d).join("trace.csv")).unwrap();
    assert_eq!(trace("r1"), trace("r2"));
}

#[test]
fn simulate_accepts_table_units() {
    let tmp = tempfile::tempdir().unwrap();
    let mm: graspforge::DesignParamsMm = graspforge::DesignParams::table_optimum().into();
    fs::write(tmp.path().join("mm.json"), serde_json::to_string(&mm).unwrap()).unwrap();
    let o = graspforge(&["simulate", "--params", "mm.json", "--object", "cyl_20"], tmp.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn simulate_rejects_bad_input() {
    let tmp = tempfile::tempdir().unwrap();
    optimum_params(tmp.path());
    let o = graspforge(&["simulate", "--params", "opt.json", "--object", "teapot"], tmp.path());
    assert_eq!(code(&o), 1);
    let err = stderr(&o);
    for name in graspforge::scenario::CATALOG_NAMES {
        assert!(err.contains(name), "{err}");
    }

    let mut p = graspforge::DesignParams::table_optimum();
    p.ip_pulley_radius = p.ip_moment_arm;
    fs::write(tmp.path().join("bad.json"), serde_json::to_string(&p).unwrap()).unwrap();
    let o = graspforge(&["simulate", "--params", "bad.json", "--object", "cyl_8"], tmp.path());
    assert_eq!(code(&o), 1);
}

#[test]
fn diverging_trial_exits_four_with_result() {
    let tmp = tempfile::tempdir().unwrap();
    optimum_params(tmp.path());
    fs::write(tmp.path().join("hard.toml"), "[protocol]\ntendon_max_n = 1e7\n").unwrap();
    let o = graspforge(
        &["simulate", "--params", "opt.json", "--object", "cyl_8", "--config", "hard.toml"],
        tmp.path(),
    );
    assert_eq!(code(&o), 4, "{}", stderr(&o));
    let result: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(result["termination"], "unstable");
}

#[test]
fn report_rebuilds_tables() {
    let tmp = tempfile::tempdir().unwrap();
    small_config(tmp.path());
    let o = graspforge(&["optimize", "--config", "small.toml", "--iters", "3", "--out", "s"], tmp.path());
    assert_eq!(code(&o), 0);
    fs::remove_file(tmp.path().join("s/report.csv")).unwrap();
    let o = graspforge(&["report", "--study", "s", "--grasp-force"], tmp.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report = fs::read_to_string(tmp.path().join("s/report.csv")).unwrap();
    let rows: Vec<&str> = report.lines().collect();
    assert_eq!(rows[0], "iteration,score,best-so-far");
    assert_eq!(rows.len(), 4);
    let force = fs::read_to_string(tmp.path().join("s/grasp_force.csv")).unwrap();
    let widths: Vec<&str> = force.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(widths, ["10", "20", "30", "50", "70"]);
}

#[test]
fn report_rejects_empty_and_corrupt_studies() {
    let tmp = tempfile::tempdir().unwrap();
    fs::create_dir(tmp.path().join("e")).unwrap();
    fs::write(tmp.path().join("e/study.jsonl"), "").unwrap();
    assert_eq!(code(&graspforge(&["report", "--study", "e"], tmp.path())), 1);

    small_config(tmp.path());
    graspforge(&["optimize", "--config", "small.toml", "--iters", "2", "--out", "c"], tmp.path());
    let path = tmp.path().join("c/study.jsonl");
    let mut log = fs::read_to_string(&path).unwrap();
    log.push_str("{\"index\": 2, \"trunc\n");
    fs::write(&path, log).unwrap();
    let o = graspforge(&["report", "--study", "c"], tmp.path());
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));

    assert_eq!(code(&graspforge(&["report", "--study", "nowhere"], tmp.path())), 2);
}

#[cfg(unix)]
#[test]
fn interrupt_exits_three_and_resumes() {
    let tmp = tempfile::tempdir().unwrap();
    small_config(tmp.path());
    let mut child = Command::new(env!("CARGO_BIN_EXE_graspforge"))
        .args(["optimize", "--config", "small.toml", "--iters", "100000", "--out", "s"])
        .current_dir(tmp.path())
        .env_remove("GRASPFORGE_THREADS")
        .stderr(std::process::Stdio::null())
        .spawn()
        .unwrap();
    let log = tmp.path().join("s/study.jsonl");
    let deadline = std::time::Instant::now() + std::time::Duration::from_secs(60);
    while fs::read_to_string(&log).map_or(0, |s| s.lines().count()) < 2 {
        assert!(std::time::Instant::now() < deadline, "study never started");
        std::thread::sleep(std::time::Duration::from_millis(20));
    }
    let killed = Command::new("kill").args(["-INT", &child.id().to_string()]).status().unwrap();
    assert!(killed.success());
    assert_eq!(child.wait().unwrap().code(), Some(3));
    let done = fs::read_to_string(&log).unwrap().lines().count();
    assert!(done < 100000);
    assert!(tmp.path().join("s/best.json").exists());

    let target = (done + 2).to_string();
    let o = graspforge(&["optimize", "--iters", &target, "--out", "s", "--resume"], tmp.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(fs::read_to_string(&log).unwrap().lines().count(), done + 2);
}
