use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn spiralbrick(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spiralbrick"))
        .args(args)
        .env_remove("SPIRALBRICK_LOG")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// The one-line error document a failing command prints.
fn error_kind(o: &Output) -> String {
    assert!(!o.status.success());
    let err = stderr(o);
    let lines: Vec<&str> = err.lines().collect();
    assert_eq!(lines.len(), 1, "{err}");
    let doc: Value = serde_json::from_str(lines[0]).unwrap();
    doc["error"].as_str().unwrap().to_string()
}

fn small_config(dir: &Path, seed: u64) -> String {
    let path = dir.join("small.json");
    let text = format!(
        r#"{{"schema": "spiralbrick.config/1", "name": "small", "base": {{"preset": "square"}}, "layers": 2, "seed": {seed}}}"#
    );
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn generate_square_preset() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("gen");
    let obj = dir.path().join("col.obj");
    let svg = dir.path().join("col.svg");
    let o = spiralbrick(&[
        "generate",
        "--preset",
        "square",
        "--out",
        out.to_str().unwrap(),
        "--obj",
        obj.to_str().unwrap(),
        "--svg",
        svg.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("bricks=136 "));
    let model = read_json(&out.join("model.json"));
    assert_eq!(model["schema"], "spiralbrick.model/1");
    assert_eq!(model["model"]["placements"].as_array().unwrap().len(), 136);
    let mesh = std::fs::read_to_string(obj).unwrap();
    assert_eq!(mesh.lines().filter(|l| l.starts_with("v ")).count(), 8 * 136);
    assert!(std::fs::read_to_string(svg).unwrap().contains("<svg"));
}

#[test]
fn synthetic_estimate_recovers_pose() {
    let dir = tempfile::tempdir().unwrap();
    let doc = dir.path().join("est.json");
    let o = spiralbrick(&[
        "estimate",
        "--synthetic",
        "--pose",
        "0.4,-0.3,0.6",
        "--noise",
        "0",
        "--out",
        doc.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let fields: Vec<(String, f64)> = stdout(&o)
        .split_whitespace()
        .map(|kv| {
            let (k, v) = kv.split_once('=').unwrap();
            (k.to_string(), v.parse().unwrap())
        })
        .collect();
    let get = |k: &str| fields.iter().find(|f| f.0 == k).unwrap().1;
    assert!(((get("x") - 0.4).powi(2) + (get("y") + 0.3).powi(2)).sqrt() < 1e-3);
    assert!((get("yaw") - 0.6).abs() < 0.01);
    assert!(get("time_ms") >= 0.0);
    assert_eq!(read_json(&doc)["schema"], "spiralbrick.estimate/1");
}

#[test]
fn estimate_from_saved_cloud() {
    let dir = tempfile::tempdir().unwrap();
    let ply = dir.path().join("frame.ply");
    let o = spiralbrick(&[
        "estimate",
        "--synthetic",
        "--pose",
        "-0.1,0.05,2.0",
        "--save-clouds",
        ply.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = spiralbrick(&["estimate", "--cloud", ply.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(
        stdout(&o).starts_with("x=-0.1") || stdout(&o).starts_with("x=-0.09"),
        "{}",
        stdout(&o)
    );
}

fn strip_timing(mut log: Value) -> Value {
    for r in log["records"].as_array_mut().unwrap() {
        r.as_object_mut().unwrap().remove("pose_estimate_time_s");
    }
    log
}

#[test]
fn simulate_is_reproducible_and_reportable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), 11);
    let runs: Vec<_> = ["a", "b"]
        .iter()
        .map(|r| {
            let out = dir.path().join(r);
            let o = spiralbrick(&[
                "simulate",
                "--config",
                &cfg,
                "--out",
                out.to_str().unwrap(),
                "--save-clouds",
            ]);
            assert!(o.status.success(), "{}", stderr(&o));
            out
        })
        .collect();
    let model = |d: &Path| std::fs::read(d.join("model.json")).unwrap();
    assert_eq!(model(&runs[0]), model(&runs[1]));
    assert_eq!(
        strip_timing(read_json(&runs[0].join("log.json"))),
        strip_timing(read_json(&runs[1].join("log.json")))
    );
    for entry in ["config.json", "clouds", "report/metrics.csv", "report/traj_time.svg"] {
        assert!(runs[0].join(entry).exists(), "{entry}");
    }

    // the run directory alone is enough for a report
    std::fs::remove_dir_all(runs[0].join("report")).unwrap();
    let o = spiralbrick(&["report", runs[0].to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(runs[0].join("report/metrics.csv")).unwrap();
    assert_eq!(csv.lines().count(), 17);
    assert!(csv.starts_with("brick,position_error_m,orientation_diff_deg,pose_time_s,traj_time_s"));
}

#[test]
fn seed_flag_changes_the_log() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), 1);
    let logs: Vec<Value> = ["1", "2"]
        .iter()
        .map(|seed| {
            let out = dir.path().join(seed);
            let o = spiralbrick(&[
                "simulate",
                "--config",
                &cfg,
                "--seed",
                seed,
                "--out",
                out.to_str().unwrap(),
            ]);
            assert!(o.status.success(), "{}", stderr(&o));
            strip_timing(read_json(&out.join("log.json")))
        })
        .collect();
    assert_eq!(logs[0]["seed"], 1);
    assert_ne!(logs[0]["records"], logs[1]["records"]);
}

#[test]
fn config_errors_are_one_line() {
    let dir = tempfile::tempdir().unwrap();
    let both = dir.path().join("both.json");
    std::fs::write(
        &both,
        r#"{"schema": "spiralbrick.config/1", "base": {"polygon": {"regular": 4, "blocks": 2},
            "polynomial": {"coefficients": [2, 0, -0.5], "domain": [-2, 2]}}}"#,
    )
    .unwrap();
    assert_eq!(
        error_kind(&spiralbrick(&["generate", "--config", both.to_str().unwrap()])),
        "ValidationError"
    );

    let broken = dir.path().join("broken.json");
    std::fs::write(&broken, "{\"schema\": \"spiralbrick.config/1\",\n \"base\": ").unwrap();
    let o = spiralbrick(&["generate", "--config", broken.to_str().unwrap()]);
    assert_eq!(error_kind(&o), "ParseError");
    assert!(stderr(&o).contains("line 2"));

    let missing = dir.path().join("none.json");
    assert_eq!(
        error_kind(&spiralbrick(&["simulate", "--config", missing.to_str().unwrap()])),
        "IoError"
    );
    assert_eq!(
        error_kind(&spiralbrick(&["report", dir.path().to_str().unwrap()])),
        "IoError"
    );
    assert_eq!(
        error_kind(&spiralbrick(&["simulate", "--preset", "square", "--noise", "-1"])),
        "ValidationError"
    );
}

#[test]
fn log_level_comes_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("gen");
    let o = Command::new(env!("CARGO_BIN_EXE_spiralbrick"))
        .args(["generate", "--preset", "triangle", "--out", out.to_str().unwrap()])
        .env("SPIRALBRICK_LOG", "info")
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(stderr(&o).contains("bricks in 17 layers"), "{}", stderr(&o));
}
