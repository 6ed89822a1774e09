use std::path::PathBuf;
use std::process::Command;

fn scenarios() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn kinonav(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_kinonav")).args(args).output().unwrap();
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stdout).into_owned())
}

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("kinonav-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    d
}

fn metric(text: &str, key: &str) -> f64 {
    text.lines()
        .find_map(|l| l.strip_prefix(key)?.trim_start().strip_prefix('=')?.trim().parse().ok())
        .unwrap_or_else(|| panic!("no {key} in\n{text}"))
}

#[test]
fn plan_free_space_writes_trajectory() {
    let sc = scenarios().join("free_space.toml");
    let out = scratch("plan");
    let (code, text) = kinonav(&["plan", "--scenario", sc.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{text}");
    assert!(metric(&text, "cost").is_finite());
    let csv = std::fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert!(csv.lines().count() > 10);
    assert!(out.join("plan_summary.txt").exists());
    std::fs::remove_dir_all(out).unwrap();
}

#[test]
fn plan_keeps_moving_start_velocity() {
    let sc = scenarios().join("moving_wall.toml");
    let (code, text) = kinonav(&["plan", "--scenario", sc.to_str().unwrap()]);
    assert_eq!(code, 0, "{text}");
    assert_eq!(metric(&text, "start_vx"), 4.0);
    assert_eq!(metric(&text, "start_vy"), 0.0);
}

#[test]
fn sealed_goal_exits_no_path() {
    let sc = scenarios().join("sealed_goal.toml");
    assert_eq!(kinonav(&["plan", "--scenario", sc.to_str().unwrap()]).0, 3);
}

#[test]
fn bad_inputs_have_distinct_codes() {
    let dir = scratch("bad");
    std::fs::create_dir_all(&dir).unwrap();
    let bad = dir.join("bad.toml");
    std::fs::write(&bad, "[goal]\nposition = [1.0, 2.0]\n").unwrap();
    assert_eq!(kinonav(&["plan", "--scenario", bad.to_str().unwrap()]).0, 2);
    let missing = dir.join("absent.toml");
    assert_eq!(kinonav(&["run", "--scenario", missing.to_str().unwrap()]).0, 1);
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn run_writes_logs_and_is_reproducible() {
    let sc = scenarios().join("line_15_noise.toml");
    let (a, b) = (scratch("run-a"), scratch("run-b"));
    for d in [&a, &b] {
        let (code, text) = kinonav(&["run", "--scenario", sc.to_str().unwrap(), "--out", d.to_str().unwrap()]);
        assert_eq!(code, 0, "{text}");
    }
    for f in ["control.csv", "events.csv", "summary.txt"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let (code, _) = kinonav(&[
        "run", "--scenario", sc.to_str().unwrap(), "--out", b.to_str().unwrap(), "--seed", "77",
    ]);
    assert_eq!(code, 0);
    assert_ne!(std::fs::read(a.join("control.csv")).unwrap(), std::fs::read(b.join("control.csv")).unwrap());
    std::fs::remove_dir_all(a).unwrap();
    std::fs::remove_dir_all(b).unwrap();
}

#[test]
fn sweep_prints_one_row_per_speed_and_mode() {
    let sc = scenarios().join("line_15.toml");
    let (code, text) = kinonav(&["sweep", "--scenario", sc.to_str().unwrap(), "--speeds", "5,10"]);
    assert_eq!(code, 0, "{text}");
    assert_eq!(text.lines().count(), 1 + 4);
}
