use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_smoothrep"))
}

fn stock(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("instances").join(name)
}

fn run(args: &[&str], instance: &Path, out: &Path) -> i32 {
    let st = bin().args(args).arg("--instance").arg(instance).arg("--out").arg(out).env("SMOOTHREP_THREADS", "1").output().unwrap();
    st.status.code().unwrap()
}

fn report(dir: &Path) -> serde_json::Value {
    let mut v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();
    v.as_object_mut().unwrap().remove("timing");
    v
}

#[test]
fn passing_instance_exits_zero_and_writes_tables() {
    let out = tempfile::tempdir().unwrap();
    assert_eq!(run(&["moreau"], &stock("moreau.json"), out.path()), 0);
    let r = report(out.path());
    assert_eq!(r["command"], "moreau");
    assert_eq!(r["passed"], true);
    let csvs =
        std::fs::read_dir(out.path()).unwrap().filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "csv")).count();
    assert!(csvs > 0);
}

#[test]
fn reports_repeat_exactly() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert_eq!(run(&["setdist"], &stock("ball.json"), a.path()), 0);
    assert_eq!(run(&["setdist"], &stock("ball.json"), b.path()), 0);
    assert_eq!(report(a.path()), report(b.path()));
}

#[test]
fn seed_flag_overrides_instance_seed() {
    let out = tempfile::tempdir().unwrap();
    assert_eq!(run(&["moreau", "--seed", "5"], &stock("moreau.json"), out.path()), 0);
    assert_eq!(report(out.path())["seed"], 5);
}

#[test]
fn failed_check_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("wrong.json");
    let text = r#"{
        "name": "wrong", "seed": 1,
        "shapes": { "origin": { "type": "points", "points": [[0.0]] }, "one": { "type": "points", "points": [[1.0]] } },
        "tasks": { "setdist": [{ "a": "origin", "b": "one", "expect": 3.0, "tol": 0.02 }] }
    }"#;
    std::fs::write(&inst, text).unwrap();
    assert_eq!(run(&["setdist"], &inst, &dir.path().join("out")), 1);
    assert_eq!(report(&dir.path().join("out"))["passed"], false);
}

#[test]
fn missing_tasks_and_files_exit_two() {
    let out = tempfile::tempdir().unwrap();
    assert_eq!(run(&["moreau"], &stock("box.json"), out.path()), 2);
    assert_eq!(run(&["check"], &out.path().join("absent.json"), out.path()), 2);
}
