use std::path::Path;
use std::process::{Command, Output};

use galois_core::dsl::oracle_text;
use galois_core::gridworld::Task;

fn galois(root: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_galois"))
        .args(args)
        .env("GALOIS_RUN_DIR", root)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap_or(-1)
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn render_prints_a_layout() {
    let tmp = tempfile::tempdir().unwrap();
    let o = galois(tmp.path(), &["render", "--task", "doorkey", "--size", "8", "--seed", "3", "--legend"]);
    assert_eq!(code(&o), 0, "{o:?}");
    let s = stdout(&o);
    assert!(s.starts_with("doorkey n=8 seed=3"), "{s}");
    assert!(s.lines().count() > 8);
    assert_eq!(std::fs::read_dir(tmp.path()).map(|d| d.count()).unwrap_or(0), 0);
}

#[test]
fn usage_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cases: &[&[&str]] = &[
        &["train"],
        &["train", "--task", "chess"],
        &["train", "--task", "doorkey", "--set", "lrr=0.1"],
        &["train", "--task", "doorkey", "--set", "lr=-1"],
        &["train", "--task", "doorkey", "--threshold", "1.5"],
        &["train", "--task", "doorkey", "--seeds", "5..1"],
        &["eval", "--checkpoint", "does/not/exist.json"],
        &["render", "--task", "doorkey", "--size", "2"],
        &["bogus"],
    ];
    for args in cases {
        let o = galois(tmp.path(), args);
        assert_eq!(code(&o), 2, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn program_runs_and_mismatches_exit_4() {
    let tmp = tempfile::tempdir().unwrap();
    let prog = tmp.path().join("doorkey.lhp");
    std::fs::write(&prog, oracle_text(Task::DoorKey)).unwrap();
    let p = prog.to_str().unwrap();

    let out = tmp.path().join("run");
    let o = galois(
        tmp.path(),
        &["run", "--program", p, "--size", "8", "--episodes", "5", "--out", out.to_str().unwrap()],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("success=1.00"), "{}", stdout(&o));
    assert_eq!(manifest(&out)["status"], "ok");
    let traces = std::fs::read_to_string(out.join("traces.jsonl")).unwrap();
    assert_eq!(traces.lines().count(), 5);

    let o = galois(tmp.path(), &["eval", "--program", p, "--sizes", "8,10", "--episodes", "5"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o).lines().count(), 3);

    // Every DoorKey head is also a BoxKey head, so the program runs there.
    let o = galois(tmp.path(), &["eval", "--program", p, "--task", "boxkey", "--sizes", "8", "--episodes", "2"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    // UnlockPickup has no gt_goal.
    let o = galois(tmp.path(), &["eval", "--program", p, "--task", "unlockpickup", "--sizes", "6", "--episodes", "2"]);
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
    let o = galois(tmp.path(), &["run", "--program", p, "--task", "unlockpickup"]);
    assert_eq!(code(&o), 4);

    let bad = tmp.path().join("bad.json");
    std::fs::write(&bad, "{\"format\": 1}").unwrap();
    let o = galois(tmp.path(), &["eval", "--checkpoint", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn train_extract_eval_reuse_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("t");
    let o = galois(
        tmp.path(),
        &[
            "train", "--task", "doorkey", "--size", "6", "--seed", "1", "--episodes", "40",
            "--set", "eval_every=20", "--set", "eval_episodes=4", "--set", "batch_size=64",
            "--out", out.to_str().unwrap(),
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("seed 1:"), "{}", stdout(&o));
    let m = manifest(&out);
    assert_eq!(m["status"], "ok");
    assert_eq!(m["command"], "train");
    for f in ["config.toml", "metrics.jsonl", "metrics.csv", "checkpoint.json", "best.json", "program.lhp", "summary.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let csv = std::fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert!(csv.starts_with("run,seed,kind,episode,metric,value"));

    // The written config reproduces the run's settings.
    let again = tmp.path().join("again");
    let o = galois(
        tmp.path(),
        &["train", "--config", out.join("config.toml").to_str().unwrap(), "--out", again.to_str().unwrap()],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        std::fs::read_to_string(out.join("program.lhp")).unwrap().lines().filter(|l| !l.starts_with('#')).collect::<Vec<_>>(),
        std::fs::read_to_string(again.join("program.lhp")).unwrap().lines().filter(|l| !l.starts_with('#')).collect::<Vec<_>>(),
    );

    let ck = out.join("best.json");
    let ck = ck.to_str().unwrap();
    let o = galois(tmp.path(), &["extract", "--checkpoint", ck, "--threshold", "0.3"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("gt_goal"), "{}", stdout(&o));
    let o = galois(tmp.path(), &["extract", "--checkpoint", ck, "--threshold", "-0.1"]);
    assert_eq!(code(&o), 2);

    let o = galois(tmp.path(), &["eval", "--checkpoint", ck, "--sizes", "6", "--episodes", "3"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = galois(tmp.path(), &["eval", "--checkpoint", ck, "--task", "boxkey", "--sizes", "8", "--episodes", "2"]);
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));

    let r = tmp.path().join("r");
    let o = galois(
        tmp.path(),
        &[
            "reuse", "--from", ck, "--to", "boxkey", "--holes", "where,what", "--size", "8", "--episodes", "20",
            "--set", "eval_every=20", "--set", "eval_episodes=2", "--set", "batch_size=64",
            "--compare-scratch", "--out", r.to_str().unwrap(),
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(manifest(&r.join("warm"))["status"], "ok");
    assert_eq!(manifest(&r.join("scratch"))["status"], "ok");
    let o = galois(tmp.path(), &["reuse", "--from", ck, "--to", "boxkey", "--holes", "when"]);
    assert_eq!(code(&o), 2);

    // Default output lands under GALOIS_RUN_DIR.
    let o = galois(tmp.path(), &["extract", "--checkpoint", ck]);
    assert_eq!(code(&o), 0);
    let made: Vec<_> = std::fs::read_dir(tmp.path())
        .unwrap()
        .filter_map(|e| e.ok()?.file_name().into_string().ok())
        .filter(|n| n.starts_with("extract-doorkey"))
        .collect();
    assert_eq!(made.len(), 2, "{made:?}");
}
