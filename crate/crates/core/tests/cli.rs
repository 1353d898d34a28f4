//! End-to-end runs of the `vessel-hybrid` binary on a tiny dataset.

use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_vessel-hybrid");

const TINY: &[&str] = &[
    "--hours",
    "2",
    "--episode-seconds",
    "600",
    "--seed",
    "7",
    "--window",
    "30",
    "--horizon",
    "120",
    "--train-stride",
    "30",
    "--phase1-epochs",
    "1",
    "--phase2-epochs",
    "2",
    "--hidden",
    "6",
];

fn run(out: &Path, cmd: &str, extra: &[&str]) -> Output {
    Command::new(BIN).arg(cmd).args(TINY).args(extra).env("VESSEL_HYBRID_OUT", out).output().expect("binary runs")
}

fn ok(o: &Output) {
    assert!(o.status.success(), "exit {:?}: {}", o.status.code(), String::from_utf8_lossy(&o.stderr));
}

fn pipeline(out: &Path) {
    ok(&run(out, "simulate", &[]));
    ok(&run(out, "train", &["--model", "Pro+Lin-2P"]));
    ok(&run(out, "evaluate", &["--model", "Pro+Lin-2P"]));
    ok(&run(out, "sweep", &["--model", "Pro+Lin-2P", "--thresholds", "0,100"]));
}

fn files(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().unwrap() != "config.txt" {
                out.push((p.strip_prefix(root).unwrap().display().to_string(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn reruns_are_byte_identical_and_reports_keep_their_schema() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    pipeline(a.path());
    pipeline(b.path());
    let (fa, fb) = (files(a.path()), files(b.path()));
    assert!(fa.len() > 10);
    assert_eq!(fa.iter().map(|f| &f.0).collect::<Vec<_>>(), fb.iter().map(|f| &f.0).collect::<Vec<_>>());
    for (x, y) in fa.iter().zip(&fb) {
        assert!(x.1 == y.1, "{} differs between runs", x.0);
    }

    let run_dir = a.path().join("Pro+Lin-2P");
    let report = std::fs::read_to_string(run_dir.join("report.csv")).unwrap();
    let rows: Vec<&str> = report.lines().collect();
    assert_eq!(rows[0], "metric,state,value,ci");
    let keys: Vec<String> = rows[1..].iter().map(|r| r.split(',').take(2).collect::<Vec<_>>().join(",")).collect();
    assert_eq!(
        keys,
        [
            "state_rmse,u",
            "state_rmse,w",
            "state_rmse,p",
            "state_rmse,r",
            "state_rmse,phi",
            "trajectory_rmse,xy",
            "diverged_samples,all",
            "samples,all"
        ]
    );
    let sweep = std::fs::read_to_string(run_dir.join("sweep.csv")).unwrap();
    let mut lines = sweep.lines();
    assert_eq!(
        lines.next().unwrap(),
        "mode,threshold_percent,rmse_u,rmse_w,rmse_p,rmse_r,rmse_phi,trajectory_rmse,trajectory_ci,diverged"
    );
    let modes: Vec<&str> = lines.map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(modes, ["unconstrained", "clamped", "fine_tuned", "clamped", "fine_tuned"]);
    let history = std::fs::read_to_string(run_dir.join("history.csv")).unwrap();
    assert_eq!(history.lines().count(), 1 + 3);
    for f in ["checkpoint.json", "training.json", "summary.json", "per_minute.csv", "range.json"] {
        assert!(run_dir.join(f).is_file(), "{f} missing");
    }
    for f in ["train.txt", "val.txt", "test.txt", "config.txt"] {
        assert!(a.path().join("data").join(f).is_file(), "{f} missing");
    }
}

#[test]
fn config_file_is_read_and_flags_override_it() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.conf");
    std::fs::write(&cfg, "# tiny\nhours = 2\nepisode_seconds = 600\nseed = 3\n").unwrap();
    let o = Command::new(BIN)
        .args(["simulate", "--config", cfg.to_str().unwrap(), "--seed", "4"])
        .env("VESSEL_HYBRID_OUT", dir.path())
        .output()
        .unwrap();
    ok(&o);
    let written = std::fs::read_to_string(dir.path().join("data/config.txt")).unwrap();
    assert!(written.lines().any(|l| l == "seed = 4"));
    assert!(written.lines().any(|l| l == "episode_seconds = 600"));
}

#[test]
fn exit_codes_classify_failures() {
    let dir = tempfile::tempdir().unwrap();
    let code = |args: &[&str]| {
        Command::new(BIN).args(args).env("VESSEL_HYBRID_OUT", dir.path()).output().unwrap().status.code()
    };
    assert_eq!(code(&["simulate", "--hours", "0"]), Some(2));
    assert_eq!(code(&["train", "--model", "none-none"]), Some(2));
    assert_eq!(code(&["frobnicate"]), Some(2));
    assert_eq!(code(&["simulate", "--colour", "red"]), Some(2));
    assert_eq!(code(&["evaluate", "--checkpoint", "/nonexistent/checkpoint.json"]), Some(4));
    assert_eq!(code(&["train", "--data-dir", "/nonexistent/data"]), Some(4));
    let bad = dir.path().join("bad.conf");
    std::fs::write(&bad, "seed = 1\nseed = 2\n").unwrap();
    assert_eq!(code(&["simulate", "--config", bad.to_str().unwrap()]), Some(4));
}

#[test]
fn diverging_training_exits_with_code_3() {
    let dir = tempfile::tempdir().unwrap();
    ok(&run(dir.path(), "simulate", &[]));
    let o = run(dir.path(), "train", &["--model", "Lin-2P", "--learning-rate", "1e3", "--clip-norm", "1e12"]);
    assert_eq!(o.status.code(), Some(3), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    let history = std::fs::read_to_string(dir.path().join("Lin-2P/history.csv")).unwrap();
    assert!(history.contains("# aborted:"));
}
