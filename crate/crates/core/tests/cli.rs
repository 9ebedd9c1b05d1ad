use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_aggrsim");

fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

fn aggrsim(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("AGGRSIM_SEED").output().expect("binary runs")
}

fn run_to(cfg: &Path, out: &Path) -> Output {
    aggrsim(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])
}

fn write_cfg(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("scenario.cfg");
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn golden_trajectories() {
    for name in ["owa_small", "oms_small"] {
        let dir = tempfile::tempdir().unwrap();
        let out = run_to(&golden(&format!("{name}.cfg")), dir.path());
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let got = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
        let want = fs::read_to_string(golden(&format!("{name}.trajectory.csv"))).unwrap();
        assert_eq!(got, want, "{name}");
    }
}

#[test]
fn repeated_runs_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cfg = golden("oms_small.cfg");
    assert!(run_to(&cfg, a.path()).status.success());
    assert!(run_to(&cfg, b.path()).status.success());
    for f in ["trajectory.csv", "summary.json"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn reference_run_shape() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "mechanism=owa\nN=5\nT=500\nm=20\nbands=default\nstrategies=truthful\nseed=1\n");
    let out_dir = dir.path().join("out");
    assert!(run_to(&cfg, &out_dir).status.success());
    let csv = fs::read_to_string(out_dir.join("trajectory.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 500 * 5);
    assert!(!csv.contains('\r'));
}

#[test]
fn seed_override_changes_output() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cfg = golden("owa_small.cfg");
    assert!(run_to(&cfg, a.path()).status.success());
    let out = Command::new(BIN)
        .args(["run", "--config", cfg.to_str().unwrap(), "--out", b.path().to_str().unwrap()])
        .env("AGGRSIM_SEED", "12")
        .output()
        .unwrap();
    assert!(out.status.success());
    let summary = fs::read_to_string(b.path().join("summary.json")).unwrap();
    assert!(summary.contains("\"seed\": 12"));
    assert_ne!(fs::read(a.path().join("trajectory.csv")).unwrap(), fs::read(b.path().join("trajectory.csv")).unwrap());
}

#[test]
fn invalid_config_exits_2_without_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "mechanism=owa\nN=5\nT=500\nflip_epsilon=0.6\n");
    let out_dir = dir.path().join("out");
    let out = run_to(&cfg, &out_dir);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 4"));
    assert!(!out_dir.exists() || fs::read_dir(&out_dir).unwrap().next().is_none());
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = aggrsim(&["verify", "--suite", "bogus", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let cfg = golden("owa_small.cfg");
    let out =
        aggrsim(&["sweep", "--config", cfg.to_str().unwrap(), "--axis", "K=1", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(aggrsim(&["frobnicate"]).status.code(), Some(2));
    assert!(fs::read_dir(dir.path()).unwrap().next().is_none());
}

#[test]
fn failing_checks_exit_1() {
    // Two seeds is below the replication floor, so the statistical checks
    // report themselves inconclusive.
    let dir = tempfile::tempdir().unwrap();
    let out = aggrsim(&["verify", "--suite", "responsiveness", "--seeds", "2", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let verdicts = fs::read_to_string(dir.path().join("verdicts.csv")).unwrap();
    assert!(verdicts.starts_with("check_name,passed,observed,bound_or_expected,tolerance,seeds_used,notes\n"));
    assert!(verdicts.contains("inconclusive"));
}

#[test]
fn truthfulness_suite_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = aggrsim(&["verify", "--suite", "truthfulness", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let verdicts = fs::read_to_string(dir.path().join("verdicts.csv")).unwrap();
    for kind in ["owa", "oms", "hedge", "em", "exp3"] {
        assert!(verdicts.contains(&format!("truthfulness/{kind},true")), "{kind}");
    }
}

#[test]
fn sweep_is_deterministic_and_jobs_independent() {
    let cfg = golden("owa_small.cfg");
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for (dir, jobs) in [(&a, "1"), (&b, "3")] {
        let out = aggrsim(&[
            "sweep",
            "--jobs",
            jobs,
            "--config",
            cfg.to_str().unwrap(),
            "--axis",
            "mechanism=owa,hedge,median",
            "--seeds",
            "4",
            "--out",
            dir.path().to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for f in ["sweep.csv", "sweep_summary.csv"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    let rows = fs::read_to_string(a.path().join("sweep.csv")).unwrap();
    assert_eq!(rows.lines().count(), 1 + 3 * 4);
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "cfg") {
            aggrsim::cli::load_config(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            seen += 1;
        }
    }
    assert!(seen >= 5);
}
