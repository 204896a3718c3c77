use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn qflrl(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qflrl"))
        .args(args)
        .current_dir(cwd)
        .env_remove("QFLRL_THREADS")
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn gradcheck_by_name_writes_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = qflrl(&["run", "gradcheck", "--seed", "1"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = dir.path().join("runs/gradcheck-seed1");
    let s = json(&run.join("summary.json"));
    assert_eq!(s["format_version"], 1);
    assert_eq!(s["experiment"], "gradcheck");
    assert_eq!(s["config"]["params"]["cases"], 20);
    assert!(s["metrics"]["max_relative_error"].as_f64().unwrap() < 1e-5);
    assert!(s["wall_clock_seconds"].as_f64().unwrap() >= 0.0);
    let csv = fs::read_to_string(run.join("metrics.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("case,max_relative_error"));
    assert_eq!(csv.lines().count(), 21);
}

#[test]
fn config_file_with_overrides() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("walker.toml"),
        "experiment = \"walker\"\nseed = 4\nout_dir = \"w\"\n\n[params]\nupdates = 30\nbatch = 8\n",
    )
    .unwrap();
    let out = qflrl(&["run", "walker.toml", "--batch=5", "--learning_rate", "0.01"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let s = json(&dir.path().join("w/summary.json"));
    let p = &s["config"]["params"];
    assert_eq!((p["updates"].as_u64(), p["batch"].as_u64()), (Some(30), Some(5)));
    assert_eq!(p["learning_rate"], 0.01);
    // defaults are echoed
    assert_eq!(p["horizon"], 20);
    assert_eq!(s["seed"], 4);
    let csv = fs::read_to_string(dir.path().join("w/metrics.csv")).unwrap();
    assert_eq!(csv.lines().count(), 31);
    let cp = json(&dir.path().join("w/checkpoint.json"));
    assert_eq!(cp["kind"], "sigmoid_policy");
}

#[test]
fn identical_seed_gives_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    for (out_dir, threads) in [("a", "1"), ("b", "3")] {
        let o = qflrl(&["run", "rbm", "--steps=60", "--seed=5", &format!("--out_dir={out_dir}"), "--threads", threads], dir.path());
        assert!(o.status.success());
    }
    for f in ["metrics.csv", "checkpoint.json"] {
        assert_eq!(fs::read(dir.path().join("a").join(f)).unwrap(), fs::read(dir.path().join("b").join(f)).unwrap(), "{f}");
    }
    let strip = |p: &str| {
        let mut v = json(&dir.path().join(p).join("summary.json"));
        v.as_object_mut().unwrap().remove("wall_clock_seconds");
        v["config"].as_object_mut().unwrap().remove("out_dir");
        v
    };
    assert_eq!(strip("a"), strip("b"));
}

#[test]
fn unknown_keys_exit_2_with_error_record() {
    let dir = tempfile::tempdir().unwrap();
    let out = qflrl(&["run", "xor", "--hiden=3", "--out_dir=x"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let e = json(&dir.path().join("x/error.json"));
    assert_eq!(e["kind"], "config");
    assert_eq!(e["exit_code"], 2);
    assert!(e["message"].as_str().unwrap().contains("hiden"));

    fs::write(dir.path().join("c.toml"), "experiment = \"xor\"\ncolour = 1\n").unwrap();
    assert_eq!(qflrl(&["run", "c.toml"], dir.path()).status.code(), Some(2));
    fs::write(dir.path().join("d.toml"), "experiment = \"xor\"\n[params\n").unwrap();
    assert_eq!(qflrl(&["run", "d.toml"], dir.path()).status.code(), Some(2));
    assert_eq!(qflrl(&["run", "no-such-experiment"], dir.path()).status.code(), Some(2));
}

#[test]
fn bad_thread_count_from_environment_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_qflrl"))
        .args(["run", "qbm", "--steps=5"])
        .current_dir(dir.path())
        .env("QFLRL_THREADS", "none")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn numerical_abort_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = qflrl(&["run", "func1d", "--learning_rate=1e300", "--steps=50", "--out_dir=n"], dir.path());
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    let e = json(&dir.path().join("n/error.json"));
    assert_eq!(e["kind"], "numerical");
    assert!(!dir.path().join("n/summary.json").exists());
}

#[test]
fn cavity_summary_compares_with_the_coherent_ceiling() {
    let dir = tempfile::tempdir().unwrap();
    let out = qflrl(
        &["run", "cavity", "--updates=2", "--batch=4", "--horizon=12", "--trajectory_dumps=2", "--out_dir=c"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let s = json(&dir.path().join("c/summary.json"));
    let m = &s["metrics"];
    assert!((m["coherent_ceiling"].as_f64().unwrap() - (-1.0f64).exp()).abs() < 1e-15);
    let baseline = m["baseline_best_constant_drive"].as_f64().unwrap();
    assert!(baseline > 0.0 && baseline <= (-1.0f64).exp());
    assert_eq!(s["config"]["params"]["sme"]["substeps"], 330);
    let dumps = fs::read_to_string(dir.path().join("c/trajectories.csv")).unwrap();
    assert!(dumps.starts_with("trajectory_id,inner_step,time,X,P0"));
    assert_eq!(dumps.lines().filter(|l| l.starts_with("trajectory_id")).count(), 1);
    assert!(dir.path().join("c/best_checkpoint.json").exists());
}

#[test]
fn denoise_writes_pgm_dumps() {
    let dir = tempfile::tempdir().unwrap();
    let out = qflrl(&["run", "denoise", "--steps=5", "--dumps=1", "--out_dir=d"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let pgm = fs::read_to_string(dir.path().join("d/example_0_denoised.pgm")).unwrap();
    assert!(pgm.starts_with("P2\n16 16\n255\n"));
}

#[test]
fn validate_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = qflrl(&["validate"], dir.path());
    assert!(out.status.success());
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r["valid"], true);
    assert_eq!(r["config"]["defaults"].as_object().unwrap().len(), 12);

    fs::write(dir.path().join("s.toml"), "experiment = \"cavity\"\n[params.sme]\nsubsteps = 20\n").unwrap();
    let out = qflrl(&["validate", "s.toml"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r["valid"], false);
    assert_eq!(r["violations"][0]["rule"], "sme_stability");
    // the rest of the config is echoed with defaults
    assert_eq!(r["config"]["params"]["sme"]["kappa"], 1.0);

    let out = qflrl(&["validate", "cavity", "--window=80"], dir.path());
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r["violations"][0]["rule"], "policy_input");
}

#[test]
fn list_experiments_names_all_twelve() {
    let dir = tempfile::tempdir().unwrap();
    let out = qflrl(&["list-experiments"], dir.path());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 12);
    for name in ["gradcheck", "walker-target", "gridworld-q", "cavity", "reconstruct"] {
        assert!(text.lines().any(|l| l.starts_with(name)), "{name}");
    }
}

#[test]
fn shipped_configs_validate() {
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(&configs).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let out = qflrl(&["validate", path.to_str().unwrap()], &configs);
            assert!(out.status.success(), "{}: {}", path.display(), String::from_utf8_lossy(&out.stdout));
            seen += 1;
        }
    }
    assert!(seen > 0);
}
