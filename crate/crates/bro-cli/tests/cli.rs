//! End-to-end tests of the `bro` binary surface.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const CONFIG: &str = r#"
[problem]
name = "newsvendor_exp"
c = 1.0
p = 3.0
theta_c = 1.0
x_min = 0.0
x_max = 4.0

[prior]
kind = "gamma"
alpha0 = 1.0
beta0 = 2.0

[experiment]
specs = ["mean", "cvar:alpha=0.9"]
n_list = [50, 100]
replications = 3
outer_m = 300
x_list = [1.0]
seed = 11

[optimizer]
grid_points = 41
refine_rounds = 2
"#;

fn bro(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bro"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("spawn bro")
}

fn write_config(dir: &Path) -> String {
    let path = dir.join("exp.toml");
    fs::write(&path, CONFIG).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn risk_eval_applies_specs_to_sample_file() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path());
    let samples = tmp.path().join("samples.txt");
    fs::write(&samples, "1 2 3 4 5\n").unwrap();
    let out = bro(
        &[
            "risk-eval",
            "--config",
            &cfg,
            "--samples",
            samples.to_str().unwrap(),
            "--out",
            "o",
        ],
        tmp.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = fs::read_dir(tmp.path().join("o"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| {
            p.file_name()
                .unwrap()
                .to_string_lossy()
                .starts_with("risk_eval_")
        })
        .expect("risk_eval csv");
    let text = fs::read_to_string(csv).unwrap();
    // mean of 1..5 is 3; cvar:alpha=0.9 is the max
    assert!(
        text.lines()
            .any(|l| l.contains(",mean,") && l.contains(",3,")),
        "{text}"
    );
    assert!(
        text.lines()
            .any(|l| l.contains("cvar:alpha=0.9") && l.contains(",5,")),
        "{text}"
    );
}

#[test]
fn solve_is_byte_identical_across_runs_and_workers() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path());
    let run = |out: &str, workers: &str| {
        let o = bro(
            &[
                "solve",
                "--config",
                &cfg,
                "--workers",
                workers,
                "--out",
                out,
            ],
            tmp.path(),
        );
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let dir = tmp.path().join(out);
        let csv = fs::read_dir(&dir)
            .unwrap()
            .map(|e| e.unwrap().path())
            .find(|p| p.extension().is_some_and(|e| e == "csv"))
            .unwrap();
        (
            fs::read(csv).unwrap(),
            fs::read(dir.join("summary.json")).unwrap(),
        )
    };
    let (a_csv, a_sum) = run("o1", "1");
    let (b_csv, b_sum) = run("o2", "4");
    assert_eq!(a_csv, b_csv);
    assert_eq!(a_sum, b_sum);
}

#[test]
fn unknown_config_key_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("bad.toml");
    fs::write(&path, CONFIG.replace("c = 1.0", "c = 1.0\ntypo_key = 1.0")).unwrap();
    let out = bro(
        &["consistency", "--config", path.to_str().unwrap()],
        tmp.path(),
    );
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("typo_key"), "stderr: {err}");
}

#[test]
fn seed_is_required_somewhere() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("noseed.toml");
    fs::write(&path, CONFIG.replace("seed = 11", "")).unwrap();
    let out = bro(&["solve", "--config", path.to_str().unwrap()], tmp.path());
    assert!(!out.status.success());
    let with_flag = bro(
        &[
            "solve",
            "--config",
            path.to_str().unwrap(),
            "--seed",
            "5",
            "--out",
            "o",
        ],
        tmp.path(),
    );
    assert!(
        with_flag.status.success(),
        "{}",
        String::from_utf8_lossy(&with_flag.stderr)
    );
}

#[test]
fn consistency_row_count_contract() {
    let tmp = tempfile::tempdir().unwrap();
    // degenerate run: one n, one replication, one spec, one x
    let cfg_text = CONFIG
        .replace(
            "specs = [\"mean\", \"cvar:alpha=0.9\"]",
            "specs = [\"mean\"]",
        )
        .replace("n_list = [50, 100]", "n_list = [100]")
        .replace("replications = 3", "replications = 1");
    let path = tmp.path().join("one.toml");
    fs::write(&path, cfg_text).unwrap();
    let out = bro(
        &[
            "consistency",
            "--config",
            path.to_str().unwrap(),
            "--out",
            "o",
        ],
        tmp.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = fs::read_dir(tmp.path().join("o"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| {
            p.file_name()
                .unwrap()
                .to_string_lossy()
                .starts_with("consistency_")
        })
        .unwrap();
    let text = fs::read_to_string(csv).unwrap();
    // header + (|x_list| * |specs| + 1) data rows
    assert_eq!(text.lines().count(), 1 + 2, "{text}");
}
