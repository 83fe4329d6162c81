use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use zalms::harness::{run_ensemble, EnsembleConfig};
use zalms_cli::ExperimentConfig;

fn zalms(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zalms"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn small_run(dir: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        "run",
        "--out",
        dir.to_str().unwrap(),
        "--runs",
        "40",
        "--iters",
        "120",
        "--quiet",
    ];
    args.extend_from_slice(extra);
    zalms(&args)
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("cfg.json");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn default_run_writes_the_full_file_set() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"joint_dumps":[{"i":2,"j":7,"at_iter":60,"samples":50}]}"#,
    );
    let out_dir = tmp.path().join("out");
    let out = small_run(&out_dir, &["--config", &cfg]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let mut names: Vec<String> = fs::read_dir(&out_dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    assert_eq!(
        names,
        [
            "comparison.csv",
            "joint_2_7_60.csv",
            "manifest.json",
            "mc.csv",
            "theory_baseline.csv",
            "theory_exact.csv"
        ]
    );
    let mc = fs::read_to_string(out_dir.join("mc.csv")).unwrap();
    let header: Vec<&str> = mc.lines().next().unwrap().split(',').collect();
    assert_eq!(&header[..3], ["n", "mse", "emse"]);
    assert_eq!(header[3], "m_0");
    assert_eq!(header[19], "m_16");
    assert_eq!(mc.lines().count(), 121);
    let cmp = fs::read_to_string(out_dir.join("comparison.csv")).unwrap();
    assert_eq!(
        cmp.lines().next().unwrap(),
        "n,mse_theory,mse_mc,mse_mc_stderr,emse_theory,emse_mc,emse_mc_stderr,emse_in_band"
    );
    let joint = fs::read_to_string(out_dir.join("joint_2_7_60.csv")).unwrap();
    assert_eq!(joint.lines().count(), 51);
}

#[test]
fn exact_only_skips_the_baseline_curve() {
    let tmp = tempfile::tempdir().unwrap();
    let out = small_run(tmp.path(), &["--models", "exact", "--no-mc"]);
    assert_eq!(code(&out), 0);
    assert!(tmp.path().join("theory_exact.csv").exists());
    assert!(!tmp.path().join("theory_baseline.csv").exists());
    assert!(!tmp.path().join("mc.csv").exists());
}

#[test]
fn same_seed_gives_identical_files() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b, c) = (
        tmp.path().join("a"),
        tmp.path().join("b"),
        tmp.path().join("c"),
    );
    assert_eq!(code(&small_run(&a, &["--seed", "9"])), 0);
    assert_eq!(code(&small_run(&b, &["--seed", "9"])), 0);
    assert_eq!(code(&small_run(&c, &["--seed", "10"])), 0);
    let read = |d: &Path, f: &str| fs::read(d.join(f)).unwrap();
    for f in [
        "mc.csv",
        "comparison.csv",
        "theory_exact.csv",
        "joint_2_7_800.csv",
    ] {
        assert_eq!(read(&a, f), read(&b, f), "{f}");
    }
    assert_ne!(read(&a, "mc.csv"), read(&c, "mc.csv"));
}

#[test]
fn manifest_reproduces_the_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_eq!(
        code(&small_run(&a, &["--seed", "4", "--models", "baseline"])),
        0
    );
    let manifest = a.join("manifest.json");
    let out = zalms(&[
        "run",
        "--manifest",
        manifest.to_str().unwrap(),
        "--out",
        b.to_str().unwrap(),
        "--quiet",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let m: serde_json::Value = serde_json::from_slice(&fs::read(&manifest).unwrap()).unwrap();
    for f in m["files"].as_array().unwrap() {
        let f = f.as_str().unwrap();
        if f != "manifest.json" {
            assert_eq!(
                fs::read(a.join(f)).unwrap(),
                fs::read(b.join(f)).unwrap(),
                "{f}"
            );
        }
    }
}

#[test]
fn csv_values_round_trip_exactly() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(
        code(&small_run(
            tmp.path(),
            &["--seed", "3", "--models", "exact"]
        )),
        0
    );
    let cfg = ExperimentConfig::default();
    let stats = run_ensemble(
        &cfg.plant().unwrap(),
        &cfg.input_model().unwrap(),
        &cfg.algo_params().unwrap(),
        &EnsembleConfig::new(40, 120, 3),
    )
    .unwrap();
    let mc = fs::read_to_string(tmp.path().join("mc.csv")).unwrap();
    for (n, line) in mc.lines().skip(1).enumerate() {
        let cols: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        assert_eq!(cols[0] as usize, n);
        assert_eq!(cols[1].to_bits(), stats.mse[n].to_bits());
        assert_eq!(cols[2].to_bits(), stats.emse[n].to_bits());
        for i in 0..17 {
            assert_eq!(cols[3 + i].to_bits(), stats.mean_error[n][i].to_bits());
        }
    }
}

#[test]
fn config_errors_exit_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), r#"{"input":{"ar_coeff":1.2}}"#);
    let out = small_run(&tmp.path().join("o"), &["--config", &cfg]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("input.ar_coeff"));

    let cfg = write_config(tmp.path(), r#"{"plant":{"noise":0.1}}"#);
    assert_eq!(
        code(&small_run(&tmp.path().join("o"), &["--config", &cfg])),
        1
    );
    let missing = tmp.path().join("nope.json");
    assert_eq!(
        code(&small_run(
            &tmp.path().join("o"),
            &["--config", missing.to_str().unwrap()]
        )),
        1
    );
    assert_eq!(
        code(&small_run(&tmp.path().join("o"), &["--models", "all"])),
        1
    );
    let o = tmp.path().join("o");
    assert_eq!(
        code(&zalms(&[
            "run",
            "--out",
            o.to_str().unwrap(),
            "--runs",
            "0"
        ])),
        1
    );
    assert_eq!(code(&zalms(&["run", "--bogus"])), 1);
    assert_eq!(code(&zalms(&["--help"])), 0);
}

#[test]
fn diverging_filter_is_a_compute_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), r#"{"algo":{"mu":5.0},"models":["exact"]}"#);
    let out = small_run(&tmp.path().join("o"), &["--config", &cfg]);
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn verify_lemmas_passes_and_detects_a_sign_fault() {
    let ok = zalms(&[
        "verify-lemmas",
        "--points",
        "30",
        "--mc-samples",
        "20000",
        "--near-singular",
    ]);
    assert_eq!(code(&ok), 0, "{}", String::from_utf8_lossy(&ok.stdout));
    let text = String::from_utf8_lossy(&ok.stdout);
    assert!(text.contains("[default] 30 grid points"));
    assert!(text.contains("[correlation 0.999]"));
    assert!(!text.contains("FAIL"));

    let bad = zalms(&[
        "verify-lemmas",
        "--points",
        "30",
        "--mc-samples",
        "0",
        "--inject-sign-fault",
    ]);
    assert_eq!(code(&bad), 3);
    assert!(String::from_utf8_lossy(&bad.stdout).contains("FAIL"));
}
