use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn escapekit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_escapekit")).args(args).output().unwrap()
}

fn run_config(sub: &str, config: &str, out: &Path, extra: &[&str]) -> Output {
    let cfg = configs().join(config);
    let mut args = vec![sub, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--quiet"];
    args.extend_from_slice(extra);
    escapekit(&args)
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn certify_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    for (cfg, want) in [
        ("certify_euclidean.json", 0),
        ("certify_radial_power.json", 0),
        ("certify_cylinder_alpha0.json", 1),
    ] {
        let o = run_config("certify", cfg, &dir.path().join(cfg), &[]);
        assert_eq!(code(&o), want, "{cfg}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let csv = std::fs::read_to_string(dir.path().join("certify_cylinder_alpha0.json/certification.csv")).unwrap();
    assert!(csv.starts_with("# config_sha256="));
    let json: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("certify_cylinder_alpha0.json/certification.json")).unwrap(),
    )
    .unwrap();
    assert!(json["report"]["worst_margin"].as_f64().unwrap() < -0.1);
    assert_eq!(json["seed"], 0);
}

#[test]
fn geodesic_runs() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_config("geodesic", "geodesic_euclidean.json", dir.path(), &[]);
    assert_eq!(code(&o), 0);
    let shots = std::fs::read_to_string(dir.path().join("shots.csv")).unwrap();
    assert_eq!(shots.lines().count(), 2 + 16);

    let cyl = dir.path().join("cyl");
    let o = run_config("geodesic", "geodesic_cylinder_tangential.json", &cyl, &[]);
    assert_eq!(code(&o), 0);
    let shots = std::fs::read_to_string(cyl.join("shots.csv")).unwrap();
    assert!(shots.lines().nth(2).unwrap().contains(",trapped,"));
    let trace = std::fs::read_to_string(cyl.join("trace_000.csv")).unwrap();
    assert_eq!(trace.lines().nth(1).unwrap(), "t,x1,x2,v1,v2,r,h,speed_drift");
}

#[test]
fn geodesic_flag_mode() {
    let dir = tempfile::tempdir().unwrap();
    let metric = configs().join("metric_radial_power.json");
    let o = escapekit(&[
        "geodesic",
        "--metric",
        metric.to_str().unwrap(),
        "--x0",
        "-1.5,0.5",
        "--dir",
        "0,-1",
        "--T",
        "20",
        "--dt",
        "0.002",
        "--out",
        dir.path().to_str().unwrap(),
        "--quiet",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(o.stdout.is_empty());
    let trace = std::fs::read_to_string(dir.path().join("trace_000.csv")).unwrap();
    let last = trace.lines().last().unwrap();
    assert!(last.starts_with("2.000000000e1,"), "{last}");
}

#[test]
fn wave_radial_m2_is_finite_time_zero() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_config("wave-radial", "wave_radial_m2.json", dir.path(), &[]);
    assert_eq!(code(&o), 0);
    let report = std::fs::read_to_string(dir.path().join("report.txt")).unwrap();
    assert!(report.contains("class: finite_time_zero"));
    let energy = std::fs::read_to_string(dir.path().join("energy.csv")).unwrap();
    assert_eq!(energy.lines().nth(1).unwrap(), "t,E_total,E_local");
}

#[test]
fn bad_assumption_is_exit_2_with_named_inequality() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_config("wave-general", "spacetime_bad_constraint.json", dir.path(), &[]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("(s2 + 1) r0^(s2 - 1) < m2"));
}

#[test]
fn config_errors_are_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"metric": {"dim": 2, "family": "euclidean"}, "bogus": 1}"#).unwrap();
    let o = escapekit(&["certify", "--config", bad.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    let o = escapekit(&["certify", "--config", "/nonexistent.json"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn uniform_decay_m1_bounded() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("decay.json");
    // Coarser than the shipped config to keep the test short.
    let text = std::fs::read_to_string(configs().join("uniform_decay_m1.json"))
        .unwrap()
        .replace("\"N_r\": 4096", "\"N_r\": 2048");
    std::fs::write(&cfg, text).unwrap();
    let out = dir.path().join("out");
    let o = escapekit(&["wave-general", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--quiet"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = std::fs::read_to_string(out.join("report.txt")).unwrap();
    assert!(report.contains("verdict: PASS"));
}

fn read_all(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    for (sub, cfg) in [
        ("geodesic", "geodesic_radial_power.json"),
        ("wave-general", "wave_general_energy.json"),
        ("certify", "certify_radial_power.json"),
    ] {
        let (a, b) = (dir.path().join(format!("{cfg}.a")), dir.path().join(format!("{cfg}.b")));
        assert_eq!(code(&run_config(sub, cfg, &a, &["--seed", "7"])), 0);
        assert_eq!(code(&run_config(sub, cfg, &b, &["--seed", "7"])), 0);
        let (fa, fb) = (read_all(&a), read_all(&b));
        assert!(!fa.is_empty());
        assert_eq!(fa, fb, "{cfg}");
        for (name, bytes) in &fa {
            if name.ends_with(".csv") || name.ends_with(".txt") {
                let head = String::from_utf8_lossy(&bytes[..bytes.len().min(200)]).into_owned();
                assert!(head.starts_with("# config_sha256=") && head.lines().next().unwrap().ends_with(" seed=7"));
            }
        }
    }
}

#[test]
fn seed_changes_header_and_sampling() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run_config("certify", "certify_euclidean.json", &a, &["--seed", "1"]);
    run_config("certify", "certify_euclidean.json", &b, &["--seed", "2"]);
    let ha = std::fs::read_to_string(a.join("certification.csv")).unwrap();
    let hb = std::fs::read_to_string(b.join("certification.csv")).unwrap();
    assert_ne!(ha.lines().next(), hb.lines().next());
}
