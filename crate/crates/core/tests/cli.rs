use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use dephasim::dynamics::Method;
use dephasim::io::read_trace_file;
use dephasim::measures::blp_measure;
use dephasim::postprocess::smooth;
use dephasim::{OptimizationResult, SmoothingConfig};

fn dephasim(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dephasim"))
        .current_dir(dir)
        .env_remove("DEPHASIM_THREADS")
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn negative_lambda_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dephasim(dir.path(), &["analytic", "--lambda", "-1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("invalid lambda"), "{}", stderr(&out));

    fs::write(dir.path().join("bad.json"), r#"{"environment": {"lambda": -2}}"#).unwrap();
    let out = dephasim(dir.path(), &["simulate", "--config", "bad.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("lambda"));
}

#[test]
fn simulate_defaults_give_positive_smoothed_blp() {
    let dir = tempfile::tempdir().unwrap();
    let out = dephasim(dir.path(), &["simulate", "--smoothed-out", "smoothed.csv"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let line = stdout(&out);
    assert!(line.starts_with("mode=monte_carlo blp="), "{line}");
    assert!(line.contains("seed=0"));

    let raw = read_trace_file(&dir.path().join("trace.csv"), Method::MonteCarlo).unwrap();
    assert_eq!(raw.len(), 500);
    assert!((raw.grid()[499] - 2.5e-3).abs() < 1e-15);
    let smoothed = smooth(&raw, &SmoothingConfig::default()).unwrap();
    assert!(blp_measure(&smoothed) > 0.0);
    let written = read_trace_file(&dir.path().join("smoothed.csv"), Method::MonteCarlo).unwrap();
    assert_eq!(written.values(), smoothed.values());
}

#[test]
fn flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("run.json"),
        r#"{"environment": {"s": 1.0}, "grid": {"num_points": 50}}"#,
    )
    .unwrap();
    let base = dephasim(dir.path(), &["analytic", "--config", "run.json", "--out", "a.csv"]);
    assert!(stdout(&base).contains("blp=0.000000"), "{}", stdout(&base));
    let over = dephasim(dir.path(), &["analytic", "--config", "run.json", "--s", "4", "--out", "b.csv"]);
    assert!(!stdout(&over).contains("blp=0.000000"));
    let b = read_trace_file(&dir.path().join("b.csv"), Method::ClosedForm).unwrap();
    assert_eq!(b.len(), 50);
}

#[test]
fn cutoff_in_hz_matches_rad_per_s() {
    let dir = tempfile::tempdir().unwrap();
    dephasim(dir.path(), &["analytic", "--cutoff-hz", "320", "--out", "hz.csv"]);
    dephasim(
        dir.path(),
        &["analytic", "--omega-c-rad-s", &format!("{}", 2.0 * std::f64::consts::PI * 320.0), "--out", "rad.csv"],
    );
    assert_eq!(
        fs::read(dir.path().join("hz.csv")).unwrap(),
        fs::read(dir.path().join("rad.csv")).unwrap()
    );
}

#[test]
fn sweep_over_s_has_expected_shape() {
    let dir = tempfile::tempdir().unwrap();
    let out = dephasim(dir.path(), &["sweep", "--param", "s", "--from", "1", "--to", "6", "--out", "s.csv"]);
    assert!(out.status.success());
    let text = fs::read_to_string(dir.path().join("s.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("s,blp,protection"));
    let rows: Vec<(f64, f64)> = lines
        .map(|l| {
            let v: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
            (v[0], v[1])
        })
        .collect();
    assert_eq!(rows.len(), 21);
    assert!(rows.iter().filter(|r| r.0 <= 2.0).all(|r| r.1 < 1e-3));
    let peak = rows.iter().max_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
    assert!((4.0..=5.0).contains(&peak.0), "peak at s = {}", peak.0);
}

#[test]
fn optimize_writes_result_and_history() {
    let dir = tempfile::tempdir().unwrap();
    let out = dephasim(
        dir.path(),
        &[
            "optimize", "--pulses", "3", "--total-time", "2.5e-3", "--seed", "7", "--generations", "20",
            "--out", "ndd.json", "--history", "h.csv",
        ],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.lines().next().unwrap().starts_with("ndd T=2.500000000e-3 n=3 ["));
    let result: OptimizationResult =
        serde_json::from_str(&fs::read_to_string(dir.path().join("ndd.json")).unwrap()).unwrap();
    assert_eq!(result.best_sequence.num_pulses(), 3);
    let history = fs::read_to_string(dir.path().join("h.csv")).unwrap();
    assert!(history.starts_with("generation,best_fitness\n"));
    assert_eq!(history.lines().count(), result.fitness_history.len() + 1);
}

#[test]
fn smooth_reports_before_and_after() {
    let dir = tempfile::tempdir().unwrap();
    dephasim(dir.path(), &["simulate", "--realizations", "100", "--out", "raw.csv"]);
    let out = dephasim(dir.path(), &["smooth", "--in", "raw.csv", "--out", "s.csv", "--report"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("\"blp_before\"") && text.contains("\"blp_after\""));
    assert!(dir.path().join("s.csv").is_file());
    let missing = dephasim(dir.path(), &["smooth", "--in", "nope.csv"]);
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn filter_and_measure_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = dephasim(dir.path(), &["filter", "--family", "cpmg", "--pulses", "2", "--frequencies", "5", "--out", "f.csv"]);
    assert!(out.status.success());
    assert!(stdout(&out).starts_with("cpmg2 T=2.500000000e-3 n=2 ["));
    let text = fs::read_to_string(dir.path().join("f.csv")).unwrap();
    assert!(text.starts_with("omega_rad_s,filter_power,spectral_density\n"));
    assert_eq!(text.lines().count(), 6);

    dephasim(dir.path(), &["analytic", "--out", "a.csv"]);
    let out = dephasim(dir.path(), &["measure", "--in", "a.csv", "--out", "m.json"]);
    assert!(out.status.success());
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("m.json")).unwrap()).unwrap();
    assert!(report["blp"].as_f64().unwrap() > 0.0);
    assert!(!report["backflow_intervals"].as_array().unwrap().is_empty());
}

#[test]
fn exit_codes_for_usage() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(dephasim(dir.path(), &["--help"]).status.code(), Some(0));
    assert_eq!(dephasim(dir.path(), &["--version"]).status.code(), Some(0));
    assert_eq!(dephasim(dir.path(), &["bogus"]).status.code(), Some(1));
    assert_eq!(dephasim(dir.path(), &["reproduce", "fig9"]).status.code(), Some(1));
    let help = stdout(&dephasim(dir.path(), &["--help"]));
    assert!(help.contains("t_s,gamma"));
}

#[test]
fn threads_flag_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    for (threads, name) in [("1", "one.csv"), ("3", "three.csv")] {
        let out = dephasim(
            dir.path(),
            &["--threads", threads, "simulate", "--realizations", "64", "--seed", "4", "--out", name],
        );
        assert!(out.status.success());
    }
    assert_eq!(
        fs::read(dir.path().join("one.csv")).unwrap(),
        fs::read(dir.path().join("three.csv")).unwrap()
    );
}

#[test]
fn reproduce_is_deterministic_with_manifest() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let out = dephasim(dir.path(), &["reproduce", "all", "--quick", "--out-dir", "figs"]);
        assert!(out.status.success(), "{}", stderr(&out));
    }
    let figs_a = a.path().join("figs");
    let mut names: Vec<String> = fs::read_dir(&figs_a)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert!(names.len() >= 7 + 13, "{names:?}");
    for name in &names {
        assert_eq!(
            fs::read(figs_a.join(name)).unwrap(),
            fs::read(b.path().join("figs").join(name)).unwrap(),
            "{name} differs"
        );
    }
    for fig in dephasim::cli::FIGURES {
        let manifest: dephasim::cli::FigureManifest = serde_json::from_str(
            &fs::read_to_string(figs_a.join(format!("{fig}_manifest.json"))).unwrap(),
        )
        .unwrap();
        assert_eq!(manifest.version, env!("CARGO_PKG_VERSION"));
        assert!(manifest.quick);
        for f in &manifest.files {
            assert!(figs_a.join(&f.name).is_file(), "{} missing", f.name);
            if f.name.ends_with(".csv") {
                let header = fs::read_to_string(figs_a.join(&f.name)).unwrap();
                assert_eq!(header.lines().next().unwrap(), f.columns.join(","));
            }
        }
    }
}

#[test]
fn fig2d_entropy_shapes() {
    let dir = tempfile::tempdir().unwrap();
    dephasim(dir.path(), &["reproduce", "fig2d", "--out-dir", "."]);
    let text = fs::read_to_string(dir.path().join("fig2d.csv")).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    let (s1, s4) = (col("entropy_exact_s1"), col("entropy_exact_s4"));
    assert!(rows.windows(2).all(|w| w[1][s1] >= w[0][s1]));
    let drop = rows.windows(2).position(|w| w[1][s4] < w[0][s4]).unwrap();
    let t = rows[drop][0];
    assert!((0.4e-3..=0.7e-3).contains(&t), "dip starts at {t}");
}
