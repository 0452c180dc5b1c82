use std::path::Path;
use std::process::{Command, Output};

fn dnls(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dnls-mi"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

#[test]
fn spectrum_at_fig2c_point() {
    let dir = tempfile::tempdir().unwrap();
    let out = dnls(
        &["spectrum", "--l", "150", "--s", "50", "--json"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert!(
        (v["growth2"].as_f64().unwrap() - 0.1863).abs() < 5e-4,
        "{v}"
    );
    assert_eq!(v["growth1"].as_f64().unwrap(), 0.0);
    assert_eq!(v["class"], "UNSTABLE_2");
    assert_eq!(v["solver"], "closed_form");
}

#[test]
fn uniform_perturbation_is_stable() {
    let dir = tempfile::tempdir().unwrap();
    let v = json(&dnls(
        &["spectrum", "--k", "2.5", "--q", "0", "--json"],
        dir.path(),
    ));
    assert_eq!(v["class"], "STABLE");
}

#[test]
fn decoupled_matches_single_species() {
    let dir = tempfile::tempdir().unwrap();
    let coupled = json(&dnls(
        &[
            "spectrum",
            "--k",
            "2.5",
            "--q",
            "0.2",
            "--lambda12",
            "0",
            "--json",
        ],
        dir.path(),
    ));
    let single = json(&dnls(
        &[
            "spectrum",
            "--k",
            "2.5",
            "--q",
            "0.2",
            "--lambda12",
            "0",
            "--lambda2",
            "100",
            "--json",
        ],
        dir.path(),
    ));
    // species 1 depends only on its own self-interaction once the coupling is off
    let close = |a: &serde_json::Value, b: &serde_json::Value| {
        (a.as_f64().unwrap() - b.as_f64().unwrap()).abs() < 1e-14
    };
    assert!(close(&coupled["growth1"], &single["growth1"]));
    for branch in ["plus", "minus"] {
        for part in 0..2 {
            assert!(close(
                &coupled["omega"][0][branch][part],
                &single["omega"][0][branch][part]
            ));
        }
    }
}

#[test]
fn unequal_hopping_uses_matrix_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = dnls(
        &[
            "spectrum", "--K", "1", "--K2", "0.5", "--k", "2.5", "--q", "0.1", "--json",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["solver"], "matrix");
    assert_eq!(v["eigenvalues"].as_array().unwrap().len(), 4);
}

#[test]
fn phase_diagram_smoke() {
    let dir = tempfile::tempdir().unwrap();
    let out = dnls(
        &[
            "phase-diagram",
            "--k-steps",
            "2",
            "--q-steps",
            "2",
            "--out",
            "pd",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("pd/grid.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    assert!(csv.starts_with("k,q,"));
}

#[test]
fn phase_diagram_independent_of_workers() {
    let dir = tempfile::tempdir().unwrap();
    let run = |workers: &str, out: &str| {
        let o = dnls(
            &[
                "--workers",
                workers,
                "phase-diagram",
                "--preset",
                "fig1a",
                "--k-steps",
                "40",
                "--q-steps",
                "40",
                "--out",
                out,
            ],
            dir.path(),
        );
        assert_eq!(o.status.code(), Some(0));
        std::fs::read(dir.path().join(out).join("grid.csv")).unwrap()
    };
    assert_eq!(run("1", "a"), run("4", "b"));
}

#[test]
fn miscible_preset_shows_three_classes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dnls(&["phase-diagram", "--preset", "fig1a", "--json"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["cells"], 160_000);
    let counts = v["class_counts"].as_object().unwrap();
    for class in ["STABLE", "UNSTABLE_2", "UNSTABLE_BOTH"] {
        assert!(counts[class].as_u64().unwrap() > 0, "{class}: {v}");
    }
}

#[test]
fn phase_diagram_rejects_simulation_preset() {
    let dir = tempfile::tempdir().unwrap();
    let out = dnls(
        &[
            "phase-diagram",
            "--preset",
            "fig2c",
            "--k-steps",
            "2",
            "--q-steps",
            "2",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        dnls(&["simulate", "--bogus"], dir.path()).status.code(),
        Some(2)
    );
    assert_eq!(
        dnls(&["spectrum", "--k", "1"], dir.path()).status.code(),
        Some(2)
    );
    assert_eq!(
        dnls(&["growth-rate", "--rtol", "0.1"], dir.path())
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        dnls(
            &["--workers", "0", "spectrum", "--k", "1", "--q", "1"],
            dir.path()
        )
        .status
        .code(),
        Some(2)
    );
}

#[test]
fn validate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dnls(
        &["validate", "--samples", "10", "--seed", "42", "--json"],
        dir.path(),
    );
    let b = dnls(
        &["validate", "--samples", "10", "--seed", "42", "--json"],
        dir.path(),
    );
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(json(&a)["passed"], true);
}

#[test]
fn stable_simulation_reports_no_growth() {
    let dir = tempfile::tempdir().unwrap();
    let out = dnls(
        &[
            "simulate", "--preset", "fig2a", "--t-end", "20", "--out", "r",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("no growth"));
    assert!(dir.path().join("r/trajectory.jsonl").is_file());
}

#[test]
fn growth_rate_expectation() {
    let dir = tempfile::tempdir().unwrap();
    let ok = dnls(
        &[
            "growth-rate",
            "--preset",
            "fig2c",
            "--expect",
            "0.1863",
            "--json",
            "--out",
            "a",
        ],
        dir.path(),
    );
    assert_eq!(ok.status.code(), Some(0));
    let v = json(&ok);
    assert_eq!(v["expect"]["passed"], true);
    assert!((v["rate"].as_f64().unwrap() - 0.1863).abs() / 0.1863 < 0.05);

    let miss = dnls(
        &[
            "growth-rate",
            "--preset",
            "fig2c",
            "--expect",
            "0.3",
            "--out",
            "b",
        ],
        dir.path(),
    );
    assert_eq!(miss.status.code(), Some(1));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("run.json"),
        r#"{"preset": "fig2a", "out": "from-config", "workers": 2}"#,
    )
    .unwrap();
    let out = dnls(
        &["simulate", "--config", "run.json", "--t-end", "2", "--json"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["t_final"].as_f64().unwrap(), 2.0);
    assert!(dir.path().join("from-config/growthfit.json").is_file());

    std::fs::write(dir.path().join("bad.json"), r#"{"nope": 1}"#).unwrap();
    assert_eq!(
        dnls(&["simulate", "--config", "bad.json"], dir.path())
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn drift_abort_exits_3_and_keeps_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dnls(
        &["simulate", "--preset", "fig2c", "--dt", "0.5", "--out", "r"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(3));
    for f in [
        "trajectory.jsonl",
        "density_s1.csv",
        "density_s2.csv",
        "growthfit.json",
    ] {
        assert!(dir.path().join("r").join(f).is_file(), "{f}");
    }
}
