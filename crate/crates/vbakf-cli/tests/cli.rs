use std::fs;
use std::path::Path;

use vbakf::distributions::{BetaParams, GaussianBelief, InverseWishartParams};
use vbakf::experiment::{BaselineFlags, ExperimentSpec};
use vbakf::filter::{CorruptionMode, VbHyperParams};
use vbakf::numerics::{Matrix, Vector};
use vbakf::simulator::{RegimeSegment, ScenarioConfig};

use vbakf_cli::io::FilterRunConfig;
use vbakf_cli::{execute, parse_args, run, CliConfig, RuntimeError};

fn small_scenario() -> ScenarioConfig {
    ScenarioConfig {
        d_x: 1,
        d_y: 1,
        f: Matrix::scalar(1.0),
        h: Matrix::scalar(1.0),
        e: Matrix::scalar(10.0),
        n_sensors: 3,
        horizon: 20,
        segments: vec![RegimeSegment {
            start_k: 0,
            end_k: 20,
            q_true: Matrix::scalar(0.1),
            r_true: Matrix::scalar(1.0),
            dropout_rate: 0.3,
            corruption_rate: 0.1,
        }],
        x0_mean: Vector::scalar(0.0),
        x0_cov: Matrix::scalar(1.0),
    }
}

fn small_hyper() -> VbHyperParams {
    VbHyperParams {
        q_prior: InverseWishartParams {
            dof: 3.0,
            scale: Matrix::scalar(0.1),
        },
        r_prior: InverseWishartParams {
            dof: 4.0,
            scale: Matrix::scalar(2.0),
        },
        rho_prior: BetaParams::uniform(),
        beta_prior: BetaParams::uniform(),
        e: Matrix::scalar(10.0),
        n_iters: 5,
        corruption: CorruptionMode::Infer,
    }
}

fn small_experiment() -> ExperimentSpec {
    ExperimentSpec {
        scenario: small_scenario(),
        hyper: small_hyper(),
        x0: GaussianBelief {
            mean: Vector::scalar(0.0),
            cov: Matrix::scalar(1.0),
        },
        mc_reps: 2,
        root_seed: 11,
        baselines: BaselineFlags {
            oracle: true,
            static_kf: true,
        },
        sweep: None,
    }
}

fn read(path: &Path) -> String {
    fs::read_to_string(path).unwrap_or_else(|e| panic!("reading {}: {e}", path.display()))
}

#[test]
fn parse_args_accepts_valid_experiment() {
    let cfg = parse_args(["vbakf", "experiment", "--preset", "exp1", "--out-dir", "r"]).unwrap();
    match cfg {
        CliConfig::Experiment {
            preset, out_dir, ..
        } => {
            assert_eq!(preset.as_deref(), Some("exp1"));
            assert_eq!(out_dir, Path::new("r"));
        }
        other => panic!("unexpected parse: {other:?}"),
    }
}

#[test]
fn parse_args_rejects_bad_invocations() {
    let err = parse_args(["vbakf", "experiment", "--out-dir", "r"]).unwrap_err();
    assert!(err.message.contains("--preset"));

    let err = parse_args([
        "vbakf",
        "experiment",
        "--preset",
        "exp9",
        "--out-dir",
        "r",
    ])
    .unwrap_err();
    assert!(err.message.contains("exp9"));
    for name in ["exp1", "exp4c"] {
        assert!(err.message.contains(name), "{} missing from {err}", name);
    }

    let err = parse_args([
        "vbakf",
        "experiment",
        "--preset",
        "exp1",
        "--config",
        "x.json",
        "--out-dir",
        "r",
    ])
    .unwrap_err();
    assert!(err.message.contains("mutually exclusive"));

    // Usage problems map to exit code 2 through the top-level entry.
    assert_eq!(run(["vbakf", "experiment", "--out-dir", "r"]), 2);
    assert_eq!(run(["vbakf", "no-such-command"]), 2);
}

#[test]
fn simulate_then_filter_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let scenario_path = dir.path().join("scenario.json");
    fs::write(
        &scenario_path,
        serde_json::to_string(&small_scenario()).unwrap(),
    )
    .unwrap();
    let data_dir = dir.path().join("data");
    execute(CliConfig::Simulate {
        config: scenario_path,
        seed: 42,
        out_dir: data_dir.clone(),
    })
    .unwrap();

    let obs = read(&data_dir.join("observations.csv"));
    assert!(obs.starts_with("# vbakf"));
    // 3 sensors x 20 steps plus header and provenance lines.
    assert_eq!(obs.lines().count(), 62);
    // Dropped packets must serialize with empty observation fields.
    let dropped: Vec<&str> = obs
        .lines()
        .filter(|l| l.split(',').nth(2) == Some("0"))
        .collect();
    assert!(!dropped.is_empty());
    assert!(dropped.iter().all(|l| l.ends_with(",0,")));

    let truth = read(&data_dir.join("truth.csv"));
    assert_eq!(truth.lines().count(), 22);

    let filter_cfg_path = dir.path().join("filter.json");
    let run_cfg = FilterRunConfig {
        hyper: small_hyper(),
        x0: GaussianBelief {
            mean: Vector::scalar(0.0),
            cov: Matrix::scalar(1.0),
        },
    };
    fs::write(&filter_cfg_path, serde_json::to_string(&run_cfg).unwrap()).unwrap();
    let out_dir = dir.path().join("filtered");
    execute(CliConfig::Filter {
        data: data_dir,
        config: filter_cfg_path,
        out_dir: out_dir.clone(),
    })
    .unwrap();

    let series = read(&out_dir.join("filter_series.csv"));
    let mut lines = series.lines();
    assert!(lines.next().unwrap().starts_with("# vbakf"));
    assert_eq!(
        lines.next().unwrap(),
        "k,xhat_0,p_0_0,eq_plugin_0_0,er_plugin_0_0,dropout_est,corruption_est"
    );
    assert_eq!(series.lines().count(), 22);
    // Every numeric field must re-parse.
    for line in series.lines().skip(2) {
        for field in line.split(',').skip(1) {
            field.parse::<f64>().unwrap();
        }
    }
}

#[test]
fn experiment_outputs_are_deterministic_and_reparse_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let spec_path = dir.path().join("tiny.json");
    fs::write(
        &spec_path,
        serde_json::to_string(&small_experiment()).unwrap(),
    )
    .unwrap();

    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for out in [&out_a, &out_b] {
        execute(CliConfig::Experiment {
            preset: None,
            config: Some(spec_path.clone()),
            seed: Some(7),
            mc_reps: None,
            out_dir: out.clone(),
            format: vbakf_cli::OutputFormat::CsvMd,
        })
        .unwrap();
    }
    let series_a = read(&out_a.join("tiny_series.csv"));
    let series_b = read(&out_b.join("tiny_series.csv"));
    assert_eq!(series_a, series_b);
    assert_eq!(
        read(&out_a.join("tiny_summary.csv")),
        read(&out_b.join("tiny_summary.csv"))
    );
    assert!(out_a.join("tiny_summary.md").exists());
    // No leftover temp files from the atomic writes.
    assert!(fs::read_dir(&out_a)
        .unwrap()
        .all(|e| !e.unwrap().path().to_string_lossy().ends_with(".tmp")));

    // Shortest round-trip formatting: re-parsing and re-printing a value
    // reproduces the field byte for byte.
    let mut lines = series_a.lines();
    lines.next();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header[0], "sweep_value");
    assert_eq!(header[2], "k");
    let mut checked = 0;
    for line in lines.take(40) {
        for field in line.split(',').skip(3).filter(|f| !f.is_empty()) {
            let v: f64 = field.parse().unwrap();
            assert_eq!(format!("{v}"), field);
            checked += 1;
        }
    }
    assert!(checked > 100);

    // Summary carries all enabled metrics.
    let summary = read(&out_a.join("tiny_summary.csv"));
    for metric in ["rmse_vb", "rmse_oracle", "rmse_static", "rate_rmse"] {
        assert!(summary.contains(metric), "{metric} missing");
    }
}

#[test]
fn experiment_preset_writes_named_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let code = run([
        "vbakf",
        "experiment",
        "--preset",
        "exp2",
        "--mc-reps",
        "1",
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    for name in ["exp2_series.csv", "exp2_summary.csv"] {
        let text = read(&out.join(name));
        assert!(text.lines().count() > 2, "{name} too short");
    }
    assert!(!out.join("exp2_summary.md").exists());
}

#[test]
fn unwritable_out_dir_fails_without_partial_files() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("not_a_dir");
    fs::write(&blocker, "x").unwrap();
    let spec_path = dir.path().join("tiny.json");
    fs::write(
        &spec_path,
        serde_json::to_string(&small_experiment()).unwrap(),
    )
    .unwrap();
    let err = execute(CliConfig::Experiment {
        preset: None,
        config: Some(spec_path),
        seed: None,
        mc_reps: None,
        out_dir: blocker.clone(),
        format: vbakf_cli::OutputFormat::Csv,
    })
    .unwrap_err();
    assert!(matches!(err, RuntimeError::Io { .. }));
    assert_eq!(fs::read_to_string(&blocker).unwrap(), "x");
}

#[test]
fn config_errors_carry_file_context() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\"scenario\": {\"tpyo\": 1}}").unwrap();
    let err = execute(CliConfig::Experiment {
        preset: None,
        config: Some(bad.clone()),
        seed: None,
        mc_reps: None,
        out_dir: dir.path().join("o"),
        format: vbakf_cli::OutputFormat::Csv,
    })
    .unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("bad.json"), "missing path in: {msg}");
    assert_eq!(run(["vbakf", "experiment", "--config", bad.to_str().unwrap(), "--out-dir", "/tmp/x"]), 1);
}
