//! End-to-end checks of the command-line surface: flags, outputs, exit
//! codes and reproducibility.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_riskcal"))
}

fn iris_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/iris.csv")
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

fn exit_code(output: &Output) -> i32 {
    output.status.code().unwrap()
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

#[test]
fn toy_single_iteration_reports_published_means() {
    let dir = tempfile::tempdir().unwrap();
    let output = binary()
        .args(["toy", "--iterations", "1", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(exit_code(&output), 0);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap())
            .unwrap();
    let means = summary["means_after_first_iteration"].as_array().unwrap();
    assert!((means[0].as_f64().unwrap() - -0.47).abs() <= 0.01);
    assert!((means[1].as_f64().unwrap() - 2.31).abs() <= 0.01);
    assert!(dir.path().join("resolved_config.json").exists());
    assert!(dir.path().join("trace.csv").exists());
}

#[test]
fn toy_with_zero_rate_never_moves() {
    let dir = tempfile::tempdir().unwrap();
    let output = binary()
        .args(["toy", "--lr", "0", "--iterations", "8", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(exit_code(&output), 0);
    let trace = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    let rows: Vec<&str> = trace.lines().skip(1).collect();
    assert_eq!(rows.len(), 9);
    let first = rows[0].split_once(',').unwrap().1;
    for row in &rows {
        assert_eq!(row.split_once(',').unwrap().1, first);
    }
}

#[test]
fn toy_with_unwritable_out_exits_2() {
    let output = binary()
        .args(["toy", "--out", "/proc/riskcal-cannot-write-here"])
        .output()
        .unwrap();
    assert_eq!(exit_code(&output), 2);
}

fn toy_csv(dir: &Path) -> PathBuf {
    let path = dir.join("toy.csv");
    write(&path, "0,1\n1,2\n4,2\n");
    path
}

#[test]
fn fit_qda_closed_form_matches_moments() {
    let dir = tempfile::tempdir().unwrap();
    let data = toy_csv(dir.path());
    let model_out = dir.path().join("model.json");
    let output = binary()
        .args(["fit", "--family", "qda", "--data"])
        .arg(&data)
        .arg("--model-out")
        .arg(&model_out)
        .output()
        .unwrap();
    assert_eq!(exit_code(&output), 0, "{}", stderr(&output));
    let model: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&model_out).unwrap()).unwrap();
    assert_eq!(model["family"], "qda");
    let prior = model["parameters"]["prior"].as_array().unwrap();
    assert!((prior[0].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-12);
    assert!((prior[1].as_f64().unwrap() - 2.0 / 3.0).abs() < 1e-12);
    let means = model["parameters"]["means"].as_array().unwrap();
    assert_eq!(means[0][0].as_f64().unwrap(), 0.0);
    assert_eq!(means[1][0].as_f64().unwrap(), 2.5);
    assert!(model_out.with_extension("trace.csv").exists());
}

#[test]
fn fit_rc_with_zero_rate_equals_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let data = toy_csv(dir.path());
    let mut models = Vec::new();
    for (name, calibrator) in [("none.json", "none"), ("rc.json", "rc")] {
        let model_out = dir.path().join(name);
        let output = binary()
            .args(["fit", "--family", "qda", "--calibrator", calibrator, "--lr", "0"])
            .args(["--data"])
            .arg(&data)
            .arg("--model-out")
            .arg(&model_out)
            .output()
            .unwrap();
        assert_eq!(exit_code(&output), 0, "{}", stderr(&output));
        models.push(std::fs::read_to_string(&model_out).unwrap());
    }
    assert_eq!(models[0], models[1]);
}

#[test]
fn fit_rejects_dfe_for_qda() {
    let dir = tempfile::tempdir().unwrap();
    let data = toy_csv(dir.path());
    let output = binary()
        .args(["fit", "--family", "qda", "--calibrator", "dfe", "--data"])
        .arg(&data)
        .arg("--model-out")
        .arg(dir.path().join("m.json"))
        .output()
        .unwrap();
    assert_eq!(exit_code(&output), 2);
    assert!(stderr(&output).contains("DFE supports NB only"));
}

#[test]
fn fit_rejects_missing_data_file() {
    let dir = tempfile::tempdir().unwrap();
    let output = binary()
        .args(["fit", "--family", "qda", "--data", "/nonexistent/x.csv"])
        .arg("--model-out")
        .arg(dir.path().join("m.json"))
        .output()
        .unwrap();
    assert_eq!(exit_code(&output), 2);
}

#[test]
fn fit_nb_requires_categorical_features() {
    let dir = tempfile::tempdir().unwrap();
    let output = binary()
        .args(["fit", "--family", "nb", "--data"])
        .arg(iris_path())
        .arg("--model-out")
        .arg(dir.path().join("m.json"))
        .output()
        .unwrap();
    assert_eq!(exit_code(&output), 2);
    assert!(stderr(&output).contains("discretize"));
}

#[test]
fn fit_parse_errors_report_the_row() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("bad.csv");
    write(&data, "0,1\nnot-a-number,2\n");
    let output = binary()
        .args(["fit", "--family", "qda", "--data"])
        .arg(&data)
        .arg("--model-out")
        .arg(dir.path().join("m.json"))
        .output()
        .unwrap();
    assert_eq!(exit_code(&output), 2);
    assert!(stderr(&output).contains("row 2"));
}

#[test]
fn fit_qda_map_prior_flags_are_honored() {
    let dir = tempfile::tempdir().unwrap();
    let data = toy_csv(dir.path());
    let model_out = dir.path().join("map.json");
    // m1 -> infinity pins the class means at the prior mean
    let output = binary()
        .args([
            "fit",
            "--family",
            "qda",
            "--estimator",
            "map",
            "--map-mean",
            "7.0",
            "--map-m1",
            "1000000000",
        ])
        .args(["--data"])
        .arg(&data)
        .arg("--model-out")
        .arg(&model_out)
        .output()
        .unwrap();
    assert_eq!(exit_code(&output), 0, "{}", stderr(&output));
    let model: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&model_out).unwrap()).unwrap();
    let means = model["parameters"]["means"].as_array().unwrap();
    assert!((means[0][0].as_f64().unwrap() - 7.0).abs() < 1e-6);
    assert!((means[1][0].as_f64().unwrap() - 7.0).abs() < 1e-6);
}

#[test]
fn discretize_two_bins_on_separated_values() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("sep.csv");
    write(&data, "0,1\n1,1\n10,2\n11,2\n");
    let out = dir.path().join("coded.csv");
    let codec = dir.path().join("codec.json");
    let output = binary()
        .args(["discretize", "--bins", "2", "--data"])
        .arg(&data)
        .arg("--out")
        .arg(&out)
        .arg("--codec-out")
        .arg(&codec)
        .output()
        .unwrap();
    assert_eq!(exit_code(&output), 0, "{}", stderr(&output));
    assert_eq!(
        std::fs::read_to_string(&out).unwrap(),
        "1,1\n1,1\n2,2\n2,2\n"
    );
    let codec: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&codec).unwrap()).unwrap();
    let centroids = codec["columns"][0].as_array().unwrap();
    assert_eq!(centroids[0].as_f64().unwrap(), 0.5);
    assert_eq!(centroids[1].as_f64().unwrap(), 10.5);
}

#[test]
fn discretize_constant_column_yields_ones() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("const.csv");
    write(&data, "3.5,0.1,1\n3.5,0.9,2\n3.5,0.5,1\n3.5,0.2,2\n");
    let out = dir.path().join("coded.csv");
    let output = binary()
        .args(["discretize", "--data"])
        .arg(&data)
        .arg("--out")
        .arg(&out)
        .arg("--codec-out")
        .arg(dir.path().join("codec.json"))
        .output()
        .unwrap();
    assert_eq!(exit_code(&output), 0, "{}", stderr(&output));
    for line in std::fs::read_to_string(&out).unwrap().lines() {
        assert!(line.starts_with("1,"));
    }
}

#[test]
fn discretize_rejects_all_categorical_input() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("cat.csv");
    write(&data, "1,1\n2,2\n1,2\n2,1\n");
    let output = binary()
        .args(["discretize", "--data"])
        .arg(&data)
        .arg("--out")
        .arg(dir.path().join("coded.csv"))
        .arg("--codec-out")
        .arg(dir.path().join("codec.json"))
        .output()
        .unwrap();
    assert_eq!(exit_code(&output), 2);
}

#[test]
fn discretize_then_fit_nb_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let coded = dir.path().join("iris_coded.csv");
    let output = binary()
        .args(["discretize", "--data"])
        .arg(iris_path())
        .arg("--out")
        .arg(&coded)
        .arg("--codec-out")
        .arg(dir.path().join("codec.json"))
        .output()
        .unwrap();
    assert_eq!(exit_code(&output), 0, "{}", stderr(&output));
    for calibrator in ["none", "rc", "gd", "dfe"] {
        let output = binary()
            .args(["fit", "--family", "nb", "--calibrator", calibrator])
            .args(["--iterations", "8"])
            .args(["--data"])
            .arg(&coded)
            .arg("--model-out")
            .arg(dir.path().join(format!("{calibrator}.json")))
            .output()
            .unwrap();
        assert_eq!(exit_code(&output), 0, "{calibrator}: {}", stderr(&output));
    }
}

#[test]
fn experiment_rejects_invalid_configs_listing_fields() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    write(
        &config,
        &format!(
            r#"{{"dataset": "{}", "family": "qda", "estimator": "ml",
                "methods": ["dfe"], "test_fraction": 1.5, "iterations": 0}}"#,
            iris_path().display()
        ),
    );
    let output = binary()
        .args(["experiment", "--config"])
        .arg(&config)
        .arg("--out-dir")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(exit_code(&output), 2);
    let message = stderr(&output);
    assert!(message.contains("test_fraction"));
    assert!(message.contains("iterations"));
    assert!(message.contains("dfe"));
}

#[test]
fn experiment_report_has_all_method_blocks() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    write(
        &config,
        &format!(
            r#"{{"dataset": "{}", "family": "nb", "estimator": "ml",
                "methods": ["closed-form", "rc", "gd", "dfe"],
                "iterations": 8, "repetitions": 2, "seed": 3}}"#,
            iris_path().display()
        ),
    );
    let out = dir.path().join("out");
    let output = binary()
        .args(["experiment", "--config"])
        .arg(&config)
        .arg("--out-dir")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(exit_code(&output), 0, "{}", stderr(&output));
    let csv = std::fs::read_to_string(out.join("report.csv")).unwrap();
    // header + 4 methods x (2 reps + mean)
    assert_eq!(csv.lines().count(), 1 + 4 * 3);
    let markdown = std::fs::read_to_string(out.join("report.md")).unwrap();
    for label in ["| ML |", "| RC |", "| GD |", "| DFE |"] {
        assert!(markdown.contains(label), "missing {label}");
    }
    // the stored config reproduces the run byte for byte
    let rerun = dir.path().join("rerun");
    let output = binary()
        .args(["experiment", "--config"])
        .arg(out.join("resolved_config.json"))
        .arg("--out-dir")
        .arg(&rerun)
        .output()
        .unwrap();
    assert_eq!(exit_code(&output), 0, "{}", stderr(&output));
    assert_eq!(
        std::fs::read(out.join("report.csv")).unwrap(),
        std::fs::read(rerun.join("report.csv")).unwrap()
    );
}

#[test]
fn unknown_flags_exit_2() {
    let output = binary().args(["toy", "--frobnicate"]).output().unwrap();
    assert_eq!(exit_code(&output), 2);
}
