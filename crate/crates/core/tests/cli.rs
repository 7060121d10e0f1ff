use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use conformal_gate::io::{write_dataset, DataFormat};
use conformal_gate::{
    calibrate, evaluate, generate, predict_batch, Alpha, ClassUniverse, Dataset, Example,
    ProbVector, SyntheticSpec,
};
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_conformal-gate"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn one_hot_csv(dir: &Path, name: &str, n: usize) -> PathBuf {
    let u = ClassUniverse::generic(3).unwrap();
    let d = Dataset::new(
        u,
        (0..n)
            .map(|i| Example::labeled(format!("r{i}"), i % 3, ProbVector::one_hot(3, i % 3)))
            .collect(),
    );
    let path = dir.join(name);
    write_dataset(&d, &path, DataFormat::Csv).unwrap();
    path
}

fn artifact_with(dir: &Path, threshold: &str) -> PathBuf {
    let text = format!(
        r#"{{"alpha":0.05,"n":100,"qlevel":0.9595,"rank":96,"threshold":{threshold},
            "classes":[{{"index":0,"name":"a"}},{{"index":1,"name":"b"}},{{"index":2,"name":"c"}}],
            "universe_sha256":"x","input_sha256":"y"}}"#
    );
    let path = dir.join(format!("artifact_{}.json", threshold.replace('"', "")));
    fs::write(&path, text).unwrap();
    path
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn calibrate_all_correct_rows() {
    let dir = tempfile::tempdir().unwrap();
    let input = one_hot_csv(dir.path(), "calib.csv", 100);
    let out = dir.path().join("cal.json");
    let curve = dir.path().join("curve.csv");
    let o = run(&[
        "calibrate",
        "--input",
        p(&input),
        "--alpha",
        "0.05",
        "--out",
        p(&out),
        "--curve",
        p(&curve),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let a = json(&out);
    assert_eq!(a["threshold"], 0.0);
    assert_eq!(a["n"], 100);
    assert_eq!(a["alpha"], 0.05);
    assert_eq!(a["input_sha256"].as_str().unwrap().len(), 64);
    let curve = fs::read_to_string(&curve).unwrap();
    assert!(curve.starts_with("rank,score\n1,0\n"));
    assert!(curve.ends_with("threshold,0\n"));
}

#[test]
fn calibrate_ten_rows_is_all_inclusive() {
    let dir = tempfile::tempdir().unwrap();
    let input = one_hot_csv(dir.path(), "calib.csv", 10);
    let out = dir.path().join("cal.json");
    let curve = dir.path().join("curve.json");
    let o = run(&[
        "calibrate",
        "--input",
        p(&input),
        "--out",
        p(&out),
        "--curve",
        p(&curve),
    ]);
    assert!(o.status.success());
    assert_eq!(json(&out)["threshold"], "all_inclusive");
    assert_eq!(json(&curve)["threshold"], "all_inclusive");
}

#[test]
fn malformed_row_exits_2_with_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let input = one_hot_csv(dir.path(), "calib.csv", 10);
    let mut lines: Vec<String> = fs::read_to_string(&input)
        .unwrap()
        .lines()
        .map(String::from)
        .collect();
    lines[6] = "r5,2,0,zero,1".to_string();
    fs::write(&input, lines.join("\n") + "\n").unwrap();
    let o = run(&[
        "calibrate",
        "--input",
        p(&input),
        "--out",
        p(&dir.path().join("c.json")),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 7"));
}

#[test]
fn exit_codes_for_usage_and_io() {
    assert_eq!(run(&["calibrate"]).status.code(), Some(3));
    assert_eq!(run(&["nonsense"]).status.code(), Some(3));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    let dir = tempfile::tempdir().unwrap();
    let input = one_hot_csv(dir.path(), "calib.csv", 10);
    let o = run(&[
        "calibrate",
        "--input",
        p(&input),
        "--alpha",
        "1.5",
        "--out",
        p(&dir.path().join("c.json")),
    ]);
    assert_eq!(o.status.code(), Some(3));
    let o = run(&[
        "calibrate",
        "--input",
        p(&dir.path().join("missing.csv")),
        "--out",
        p(&dir.path().join("c.json")),
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn predict_with_fixed_thresholds() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("test.csv");
    fs::write(
        &input,
        "sample_id,true_label,p_0,p_1,p_2\nx,,0.9,0.05,0.05\ny,b,0.2,0.5,0.3\n",
    )
    .unwrap();
    let out = dir.path().join("sets.jsonl");

    let o = run(&[
        "predict",
        "--calibration",
        p(&artifact_with(dir.path(), "0.2")),
        "--input",
        p(&input),
        "--out",
        p(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let lines: Vec<Value> = fs::read_to_string(&out)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines[0]["members"], serde_json::json!([0]));
    assert_eq!(lines[0]["set_size"], 1);
    assert!(lines[0].get("true_label").is_none());
    assert_eq!(lines[1]["members"], serde_json::json!([]));
    assert_eq!(lines[1]["true_label"], 1);

    let o = run(&[
        "predict",
        "--calibration",
        p(&artifact_with(dir.path(), "\"all_inclusive\"")),
        "--input",
        p(&input),
        "--out",
        p(&out),
    ]);
    assert!(o.status.success());
    for line in fs::read_to_string(&out).unwrap().lines() {
        let v: Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["members"], serde_json::json!([0, 1, 2]));
    }
}

#[test]
fn predict_empty_file_and_dimension_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let artifact = artifact_with(dir.path(), "0.2");
    let empty = dir.path().join("empty.csv");
    fs::write(&empty, "sample_id,true_label,p_0,p_1,p_2\n").unwrap();
    let out = dir.path().join("sets.jsonl");
    let o = run(&[
        "predict",
        "--calibration",
        p(&artifact),
        "--input",
        p(&empty),
        "--out",
        p(&out),
    ]);
    assert!(o.status.success());
    assert_eq!(fs::read_to_string(&out).unwrap(), "");

    let wide = dir.path().join("wide.csv");
    fs::write(&wide, "sample_id,true_label,p_0,p_1\nx,0,0.5,0.5\n").unwrap();
    let o = run(&[
        "predict",
        "--calibration",
        p(&artifact),
        "--input",
        p(&wide),
        "--out",
        p(&out),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn evaluate_all_correct_and_error_paths() {
    let dir = tempfile::tempdir().unwrap();
    let calib = one_hot_csv(dir.path(), "calib.csv", 30);
    let test = one_hot_csv(dir.path(), "test.csv", 12);
    let cal = dir.path().join("cal.json");
    assert!(run(&["calibrate", "--input", p(&calib), "--out", p(&cal)])
        .status
        .success());
    let (rj, rc) = (dir.path().join("r.json"), dir.path().join("r.csv"));
    let o = run(&[
        "evaluate",
        "--calibration",
        p(&cal),
        "--input",
        p(&test),
        "--out-json",
        p(&rj),
        "--out-csv",
        p(&rc),
    ]);
    assert!(o.status.success());
    let csv = fs::read_to_string(&rc).unwrap();
    assert!(
        csv.ends_with("Overall,1.0000,1.0000,1.0000,1.0000,12\n"),
        "{csv}"
    );
    assert!(String::from_utf8_lossy(&o.stdout).contains("Overall"));
    assert_eq!(json(&rj)["overall_strict_coverage"], 1.0);

    // precomputed predictions with one row missing
    let sets = dir.path().join("sets.jsonl");
    assert!(run(&[
        "predict",
        "--calibration",
        p(&cal),
        "--input",
        p(&test),
        "--out",
        p(&sets)
    ])
    .status
    .success());
    let text = fs::read_to_string(&sets).unwrap();
    let short: Vec<&str> = text.lines().take(11).collect();
    fs::write(&sets, short.join("\n") + "\n").unwrap();
    let o = run(&[
        "evaluate",
        "--predictions",
        p(&sets),
        "--input",
        p(&test),
        "--out-json",
        p(&rj),
        "--out-csv",
        p(&rc),
    ]);
    assert_eq!(o.status.code(), Some(2));

    // unlabeled test rows
    let unlabeled = dir.path().join("unlabeled.csv");
    fs::write(&unlabeled, "sample_id,true_label,p_0,p_1,p_2\nx,,1,0,0\n").unwrap();
    let o = run(&[
        "evaluate",
        "--calibration",
        p(&cal),
        "--input",
        p(&unlabeled),
        "--out-json",
        p(&rj),
        "--out-csv",
        p(&rc),
    ]);
    assert_eq!(o.status.code(), Some(2));

    // neither source of prediction sets
    let o = run(&[
        "evaluate",
        "--input",
        p(&test),
        "--out-json",
        p(&rj),
        "--out-csv",
        p(&rc),
    ]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn file_pipeline_equals_library_composition() {
    let dir = tempfile::tempdir().unwrap();
    let spec = SyntheticSpec::default().with_seed(31);
    let calib = generate(&spec.with_seed(1), 400).unwrap();
    let test = generate(&spec.with_seed(2), 600).unwrap();
    let calib_path = dir.path().join("calib.jsonl");
    let test_path = dir.path().join("test.csv");
    write_dataset(&calib, &calib_path, DataFormat::Jsonl).unwrap();
    write_dataset(&test, &test_path, DataFormat::Csv).unwrap();

    let cal = dir.path().join("cal.json");
    let sets = dir.path().join("sets.jsonl");
    let (rj, rc) = (dir.path().join("r.json"), dir.path().join("r.csv"));
    assert!(run(&[
        "calibrate",
        "--input",
        p(&calib_path),
        "--alpha",
        "0.1",
        "--out",
        p(&cal)
    ])
    .status
    .success());
    assert!(run(&[
        "predict",
        "--calibration",
        p(&cal),
        "--input",
        p(&test_path),
        "--out",
        p(&sets)
    ])
    .status
    .success());
    assert!(run(&[
        "evaluate",
        "--predictions",
        p(&sets),
        "--input",
        p(&test_path),
        "--out-json",
        p(&rj),
        "--out-csv",
        p(&rc)
    ])
    .status
    .success());

    let result = calibrate(&calib, Alpha::new(0.1).unwrap()).unwrap();
    let lib_sets = predict_batch(&test, &result).unwrap();
    let lib_report = evaluate(&test, &lib_sets).unwrap();

    let file_sets: Vec<conformal_gate::PredictionSet> = fs::read_to_string(&sets)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(file_sets, lib_sets);
    let file_report = conformal_gate::io::read_report_json(&rj).unwrap();
    assert_eq!(file_report, lib_report);
    assert!(file_report.overall_strict_coverage <= file_report.marginal_coverage);
}

#[test]
fn simulate_shapes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sim.json");
    let o = run(&["simulate", "--out", p(&out)]);
    assert!(o.status.success());
    let v = json(&out);
    assert_eq!(v["per_seed"].as_array().unwrap().len(), 20);
    assert_eq!(v["alpha"], 0.05);

    let o = run(&[
        "simulate",
        "--n-calib",
        "5",
        "--n-test",
        "500",
        "--out",
        p(&out),
    ]);
    assert!(o.status.success());
    assert!(json(&out)["per_seed"]
        .as_array()
        .unwrap()
        .iter()
        .all(|c| c.as_f64() == Some(1.0)));

    let o = run(&["simulate", "--alpha", "0.5", "--out", p(&out)]);
    assert!(o.status.success());
    assert!((json(&out)["mean"].as_f64().unwrap() - 0.5).abs() < 0.02);

    let data = dir.path().join("data");
    let o = run(&[
        "simulate",
        "--seeds",
        "2",
        "--n-calib",
        "50",
        "--n-test",
        "60",
        "--out",
        p(&out),
        "--write-data",
        p(&data),
    ]);
    assert!(o.status.success());
    assert!(data.join("seed_001_test.csv").exists());

    assert_eq!(
        run(&["simulate", "--k", "1", "--out", p(&out)])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        run(&["simulate", "--noise", "1.2", "--out", p(&out)])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn split_writes_named_parts() {
    let dir = tempfile::tempdir().unwrap();
    let d = generate(&SyntheticSpec::default(), 822).unwrap();
    let input = dir.path().join("held_out.csv");
    write_dataset(&d, &input, DataFormat::Csv).unwrap();
    let out_dir = dir.path().join("parts");
    let o = run(&[
        "split",
        "--input",
        p(&input),
        "--seed",
        "4",
        "--out-dir",
        p(&out_dir),
    ]);
    assert!(o.status.success());
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(
        stdout.contains("calib: 411") && stdout.contains("test: 411"),
        "{stdout}"
    );
    assert!(out_dir.join("calib.csv").exists());

    let o = run(&[
        "split",
        "--input",
        p(&input),
        "--parts",
        "a=0.6,b=0.6",
        "--out-dir",
        p(&out_dir),
    ]);
    assert_eq!(o.status.code(), Some(3));
}
