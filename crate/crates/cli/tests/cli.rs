use std::path::Path;
use std::process::Command;

use scoregen_cli::csv_io::{self, read_table, CsvOptions};
use scoregen_cli::manifest::{read_manifest, rerun};
use scoregen_cli::pipeline::{hash_features, run_experiment, Stage};
use scoregen_cli::spec::{ExperimentSpec, SpecError};
use scoregen_core::eval::{metrics, ConfusionMatrix};
use scoregen_core::DgpSpec;

fn scoregen(args: &[&str], cwd: &Path) -> (bool, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_scoregen"))
        .args(args)
        .current_dir(cwd)
        .env("RUST_BACKTRACE", "0")
        .output()
        .unwrap();
    (
        out.status.success(),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn write_2d_csv(path: &Path) {
    let sim = DgpSpec::pair_2d(3).simulate().unwrap();
    csv_io::write_dataset(path, &sim.data, "Class").unwrap();
}

const CSV_SPEC: &str = r#"
name = "csv-knn"
seed = 9
output_dir = "out"
standardize = true

[data]
source = "csv"
path = "data.csv"

[split]
train_ratio = 0.75

[flip]
counts = [3, 2]

[augment]
method = "smote"
k = 3

[classifier]
kind = "knn"
k = 5
"#;

#[test]
fn missing_csv_fails_at_load() {
    let dir = tempfile::tempdir().unwrap();
    let spec = ExperimentSpec::from_toml(CSV_SPEC).unwrap();
    let err = run_experiment(&spec, Some(dir.path())).unwrap_err();
    assert_eq!(err.stage, Stage::Load);
    assert!(err.to_string().contains("stage `load`"), "{err}");
}

#[test]
fn csv_spec_runs_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    write_2d_csv(&dir.path().join("data.csv"));
    let spec = ExperimentSpec::from_toml(CSV_SPEC).unwrap();
    let result = run_experiment(&spec, Some(dir.path())).unwrap();
    let out = dir.path().join("out");
    for f in ["train.csv", "test.csv", "predictions.csv", "metrics.csv", "confusion.csv", "generated.csv", "flipped.csv", "manifest.toml"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    assert_eq!(result.counts.total, [200, 200]);
    assert_eq!(result.counts.train, [150, 150]);
    assert_eq!(result.counts.flipped, 5);

    // metrics agree with a recount from the predictions file
    let (header, m) = read_table(&out.join("predictions.csv")).unwrap();
    let col = |n: &str| header.iter().position(|h| h == n).unwrap();
    let (a, p) = (col("Class"), col("predicted"));
    let actual: Vec<u8> = m.iter_rows().map(|r| r[a] as u8).collect();
    let predicted: Vec<u8> = m.iter_rows().map(|r| r[p] as u8).collect();
    let recount = metrics(&ConfusionMatrix::from_predictions(&actual, &predicted).unwrap());
    let rec = result.metrics.as_ref().unwrap();
    assert_eq!(recount.recall.to_bits(), rec.recall.to_bits());
    assert_eq!(recount.f1.to_bits(), rec.f1.to_bits());
    assert_eq!(recount.mistakes, rec.mistakes);

    // the written test rows are the rows that were hashed at split time
    let test = csv_io::load_csv(&out.join("test.csv"), &CsvOptions::default()).unwrap();
    assert_eq!(Some(hash_features(test.features())), result.test_features_sha256);
    assert!(test.synthetic().iter().all(|s| !s));

    let train = csv_io::load_csv(&out.join("train.csv"), &CsvOptions::default()).unwrap();
    assert_eq!(train.synthetic().iter().filter(|s| **s).count(), result.counts.synthetic);
}

#[test]
fn manifest_rerun_is_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    write_2d_csv(&dir.path().join("data.csv"));
    let spec = ExperimentSpec::from_toml(CSV_SPEC).unwrap();
    let first = run_experiment(&spec, Some(dir.path())).unwrap();
    let m = read_manifest(&dir.path().join("out")).unwrap();
    assert_eq!(m.result, first);
    let (_, diffs) = rerun(&m, &dir.path().join("again"), Some(dir.path())).unwrap();
    assert!(diffs.is_empty(), "{diffs:?}");
}

#[test]
fn spec_errors_are_reported() {
    let bad = CSV_SPEC.replace("[classifier]", "[classifier]\nbogus = 1");
    assert!(matches!(ExperimentSpec::from_toml(&bad), Err(SpecError::Toml(_))));
    let no_clf = CSV_SPEC.split("[classifier]").next().unwrap();
    assert!(matches!(ExperimentSpec::from_toml(no_clf), Err(SpecError::Invalid(_))));
    let ratio = CSV_SPEC.replace("train_ratio = 0.75", "train_ratio = 1.5");
    assert!(matches!(ExperimentSpec::from_toml(&ratio), Err(SpecError::Invalid(_))));
}

#[test]
fn subcommands_chain() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let ok = |args: &[&str]| {
        let (ok, stdout, stderr) = scoregen(args, d);
        assert!(ok, "{args:?}: {stderr}");
        stdout
    };
    ok(&["simulate", "--preset", "pair1d", "--seed", "1", "--out", "one.csv"]);
    for c in ["0", "1"] {
        let out = ok(&[
            "train-score", "--data", "one.csv", "--class", c, "--learning-rate", "0.05", "--epochs", "500",
            "--out", &format!("s{c}.sgnn"),
        ]);
        assert!(out.contains("linear score"), "{out}");
    }
    let out = ok(&["boundary", "--model0", "s0.sgnn", "--model1", "s1.sgnn", "--data", "one.csv"]);
    let x: f64 = out.split('[').nth(1).unwrap().split(']').next().unwrap().parse().unwrap();
    assert!(x.abs() < 0.2, "{out}");
    ok(&["density", "--model", "s0.sgnn", "--data", "one.csv", "--class", "0", "--lo", "-6", "--hi", "6", "--points", "121", "--out", "dens.csv"]);
    let (h, m) = read_table(&d.join("dens.csv")).unwrap();
    assert_eq!(h, ["x0", "density"]);
    assert_eq!(m.rows(), 121);
    ok(&["sample", "--model", "s0.sgnn", "--data", "one.csv", "--class", "0", "--step-size", "0.01", "--chain-length", "20", "--discard-rate", "0.5", "--n", "55", "--out", "gen.csv"]);
    assert_eq!(read_table(&d.join("gen.csv")).unwrap().1.rows(), 55);

    ok(&["simulate", "--preset", "imbalanced10d", "--seed", "2", "--out", "imb.csv"]);
    ok(&["augment", "--data", "imb.csv", "--method", "adasyn", "--seed", "1", "--out", "aug.csv"]);
    let aug = csv_io::load_csv(&d.join("aug.csv"), &CsvOptions::default()).unwrap();
    assert_eq!(aug.class_count(0), aug.class_count(1));

    ok(&["simulate", "--preset", "pair2d", "--seed", "4", "--out", "train.csv"]);
    ok(&["simulate", "--preset", "pair2d", "--seed", "5", "--out", "test.csv"]);
    let out = ok(&["classify", "--train", "train.csv", "--test", "test.csv", "--method", "logistic", "--out", "clf"]);
    assert!(out.contains("recall"), "{out}");
    let again = ok(&["eval", "--predictions", "clf/predictions.csv"]);
    assert_eq!(out, again);
    let out = ok(&["eval", "--table", "dens.csv", "--p", "density", "--q", "density"]);
    assert!(out.contains("= 0.000000"), "{out}");

    let toml = ok(&["run", "--preset", "1d-gaussian-recon", "--print"]);
    assert!(ExperimentSpec::from_toml(&toml).is_ok());
    ok(&["run", "--preset", "1d-gaussian-recon", "--out", "recon"]);
    let out = ok(&["run", "--manifest", "recon", "--out", "recon2"]);
    assert!(out.contains("reproduced"), "{out}");

    let (success, _, stderr) = scoregen(&["run", "--preset", "no-such"], d);
    assert!(!success && stderr.contains("unknown preset"), "{stderr}");
}
