use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use greedy_subset::model::{CovarianceModel, SampleTable};

const BIN: &str = env!("CARGO_BIN_EXE_gsel");

fn boston() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/boston.csv")
}

fn gsel(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn write_model(dir: &Path, name: &str, json: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, json).unwrap();
    p.to_str().unwrap().to_string()
}

const I3A: &str = r#"{"C": [[1,0.5,0],[0.5,1,0],[0,0,1]], "targets": [{"name": "z", "b": [0.6,0.5,0.4]}]}"#;
const I2B: &str = r#"{"C": [[1,0.5],[0.5,1]], "targets": [{"name": "z", "b": [0.5,0.0]}]}"#;
const DIAGONAL: &str =
    r#"{"C": [[1,0,0,0],[0,1,0,0],[0,0,1,0],[0,0,0,1]], "targets": [{"name": "z", "b": [0.5,-0.3,0.2,0.1]}]}"#;

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn cell(s: &str) -> f64 {
    s.parse().unwrap()
}

#[test]
fn fit_on_boston_writes_seven_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = gsel(&["fit", "--input", boston().to_str().unwrap(), "--target", "MEDV", "--k-min", "2", "--k-max", "8", "--out-dir", out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(dir.path().join("r2_vs_k.csv")).unwrap();
    assert!(text.starts_with("k,fr,omp,obl,opt\n"));
    let rows = csv_rows(&dir.path().join("r2_vs_k.csv"));
    assert_eq!(rows.len(), 7);
    for (i, r) in rows.iter().enumerate() {
        assert_eq!(r[0], (i + 2).to_string());
        let (fr, omp, obl) = (cell(&r[1]), cell(&r[2]), cell(&r[3]));
        assert!(fr >= omp - 1e-9 && omp >= obl - 1e-9, "row {r:?}");
    }
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("fit_report.json")).unwrap()).unwrap();
    assert_eq!(report["input"]["n"], 13);
    assert_eq!(report["input"]["m"], 506);
}

#[test]
fn fit_on_model_file_gives_exact_optimum() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_model(dir.path(), "i3a.json", I3A);
    let out = dir.path().join("out");
    let o = gsel(&["fit", "--model", &model, "--target", "z", "--k-min", "1", "--k-max", "3", "--out-dir", out.to_str().unwrap()]);
    assert!(o.status.success());
    let opt: Vec<f64> = csv_rows(&out.join("r2_vs_k.csv")).iter().map(|r| cell(&r[4])).collect();
    for (got, want) in opt.iter().zip([0.36, 0.52, 43.0 / 75.0]) {
        assert!((got - want).abs() < 1e-12);
    }
}

#[test]
fn fit_marks_capped_optimum() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_model(dir.path(), "i3a.json", I3A);
    let out = dir.path().join("out");
    let o = gsel(&["fit", "--model", &model, "--k-min", "1", "--k-max", "2", "--cap", "2", "--out-dir", out.to_str().unwrap()]);
    assert!(o.status.success());
    let rows = csv_rows(&out.join("r2_vs_k.csv"));
    assert_eq!(rows[1][4], "capped");
}

#[test]
fn missing_target_column_exits_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    let o = gsel(&["fit", "--input", boston().to_str().unwrap(), "--target", "PRICE", "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("PRICE"));
}

#[test]
fn diag_reference_values() {
    let dir = tempfile::tempdir().unwrap();
    let diag = write_model(dir.path(), "diag.json", DIAGONAL);
    let out = dir.path().join("a");
    let o = gsel(&["diag", "--model", &diag, "--k-min", "1", "--k-max", "2", "--out-dir", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for r in csv_rows(&out.join("diagnostics.csv")) {
        assert!((cell(&r[1]) - 1.0).abs() < 1e-12);
        assert!((cell(&r[3]) - 1.0).abs() < 1e-12 && (cell(&r[5]) - 1.0).abs() < 1e-12);
    }

    let i2b = write_model(dir.path(), "i2b.json", I2B);
    let out = dir.path().join("b");
    let o = gsel(&["diag", "--model", &i2b, "--k-min", "2", "--k-max", "2", "--ratio", "exact", "--out-dir", out.to_str().unwrap()]);
    assert!(o.status.success());
    let rows = csv_rows(&out.join("diagnostics.csv"));
    assert!((cell(&rows[0][1]) - 0.75).abs() < 1e-12);
    assert_eq!(rows[0][2], "exact");
}

#[test]
fn diag_strict_cap_aborts() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_model(dir.path(), "i3a.json", I3A);
    let o = gsel(&["diag", "--model", &model, "--k-min", "2", "--k-max", "2", "--cap", "2", "--strict-cap", "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    let o = gsel(&["diag", "--model", &model, "--k-min", "2", "--k-max", "2", "--cap", "2", "--out-dir", dir.path().to_str().unwrap()]);
    assert!(o.status.success());
    let rows = csv_rows(&dir.path().join("diagnostics.csv"));
    assert_eq!(rows[0][2], "sampled");
    assert_eq!(rows[0][4], "bound-only");
}

#[test]
fn dict_commands() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_model(dir.path(), "i3a.json", I3A);
    let out = dir.path().join("opt");
    let o = gsel(&["dict", "--model", &model, "-d", "2", "-k", "2", "--algo", "opt", "--out-dir", out.to_str().unwrap()]);
    assert!(o.status.success());
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("dict_report.json")).unwrap()).unwrap();
    assert_eq!(report["result"]["dictionary"], serde_json::json!([0, 2]));
    assert!((report["result"]["F"].as_f64().unwrap() - 0.52).abs() < 1e-12);
    assert_eq!(fs::read_to_string(out.join("dict.csv")).unwrap(), "target,subset,r2\nz,0 2,0.52\n");

    // d = k: the inner fit uses the whole dictionary
    let out = dir.path().join("ma");
    let o = gsel(&["dict", "--model", &model, "-d", "2", "-k", "2", "--algo", "sdsma", "--out-dir", out.to_str().unwrap()]);
    assert!(o.status.success());
    let rows = csv_rows(&out.join("dict.csv"));
    assert_eq!(rows[0][1], "0 1");
    assert!((cell(&rows[0][2]) - 31.0 / 75.0).abs() < 1e-12);

    let o = gsel(&["dict", "--model", &model, "-d", "2", "-k", "2", "--algo", "best"]);
    assert_eq!(o.status.code(), Some(2));
    let o = gsel(&["dict", "--model", &model, "-d", "2", "-k", "2", "--algo", "opt", "--cap", "1", "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    let o = gsel(&["dict", "--model", &model, "-d", "2", "-k", "3", "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn dict_on_csv_with_two_targets() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = gsel(&["dict", "--input", boston().to_str().unwrap(), "--targets", "MEDV,CRIM", "-d", "4", "-k", "2", "--algo", "sdsomp", "--out-dir", out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&dir.path().join("dict.csv"));
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0][0], "MEDV");
    assert_eq!(rows[1][0], "CRIM");
}

#[test]
fn synth_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = gsel(&[
            "synth", "--seed", "7", "--runs", "2", "--n", "8", "--m", "60", "--k-min", "1", "--k-max", "4", "--write-tables",
            "--out-dir", out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        out
    };
    let (a, b) = (run("a"), run("b"));
    for f in ["synth_report.json", "synth_mean_r2.csv", "tables/run_000.csv", "tables/run_001.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let rows = csv_rows(&a.join("synth_mean_r2.csv"));
    assert_eq!(rows.len(), 4);
    for col in 1..=4 {
        let series: Vec<f64> = rows.iter().map(|r| cell(&r[col])).collect();
        assert!(series.windows(2).all(|w| w[1] >= w[0] - 1e-12));
    }

    let o = gsel(&["synth", "--rho", "1.5", "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn fit_on_exported_model_matches_csv() {
    let dir = tempfile::tempdir().unwrap();
    let table = SampleTable::from_csv_path(boston()).unwrap();
    let model = CovarianceModel::from_samples(&table, &["MEDV"]).unwrap();
    let model_path = write_model(dir.path(), "boston.json", &model.to_json_string().unwrap());
    let a = dir.path().join("csv");
    let b = dir.path().join("json");
    assert!(gsel(&["fit", "--input", boston().to_str().unwrap(), "--target", "MEDV", "--out-dir", a.to_str().unwrap()]).status.success());
    assert!(gsel(&["fit", "--model", &model_path, "--target", "MEDV", "--out-dir", b.to_str().unwrap()]).status.success());
    for (ra, rb) in csv_rows(&a.join("r2_vs_k.csv")).iter().zip(csv_rows(&b.join("r2_vs_k.csv"))) {
        for (x, y) in ra.iter().zip(&rb).skip(1) {
            assert!((cell(x) - cell(y)).abs() < 1e-9);
        }
    }
}
