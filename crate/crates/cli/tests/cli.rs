use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn eof(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eof")).args(args).output().expect("binary runs")
}

fn eof_ok(args: &[&str]) -> String {
    let out = eof(args);
    assert!(out.status.success(), "eof {args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn synth(dir: &Path, rows: usize) -> String {
    let path = dir.join("data.csv");
    let p = path.to_str().unwrap().to_string();
    eof_ok(&["synth", "--rows", &rows.to_string(), "--seed", "5", "--out", &p]);
    p
}

fn drop_column(csv: &str, col: usize) -> String {
    csv.lines()
        .map(|l| {
            let mut cells: Vec<&str> = l.split(',').collect();
            cells.remove(col);
            cells.join(",")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn embed_prints_sparse_triplets() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("x.csv");
    fs::write(&data, "a,b\n0.3,0.7\n0.5,0.5\n").unwrap();
    let out = eof_ok(&["embed", "--kernel", "bb", "--level", "2", "--data", data.to_str().unwrap()]);
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("# 2 5 4"));
    let rows: Vec<Vec<String>> = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r.len() == 3));
    // (0.5, 0.5) only meets the level-(1,1) feature: sqrt(C) = sqrt(1/16)
    assert_eq!(rows[3], vec!["1", "0", "0.25"]);
}

#[test]
fn embed_rejects_conflicting_sizes_and_strict_violations() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("x.csv");
    fs::write(&data, "a\n1.5\n").unwrap();
    let d = data.to_str().unwrap();
    assert!(!eof(&["embed", "--level", "2", "--num-features", "3", "--data", d]).status.success());
    assert!(eof(&["embed", "--level", "2", "--data", d]).status.success());
    assert!(!eof(&["embed", "--level", "2", "--strict", "--data", d]).status.success());
}

#[test]
fn train_then_predict() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), 300);
    let model = dir.path().join("model.txt");
    let m = model.to_str().unwrap();
    let summary = eof_ok(&["train", "--data", &data, "--level", "3", "--out", m]);
    assert!(summary.contains("method=eof M=17"), "{summary}");
    assert!(fs::read_to_string(&model).unwrap().starts_with("eof-model v1\n"));

    let out = eof(&["predict", "--model", m, "--data", &data, "--target", "y"]);
    assert!(out.status.success());
    let preds = String::from_utf8(out.stdout).unwrap();
    assert_eq!(preds.lines().count(), 301);
    assert!(String::from_utf8_lossy(&out.stderr).contains("error="));

    // the same rows without the target column give the same predictions
    let inputs = dir.path().join("inputs.csv");
    fs::write(&inputs, drop_column(&fs::read_to_string(&data).unwrap(), 2)).unwrap();
    assert_eq!(eof_ok(&["predict", "--model", m, "--data", inputs.to_str().unwrap()]), preds);
}

#[test]
fn train_random_features_and_classification() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("clf.csv");
    let mut csv = String::from("u,v,label\n");
    for i in 0..120 {
        let (u, v) = ((i * 37 % 101) as f64 / 101.0, (i * 53 % 97) as f64 / 97.0);
        csv.push_str(&format!("{u},{v},{}\n", if u + v > 1.0 { "3" } else { "7" }));
    }
    fs::write(&data, csv).unwrap();
    let d = data.to_str().unwrap();
    let model = dir.path().join("m.txt");
    let m = model.to_str().unwrap();
    let summary = eof_ok(&[
        "train",
        "--data",
        d,
        "--target",
        "label",
        "--task",
        "clf",
        "--method",
        "orf",
        "--num-features",
        "40",
        "--lambda",
        "0.001",
        "--out",
        m,
    ]);
    assert!(summary.contains("method=orf M=40"), "{summary}");
    let preds = eof_ok(&["predict", "--model", m, "--data", d, "--target", "label"]);
    assert!(preds.lines().skip(1).all(|l| l == "3" || l == "7"), "{preds}");

    assert!(!eof(&["train", "--data", d, "--target", "label", "--num-features", "5", "--lambda", "-1", "--out", m])
        .status
        .success());
}

#[test]
fn bench_writes_reports_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), 250);
    let run = |out: &str, threads: &str| {
        let out_dir = dir.path().join(out);
        let status = Command::new(env!("CARGO_BIN_EXE_eof"))
            .env("EOF_THREADS", threads)
            .args(["bench", "--data", &data, "--methods", "eof,rks,lkrf", "--m", "5,10", "--runs", "3", "--seed", "9"])
            .arg("--out")
            .arg(&out_dir)
            .output()
            .unwrap();
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
        out_dir
    };
    let a = run("a", "1");
    let b = run("b", "4");
    for f in ["results.csv", "table.txt", "curves.csv", "timing.csv"] {
        assert!(a.join(f).exists(), "{f} missing");
    }
    let results = fs::read_to_string(a.join("results.csv")).unwrap();
    assert!(results.starts_with("method,M,M0,T_train,nnz_F,mean_error,std_error\n"));
    assert_eq!(results.lines().count(), 7);
    assert!(results.contains("lkrf,10,100,"));
    // everything except the timing column is reproducible
    let untimed = |p: &Path| drop_column(&fs::read_to_string(p.join("results.csv")).unwrap(), 3);
    assert_eq!(untimed(&a), untimed(&b));
    assert_eq!(fs::read(a.join("curves.csv")).unwrap(), fs::read(b.join("curves.csv")).unwrap());
}

#[test]
fn malformed_csv_reports_position() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("bad.csv");
    fs::write(&data, "x,y\n0.1,1\n0.2,oops\n").unwrap();
    let out = eof(&["train", "--data", data.to_str().unwrap(), "--level", "1", "--out", "/dev/null"]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("row 2") && err.contains("column 1"), "{err}");
}
