use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use polyrank::dnnrank::{format_dataset, synthetic_dataset};

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

fn polyrank(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_polyrank")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn analyze_matmul_rows() {
    let o = polyrank(&["analyze", "--nest", p(&data("matmul.nest")), "--format", "rows"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let a_rar: Vec<&str> = out.lines().filter(|l| l.starts_with("dep\t") && l.contains("\tRAR\tA\t")).collect();
    assert_eq!(a_rar.len(), 1, "{out}");
    let f: Vec<&str> = a_rar[0].split('\t').collect();
    assert_eq!((f[6], f[7]), ("11", "21"));
    assert!(out.lines().any(|l| l.starts_with("cost\tidentity\t")));
}

#[test]
fn analyze_with_machine_file() {
    let o = polyrank(&["analyze", "--nest", p(&data("matmul.nest")), "--machine", p(&data("cascadelake.machine"))]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("\ncost "));
}

#[test]
fn missing_machine_file_exits_2() {
    let o = polyrank(&["analyze", "--nest", p(&data("matmul.nest")), "--machine", "/nonexistent/x.machine"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("/nonexistent/x.machine"));
}

#[test]
fn malformed_nest_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("bad.nest");
    std::fs::write(&f, "loop i lower 0 upper\n").unwrap();
    let o = polyrank(&["analyze", "--nest", p(&f)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("bad.nest"));
}

#[test]
fn nest_and_preset_together_is_usage_error() {
    let o = polyrank(&["analyze", "--nest", p(&data("matmul.nest")), "--preset", "conv"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn rank_matmul_writes_top_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = polyrank(&[
        "rank",
        "--nest",
        p(&data("matmul.nest")),
        "--variants",
        p(&data("matmul_orders.variants")),
        "--top-k",
        "2",
        "--out",
        p(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = std::fs::read_to_string(out.join("report.txt")).unwrap();
    assert_eq!(report, stdout(&o));
    assert!(report.contains("variants 6\n"));
    let emitted: Vec<&str> = report.lines().filter(|l| l.starts_with("emitted ")).collect();
    assert_eq!(emitted.len(), 2);
    assert!(out.join("rank1.c").exists() && out.join("rank2.c").exists() && !out.join("rank3.c").exists());
    let first_row = report.lines().find(|l| l.trim_start().starts_with("1 ")).unwrap();
    let best_id = emitted[0].split_whitespace().nth(2).unwrap();
    assert!(first_row.contains(best_id));
}

#[test]
fn dnn_ranker_without_weights() {
    let o = polyrank(&["rank", "--nest", p(&data("matmul.nest")), "--ranker", "dnn"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("weights"));
}

#[test]
fn train_then_rank_with_dnn() {
    let dir = tempfile::tempdir().unwrap();
    let ds = dir.path().join("pairs.txt");
    std::fs::write(&ds, format_dataset(&synthetic_dataset(10, 3))).unwrap();
    let w = dir.path().join("w.txt");
    let o = polyrank(&["train", "--dataset", p(&ds), "--weights", p(&w), "--epochs", "5", "--format", "rows"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let row = stdout(&o).lines().nth(1).unwrap().to_string();
    let f: Vec<&str> = row.split('\t').collect();
    assert_eq!((f[1], f[2]), ("7", "3"));
    let o = polyrank(&[
        "rank",
        "--nest",
        p(&data("matmul.nest")),
        "--variants",
        p(&data("matmul_orders.variants")),
        "--ranker",
        "dnn",
        "--weights",
        p(&w),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("ranker dnn\nvariants 6\n"));
}

#[test]
fn train_reports_malformed_row() {
    let dir = tempfile::tempdir().unwrap();
    let ds = dir.path().join("pairs.txt");
    let mut text = format_dataset(&synthetic_dataset(6, 3));
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let data_lines: Vec<usize> = (0..lines.len()).filter(|&i| !lines[i].starts_with('#')).collect();
    let bad = data_lines[4];
    lines[bad] = "1 2 3 A".into();
    text = lines.join("\n") + "\n";
    std::fs::write(&ds, text).unwrap();
    let o = polyrank(&["train", "--dataset", p(&ds), "--weights", p(&dir.path().join("w.txt"))]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains(&format!("line {}", bad + 1)), "{err}");
}

#[test]
fn emit_conv_identity_matches_golden() {
    let o = polyrank(&["emit", "--preset", "conv:2,32,32,4,4,3,3,1,1,16"]);
    assert!(o.status.success());
    let golden = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/conv_identity.c")).unwrap();
    assert_eq!(stdout(&o), golden);
}

#[test]
fn emit_rejects_band_permutation() {
    let o = polyrank(&["emit", "--preset", "conv", "--recipe", "perm=ofm_tile,ifm_tile,oj,kj,oi"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("configuration rejected"));
}

#[test]
fn oracle_check_matmul() {
    let o = polyrank(&["oracle-check", "--nest", p(&data("matmul.nest"))]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("mismatches 0\n"));
    assert!(!out.contains("MISMATCH"));
}
