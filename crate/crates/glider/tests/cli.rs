use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use glider::formats::{read_dataset, read_json, write_dataset};
use glider_core::SurrogateNet;
use serde_json::{json, Value};
use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_glider");
const SMALL: &[&str] = &["--mode", "continuous", "--hidden", "32,16", "--n-perturb", "1000"];

fn glider(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN).args(args).current_dir(dir).env("MADEX_LOG", "error").output().unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = glider(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) {
    fs::write(dir.join(name), text).unwrap();
}

/// 10 dense columns in [-1, 1] plus one categorical column.
fn write_batch(dir: &Path, rows: usize) {
    let mut s = String::from("x1,x2,x3,x4,x5,x6,x7,x8,x9,x10,cat\n");
    for r in 0..rows {
        let vals: Vec<String> = (0..10).map(|c| format!("{:.3}", (((r * 31 + c * 17) * 7919) % 2001) as f64 / 1000.0 - 1.0)).collect();
        s += &format!("{},{}\n", vals.join(","), ["a", "b", "c"][r % 3]);
    }
    write(dir, "data.csv", &s);
    let fields: Vec<Value> = (1..=10).map(|i| json!({"name": format!("x{i}"), "kind": "dense"})).collect();
    write(dir, "schema.json", &json!({ "fields": fields }).to_string());
}

fn snapshot(dir: &Path, files: &[&str]) -> Vec<Vec<u8>> {
    files.iter().map(|f| fs::read(dir.join(f)).unwrap()).collect()
}

/// Reruns `--config <doc>` and checks every listed output is byte-identical.
fn assert_rerun_identical(dir: &Path, config_doc: &str, files: &[&str]) {
    let before = snapshot(dir, files);
    let copy = dir.join("rerun-config.json");
    fs::copy(dir.join(config_doc), &copy).unwrap();
    for f in files {
        fs::remove_file(dir.join(f)).unwrap();
    }
    ok(dir, &["--config", copy.to_str().unwrap()]);
    for (f, b) in files.iter().zip(before) {
        assert!(fs::read(dir.join(f)).unwrap() == b, "{f} changed on rerun");
    }
}

#[test]
fn usage_errors_exit_2() {
    let t = TempDir::new().unwrap();
    let d = t.path();
    write(d, "x.json", "[0,0,0,0,0,0,0,0,0,0]");
    assert_eq!(code(&glider(d, &[])), 2);
    assert_eq!(code(&glider(d, &["explain", "--builtin", "F1"])), 2);
    assert_eq!(code(&glider(d, &["explain", "--builtin", "F7", "--instance", "x.json"])), 2);
    assert_eq!(code(&glider(d, &["--jobs", "0", "explain", "--builtin", "F1", "--instance", "x.json"])), 2);
    // dense fields in binary mode need an off state
    assert_eq!(code(&glider(d, &["explain", "--builtin", "F1", "--instance", "x.json"])), 2);
    assert_eq!(code(&glider(d, &["bench", "--function", "F4", "--detector", "gradnid", "--out-dir", "b"])), 2);
}

#[test]
fn runtime_errors_exit_1() {
    let t = TempDir::new().unwrap();
    let d = t.path();
    assert_eq!(code(&glider(d, &["explain", "--builtin", "F1", "--instance", "missing.json", "--mode", "continuous"])), 1);
    write(d, "short.json", "[1,2,3]");
    assert_eq!(code(&glider(d, &["explain", "--builtin", "F1", "--instance", "short.json", "--mode", "continuous"])), 1);
    write(d, "x.json", "[0,0,0,0,0,0,0,0,0,0]");
    assert_eq!(code(&glider(d, &["explain", "--model", "exit 3", "--instance", "x.json", "--mode", "continuous"])), 1);
}

#[test]
fn explain_finds_the_product_pair_and_nothing_in_an_additive_model() {
    let t = TempDir::new().unwrap();
    let d = t.path();
    write(d, "x.json", r#"{"id": "row-7", "values": [0.5,0.5,0.5,0.5,0.5,0.5,0.5,0.5,0.5,0.5]}"#);

    let mut args = vec!["explain", "--builtin", "F1", "--instance", "x.json", "--out", "f1.json"];
    args.extend_from_slice(SMALL);
    ok(d, &args);
    let doc: Value = read_json(&d.join("f1.json")).unwrap();
    assert_eq!(doc["instance_id"], "row-7");
    // single instances default to the gradient detector
    assert_eq!(doc["detector"], "gradnid");
    assert!(doc["k"].as_u64().unwrap() >= 1);
    assert_eq!(doc["interactions"][0]["features"], json!([1, 2]));
    assert_eq!(doc["interactions"][0]["names"], json!(["x1", "x2"]));
    assert_eq!(doc["seed"], 0);
    assert!(doc["config_hash"].is_string());

    let mut args = vec!["explain", "--builtin", "additive", "--instance", "x.json"];
    args.extend_from_slice(SMALL);
    let out = ok(d, &args);
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["k"], 0);
    assert_eq!(doc["interactions"], json!([]));
}

#[test]
fn explain_through_an_adapter_process() {
    let t = TempDir::new().unwrap();
    let d = t.path();
    write(d, "x.json", "[0.5,0.5,0.5,0.5,0.5,0.5,0.5,0.5,0.5,0.5]");
    let cmd = format!("'{BIN}' serve --builtin F1");
    let mut args = vec!["explain", "--model", &cmd, "--instance", "x.json", "--out", "r.json"];
    args.extend_from_slice(SMALL);
    ok(d, &args);
    let remote: Value = read_json(&d.join("r.json")).unwrap();
    let mut args = vec!["explain", "--builtin", "F1", "--instance", "x.json", "--out", "l.json"];
    args.extend_from_slice(SMALL);
    ok(d, &args);
    let local: Value = read_json(&d.join("l.json")).unwrap();
    assert_eq!(remote["interactions"], local["interactions"]);
}

#[test]
fn saved_dataset_and_net_round_trip() {
    let t = TempDir::new().unwrap();
    let d = t.path();
    write(d, "x.json", "[0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1.0]");
    let mut args = vec!["explain", "--builtin", "F2", "--instance", "x.json", "--save-dataset", "ds", "--save-net", "net.json", "--out", "r.json"];
    args.extend_from_slice(SMALL);
    ok(d, &args);

    let (ds, manifest) = read_dataset(&d.join("ds")).unwrap();
    assert_eq!(manifest.rows, 1200);
    assert_eq!(manifest.dim, 10);
    assert_eq!(ds.inputs.rows(), 1200);
    assert!(ds.labels.iter().all(|v| v.is_finite()));
    write_dataset(&d.join("ds2"), &ds, manifest.perturbation.clone(), manifest.kernel_width).unwrap();
    assert_eq!(fs::read(d.join("ds.csv")).unwrap(), fs::read(d.join("ds2.csv")).unwrap());
    assert_eq!(fs::read(d.join("ds.manifest.json")).unwrap(), fs::read(d.join("ds2.manifest.json")).unwrap());

    let net: SurrogateNet = read_json(&d.join("net.json")).unwrap();
    let again = serde_json::to_string_pretty(&net).unwrap() + "\n";
    assert_eq!(again, fs::read_to_string(d.join("net.json")).unwrap());
    assert!(net.eval(&[0.0; 10]).is_finite());
}

#[test]
fn explain_rerun_from_config_is_identical() {
    let t = TempDir::new().unwrap();
    let d = t.path();
    write(d, "x.json", "[0.5,-0.5,0.5,-0.5,0.5,-0.5,0.5,-0.5,0.5,-0.5]");
    let mut args = vec!["explain", "--builtin", "F3", "--instance", "x.json", "--out", "r.json", "--seed", "11", "--save-dataset", "ds"];
    args.extend_from_slice(SMALL);
    ok(d, &args);
    assert_rerun_identical(d, "r.json", &["r.json", "ds.csv", "ds.manifest.json"]);
}

#[test]
fn global_rerun_is_identical_and_independent_of_jobs() {
    let t = TempDir::new().unwrap();
    let d = t.path();
    write_batch(d, 8);
    let base = ["global", "--builtin", "F1", "--data", "data.csv", "--schema", "schema.json", "--batch", "6", "--out-dir", "g"];
    let mut args: Vec<&str> = vec!["--jobs", "1"];
    args.extend_from_slice(&base);
    args.extend_from_slice(SMALL);
    ok(d, &args);
    let files = ["g/summary.json", "g/report.txt", "g/rank.csv"];
    let one = snapshot(d, &files);

    let summary: Value = read_json(&d.join("g/summary.json")).unwrap();
    assert_eq!(summary["batch_size"], 6);
    assert_eq!(summary["entries"][0]["features"], json!([1, 2]));

    args[1] = "3";
    ok(d, &args);
    assert!(snapshot(d, &files) == one, "--jobs changed the output");
    assert_rerun_identical(d, "g/summary.json", &files);
}

#[test]
fn global_prunes_to_k() {
    let t = TempDir::new().unwrap();
    let d = t.path();
    write_batch(d, 4);
    let mut args = vec!["global", "--builtin", "F4", "--data", "data.csv", "--schema", "schema.json", "--batch", "4", "-K", "1", "--out-dir", "g"];
    args.extend_from_slice(SMALL);
    ok(d, &args);
    let s: Value = read_json(&d.join("g/summary.json")).unwrap();
    assert!(s["entries"].as_array().unwrap().len() <= 1);
    assert_eq!(s["pruned"]["k"], 1);
}

#[test]
fn cross_outputs_and_rerun() {
    let t = TempDir::new().unwrap();
    let d = t.path();
    write_batch(d, 120);
    let mut schema: Value = read_json(&d.join("schema.json")).unwrap();
    schema["fields"].as_array_mut().unwrap().push(json!({"name": "cat", "kind": "sparse", "vocabulary": ["a", "b", "c"]}));
    write(d, "schema2.json", &schema.to_string());
    write(d, "ix.json", r#"[["x1", "x2"], [3, 11], ["x4", "x5", "x6"]]"#);
    ok(d, &["cross", "--data", "data.csv", "--schema", "schema2.json", "--interactions", "ix.json", "-K", "2", "-T", "5", "--max-bins", "4", "--out-dir", "c"]);

    let aug = fs::read_to_string(d.join("c/augmented.csv")).unwrap();
    let mut lines = aug.lines();
    assert_eq!(lines.next().unwrap(), "x1,x2,x3,x4,x5,x6,x7,x8,x9,x10,cat,cross__x1__x2,cross__x3__cat");
    assert_eq!(lines.count(), 120);
    let card: Value = read_json(&d.join("c/cardinality.json")).unwrap();
    assert_eq!(card["crosses"][0]["theoretical"], 16);
    assert_eq!(card["crosses"][1]["field_cardinalities"], json!([4, 3]));

    assert_rerun_identical(d, "c/crosses.json", &["c/augmented.csv", "c/crosses.json", "c/cardinality.json"]);

    write(d, "bad.json", r#"[["x1", "nope"]]"#);
    let out = glider(d, &["cross", "--data", "data.csv", "--schema", "schema2.json", "--interactions", "bad.json", "--out-dir", "c2"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn cross_reads_a_global_summary() {
    let t = TempDir::new().unwrap();
    let d = t.path();
    write_batch(d, 6);
    let mut args = vec!["global", "--builtin", "F1", "--data", "data.csv", "--schema", "schema.json", "--batch", "3", "--out-dir", "g"];
    args.extend_from_slice(SMALL);
    ok(d, &args);
    ok(d, &["cross", "--data", "data.csv", "--schema", "schema.json", "--interactions", "g/summary.json", "-K", "1", "-T", "0", "--out-dir", "c"]);
    let crosses: Value = read_json(&d.join("c/crosses.json")).unwrap();
    assert_eq!(crosses["crosses"][0]["fields"], json!(["x1", "x2"]));
}

#[test]
fn bench_outputs_and_rerun() {
    let t = TempDir::new().unwrap();
    let d = t.path();
    ok(d, &["bench", "--function", "F1", "--trials", "1", "--instances", "2", "--hidden", "32,16", "--n-perturb", "1000", "--blackbox-samples", "5000", "--out-dir", "b"]);
    let report: Value = read_json(&d.join("b/report.json")).unwrap();
    assert_eq!(report["report"]["trials"][0]["scores"].as_array().unwrap().len(), 2);
    let grid = fs::read_to_string(d.join("b/grid.csv")).unwrap();
    assert_eq!(grid.lines().count(), 3);
    assert!(fs::read_to_string(d.join("b/summary.txt")).unwrap().contains("R-precision"));
    assert_rerun_identical(d, "b/report.json", &["b/report.json", "b/grid.csv", "b/summary.txt"]);
}

#[test]
fn edited_config_changes_the_run() {
    let t = TempDir::new().unwrap();
    let d = t.path();
    write(d, "x.json", "[0,0,0,0,0,0,0,0,0,0]");
    let mut args = vec!["explain", "--builtin", "additive", "--instance", "x.json", "--out", "r.json"];
    args.extend_from_slice(SMALL);
    ok(d, &args);
    let doc: Value = read_json(&d.join("r.json")).unwrap();
    let mut cfg = doc["config"].clone();
    cfg["seed"] = json!(5);
    cfg["n_perturb"] = json!(900);
    cfg["out"] = json!("r5.json");
    write(d, "cfg.json", &cfg.to_string());
    ok(d, &["--config", "cfg.json"]);
    let r5: Value = read_json(&d.join("r5.json")).unwrap();
    assert_eq!(r5["seed"], 5);
    assert_eq!(r5["config"]["n_perturb"], 900);
    assert_ne!(r5["config_hash"], doc["config_hash"]);

    write(d, "junk.json", r#"{"command": "explain"}"#);
    assert_eq!(code(&glider(d, &["--config", "junk.json"])), 2);
    assert_eq!(code(&glider(d, &["--config", "cfg.json", "serve", "--builtin", "F1"])), 2);
}
