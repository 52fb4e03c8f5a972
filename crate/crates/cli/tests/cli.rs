use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"
seed = 11
dataset_root = "run"

[corpus]
per_class = 30
height = 16
width = 16

[featnet]
pool_per_class = 20

[featnet.train]
epochs_max = 4
patience = 1

[nst]
iterations = 5
learning_rate = 0.02

[synthesis]
budget = 8

[split]
k = 2

[classifier.with_da]
epochs_max = 3
patience = 1

[classifier.without_da]
epochs_max = 3
patience = 1
"#;

fn styleforge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_styleforge"))
        .args(args)
        .env_remove("STYLEFORGE_SEED")
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn small_config(dir: &Path) -> String {
    let p = dir.join("small.toml");
    fs::write(&p, SMALL).unwrap();
    p.to_str().unwrap().to_string()
}

fn tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn bad_usage_exits_one() {
    assert_eq!(styleforge(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(styleforge(&["split", "--inject-leakage", "x"]).status.code(), Some(1));
    assert_eq!(styleforge(&["--help"]).status.code(), Some(0));
}

#[test]
fn missing_inputs_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path().join("empty");
    let out = styleforge(&["synth", "--root", root.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn gen_data_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for root in [&a, &b] {
        let out = styleforge(&["gen-data", "--per-class", "45", "--size", "16", "--seed", "5", "--root", root.to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let ta = tree(&a);
    assert_eq!(ta.iter().filter(|(n, _)| n.ends_with(".png")).count(), 90);
    assert_eq!(ta, tree(&b));

    let again = styleforge(&["gen-data", "--per-class", "45", "--size", "16", "--seed", "5", "--root", a.to_str().unwrap()]);
    assert!(String::from_utf8_lossy(&again.stdout).contains("up to date"));
}

#[test]
fn seed_flag_beats_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let run = |root: &Path, env: &str| {
        Command::new(env!("CARGO_BIN_EXE_styleforge"))
            .args(["gen-data", "--per-class", "45", "--size", "16", "--seed", "9", "--root", root.to_str().unwrap()])
            .env("STYLEFORGE_SEED", env)
            .output()
            .unwrap()
    };
    assert!(run(&a, "1").status.success());
    assert!(run(&b, "2").status.success());
    assert_eq!(tree(&a), tree(&b));
    let bad = Command::new(env!("CARGO_BIN_EXE_styleforge"))
        .args(["gen-data", "--root", a.to_str().unwrap()])
        .env("STYLEFORGE_SEED", "seven")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn published_report_text_and_json_agree() {
    let tmp = tempfile::tempdir().unwrap();
    let stem = tmp.path().join("table");
    let out = styleforge(&["report", "--published", "--out", stem.to_str().unwrap()]);
    assert!(out.status.success());
    let text = fs::read_to_string(stem.with_extension("txt")).unwrap();
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(stem.with_extension("json")).unwrap()).unwrap();
    let rows = json["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 8);
    let mut values: Vec<f64> = Vec::new();
    for row in rows {
        values.extend(row["folds"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()));
        values.push(row["average"].as_f64().unwrap());
    }
    for key in ["mean_with_da", "mean_without_da", "improvement"] {
        values.push(json[key].as_f64().unwrap());
    }
    for v in values {
        assert!(text.contains(&v.to_string()), "{v} missing from text table");
    }

    let short = styleforge(&["report", "--published", "--precision", "3"]);
    let s = String::from_utf8_lossy(&short.stdout);
    assert!(s.contains("0.8277") && s.contains("0.0268") && s.contains("0.824"), "{s}");
}

#[test]
fn pipeline_end_to_end_and_leak_audit() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let out = styleforge(&["run-all", "--config", &cfg, "--jobs", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let root = tmp.path().join("run");
    for f in ["real.jsonl", "featnet.sfwb", "synthetic.jsonl", "labeled.jsonl", "folds.json", "report.json", "report.txt"] {
        assert!(root.join(f).exists(), "{f} missing");
    }
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(root.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["rows"].as_array().unwrap().len(), 2);
    assert_eq!(report["folds"].as_u64(), Some(2));

    let rerun = styleforge(&["synth", "--config", &cfg]);
    assert!(String::from_utf8_lossy(&rerun.stdout).contains("up to date"));

    let leak = styleforge(&["split", "--config", &cfg, "--inject-leakage", "3"]);
    assert_eq!(leak.status.code(), Some(2));
    let err = String::from_utf8_lossy(&leak.stderr);
    assert!(err.contains("syn-") && err.contains("fold"), "{err}");
}
