use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use drf::verify::{CheckStatus, VerificationReport};
use tempfile::TempDir;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn drf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_drf")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Workspace {
    dir: TempDir,
}

impl Workspace {
    fn new() -> Self {
        Workspace { dir: TempDir::new().unwrap() }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn gen(&self, name: &str) -> PathBuf {
        let out = self.path(name);
        let spec = configs().join("paired_350.json");
        let o = drf(&["gen", "--config", s(&spec), "--out", s(&out)]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        out
    }

    fn train(&self, arch: &str, data: &Path, model: &str) -> (PathBuf, Output) {
        let out = self.path(model);
        let cfg = configs().join(format!("{arch}.json"));
        let o = drf(&["train", "--config", s(&cfg), "--data", s(data), "--out", s(&out)]);
        (out, o)
    }
}

#[test]
fn gen_is_deterministic_and_sized() {
    let ws = Workspace::new();
    let a = ws.gen("a");
    let b = ws.gen("b");
    for f in ["data.csv", "data.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap());
    }
    let csv = fs::read_to_string(a.join("data.csv")).unwrap();
    assert_eq!(csv.lines().count(), 351);
}

#[test]
fn gen_seed_flag_changes_data() {
    let ws = Workspace::new();
    let a = ws.gen("a");
    let b = ws.path("b");
    let spec = configs().join("paired_350.json");
    let o = drf(&["gen", "--config", s(&spec), "--out", s(&b), "--seed", "99"]);
    assert_eq!(code(&o), 0);
    assert_ne!(fs::read(a.join("data.csv")).unwrap(), fs::read(b.join("data.csv")).unwrap());
}

#[test]
fn gen_missing_spec_is_a_usage_error() {
    let ws = Workspace::new();
    let o = drf(&["gen", "--config", s(&ws.path("missing.json")), "--out", s(&ws.path("x"))]);
    assert_eq!(code(&o), 2);
    let o = drf(&["gen", "--out", s(&ws.path("x"))]);
    assert_eq!(code(&o), 2);
}

#[test]
fn usage_errors_and_help() {
    assert_eq!(code(&drf(&[])), 2);
    assert_eq!(code(&drf(&["frobnicate"])), 2);
    let help = drf(&["--help"]);
    assert_eq!(code(&help), 0);
    assert!(stdout(&help).contains("verify") || stderr(&help).contains("verify"));
}

#[test]
fn train_prints_cardinalities_and_is_reproducible() {
    let ws = Workspace::new();
    let data = ws.gen("data");
    let (m1, o) = ws.train("arch1_al", &data, "m1.json");
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = stdout(&o);
    let al_line = text.lines().find(|l| l.starts_with("al ")).unwrap();
    let nums: Vec<usize> = al_line.split_whitespace().filter_map(|t| t.parse().ok()).collect();
    assert_eq!(nums[0], 350);
    assert!(nums[1] < 350);

    let (m2, _) = ws.train("arch1_al", &data, "m2.json");
    assert_eq!(fs::read(m1).unwrap(), fs::read(m2).unwrap());
}

#[test]
fn cyclic_config_is_rejected() {
    let ws = Workspace::new();
    let data = ws.gen("data");
    let cyclic = r#"{"nodes":[
        {"name":"p","kind":"primitive","params":{"merge_radius":0.1,"shape":[8]}},
        {"name":"q","kind":"primitive","params":{"merge_radius":0.1,"shape":[8]}}],
        "edges":[{"from":"q","to":"p","slot":0},{"from":"p","to":"q","slot":0}],
        "sources":["digit"],"sink":"p"}"#;
    let cfg = ws.path("cyclic.json");
    fs::write(&cfg, cyclic).unwrap();
    let o = drf(&["train", "--config", s(&cfg), "--data", s(&data), "--out", s(&ws.path("m.json"))]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("cycle"), "{}", stderr(&o));
}

fn row_fields(data: &Path, row: usize) -> Vec<String> {
    let csv = fs::read_to_string(data.join("data.csv")).unwrap();
    csv.lines().nth(row + 1).unwrap().split(',').map(str::to_string).collect()
}

#[test]
fn complete_recovers_the_label_of_a_training_row() {
    let ws = Workspace::new();
    let data = ws.gen("data");
    let (model, _) = ws.train("arch2_columns_al", &data, "m.json");
    for row in [0, 123, 349] {
        let f = row_fields(&data, row);
        let digit = format!("digit={}", f[0..8].join(","));
        let hand = format!("hand={}", f[8..14].join(","));
        let o = drf(&["complete", "--model", s(&model), "--known", &digit, "--known", &hand]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        let done: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
        let class: usize = f[14].parse().unwrap();
        let label: Vec<f64> = serde_json::from_value(done["label"].clone()).unwrap();
        let expected: Vec<f64> = (0..5).map(|k| if k == class { 1.0 } else { 0.0 }).collect();
        assert_eq!(label, expected, "row {row}");
    }
}

#[test]
fn complete_rejects_full_tuples_and_missing_models() {
    let ws = Workspace::new();
    let data = ws.gen("data");
    let (model, _) = ws.train("arch1_al", &data, "m.json");
    let f = row_fields(&data, 0);
    let digit = format!("digit={}", f[0..8].join(","));
    let hand = format!("hand={}", f[8..14].join(","));
    let o = drf(&[
        "complete", "--model", s(&model), "--known", &digit, "--known", &hand, "--known", "label=1,0,0,0,0",
    ]);
    assert_eq!(code(&o), 2);
    let o = drf(&["complete", "--model", s(&ws.path("nope.json")), "--known", &digit]);
    assert_eq!(code(&o), 2);
}

#[test]
fn encode_prints_the_sink_archetype() {
    let ws = Workspace::new();
    let data = ws.gen("data");
    let (model, _) = ws.train("arch1_al", &data, "m.json");
    let f = row_fields(&data, 5);
    let args = [
        format!("digit={}", f[0..8].join(",")),
        format!("hand={}", f[8..14].join(",")),
        "label=1,0,0,0,0".to_string(),
    ];
    let o = drf(&[
        "encode", "--model", s(&model), "--input", &args[0], "--input", &args[1], "--input", &args[2],
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["archetype"].is_u64());
    assert_eq!(v["value"].as_array().unwrap().len(), 19);
}

#[test]
fn verify_healthy_and_faulty_models() {
    let ws = Workspace::new();
    let data = ws.gen("data");
    let (model, _) = ws.train("arch2_columns_al", &data, "m.json");
    let report = ws.path("report.json");
    let o = drf(&["verify", "--model", s(&model), "--data", s(&data), "--out", s(&report)]);
    assert_eq!(code(&o), 0, "{}{}", stdout(&o), stderr(&o));
    let r: VerificationReport = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert!(r.all_passed());
    assert!(r.checks.iter().all(|c| c.cases_run >= 1));

    let o = drf(&["verify", "--model", s(&model), "--data", s(&data), "--out", s(&report), "--inject-fault"]);
    assert_eq!(code(&o), 1);
    let r: VerificationReport = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    let failed: Vec<_> = r.checks.iter().filter(|c| c.status == CheckStatus::Failed).collect();
    assert!(!failed.is_empty());
    assert!(failed.iter().all(|c| c.counterexample.is_some() && !c.passed));
}

#[test]
fn report_compares_architectures() {
    let ws = Workspace::new();
    let data = ws.gen("data");
    let models: Vec<PathBuf> = ["arch1_al", "arch2_columns_al", "arch3_columns_mid_al"]
        .iter()
        .map(|a| ws.train(a, &data, &format!("{a}.json")).0)
        .collect();
    let json = ws.path("table.json");
    let mut args = vec!["report", "--assert-monotone", "--out", s(&json)];
    args.extend(models.iter().map(|m| s(m)));
    let o = drf(&args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let table: serde_json::Value = serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
    let rows = table["models"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r["reduction"].as_u64().unwrap() > 0));
    assert_eq!(table["monotone"], true);
    assert!(!stderr(&o).contains("warning"));

    // Reversed order is not monotone.
    let o = drf(&["report", "--assert-monotone", s(&models[2]), s(&models[0])]);
    assert_eq!(code(&o), 1);

    let o = drf(&["report", s(&models[0])]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o).lines().count(), 2);
}

#[test]
fn report_warns_on_mismatched_datasets() {
    let ws = Workspace::new();
    let a = ws.gen("a");
    let b = ws.path("b");
    let spec = configs().join("paired_350.json");
    assert_eq!(code(&drf(&["gen", "--config", s(&spec), "--out", s(&b), "--seed", "3"])), 0);
    let (ma, _) = ws.train("arch1_al", &a, "ma.json");
    let (mb, _) = ws.train("arch1_al", &b, "mb.json");
    let o = drf(&["report", s(&ma), s(&mb)]);
    assert_eq!(code(&o), 0);
    assert!(stderr(&o).contains("warning"));
}
