use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_uplift-rank")).args(args).output().unwrap()
}

fn ok(args: &[&str]) {
    let o = run(args);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn gen_train_eval_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let (g, t, e) = (dir.path().join("g"), dir.path().join("t"), dir.path().join("e"));
    ok(&["gen", "--n", "3000", "--d", "4", "--seed", "7", "--out", p(&g)]);
    for f in ["dataset.csv", "dataset.json", "config.resolved.json"] {
        assert!(g.join(f).exists(), "{f}");
    }
    let data = g.join("dataset.csv");
    ok(&["train", "--data", p(&data), "--model", "drm", "--iterations", "50", "--out", p(&t)]);
    assert!(t.join("model.json").exists() && t.join("trace.csv").exists());
    ok(&["eval", "--data", p(&data), "--model", p(&t.join("model.json")), "--out", p(&e)]);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(e.join("summary.json")).unwrap()).unwrap();
    assert!(summary["aucc"].is_f64());
    assert_eq!(summary["generalization"]["rows"].as_array().unwrap().len(), 7);
    assert!(e.join("curve.csv").exists());
}

#[test]
fn resolved_config_reproduces_a_run() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&["gen", "--n", "500", "--seed", "3", "--noise", "0.2", "--out", p(&a)]);
    ok(&["gen", "--config", p(&a.join("config.resolved.json")), "--out", p(&b)]);
    assert_eq!(std::fs::read(a.join("dataset.csv")).unwrap(), std::fs::read(b.join("dataset.csv")).unwrap());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["gen", "--bogus"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["train", "--model", "drm"]).status.code(), Some(1));
    assert_eq!(run(&["train", "--data", "/nonexistent.csv", "--out", p(dir.path())]).status.code(), Some(2));

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"n": 100, "typo": 1}"#).unwrap();
    assert_eq!(run(&["gen", "--config", p(&bad), "--out", p(dir.path())]).status.code(), Some(1));

    let csv = dir.path().join("treated.csv");
    std::fs::write(&csv, "id,strategy,t,y_r,y_c,f0\na,explore,1,1,1,0\nb,explore,1,2,1,1\n").unwrap();
    assert_eq!(run(&["train", "--data", p(&csv), "--out", p(dir.path())]).status.code(), Some(2));
}

#[test]
fn compare_table_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("g");
    ok(&["gen", "--n", "3000", "--d", "4", "--seed", "1", "--out", p(&g)]);
    let data = g.join("dataset.csv");
    let gen_cfg = g.join("config.resolved.json");
    let runs: Vec<Vec<u8>> = ["c1", "c2"]
        .iter()
        .map(|c| {
            let out = dir.path().join(c);
            ok(&[
                "compare",
                "--data",
                p(&data),
                "--models",
                "random,drm,duality,oracle",
                "--generator",
                p(&gen_cfg),
                "--iterations",
                "100",
                "--out",
                p(&out),
            ]);
            std::fs::read(out.join("summary.json")).unwrap()
        })
        .collect();
    assert_eq!(runs[0], runs[1]);
    let table = std::fs::read_to_string(dir.path().join("c1/compare.csv")).unwrap();
    assert!(table.starts_with("algorithm,dataset,aucc,improvement_over_duality_pct\n"));
    assert_eq!(table.lines().count(), 5);
    let s: serde_json::Value = serde_json::from_slice(&runs[0]).unwrap();
    let duality = s["rows"].as_array().unwrap().iter().find(|r| r["algorithm"] == "duality").unwrap();
    assert_eq!(duality["improvement_over_duality_pct"], 0.0);
}

#[test]
fn simulate_writes_log_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s");
    ok(&[
        "simulate",
        "--population",
        "2000",
        "--d",
        "4",
        "--cycles",
        "2",
        "--iterations",
        "50",
        "--models",
        "drm,random",
        "--out",
        p(&out),
    ]);
    let s: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(s["cycles"].as_array().unwrap().len(), 2);
    assert_eq!(s["cycles"][1]["arms"].as_array().unwrap().len(), 3);
    assert!(std::fs::read_to_string(out.join("log.csv")).unwrap().starts_with("cycle,arm,id,strategy,t,y_r,y_c,f0"));
}
