use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_attrsparse"));
    c.env_remove("ATTRSPARSE_THREADS");
    c
}

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 temp path")
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).expect("output file")
}

fn synth_features(dir: &Path, a: &str, n: usize) -> PathBuf {
    let out = dir.join("synth.json");
    assert_ok(&run(&["synth", "features", "--a", a, "--n", &n.to_string(), "--out", p(&out)]));
    out
}

#[test]
fn adversarial_with_zero_budget_writes_the_natural_model() {
    let dir = TempDir::new().unwrap();
    let (adv, nat) = (dir.path().join("a.json"), dir.path().join("n.json"));
    let csv = data("mushroom.csv");
    let common = ["train", "--data", p(&csv), "--epochs", "3", "--seed", "4"];
    let mut args = common.to_vec();
    args.extend(["--regime", "adversarial", "--eps", "0", "--out", p(&adv), "--summary", "/dev/null"]);
    assert_ok(&run(&args));
    let mut args = common.to_vec();
    args.extend(["--regime", "natural", "--out", p(&nat), "--summary", "/dev/null"]);
    assert_ok(&run(&args));
    assert_eq!(std::fs::read(&adv).unwrap(), std::fs::read(&nat).unwrap());
}

#[test]
fn train_writes_model_trace_and_summary() {
    let dir = TempDir::new().unwrap();
    let (model, trace, summary) = (dir.path().join("m.json"), dir.path().join("t.csv"), dir.path().join("s.json"));
    let csv = data("mushroom.csv");
    assert_ok(&run(&[
        "train", "--data", p(&csv), "--regime", "adversarial", "--eps", "0.1", "--epochs", "2",
        "--out", p(&model), "--trace", p(&trace), "--summary", p(&summary),
    ]));
    let m: serde_json::Value = serde_json::from_str(&read(&model)).unwrap();
    assert_eq!(m["kind"], "linear");
    assert_eq!(m["d"], 98);
    let t = read(&trace);
    assert_eq!(t.lines().next(), Some("epoch,loss,acc,l1_norm,weight_gini"));
    assert_eq!(t.lines().count(), 3);
    let s: serde_json::Value = serde_json::from_str(&read(&summary)).unwrap();
    assert_eq!(s["config"]["regime"]["kind"], "adversarial");
    assert_eq!(s["config"]["regime"]["epsilon"], 0.1);
    assert!(s["test"]["accuracy"].as_f64().unwrap() > 0.9);
}

#[test]
fn invalid_regime_lists_valid_ones() {
    let dir = TempDir::new().unwrap();
    let csv = data("mushroom.csv");
    let out = run(&["train", "--data", p(&csv), "--regime", "robust", "--out", p(&dir.path().join("m.json"))]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    for name in ["natural", "adversarial", "l1", "stable-ig"] {
        assert!(err.contains(name), "{err}");
    }
}

#[test]
fn data_and_usage_errors_exit_one() {
    let dir = TempDir::new().unwrap();
    let m = dir.path().join("m.json");
    let missing = dir.path().join("missing.csv");
    assert_eq!(run(&["train", "--data", p(&missing), "--out", p(&m)]).status.code(), Some(1));
    assert_eq!(run(&["train", "--out", p(&m)]).status.code(), Some(1));
    let csv = data("mushroom.csv");
    let out = run(&["train", "--data", p(&csv), "--eps", "0.1", "--out", p(&m)]);
    assert_eq!(out.status.code(), Some(1), "--eps without an adversarial regime");
    assert_eq!(run(&["train", "--data", p(&csv), "--regime", "l1", "--out", p(&m)]).status.code(), Some(1));
    assert!(!m.exists());
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn divergence_exits_two() {
    let dir = TempDir::new().unwrap();
    let ds = synth_features(dir.path(), "0,0", 400);
    let out = run(&[
        "train", "--data", p(&ds), "--loss", "hinge", "--optimizer", "sgd", "--lr", "1e9",
        "--out", p(&dir.path().join("m.json")),
    ]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("diverged"));
}

#[test]
fn flags_override_config_file() {
    let dir = TempDir::new().unwrap();
    let ds = synth_features(dir.path(), "1,-0.5,0", 300);
    let cfg = dir.path().join("train.toml");
    std::fs::write(
        &cfg,
        "loss = \"hinge\"\nepochs = 2\nseed = 5\nlearning_rate = 0.05\n[regime]\nkind = \"l1\"\nlambda = 0.5\n",
    )
    .unwrap();
    let summary = dir.path().join("s.json");
    assert_ok(&run(&[
        "train", "--data", p(&ds), "--config", p(&cfg), "--seed", "7", "--lambda", "0.01",
        "--out", p(&dir.path().join("m.json")), "--summary", p(&summary),
    ]));
    let s: serde_json::Value = serde_json::from_str(&read(&summary)).unwrap();
    assert_eq!(s["loss"], "hinge");
    assert_eq!(s["config"]["epochs"], 2);
    assert_eq!(s["config"]["seed"], 7);
    assert_eq!(s["config"]["learning_rate"], 0.05);
    assert_eq!(s["config"]["regime"]["lambda"], 0.01);
    assert_eq!(s["config"]["batch_size"], 32);

    std::fs::write(&cfg, "epochs = 2\nwarmup = 3\n").unwrap();
    let out = run(&["train", "--data", p(&ds), "--config", p(&cfg), "--out", p(&dir.path().join("x.json"))]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn multiclass_data_trains_one_head_per_class() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("three.csv");
    let mut text = String::from("u,v,y\n");
    for i in 0..90 {
        let c = i % 3;
        let jitter = (i as f64 * 0.37).sin() * 0.2;
        let (u, v) = [(0.0, 0.0), (3.0, 0.0), (0.0, 3.0)][c];
        let _ = std::fmt::Write::write_fmt(&mut text, format_args!("{},{},k{c}\n", u + jitter, v - jitter));
    }
    std::fs::write(&csv, text).unwrap();
    std::fs::write(
        dir.path().join("three.schema.toml"),
        "label = \"y\"\nmulticlass = true\n[[columns]]\nname = \"u\"\nkind = \"numeric\"\n[[columns]]\nname = \"v\"\nkind = \"numeric\"\n[[columns]]\nname = \"y\"\nkind = \"label\"\n",
    )
    .unwrap();
    let (model, trace, summary) = (dir.path().join("m.json"), dir.path().join("t.csv"), dir.path().join("s.json"));
    assert_ok(&run(&[
        "train", "--data", p(&csv), "--bias", "true", "--epochs", "50", "--out", p(&model), "--trace", p(&trace),
        "--summary", p(&summary),
    ]));
    let m: serde_json::Value = serde_json::from_str(&read(&model)).unwrap();
    assert_eq!(m["heads"].as_array().unwrap().len(), 3);
    let t = read(&trace);
    assert!(t.starts_with("head,epoch,"));
    assert_eq!(t.lines().count(), 1 + 3 * 50);
    let s: serde_json::Value = serde_json::from_str(&read(&summary)).unwrap();
    assert!(s["test"]["accuracy"].as_f64().unwrap() > 0.9);
}

#[test]
fn compare_without_epsilons_has_only_natural_and_l1_rows() {
    let dir = TempDir::new().unwrap();
    let ds = synth_features(dir.path(), "1,0.5,0,0,-0.3", 600);
    let (report, table) = (dir.path().join("r.json"), dir.path().join("t.csv"));
    assert_ok(&run(&[
        "compare", "--data", p(&ds), "--eps", "--lambda", "0.01,0.05", "--epochs", "5",
        "--report", p(&report), "--table", p(&table),
    ]));
    let t = read(&table);
    let models: Vec<&str> = t.lines().skip(1).map(|l| l.split(',').nth(2).unwrap()).collect();
    assert_eq!(models, ["n", "l(0.01)", "l(0.05)"]);
    assert!(t.lines().nth(1).unwrap().ends_with(",n,0.0000,0.00"));
    let r: serde_json::Value = serde_json::from_str(&read(&report)).unwrap();
    assert_eq!(r["comparison"]["adversarial"].as_array().unwrap().len(), 0);
    assert_eq!(r["comparison"]["natural"]["dg"], 0.0);
    assert_eq!(r["config"]["train"]["epochs"], 5);
    assert!(r.get("runtime_secs").is_none());
}

#[test]
fn compare_is_byte_identical_across_runs_and_thread_counts() {
    let dir = TempDir::new().unwrap();
    let ds = synth_features(dir.path(), "0.8,-0.4,0.1,0", 500);
    let outputs = |tag: &str, threads: Option<&str>| -> Vec<Vec<u8>> {
        let names = ["r", "t", "d", "o"].map(|n| dir.path().join(format!("{tag}_{n}")));
        let mut cmd = bin();
        if let Some(t) = threads {
            cmd.env("ATTRSPARSE_THREADS", t);
        }
        cmd.args([
            "compare", "--data", p(&ds), "--eps", "0.05,0.2", "--lambda", "0.02", "--epochs", "4",
            "--report", p(&names[0]), "--table", p(&names[1]), "--distribution", p(&names[2]), "--tradeoff", p(&names[3]),
        ]);
        assert_ok(&cmd.output().unwrap());
        names.iter().map(|n| std::fs::read(n).unwrap()).collect()
    };
    let first = outputs("a", None);
    assert_eq!(first, outputs("b", None));
    assert_eq!(first, outputs("c", Some("1")));
    let tradeoff = String::from_utf8(first[3].clone()).unwrap();
    assert_eq!(tradeoff.lines().count(), 5);

    let bad = bin().env("ATTRSPARSE_THREADS", "zero").args(["gini", "--values", "1"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(1));
}

fn attributions(path: &Path) -> HashMap<(String, String), f64> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records()
        .map(|rec| {
            let rec = rec.unwrap();
            ((rec[0].to_string(), rec[1].to_string()), rec[2].parse().unwrap())
        })
        .collect()
}

#[test]
fn attribute_spambase_closed_matches_numeric() {
    let dir = TempDir::new().unwrap();
    let csv = data("spambase.csv");
    let model = dir.path().join("m.json");
    assert_ok(&run(&["train", "--data", p(&csv), "--epochs", "3", "--out", p(&model), "--summary", "/dev/null"]));
    let (closed, numeric) = (dir.path().join("c.csv"), dir.path().join("n.csv"));
    let (fv, fi) = (dir.path().join("fv.csv"), dir.path().join("fi.csv"));
    assert_ok(&run(&[
        "attribute", "--model", p(&model), "--data", p(&csv), "--method", "closed", "--out", p(&closed),
        "--fv", p(&fv), "--fi", p(&fi), "--summary", "/dev/null",
    ]));
    assert_ok(&run(&[
        "attribute", "--model", p(&model), "--data", p(&csv), "--method", "numeric", "--steps", "4096",
        "--out", p(&numeric), "--summary", "/dev/null",
    ]));
    let (a, b) = (attributions(&closed), attributions(&numeric));
    assert_eq!(a.len(), b.len());
    let worst = a.iter().map(|(k, v)| (v - b[k]).abs()).fold(0.0f64, f64::max);
    assert!(worst <= 1e-6, "max difference {worst}");

    let fi_text = read(&fi);
    assert_eq!(fi_text.lines().next(), Some("feature,fi"));
    assert_eq!(fi_text.lines().count(), 1 + 57);
    assert_eq!(read(&fv).lines().count(), 1 + 57);

    let out = run(&[
        "attribute", "--model", p(&model), "--data", p(&csv), "--baseline", "0,0,0", "--out", p(&dir.path().join("x.csv")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("dimension mismatch"));
}

#[test]
fn image_dataset_gets_one_pgm_per_example() {
    let dir = TempDir::new().unwrap();
    let ds = dir.path().join("blobs.json");
    assert_ok(&run(&["synth", "blobs", "--n", "100", "--height", "6", "--width", "5", "--out", p(&ds)]));
    let model = dir.path().join("m.json");
    assert_ok(&run(&["train", "--data", p(&ds), "--epochs", "5", "--out", p(&model), "--summary", "/dev/null"]));
    let pgm = dir.path().join("pgm");
    let summary = dir.path().join("s.json");
    assert_ok(&run(&[
        "attribute", "--model", p(&model), "--data", p(&ds), "--out", p(&dir.path().join("a.csv")),
        "--pgm-dir", p(&pgm), "--summary", p(&summary),
    ]));
    let s: serde_json::Value = serde_json::from_str(&read(&summary)).unwrap();
    let files: Vec<_> = std::fs::read_dir(&pgm).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(files.len() as u64, s["examples"].as_u64().unwrap());
    for f in &files {
        let text = read(f);
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("P2"));
        assert_eq!(lines.next(), Some("5 6"));
        assert_eq!(lines.next(), Some("255"));
        assert_eq!(lines.count(), 6);
    }

    let tab = dir.path().join("tab.json");
    let tab_model = dir.path().join("tm.json");
    let tab_ds = synth_features(dir.path(), "1,0", 50);
    std::fs::rename(&tab_ds, &tab).unwrap();
    assert_ok(&run(&["train", "--data", p(&tab), "--epochs", "1", "--out", p(&tab_model), "--summary", "/dev/null"]));
    let out = run(&[
        "attribute", "--model", p(&tab_model), "--data", p(&tab), "--out", p(&dir.path().join("b.csv")),
        "--pgm-dir", p(&pgm),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn f32_models_round_trip_through_attribute() {
    let dir = TempDir::new().unwrap();
    let ds = synth_features(dir.path(), "1,-1,0.2", 200);
    let model = dir.path().join("m.json");
    assert_ok(&run(&[
        "train", "--data", p(&ds), "--precision", "f32", "--epochs", "3", "--out", p(&model), "--summary", "/dev/null",
    ]));
    let m: serde_json::Value = serde_json::from_str(&read(&model)).unwrap();
    assert_eq!(m["scalar"], "f32");
    let summary = dir.path().join("s.json");
    assert_ok(&run(&[
        "attribute", "--model", p(&model), "--data", p(&ds), "--out", p(&dir.path().join("a.csv")),
        "--summary", p(&summary),
    ]));
    let s: serde_json::Value = serde_json::from_str(&read(&summary)).unwrap();
    assert_eq!(s["scalar"], "f32");
}

#[test]
fn gini_of_values_and_attribution_files() {
    let out = run(&["gini", "--values", "0,0,0,5"]);
    assert_ok(&out);
    let g: f64 = String::from_utf8_lossy(&out.stdout).trim().parse().unwrap();
    assert!((g - 0.75).abs() < 1e-15);
    let out = run(&["gini", "--values", "-2,2"]);
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "0");

    let dir = TempDir::new().unwrap();
    let attr = dir.path().join("a.csv");
    std::fs::write(&attr, "example_id,feature,value\n7,x,1\n7,\"a,b\",-1\n3,x,0\n3,\"a,b\",4\n").unwrap();
    let out = run(&["gini", "--attributions", p(&attr)]);
    assert_ok(&out);
    assert_eq!(
        String::from_utf8_lossy(&out.stdout),
        "example_id,gini,degenerate\n7,0,false\n3,0.5,false\n"
    );
    assert_eq!(run(&["gini"]).status.code(), Some(1));
    assert_eq!(run(&["gini", "--values", "1", "--attributions", p(&attr)]).status.code(), Some(1));
}

fn verify_report(args: &[&str]) -> (Option<i32>, serde_json::Value) {
    let out = run(args);
    let report = serde_json::from_slice(&out.stdout).unwrap_or(serde_json::Value::Null);
    (out.status.code(), report)
}

#[test]
fn verify_thm3_thousand_trials() {
    let (code, r) = verify_report(&["verify", "thm3", "--trials", "1000"]);
    assert_eq!(code, Some(0));
    assert_eq!(r["passed"], true);
    let checks = r["checks"].as_array().unwrap();
    assert_eq!(checks.len(), 6);
    for c in checks {
        assert!(c["estimate"].as_f64().unwrap() <= 1e-9);
    }
}

#[test]
fn verify_thm1_zero_at_full_sample_size() {
    let (code, r) = verify_report(&["verify", "thm1-zero", "--n", "100000"]);
    assert_eq!(code, Some(0));
    assert_eq!(r["passed"], true);
    assert_eq!(r["checks"].as_array().unwrap().len(), 15);
    assert_eq!(r["configuration"]["n"], 100000);
}

#[test]
fn verify_bound_and_lemma_reports() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("v.json");
    let o = run(&[
        "verify", "thm1-bound", "--n", "20000", "--trials", "3", "--limit-configs", "1", "--loss", "logistic",
        "--out", p(&out),
    ]);
    assert_ok(&o);
    let r: serde_json::Value = serde_json::from_str(&read(&out)).unwrap();
    assert_eq!(r["checks"].as_array().unwrap().len(), 4);
    assert_eq!(r["configuration"]["configurations"].as_array().unwrap().len(), 3);

    let (code, r) = verify_report(&["verify", "lemmaD1", "--n", "20000", "--trials", "5"]);
    assert_eq!(code, Some(0));
    assert_eq!(r["checks"].as_array().unwrap().len(), 5);

    let (first, second) = (run(&["verify", "thm3", "--trials", "50"]), run(&["verify", "thm3", "--trials", "50"]));
    assert_eq!(first.stdout, second.stdout);
}

#[test]
fn verify_unknown_id_exits_one() {
    let out = run(&["verify", "thm2"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("thm1-zero"));
    assert_eq!(run(&["verify", "thm3", "--loss", "square"]).status.code(), Some(1));
}
