use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn spanrel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spanrel"))
        .args(args)
        .env("SPANREL_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("stdout is not JSON ({e}): {}", String::from_utf8_lossy(&out.stdout)))
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const CONLL: &str = "-DOCSTART- -X- -X- O\n\nEU NNP B-NP B-ORG\nrejects VBZ B-VP O\nGerman JJ B-NP B-MISC\ncall NN I-NP O\n. . O O\n\nPeter NNP B-NP B-PER\nBlackburn NNP I-NP I-PER\n\n";

#[test]
fn convert_valid_conll() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("train.conll");
    fs::write(&input, CONLL).unwrap();
    let out = dir.path().join("brat");
    let o = spanrel(&["convert", "--format", "conll2003_ner", p(&input), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = report(&o);
    assert_eq!(r["summary"]["documents"], 1);
    assert_eq!(r["summary"]["spans"], 3);

    let v = spanrel(&["validate", p(&out), "--task", "NER"]);
    assert_eq!(v.status.code(), Some(0), "{}", stderr(&v));
    assert_eq!(report(&v)["violations"], Value::Array(vec![]));
}

#[test]
fn malformed_line_exits_with_format_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut lines: Vec<String> = (0..16).map(|i| format!("w{i} NN O O")).collect();
    lines.push("broken".into());
    let input = dir.path().join("bad.conll");
    fs::write(&input, lines.join("\n") + "\n").unwrap();
    let o = spanrel(&["convert", "--format", "conll2003_ner", p(&input), "--out", p(&dir.path().join("x"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("FormatError line 17"), "{}", stderr(&o));
    assert!(report(&o)["error"].as_str().unwrap().contains("FormatError line 17"));
}

#[test]
fn malformed_brat_exits_with_format_error() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("d.txt"), "a b c\n").unwrap();
    fs::write(dir.path().join("d.ann"), "T1\tPER 0 1\ta\nnonsense\n").unwrap();
    let o = spanrel(&["validate", p(dir.path()), "--task", "NER"]);
    // Validation reports unreadable files as violations.
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    let e = spanrel(&["evaluate", "--gold", p(dir.path()), "--pred", p(dir.path()), "--task", "NER"]);
    assert_eq!(e.status.code(), Some(2), "{}", stderr(&e));
    assert!(stderr(&e).contains("FormatError line 2"), "{}", stderr(&e));
}

#[test]
fn evaluate_gold_against_itself() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let o = spanrel(&["synth", "--corpus", "relations", "--sentences", "25", "--seed", "3", "--out", p(&data)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let cfg = dir.path().join("cfg.json");
    let schema = report(&o)["schema"].clone();
    fs::write(&cfg, serde_json::json!({"tasks": [{"task": "RE", "train": "data", "dev": "data", "schema": schema}]}).to_string()).unwrap();
    let e = spanrel(&["evaluate", "--gold", p(&data), "--pred", p(&data), "--task", "RE", "--config", p(&cfg)]);
    assert_eq!(e.status.code(), Some(0), "{}", stderr(&e));
    let r = report(&e);
    assert_eq!(r["report"]["f1"], 1.0);
    assert_eq!(r["report"]["metric"], "relation_f1");
}

#[test]
fn benchmark_consolidates_task_directories() {
    let dir = tempfile::tempdir().unwrap();
    for task in ["NER", "RE"] {
        let corpus = if task == "NER" { "entities" } else { "relations" };
        let root = dir.path().join(task.to_lowercase());
        for split in ["gold", "pred"] {
            let o = spanrel(&["synth", "--corpus", corpus, "--sentences", "12", "--out", p(&root.join(split))]);
            assert_eq!(o.status.code(), Some(0));
        }
        if task == "RE" {
            fs::write(root.join("task.json"), r#"{"task": "RE", "schema": {"metric": "relation_f1"}}"#).unwrap();
        }
    }
    let out = tempfile::tempdir().unwrap();
    let o = spanrel(&["benchmark", p(dir.path()), "--out", p(out.path())]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = report(&o);
    let tasks = r["tasks"].as_array().unwrap();
    assert_eq!(tasks.len(), 2);
    assert_eq!(tasks[0]["task"], "NER");
    assert_eq!(tasks[0]["report"]["f1"], 1.0);
    assert_eq!(tasks[1]["task"], "RE");
    assert_eq!(tasks[1]["report"]["f1"], 1.0);
    assert_eq!(r["mean_score"], 1.0);
    assert!(out.path().join("report.json").is_file());

    // A directory without gold/pred fails its entry and the command.
    fs::create_dir(dir.path().join("pos")).unwrap();
    let o = spanrel(&["benchmark", p(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
    assert!(report(&o)["tasks"][1]["error"].is_string());
}

#[test]
fn unknown_config_key_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"tasks": [], "epochz": 3}"#).unwrap();
    let o = spanrel(&["train", "--config", p(&cfg), "--out", p(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("epochz"), "{}", stderr(&o));
}

#[test]
fn train_predict_analyze_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let synth = |split: &str, n: &str, seed: &str| {
        let o = spanrel(&["synth", "--corpus", "relations", "--sentences", n, "--seed", seed, "--out", p(&dir.path().join(split))]);
        assert_eq!(o.status.code(), Some(0));
        report(&o)["schema"].clone()
    };
    let schema = synth("train", "30", "1");
    synth("dev", "10", "2");
    let cfg = dir.path().join("cfg.json");
    fs::write(
        &cfg,
        serde_json::json!({
            "seed": 5,
            "out": "run",
            "trainer": {"max_epochs": 2, "batch_size": 8, "lr": 0.003},
            "encoder": {"embed_dim": 8, "bilstm_layers": 1, "bilstm_hidden": 8, "attn_layers": 1, "attn_heads": 2, "dropout": 0.0},
            "head": {"mlp_hidden": 16, "dropout": 0.0},
            "tasks": [{"task": "RE", "train": "train", "dev": "dev", "schema": schema}]
        })
        .to_string(),
    )
    .unwrap();

    let t = spanrel(&["train", "--config", p(&cfg)]);
    assert_eq!(t.status.code(), Some(0), "{}", stderr(&t));
    let run = dir.path().join("run");
    assert!(run.join("model/model.json").is_file());
    let log = fs::read_to_string(run.join("train_log.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 2);
    assert_eq!(report(&t)["seed"], 5);

    let pred = dir.path().join("pred");
    let pr = spanrel(&["predict", "--model", p(&run.join("model")), "--data", p(&dir.path().join("dev")), "--out", p(&pred)]);
    assert_eq!(pr.status.code(), Some(0), "{}", stderr(&pr));
    assert_eq!(report(&pr)["violations"], Value::Array(vec![]));
    let v = spanrel(&["validate", p(&pred), "--task", "RE", "--config", p(&cfg)]);
    assert_eq!(v.status.code(), Some(0), "{}", stderr(&v));
    let ann = fs::read_dir(&pred).unwrap().filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "ann")).count();
    assert_eq!(ann, 1);

    let e = spanrel(&["evaluate", "--gold", p(&dir.path().join("dev")), "--pred", p(&pred), "--task", "RE", "--config", p(&cfg)]);
    assert_eq!(e.status.code(), Some(0), "{}", stderr(&e));

    let an = dir.path().join("analysis");
    let model = run.join("model");
    let a = spanrel(&["analyze", "--model-a", p(&model), "--model-b", p(&model), "--data", p(&dir.path().join("dev")), "--out", p(&an)]);
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    let grid = report(&a)["grid"].clone();
    let cells: Vec<f64> = grid.as_array().unwrap().iter().flat_map(|r| r.as_array().unwrap().iter().map(|v| v.as_f64().unwrap())).collect();
    assert_eq!(cells.len(), 2);
    assert!(cells.iter().all(|&c| c == 0.0));
    assert!(an.join("similarity.csv").is_file());
    assert!(an.join("similarity.png").is_file());

    let again = dir.path().join("run2");
    let t2 = spanrel(&["train", "--config", p(&cfg), "--out", p(&again)]);
    assert_eq!(t2.status.code(), Some(0));
    assert_eq!(fs::read_to_string(again.join("train_log.jsonl")).unwrap(), log);
}
