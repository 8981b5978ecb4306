//! Subcommand implementations. Each returns a JSON report; `ok` is false
//! when the command ran but found problems (violations, failed tasks).

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde_json::{json, Value};
use spanrel::analysis::{extract_attention, mean_similarity, similarity_grid, write_grid_csv, write_heatmap_png};
use spanrel::brat::{read_dataset, validate_dataset, write_document, Document};
use spanrel::encoder::load_pretrained;
use spanrel::import::{default_schema, import_corpus, CorpusFormat};
use spanrel::metrics::evaluate_documents;
use spanrel::model::ModelBundle;
use spanrel::schema::{builtin_schema, to_instances, SchemaOverrides, TaskName, TaskSchema};
use spanrel::synthetic::{synthetic_documents, synthetic_schema, SyntheticTask};
use spanrel::trainer::{build_bundle, evaluate_instances, predict, train, TaskData, TrainingLog};

use crate::config::RunConfig;

pub struct Outcome {
    pub report: Value,
    pub ok: bool,
    /// One-line human-readable summary.
    pub summary: String,
}

impl Outcome {
    fn ok(summary: String, report: Value) -> Self {
        Outcome { report, ok: true, summary }
    }
}

pub const MODEL_DIR: &str = "model";
pub const TRAIN_LOG: &str = "train_log.jsonl";
pub const REPORT_FILE: &str = "report.json";

fn write_report(dir: &Path, report: &Value) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(REPORT_FILE), serde_json::to_string_pretty(report)?)?;
    Ok(())
}

/// Builtin schema of `task`, adjusted by the config's entry for it.
pub fn resolve_schema(task: TaskName, config: Option<&RunConfig>) -> Result<TaskSchema> {
    if let Some(cfg) = config {
        if let Some(s) = cfg.schema_for(task)? {
            return Ok(s);
        }
    }
    Ok(builtin_schema(task))
}

pub fn cmd_convert(format: &str, inputs: &[PathBuf], out: &Path, task: Option<TaskName>, config: Option<&RunConfig>) -> Result<Outcome> {
    let fmt = CorpusFormat::parse(format).ok_or_else(|| anyhow!("unknown format {format}"))?;
    let schema = match task {
        Some(t) => resolve_schema(t, config)?,
        None => default_schema(fmt).ok_or_else(|| anyhow!("format {format} needs --task"))?,
    };
    fs::create_dir_all(out)?;
    let summary = import_corpus(fmt, inputs, out, &schema)?;
    let line = format!(
        "converted {} documents ({} spans, {} relations) to {}",
        summary.documents,
        summary.spans,
        summary.relations,
        out.display()
    );
    Ok(Outcome::ok(line, json!({
        "command": "convert",
        "format": format,
        "task": schema.name,
        "out": out,
        "summary": summary,
    })))
}

pub fn cmd_validate(dir: &Path, task: TaskName, config: Option<&RunConfig>) -> Result<Outcome> {
    let schema = resolve_schema(task, config)?;
    let violations = validate_dataset(dir, &schema)?;
    Ok(Outcome {
        ok: violations.is_empty(),
        summary: format!("{} violations in {}", violations.len(), dir.display()),
        report: json!({
            "command": "validate",
            "dir": dir,
            "task": task,
            "violations": violations,
        }),
    })
}

fn load_split(dir: &Path, schema: &TaskSchema) -> Result<Vec<spanrel::schema::SentenceInstance>> {
    let mut out = Vec::new();
    for doc in read_dataset(dir)? {
        out.extend(to_instances(&doc, schema)?.0);
    }
    Ok(out)
}

/// Task data of every config entry.
pub fn load_tasks(cfg: &RunConfig) -> Result<Vec<TaskData>> {
    cfg.tasks
        .iter()
        .map(|t| {
            let schema = t.schema()?;
            Ok(TaskData {
                train: load_split(&t.train, &schema).with_context(|| format!("{} train data", t.task))?,
                dev: load_split(&t.dev, &schema).with_context(|| format!("{} dev data", t.task))?,
                schema,
            })
        })
        .collect()
}

/// Trains the configured model; returns the log alongside the report.
pub fn run_training(cfg: &RunConfig, seed: Option<u64>, out: &Path) -> Result<(Outcome, TrainingLog)> {
    let seed = cfg.effective_seed(seed);
    let mut trainer = cfg.trainer.clone();
    trainer.seed = seed;
    let tasks = load_tasks(cfg)?;
    let pretrained = match &cfg.encoder.pretrained_vectors {
        Some(p) => Some(load_pretrained(p, cfg.encoder.embed_dim)?),
        None => None,
    };
    let mut bundle = build_bundle(cfg.encoder.clone(), cfg.head.clone(), &tasks, pretrained.as_deref(), seed)?;
    let log = train(&mut bundle, &trainer, &tasks)?;

    fs::create_dir_all(out)?;
    bundle.save(&out.join(MODEL_DIR))?;
    log.save_jsonl(&out.join(TRAIN_LOG))?;
    let mut dev = serde_json::Map::new();
    for t in &tasks {
        dev.insert(t.schema.name.to_string(), serde_json::to_value(evaluate_instances(&bundle, &t.schema, &t.dev)?)?);
    }
    let report = json!({
        "command": "train",
        "mode": trainer.mode,
        "seed": seed,
        "out": out,
        "epochs_run": log.epochs_run,
        "best_epoch": log.best_epoch,
        "best_metric": log.best_metric,
        "dev": dev,
    });
    write_report(out, &report)?;
    let line = format!(
        "trained {} epochs, best dev metric {:.4} at epoch {}; model in {}",
        log.epochs_run,
        log.best_metric,
        log.best_epoch,
        out.join(MODEL_DIR).display()
    );
    Ok((Outcome::ok(line, report), log))
}

pub fn cmd_train(config: &Path, seed: Option<u64>, out: Option<&Path>) -> Result<Outcome> {
    let cfg = RunConfig::load(config)?;
    let out = out
        .map(Path::to_path_buf)
        .or_else(|| cfg.out.clone())
        .ok_or_else(|| anyhow!("no output directory: pass --out or set \"out\" in the config"))?;
    Ok(run_training(&cfg, seed, &out)?.0)
}

fn pick_task(bundle: &ModelBundle, task: Option<TaskName>) -> Result<TaskName> {
    match task {
        Some(t) => {
            bundle.head(t)?;
            Ok(t)
        }
        None if bundle.heads.len() == 1 => Ok(*bundle.heads.keys().next().unwrap()),
        None => bail!(
            "the model has several heads ({}); pass --task",
            bundle.heads.keys().map(|t| t.as_str()).collect::<Vec<_>>().join(", ")
        ),
    }
}

/// Decodes every document of `data` and writes the predictions as BRAT.
pub fn cmd_predict(model: &Path, data: &Path, task: Option<TaskName>, out: &Path) -> Result<Outcome> {
    let bundle = ModelBundle::load(model).with_context(|| format!("loading model {}", model.display()))?;
    let task = pick_task(&bundle, task)?;
    let schema = bundle.head(task)?.schema.clone();
    fs::create_dir_all(out)?;
    let (mut spans, mut relations) = (0, 0);
    let docs = read_dataset(data)?;
    for doc in &docs {
        let (instances, _) = to_instances(doc, &schema)?;
        let preds = predict(&bundle, &schema, &instances)?;
        let mut pred_doc = Document {
            spans: Vec::new(),
            relations: Vec::new(),
            ..doc.clone()
        };
        for (inst, p) in instances.iter().zip(&preds) {
            let ids: Vec<String> = p
                .spans
                .iter()
                .map(|s| pred_doc.add_span(&s.label, inst.token_offset + s.begin, inst.token_offset + s.end))
                .collect();
            for r in &p.relations {
                pred_doc.add_relation(&r.label, &ids[r.head], &ids[r.tail]);
            }
        }
        spans += pred_doc.spans.len();
        relations += pred_doc.relations.len();
        write_document(out, &pred_doc)?;
    }
    let violations = validate_dataset(out, &schema)?;
    Ok(Outcome {
        ok: violations.is_empty(),
        summary: format!(
            "predicted {spans} spans and {relations} relations over {} documents; {} violations",
            docs.len(),
            violations.len()
        ),
        report: json!({
            "command": "predict",
            "task": task,
            "documents": docs.len(),
            "spans": spans,
            "relations": relations,
            "out": out,
            "violations": violations,
        }),
    })
}

pub fn cmd_evaluate(gold: &Path, pred: &Path, task: TaskName, config: Option<&RunConfig>) -> Result<Outcome> {
    let schema = resolve_schema(task, config)?;
    let report = evaluate_documents(&schema, &read_dataset(gold)?, &read_dataset(pred)?)?;
    let line = format!("{} {:?} = {:.4}", task, report.metric, report.score);
    Ok(Outcome::ok(line, json!({
        "command": "evaluate",
        "gold": gold,
        "pred": pred,
        "report": report,
    })))
}

fn sentences_of(docs: &[Document]) -> Vec<Vec<String>> {
    let mut out = Vec::new();
    for doc in docs {
        let tokens = doc.tokens();
        let starts = doc.sentence_starts();
        for (i, &s) in starts.iter().enumerate() {
            let e = starts.get(i + 1).copied().unwrap_or(tokens.len());
            if e > s {
                out.push(tokens[s..e].to_vec());
            }
        }
    }
    out
}

/// Attention similarity grid between two models over the sentences of
/// `data`, written as CSV and PNG under `out`.
pub fn cmd_analyze(model_a: &Path, model_b: &Path, data: &Path, out: &Path) -> Result<Outcome> {
    let a = ModelBundle::load(model_a).with_context(|| format!("loading model {}", model_a.display()))?;
    let b = ModelBundle::load(model_b).with_context(|| format!("loading model {}", model_b.display()))?;
    let sentences = sentences_of(&read_dataset(data)?);
    if sentences.is_empty() {
        bail!("{} has no sentences", data.display());
    }
    let name = |p: &Path| p.display().to_string();
    let pa = extract_attention(&a, &name(model_a), &sentences)?;
    let pb = extract_attention(&b, &name(model_b), &sentences)?;
    let grid = similarity_grid(&pa, &pb)?;
    fs::create_dir_all(out)?;
    let csv = out.join("similarity.csv");
    let png = out.join("similarity.png");
    write_grid_csv(&grid, &csv)?;
    write_heatmap_png(&grid, &png, 32)?;
    let report = json!({
        "command": "analyze",
        "model_a": model_a,
        "model_b": model_b,
        "sentences": sentences.len(),
        "grid": grid,
        "mean_similarity": mean_similarity(&grid),
        "csv": csv,
        "png": png,
    });
    write_report(out, &report)?;
    let line = format!(
        "mean similarity {:.6} over {} heads and {} sentences",
        mean_similarity(&grid),
        pa.num_heads(),
        sentences.len()
    );
    Ok(Outcome::ok(line, report))
}

/// Optional per-task file of a benchmark directory.
#[derive(serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct BenchmarkTask {
    task: TaskName,
    #[serde(default)]
    schema: SchemaOverrides,
}

/// Evaluates every task directory under `dir`. A task directory holds
/// `gold/` and `pred/` BRAT directories and is named after its task, or
/// carries a `task.json` with the task name and schema overrides.
pub fn cmd_benchmark(dir: &Path, out: Option<&Path>) -> Result<Outcome> {
    let mut subdirs: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    subdirs.sort();
    let mut tasks = Vec::new();
    let mut scores = Vec::new();
    let mut ok = true;
    for sub in &subdirs {
        let entry = (|| -> Result<Value> {
            let spec = sub.join("task.json");
            let schema = if spec.is_file() {
                let t: BenchmarkTask = serde_json::from_str(&fs::read_to_string(&spec)?).with_context(|| format!("parsing {}", spec.display()))?;
                builtin_schema(t.task).apply(&t.schema)?
            } else {
                let name = sub.file_name().and_then(|n| n.to_str()).unwrap_or_default();
                builtin_schema(name.parse()?)
            };
            let report = evaluate_documents(&schema, &read_dataset(&sub.join("gold"))?, &read_dataset(&sub.join("pred"))?)?;
            scores.push(report.score);
            Ok(json!({"task": schema.name, "report": report}))
        })();
        let name = sub.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        match entry {
            Ok(mut v) => {
                v["dir"] = json!(name);
                tasks.push(v);
            }
            Err(e) => {
                ok = false;
                tasks.push(json!({"dir": name, "error": format!("{e:#}")}));
            }
        }
    }
    if subdirs.is_empty() {
        bail!("{} contains no task directories", dir.display());
    }
    let mean = if scores.is_empty() { 0.0 } else { scores.iter().sum::<f64>() / scores.len() as f64 };
    let report = json!({
        "command": "benchmark",
        "dir": dir,
        "tasks": tasks,
        "mean_score": mean,
    });
    if let Some(out) = out {
        write_report(out, &report)?;
    }
    let line = format!("{} task directories, mean score {mean:.4}", subdirs.len());
    Ok(Outcome { report, ok, summary: line })
}

pub fn synthetic_task(name: &str) -> Result<SyntheticTask> {
    match name {
        "relations" => Ok(SyntheticTask::Relations),
        "entities" => Ok(SyntheticTask::Entities),
        _ => bail!("unknown synthetic corpus {name} (expected relations or entities)"),
    }
}

/// Schema overrides that turn the builtin schema into the synthetic one.
pub fn synthetic_overrides(task: SyntheticTask) -> SchemaOverrides {
    let s = synthetic_schema(task);
    SchemaOverrides {
        span_labels: Some(s.span_labels),
        relation_labels: Some(s.relation_labels),
        max_span_length: s.max_span_length,
        pruning: Some(s.pruning),
        metric: Some(s.metric),
        gold_span_mode: Some(s.gold_span_mode),
        max_doc_tokens: None,
    }
}

/// Writes a rule-generated BRAT corpus.
pub fn cmd_synth(kind: &str, sentences: usize, seed: u64, out: &Path) -> Result<Outcome> {
    let task = synthetic_task(kind)?;
    fs::create_dir_all(out)?;
    let docs = synthetic_documents(task, sentences, seed, "doc");
    for d in &docs {
        write_document(out, d)?;
    }
    let line = format!("wrote {} documents to {}", docs.len(), out.display());
    Ok(Outcome::ok(line, json!({
        "command": "synth",
        "corpus": kind,
        "task": task.task_name(),
        "sentences": sentences,
        "documents": docs.len(),
        "seed": seed,
        "out": out,
        "schema": synthetic_overrides(task),
    })))
}
