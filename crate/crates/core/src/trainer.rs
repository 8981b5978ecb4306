//! Single-task, multi-task and fine-tuning training loops with early
//! stopping on development metrics.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decoders::{decode, Prediction};
use crate::encoder::{Encoder, EncoderConfig, EncoderError, Vocab};
use crate::metrics::{evaluate, Annotations, MetricError, MetricReport};
use crate::model::{forward, instance_loss, HeadConfig, ModelBundle, ModelError};
use crate::numerics::{clip_global_norm, AdamConfig, Graph, NumericsError, Parameters, Tensor};
use crate::schema::{SentenceInstance, TaskName, TaskSchema};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("task {0} has no training or development instances")]
    EmptyDataset(String),
    #[error("loss diverged at epoch {epoch}, step {step}")]
    DivergedLoss { epoch: usize, step: usize },
    #[error("no head for task {0}")]
    UnknownTask(TaskName),
    #[error("invalid trainer config: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<NumericsError> for TrainError {
    fn from(e: NumericsError) -> Self {
        TrainError::Model(ModelError::Numerics(e))
    }
}

impl From<EncoderError> for TrainError {
    fn from(e: EncoderError) -> Self {
        TrainError::Model(ModelError::Encoder(e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrainMode {
    #[serde(rename = "STL")]
    Stl,
    #[serde(rename = "MTL")]
    Mtl,
    #[serde(rename = "MTL_FT")]
    MtlFt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainerConfig {
    pub mode: TrainMode,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub fine_tune_task: Option<TaskName>,
    /// Maximum global gradient norm.
    pub clip_norm: f64,
    /// Epochs of the fine-tuning phase; defaults to `max_epochs`.
    pub fine_tune_epochs: Option<usize>,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        TrainerConfig {
            mode: TrainMode::Stl,
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            weight_decay: 0.0,
            batch_size: 16,
            max_epochs: 30,
            patience: 3,
            seed: 0,
            fine_tune_task: None,
            clip_norm: 5.0,
            fine_tune_epochs: None,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self, tasks: &[TaskName]) -> Result<(), TrainError> {
        let err = |m: &str| Err(TrainError::Config(m.to_string()));
        if self.patience == 0 {
            return err("patience must be at least 1");
        }
        if self.batch_size == 0 {
            return err("batch_size must be at least 1");
        }
        if !(self.lr > 0.0) || !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return err("lr must be positive and betas in [0, 1)");
        }
        match self.mode {
            TrainMode::Stl if tasks.len() != 1 => err("STL trains exactly one task"),
            TrainMode::Mtl | TrainMode::MtlFt if tasks.len() < 2 => err("MTL needs at least two tasks"),
            TrainMode::MtlFt => match self.fine_tune_task {
                Some(t) if tasks.contains(&t) => Ok(()),
                Some(t) => Err(TrainError::Config(format!("fine_tune_task {t} is not among the tasks"))),
                None => err("MTL_FT requires fine_tune_task"),
            },
            _ => Ok(()),
        }
    }

    fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            weight_decay: self.weight_decay,
            ..AdamConfig::default()
        }
    }
}

/// Training and development instances of one task.
#[derive(Debug, Clone)]
pub struct TaskData {
    pub schema: TaskSchema,
    pub train: Vec<SentenceInstance>,
    pub dev: Vec<SentenceInstance>,
}

impl TaskData {
    fn check(&self) -> Result<(), TrainError> {
        if self.train.is_empty() || self.dev.is_empty() {
            return Err(TrainError::EmptyDataset(self.schema.name.to_string()));
        }
        Ok(())
    }
}

/// One JSON-lines record: a task's mean training loss and dev metric after
/// an epoch. `loss` is absent for the pre-training baseline of fine-tuning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub phase: String,
    pub epoch: usize,
    pub task: String,
    pub loss: Option<f64>,
    pub dev_metric: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub entries: Vec<LogEntry>,
    pub best_epoch: usize,
    pub best_metric: f64,
    pub epochs_run: usize,
}

impl TrainingLog {
    pub fn write_jsonl(&self, w: &mut impl Write) -> std::io::Result<()> {
        for e in &self.entries {
            serde_json::to_writer(&mut *w, e)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn save_jsonl(&self, path: &Path) -> std::io::Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_jsonl(&mut f)?;
        f.flush()
    }

    pub fn losses(&self) -> Vec<Option<f64>> {
        self.entries.iter().map(|e| e.loss).collect()
    }

    fn extend(&mut self, other: TrainingLog) {
        self.entries.extend(other.entries);
        self.best_epoch = other.best_epoch;
        self.best_metric = other.best_metric;
        self.epochs_run += other.epochs_run;
    }
}

/// Patience-based early stopping. Only a strict improvement resets the
/// counter.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: Option<f64>,
    best_epoch: usize,
    bad_epochs: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best: None,
            best_epoch: 0,
            bad_epochs: 0,
        }
    }

    /// Records the metric of `epoch`; returns whether it is the new best.
    pub fn observe(&mut self, epoch: usize, metric: f64) -> bool {
        if self.best.is_none_or(|b| metric > b) {
            self.best = Some(metric);
            self.best_epoch = epoch;
            self.bad_epochs = 0;
            true
        } else {
            self.bad_epochs += 1;
            false
        }
    }

    pub fn should_stop(&self) -> bool {
        self.bad_epochs >= self.patience
    }

    pub fn best(&self) -> Option<f64> {
        self.best
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }
}

/// Samples task indices proportionally to dataset sizes.
#[derive(Debug, Clone)]
pub struct TaskSampler {
    dist: WeightedIndex<usize>,
}

impl TaskSampler {
    pub fn new(sizes: &[usize]) -> Result<Self, TrainError> {
        WeightedIndex::new(sizes)
            .map(|dist| TaskSampler { dist })
            .map_err(|e| TrainError::Config(format!("task sampler: {e}")))
    }

    pub fn sample(&self, rng: &mut impl Rng) -> usize {
        self.dist.sample(rng)
    }
}

/// Worker pool capped by `SPANREL_THREADS` when set.
pub fn thread_pool() -> rayon::ThreadPool {
    let threads = std::env::var("SPANREL_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .unwrap_or(0);
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("thread pool")
}

/// Vocabulary over the training tokens of all tasks.
pub fn build_vocab(tasks: &[TaskData]) -> Vocab {
    let mut v = Vocab::new();
    for t in tasks {
        for inst in &t.train {
            for tok in &inst.tokens {
                v.insert(tok);
            }
        }
    }
    v
}

/// Fresh bundle with one head per task.
pub fn build_bundle(
    encoder: EncoderConfig,
    head: HeadConfig,
    tasks: &[TaskData],
    pretrained: Option<&[(String, Vec<f64>)]>,
    seed: u64,
) -> Result<ModelBundle, TrainError> {
    let enc = Encoder::new(encoder, build_vocab(tasks))?;
    let schemas: Vec<TaskSchema> = tasks.iter().map(|t| t.schema.clone()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(ModelBundle::new(enc, head, &schemas, pretrained, &mut rng))
}

/// Mean loss of a batch and its parameter gradients. Instances are
/// processed in parallel and their gradients summed in batch order, so the
/// result does not depend on the worker count.
pub fn batch_gradients(
    bundle: &ModelBundle,
    task: TaskName,
    batch: &[&SentenceInstance],
    seeds: &[u64],
    pool: &rayon::ThreadPool,
) -> Result<(f64, BTreeMap<String, Tensor>), TrainError> {
    let head = bundle.head(task)?;
    let per: Vec<Result<(f64, BTreeMap<String, Tensor>), TrainError>> = pool.install(|| {
        batch
            .par_iter()
            .zip(seeds.par_iter())
            .map(|(inst, &seed)| {
                let mut g = Graph::training(seed);
                let fwd = forward(&mut g, &bundle.params, &bundle.encoder, head, inst)?;
                let out = instance_loss(&mut g, &fwd, inst, &head.schema)?;
                let grads = g.backward(out.loss)?;
                Ok((g.value(out.loss).item(), g.param_grads(&grads)))
            })
            .collect()
    });
    let scale = 1.0 / batch.len() as f64;
    let mut loss = 0.0;
    let mut total: BTreeMap<String, Tensor> = BTreeMap::new();
    for r in per {
        let (l, grads) = r?;
        loss += l;
        for (name, g) in grads {
            match total.get_mut(&name) {
                Some(t) => t.add_assign(&g),
                None => {
                    total.insert(name, g);
                }
            }
        }
    }
    for g in total.values_mut() {
        g.scale_assign(scale);
    }
    Ok((loss * scale, total))
}

/// One optimizer step on a batch of `task`. Only parameters reached by the
/// batch (the shared encoder and this task's head) are updated.
pub fn train_step(
    bundle: &mut ModelBundle,
    task: TaskName,
    batch: &[&SentenceInstance],
    cfg: &TrainerConfig,
    rng: &mut ChaCha8Rng,
    pool: &rayon::ThreadPool,
) -> Result<f64, TrainError> {
    let seeds: Vec<u64> = batch.iter().map(|_| rng.next_u64()).collect();
    let (loss, mut grads) = batch_gradients(bundle, task, batch, &seeds, pool)?;
    if !loss.is_finite() {
        return Err(NumericsError::NonFinite("loss").into());
    }
    clip_global_norm(grads.values_mut(), cfg.clip_norm);
    bundle.params.adam_step_partial(&grads, &cfg.adam())?;
    Ok(loss)
}

/// Decoded predictions for `instances`, in order.
pub fn predict(bundle: &ModelBundle, schema: &TaskSchema, instances: &[SentenceInstance]) -> Result<Vec<Prediction>, TrainError> {
    let pool = thread_pool();
    predict_with(bundle, schema, instances, &pool)
}

fn predict_with(
    bundle: &ModelBundle,
    schema: &TaskSchema,
    instances: &[SentenceInstance],
    pool: &rayon::ThreadPool,
) -> Result<Vec<Prediction>, TrainError> {
    pool.install(|| {
        instances
            .par_iter()
            .map(|inst| {
                let scored = bundle.score(schema.name, inst)?;
                Ok(decode(&scored, schema, &inst.sentence_ranges()))
            })
            .collect()
    })
}

/// Gold/predicted annotation pairs for `instances`.
pub fn annotation_pairs(
    bundle: &ModelBundle,
    schema: &TaskSchema,
    instances: &[SentenceInstance],
) -> Result<Vec<(Annotations, Annotations)>, TrainError> {
    let pool = thread_pool();
    annotation_pairs_with(bundle, schema, instances, &pool)
}

fn annotation_pairs_with(
    bundle: &ModelBundle,
    schema: &TaskSchema,
    instances: &[SentenceInstance],
    pool: &rayon::ThreadPool,
) -> Result<Vec<(Annotations, Annotations)>, TrainError> {
    let preds = predict_with(bundle, schema, instances, pool)?;
    Ok(instances
        .iter()
        .zip(&preds)
        .map(|(inst, p)| (Annotations::from_instance(inst, schema), Annotations::from_prediction(p, inst.len())))
        .collect())
}

/// The schema's metric on `instances`.
pub fn evaluate_instances(bundle: &ModelBundle, schema: &TaskSchema, instances: &[SentenceInstance]) -> Result<MetricReport, TrainError> {
    let pool = thread_pool();
    Ok(evaluate(schema, &annotation_pairs_with(bundle, schema, instances, &pool)?)?)
}

fn dev_metric(bundle: &ModelBundle, task: &TaskData, pool: &rayon::ThreadPool) -> Result<f64, TrainError> {
    let pairs = annotation_pairs_with(bundle, &task.schema, &task.dev, pool)?;
    Ok(evaluate(&task.schema, &pairs)?.score)
}

fn diverged(e: TrainError, epoch: usize, step: usize) -> TrainError {
    match e {
        TrainError::Model(ModelError::Numerics(NumericsError::NonFinite(_))) => TrainError::DivergedLoss { epoch, step },
        other => other,
    }
}

/// Per-task cyclic stream of shuffled training batches.
struct BatchStream {
    order: Vec<usize>,
    pos: usize,
}

impl BatchStream {
    fn new(len: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut order: Vec<usize> = (0..len).collect();
        order.shuffle(rng);
        BatchStream { order, pos: 0 }
    }

    fn next_batch(&mut self, size: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
        if self.pos >= self.order.len() {
            self.order.shuffle(rng);
            self.pos = 0;
        }
        let end = (self.pos + size).min(self.order.len());
        let out = self.order[self.pos..end].to_vec();
        self.pos = end;
        out
    }
}

fn check_heads(bundle: &ModelBundle, tasks: &[TaskData]) -> Result<(), TrainError> {
    for t in tasks {
        t.check()?;
        if !bundle.heads.contains_key(&t.schema.name) {
            return Err(TrainError::UnknownTask(t.schema.name));
        }
    }
    Ok(())
}

/// Shared loop: each epoch runs `steps` task-sampled batches, then scores
/// every task on dev; early stopping watches the mean dev metric and the
/// best parameters are restored at the end.
fn run(
    bundle: &mut ModelBundle,
    cfg: &TrainerConfig,
    tasks: &[TaskData],
    phase: &str,
    max_epochs: usize,
    baseline: bool,
) -> Result<TrainingLog, TrainError> {
    check_heads(bundle, tasks)?;
    let pool = thread_pool();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let sampler = TaskSampler::new(&tasks.iter().map(|t| t.train.len()).collect::<Vec<_>>())?;
    let mut streams: Vec<BatchStream> = tasks.iter().map(|t| BatchStream::new(t.train.len(), &mut rng)).collect();
    let total: usize = tasks.iter().map(|t| t.train.len()).sum();
    let steps = total.div_ceil(cfg.batch_size);

    let mut log = TrainingLog::default();
    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut best: Option<Parameters> = None;

    let evaluate_epoch = |bundle: &ModelBundle, epoch: usize, losses: &[Option<f64>], log: &mut TrainingLog| {
        let mut metrics = Vec::with_capacity(tasks.len());
        for (t, loss) in tasks.iter().zip(losses) {
            let m = dev_metric(bundle, t, &pool)?;
            metrics.push(m);
            log.entries.push(LogEntry {
                phase: phase.to_string(),
                epoch,
                task: t.schema.name.to_string(),
                loss: *loss,
                dev_metric: m,
            });
        }
        Ok::<f64, TrainError>(metrics.iter().sum::<f64>() / metrics.len() as f64)
    };

    if baseline {
        let mean = evaluate_epoch(bundle, 0, &vec![None; tasks.len()], &mut log)?;
        stopper.observe(0, mean);
        best = Some(bundle.params.clone());
    }

    for epoch in 1..=max_epochs {
        let mut sums = vec![0.0; tasks.len()];
        let mut counts = vec![0usize; tasks.len()];
        for step in 0..steps {
            let ti = if tasks.len() == 1 { 0 } else { sampler.sample(&mut rng) };
            let idx = streams[ti].next_batch(cfg.batch_size, &mut rng);
            let batch: Vec<&SentenceInstance> = idx.iter().map(|&i| &tasks[ti].train[i]).collect();
            let loss = train_step(bundle, tasks[ti].schema.name, &batch, cfg, &mut rng, &pool)
                .map_err(|e| diverged(e, epoch, step))?;
            sums[ti] += loss;
            counts[ti] += 1;
        }
        let losses: Vec<Option<f64>> = sums
            .iter()
            .zip(&counts)
            .map(|(s, &c)| (c > 0).then(|| s / c as f64))
            .collect();
        let mean = evaluate_epoch(bundle, epoch, &losses, &mut log)?;
        log.epochs_run = epoch;
        if stopper.observe(epoch, mean) {
            best = Some(bundle.params.clone());
        }
        if stopper.should_stop() {
            break;
        }
    }
    if let Some(p) = best {
        bundle.params = p;
    }
    log.best_epoch = stopper.best_epoch();
    log.best_metric = stopper.best().unwrap_or(0.0);
    Ok(log)
}

/// Single-task training.
pub fn train_stl(bundle: &mut ModelBundle, cfg: &TrainerConfig, task: &TaskData) -> Result<TrainingLog, TrainError> {
    run(bundle, cfg, std::slice::from_ref(task), "stl", cfg.max_epochs, false)
}

/// Joint training: each step samples a task proportionally to its training
/// set size and updates the shared encoder and that task's head.
pub fn train_mtl(bundle: &mut ModelBundle, cfg: &TrainerConfig, tasks: &[TaskData]) -> Result<TrainingLog, TrainError> {
    if tasks.len() < 2 {
        return Err(TrainError::Config("MTL needs at least two tasks".into()));
    }
    run(bundle, cfg, tasks, "mtl", cfg.max_epochs, false)
}

/// Continues training on `target` only with fresh optimizer state. The
/// starting point is scored as epoch 0, so the result never falls below
/// it on dev.
pub fn fine_tune(bundle: &mut ModelBundle, cfg: &TrainerConfig, tasks: &[TaskData], target: TaskName) -> Result<TrainingLog, TrainError> {
    let task = tasks
        .iter()
        .find(|t| t.schema.name == target)
        .ok_or(TrainError::UnknownTask(target))?;
    bundle.head(target).map_err(|_| TrainError::UnknownTask(target))?;
    let epochs = cfg.fine_tune_epochs.unwrap_or(cfg.max_epochs);
    if epochs == 0 {
        return Ok(TrainingLog::default());
    }
    bundle.params.reset_optimizer();
    run(bundle, cfg, std::slice::from_ref(task), "ft", epochs, true)
}

/// Dispatches on `cfg.mode`.
pub fn train(bundle: &mut ModelBundle, cfg: &TrainerConfig, tasks: &[TaskData]) -> Result<TrainingLog, TrainError> {
    cfg.validate(&tasks.iter().map(|t| t.schema.name).collect::<Vec<_>>())?;
    match cfg.mode {
        TrainMode::Stl => train_stl(bundle, cfg, &tasks[0]),
        TrainMode::Mtl => train_mtl(bundle, cfg, tasks),
        TrainMode::MtlFt => {
            let mut log = train_mtl(bundle, cfg, tasks)?;
            let target = cfg.fine_tune_task.expect("validated");
            log.extend(fine_tune(bundle, cfg, tasks, target)?);
            Ok(log)
        }
    }
}

/// Source x target matrix of pairwise MTL results. The diagonal holds the
/// single-task result of each target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseGrid {
    pub tasks: Vec<String>,
    /// `values[source][target]`: dev metric of `target`.
    pub values: Vec<Vec<f64>>,
    pub fine_tuned: bool,
}

/// Trains every (source, target) pair jointly (and optionally fine-tunes
/// on the target) from the same seed.
pub fn pairwise_grid(
    encoder: &EncoderConfig,
    head: &HeadConfig,
    cfg: &TrainerConfig,
    tasks: &[TaskData],
    fine_tune_target: bool,
) -> Result<PairwiseGrid, TrainError> {
    let n = tasks.len();
    let mut values = vec![vec![0.0; n]; n];
    for t in 0..n {
        let single = std::slice::from_ref(&tasks[t]);
        let mut b = build_bundle(encoder.clone(), head.clone(), single, None, cfg.seed)?;
        train_stl(&mut b, cfg, &tasks[t])?;
        values[t][t] = evaluate_instances(&b, &tasks[t].schema, &tasks[t].dev)?.score;
    }
    for s in 0..n {
        for t in 0..n {
            if s == t {
                continue;
            }
            let pair = [tasks[s].clone(), tasks[t].clone()];
            let mut b = build_bundle(encoder.clone(), head.clone(), &pair, None, cfg.seed)?;
            train_mtl(&mut b, cfg, &pair)?;
            if fine_tune_target {
                fine_tune(&mut b, cfg, &pair, tasks[t].schema.name)?;
            }
            values[s][t] = evaluate_instances(&b, &tasks[t].schema, &tasks[t].dev)?.score;
        }
    }
    Ok(PairwiseGrid {
        tasks: tasks.iter().map(|t| t.schema.name.to_string()).collect(),
        values,
        fine_tuned: fine_tune_target,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn early_stopping_rule() {
        let mut s = EarlyStopping::new(3);
        let seq = [0.5, 0.6, 0.6, 0.6, 0.6, 0.9];
        let mut stopped = None;
        for (i, &m) in seq.iter().enumerate() {
            s.observe(i + 1, m);
            if s.should_stop() {
                stopped = Some(i + 1);
                break;
            }
        }
        assert_eq!(stopped, Some(5));
        assert_eq!(s.best_epoch(), 2);
        assert_eq!(s.best(), Some(0.6));
    }

    #[test]
    fn sampler_ratio_chi_square() {
        let sampler = TaskSampler::new(&[900, 100]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut counts = [0usize; 2];
        for _ in 0..10_000 {
            counts[sampler.sample(&mut rng)] += 1;
        }
        let expected = [9000.0, 1000.0];
        let chi2: f64 = counts
            .iter()
            .zip(expected)
            .map(|(&o, e)| (o as f64 - e).powi(2) / e)
            .sum();
        // 1 degree of freedom: p > 0.01 iff chi2 < 6.635
        assert!(chi2 < 6.635, "chi2 = {chi2}, counts = {counts:?}");
    }

    #[test]
    fn config_validation() {
        let mut c = TrainerConfig::default();
        assert!(c.validate(&[TaskName::Ner]).is_ok());
        c.patience = 0;
        assert!(c.validate(&[TaskName::Ner]).is_err());
        c.patience = 3;
        c.mode = TrainMode::MtlFt;
        assert!(c.validate(&[TaskName::Ner, TaskName::Pos]).is_err());
        c.fine_tune_task = Some(TaskName::Re);
        assert!(c.validate(&[TaskName::Ner, TaskName::Pos]).is_err());
        c.fine_tune_task = Some(TaskName::Pos);
        assert!(c.validate(&[TaskName::Ner, TaskName::Pos]).is_ok());
        let json = serde_json::to_string(&c).unwrap();
        assert!(json.contains("\"MTL_FT\""));
        assert!(serde_json::from_str::<TrainerConfig>(r#"{"learning_rate": 1}"#).is_err());
    }
}
