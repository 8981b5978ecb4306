//! Task-agnostic span and span-pair scoring, the two training losses and
//! the multi-task parameter bundle.

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoder::{EncodedSentence, Encoder, EncoderError};
use crate::numerics::{Graph, NumericsError, Parameters, Tensor, Var};
use crate::schema::{LossMode, Pruning, SentenceInstance, TaskName, TaskSchema};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("no head for task {0}")]
    UnknownTask(TaskName),
    #[error("model file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HeadConfig {
    pub mlp_hidden: usize,
    pub mlp_layers: usize,
    pub dropout: f64,
}

impl Default for HeadConfig {
    fn default() -> Self {
        HeadConfig {
            mlp_hidden: 128,
            mlp_layers: 2,
            dropout: 0.5,
        }
    }
}

/// Feed-forward network with relu hidden layers and a linear output layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    prefix: String,
    dims: Vec<usize>,
}

impl Mlp {
    pub fn new(prefix: impl Into<String>, input: usize, hidden: usize, layers: usize, output: usize) -> Self {
        let mut dims = vec![input];
        dims.extend(std::iter::repeat_n(hidden, layers));
        dims.push(output);
        Mlp {
            prefix: prefix.into(),
            dims,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().expect("at least input and output")
    }

    pub fn init_params(&self, params: &mut Parameters, rng: &mut impl Rng) {
        for (i, w) in self.dims.windows(2).enumerate() {
            params.insert_weight(format!("{}.w{i}", self.prefix), w[0], w[1], rng);
            params.insert_bias(format!("{}.b{i}", self.prefix), w[1]);
        }
    }

    pub fn forward(&self, g: &mut Graph, params: &Parameters, x: Var, dropout: f64) -> Result<Var, NumericsError> {
        let last = self.dims.len() - 2;
        let mut h = x;
        for i in 0..=last {
            let wn = format!("{}.w{i}", self.prefix);
            let bn = format!("{}.b{i}", self.prefix);
            let w = g.param(&wn, params.value(&wn)?)?;
            let b = g.param(&bn, params.value(&bn)?)?;
            let y = g.matmul(h, w)?;
            h = g.add_row(y, b)?;
            if i < last {
                h = g.relu(h)?;
                h = g.dropout(h, dropout)?;
            }
        }
        Ok(h)
    }
}

/// Per-task span classifier and pair scorer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskHead {
    pub schema: TaskSchema,
    pub span_mlp: Mlp,
    pub rel_mlp: Option<Mlp>,
    pub dropout: f64,
}

impl TaskHead {
    pub fn new(schema: TaskSchema, span_dim: usize, cfg: &HeadConfig) -> Self {
        let prefix = head_prefix(schema.name);
        let span_mlp = Mlp::new(
            format!("{prefix}span"),
            span_dim,
            cfg.mlp_hidden,
            cfg.mlp_layers,
            schema.num_span_classes(),
        );
        let rel_mlp = schema.has_relations().then(|| {
            Mlp::new(
                format!("{prefix}rel"),
                3 * span_dim,
                cfg.mlp_hidden,
                cfg.mlp_layers,
                schema.num_relation_classes(),
            )
        });
        TaskHead {
            schema,
            span_mlp,
            rel_mlp,
            dropout: cfg.dropout,
        }
    }

    pub fn init_params(&self, params: &mut Parameters, rng: &mut impl Rng) {
        self.span_mlp.init_params(params, rng);
        if let Some(m) = &self.rel_mlp {
            m.init_params(params, rng);
        }
    }
}

/// Parameter-name prefix owned by a task's head.
pub fn head_prefix(task: TaskName) -> String {
    format!("head.{}.", task.as_str())
}

/// All `(b, e)` with `e - b + 1 <= min(l, n)`, ordered by `(b, e)`.
pub fn enumerate_spans(n: usize, schema: &TaskSchema) -> Vec<(usize, usize)> {
    let l = schema.span_length_bound(n).min(n);
    let mut out = Vec::new();
    for b in 0..n {
        for e in b..(b + l).min(n) {
            out.push((b, e));
        }
    }
    out
}

/// Candidate spans of an instance: the distinct gold spans in gold-span
/// mode, otherwise every bounded span inside each sentence.
pub fn candidate_spans(inst: &SentenceInstance, schema: &TaskSchema) -> Vec<(usize, usize)> {
    if schema.gold_span_mode {
        let mut v: Vec<(usize, usize)> = inst.gold_spans.iter().map(|s| (s.begin, s.end)).collect();
        v.sort_unstable();
        v.dedup();
        return v;
    }
    let mut out = Vec::new();
    for (start, end) in inst.sentence_ranges() {
        out.extend(
            enumerate_spans(end - start, schema)
                .into_iter()
                .map(|(b, e)| (b + start, e + start)),
        );
    }
    out
}

/// Number of spans kept for a sentence of `n` tokens with `candidates`
/// enumerated spans.
pub fn prune_count(pruning: Pruning, n: usize, candidates: usize) -> usize {
    let k = match pruning {
        Pruning::None => candidates,
        // the small offset keeps products such as 0.3 * 10 from rounding up
        Pruning::Ratio(tau) => ((tau * n as f64) - 1e-9).ceil().max(1.0) as usize,
        Pruning::Fixed(k) => k,
    };
    k.min(candidates)
}

/// Indices of the `k` candidates with the lowest NEG_SPAN probability, ties
/// broken by `(b, e)`, returned in `(b, e)` order.
pub fn prune_spans(spans: &[(usize, usize)], neg_probs: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..spans.len()).collect();
    idx.sort_by(|&a, &b| neg_probs[a].total_cmp(&neg_probs[b]).then(spans[a].cmp(&spans[b])));
    idx.truncate(k);
    idx.sort_by_key(|&i| spans[i]);
    idx
}

/// Ordered pairs `(j, k)`, `j != k`, over `k` kept spans; in head mode only
/// antecedent pairs `k < j` are formed.
pub fn pair_indices(kept: usize, mode: LossMode) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for j in 0..kept {
        for k in 0..kept {
            let keep = match mode {
                LossMode::Pairwise => j != k,
                LossMode::Head => k < j,
            };
            if keep {
                out.push((j, k));
            }
        }
    }
    out
}

/// Logits of the span classifier for stacked span vectors `z`.
pub fn classify_spans(g: &mut Graph, params: &Parameters, head: &TaskHead, z: Var) -> Result<Var, NumericsError> {
    head.span_mlp.forward(g, params, z, head.dropout)
}

/// Relation logits for each pair `(j, k)` of rows of `z`, built from
/// `[z_j; z_k; z_j * z_k]`.
pub fn score_pairs(
    g: &mut Graph,
    params: &Parameters,
    mlp: &Mlp,
    dropout: f64,
    z: Var,
    pairs: &[(usize, usize)],
) -> Result<Var, NumericsError> {
    let js: Vec<usize> = pairs.iter().map(|p| p.0).collect();
    let ks: Vec<usize> = pairs.iter().map(|p| p.1).collect();
    let zj = g.gather_rows(z, &js)?;
    let zk = g.gather_rows(z, &ks)?;
    let prod = g.mul(zj, zk)?;
    let x = g.concat_cols(&[zj, zk, prod])?;
    mlp.forward(g, params, x, dropout)
}

fn row_softmax(t: &Tensor) -> Tensor {
    let mut out = t.clone();
    let c = t.cols();
    for r in 0..t.rows() {
        let row = &mut out.data_mut()[r * c..(r + 1) * c];
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            total += *v;
        }
        for v in row.iter_mut() {
            *v /= total;
        }
    }
    out
}

/// Scores of one instance, detached from the graph.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredInstance {
    pub n: usize,
    pub spans: Vec<(usize, usize)>,
    pub span_logits: Tensor,
    /// Indices into `spans`, in `(b, e)` order.
    pub kept: Vec<usize>,
    /// Pairs of indices into `kept`.
    pub pairs: Vec<(usize, usize)>,
    pub pair_logits: Tensor,
}

impl ScoredInstance {
    pub fn span_probs(&self) -> Tensor {
        row_softmax(&self.span_logits)
    }

    pub fn pair_probs(&self) -> Tensor {
        row_softmax(&self.pair_logits)
    }
}

pub struct Forward {
    pub encoded: EncodedSentence,
    pub span_logits: Var,
    pub pair_logits: Option<Var>,
    pub scored: ScoredInstance,
}

/// Encodes an instance and scores its candidate spans and kept pairs.
pub fn forward(
    g: &mut Graph,
    params: &Parameters,
    encoder: &Encoder,
    head: &TaskHead,
    inst: &SentenceInstance,
) -> Result<Forward, ModelError> {
    let schema = &head.schema;
    let encoded = encoder.encode(g, params, &inst.tokens)?;
    let spans = candidate_spans(inst, schema);
    let n = inst.len();
    if spans.is_empty() {
        let width = schema.num_span_classes();
        let span_logits = g.constant(Tensor::zeros(0, width))?;
        return Ok(Forward {
            encoded,
            span_logits,
            pair_logits: None,
            scored: ScoredInstance {
                n,
                spans,
                span_logits: Tensor::zeros(0, width),
                kept: Vec::new(),
                pairs: Vec::new(),
                pair_logits: Tensor::zeros(0, schema.num_relation_classes()),
            },
        });
    }
    let z = encoder.span_representations(g, &encoded, &spans)?;
    let span_logits = classify_spans(g, params, head, z)?;
    let span_values = g.value(span_logits).clone();
    let (kept, pairs, pair_logits) = match &head.rel_mlp {
        Some(mlp) => {
            let probs = row_softmax(&span_values);
            let neg: Vec<f64> = (0..spans.len()).map(|i| probs.get(i, 0)).collect();
            let k = prune_count(schema.pruning, n, spans.len());
            let kept = prune_spans(&spans, &neg, k);
            let pairs = pair_indices(kept.len(), schema.loss_mode);
            assert!(
                kept.len() == k && pairs.len() <= k * k.saturating_sub(1),
                "pruning kept {} of K = {k} spans and formed {} pairs",
                kept.len(),
                pairs.len()
            );
            let logits = if pairs.is_empty() {
                None
            } else {
                let zk = g.gather_rows(z, &kept)?;
                Some(score_pairs(g, params, mlp, head.dropout, zk, &pairs)?)
            };
            (kept, pairs, logits)
        }
        None => ((0..spans.len()).collect(), Vec::new(), None),
    };
    let pair_values = match pair_logits {
        Some(v) => g.value(v).clone(),
        None => Tensor::zeros(0, schema.num_relation_classes()),
    };
    Ok(Forward {
        encoded,
        span_logits,
        pair_logits,
        scored: ScoredInstance {
            n,
            spans,
            span_logits: span_values,
            kept,
            pairs,
            pair_logits: pair_values,
        },
    })
}

/// Loss value together with the bookkeeping counters of one instance.
pub struct LossOutput {
    pub loss: Var,
    /// Gold relations with an endpoint outside the kept spans.
    pub pruned_gold: usize,
    /// Kept gold mentions whose gold antecedents were all pruned.
    pub antecedent_fallback: usize,
    pub pairs: usize,
}

/// Mean cross-entropy of `logits` rows against `targets`.
pub fn cross_entropy(g: &mut Graph, logits: Var, targets: &[usize]) -> Result<Var, NumericsError> {
    let ls = g.log_softmax(logits)?;
    let at: Vec<(usize, usize)> = targets.iter().enumerate().map(|(i, &t)| (i, t)).collect();
    let picked = g.gather_elems(ls, &at)?;
    let m = g.mean(picked)?;
    g.scale(m, -1.0)
}

/// Gold class of each candidate span (0 for NEG_SPAN).
pub fn span_targets(spans: &[(usize, usize)], inst: &SentenceInstance) -> Vec<usize> {
    let mut gold: HashMap<(usize, usize), usize> = HashMap::new();
    for s in &inst.gold_spans {
        gold.entry((s.begin, s.end)).or_insert(s.label);
    }
    spans.iter().map(|s| gold.get(s).copied().unwrap_or(0)).collect()
}

fn span_loss(g: &mut Graph, fwd: &Forward, inst: &SentenceInstance) -> Result<Option<Var>, NumericsError> {
    if fwd.scored.spans.is_empty() {
        return Ok(None);
    }
    let targets = span_targets(&fwd.scored.spans, inst);
    cross_entropy(g, fwd.span_logits, &targets).map(Some)
}

/// Relation cross-entropy averaged over all kept ordered pairs, plus the
/// span-classification cross-entropy over all candidates.
pub fn loss_pairwise(g: &mut Graph, fwd: &Forward, inst: &SentenceInstance) -> Result<LossOutput, NumericsError> {
    let s = &fwd.scored;
    let mut terms = Vec::new();
    if let Some(l) = span_loss(g, fwd, inst)? {
        terms.push(l);
    }
    let kept_pos: HashMap<(usize, usize), usize> = s.kept.iter().enumerate().map(|(j, &i)| (s.spans[i], j)).collect();
    let mut gold: HashMap<(usize, usize), usize> = HashMap::new();
    let mut pruned_gold = 0;
    for r in &inst.gold_relations {
        let (h, t) = (&inst.gold_spans[r.head], &inst.gold_spans[r.tail]);
        match (kept_pos.get(&(h.begin, h.end)), kept_pos.get(&(t.begin, t.end))) {
            (Some(&j), Some(&k)) if j != k => {
                gold.entry((j, k)).or_insert(r.label);
            }
            _ => pruned_gold += 1,
        }
    }
    if let Some(pl) = fwd.pair_logits {
        let targets: Vec<usize> = s.pairs.iter().map(|p| gold.get(p).copied().unwrap_or(0)).collect();
        terms.push(cross_entropy(g, pl, &targets)?);
    }
    let loss = sum_terms(g, &terms)?;
    Ok(LossOutput {
        loss,
        pruned_gold,
        antecedent_fallback: 0,
        pairs: s.pairs.len(),
    })
}

fn sum_terms(g: &mut Graph, terms: &[Var]) -> Result<Var, NumericsError> {
    match terms {
        [] => g.constant(Tensor::scalar(0.0)),
        [t] => Ok(*t),
        _ => {
            let cat = g.concat_cols(terms)?;
            g.sum(cat)
        }
    }
}

/// Gold clusters as connected components over gold relations, as a map from
/// gold span boundaries to a cluster id.
pub fn gold_cluster_ids(inst: &SentenceInstance) -> HashMap<(usize, usize), usize> {
    let n = inst.gold_spans.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        let mut y = x;
        while p[y] != r {
            let next = p[y];
            p[y] = r;
            y = next;
        }
        r
    }
    for r in &inst.gold_relations {
        let (a, b) = (find(&mut parent, r.head), find(&mut parent, r.tail));
        if a != b {
            parent[a.max(b)] = a.min(b);
        }
    }
    let mut out = HashMap::new();
    for (i, s) in inst.gold_spans.iter().enumerate() {
        let root = find(&mut parent, i);
        out.entry((s.begin, s.end)).or_insert(root);
    }
    out
}

/// Antecedent loss: for each kept span j, `logsumexp` over all candidate
/// antecedents (preceding kept spans and a dummy scored 0) minus
/// `logsumexp` over the gold ones; averaged over j and added to the
/// span-classification cross-entropy.
pub fn loss_head(g: &mut Graph, fwd: &Forward, inst: &SentenceInstance) -> Result<LossOutput, NumericsError> {
    let s = &fwd.scored;
    let mut terms = Vec::new();
    if let Some(l) = span_loss(g, fwd, inst)? {
        terms.push(l);
    }
    let clusters = gold_cluster_ids(inst);
    let mut cluster_sizes: HashMap<usize, Vec<(usize, usize)>> = HashMap::new();
    for (&span, &c) in &clusters {
        cluster_sizes.entry(c).or_default().push(span);
    }
    let pair_row: HashMap<(usize, usize), usize> = s.pairs.iter().enumerate().map(|(i, &p)| (p, i)).collect();
    let zero = g.constant(Tensor::zeros(1, 1))?;
    let mut fallback = 0;
    let mut per_span = Vec::new();
    for j in 0..s.kept.len() {
        let span_j = s.spans[s.kept[j]];
        let cand: Vec<(usize, usize)> = (0..j).map(|k| (pair_row[&(j, k)], 1)).collect();
        let all = match (fwd.pair_logits, cand.is_empty()) {
            (Some(pl), false) => {
                let scores = g.gather_elems(pl, &cand)?;
                g.concat_cols(&[scores, zero])?
            }
            _ => zero,
        };
        let gold_cluster = clusters.get(&span_j).copied();
        let gold: Vec<usize> = (0..j)
            .filter(|&k| gold_cluster.is_some() && clusters.get(&s.spans[s.kept[k]]).copied() == gold_cluster)
            .collect();
        let gold_var = if gold.is_empty() {
            if let Some(c) = gold_cluster {
                let earlier = cluster_sizes[&c].iter().any(|&sp| sp < span_j);
                if earlier {
                    fallback += 1;
                }
            }
            zero
        } else {
            let at: Vec<(usize, usize)> = gold.iter().map(|&k| (0, k)).collect();
            g.gather_elems(all, &at)?
        };
        let lse_all = g.logsumexp(all)?;
        let lse_gold = g.logsumexp(gold_var)?;
        per_span.push(g.sub(lse_all, lse_gold)?);
    }
    if !per_span.is_empty() {
        let cat = g.concat_cols(&per_span)?;
        terms.push(g.mean(cat)?);
    }
    let loss = sum_terms(g, &terms)?;
    Ok(LossOutput {
        loss,
        pruned_gold: 0,
        antecedent_fallback: fallback,
        pairs: s.pairs.len(),
    })
}

/// Loss of the head's configured mode.
pub fn instance_loss(g: &mut Graph, fwd: &Forward, inst: &SentenceInstance, schema: &TaskSchema) -> Result<LossOutput, NumericsError> {
    match schema.loss_mode {
        LossMode::Pairwise => loss_pairwise(g, fwd, inst),
        LossMode::Head => loss_head(g, fwd, inst),
    }
}

/// Shared encoder plus one head per task, all backed by one parameter
/// store. Encoder parameters are named `enc.*`, head parameters
/// `head.<task>.*`.
#[derive(Debug, Clone)]
pub struct ModelBundle {
    pub encoder: Encoder,
    pub head_config: HeadConfig,
    pub heads: BTreeMap<TaskName, TaskHead>,
    pub params: Parameters,
}

#[derive(Serialize, Deserialize)]
struct BundleMeta {
    encoder: Encoder,
    head_config: HeadConfig,
    heads: Vec<TaskHead>,
}

const META_FILE: &str = "model.json";
const PARAMS_FILE: &str = "params.ckpt";

impl ModelBundle {
    pub fn new(
        encoder: Encoder,
        head_config: HeadConfig,
        schemas: &[TaskSchema],
        pretrained: Option<&[(String, Vec<f64>)]>,
        rng: &mut impl Rng,
    ) -> Self {
        let mut params = Parameters::new();
        encoder.init_params(&mut params, pretrained, rng);
        let span_dim = encoder.config.span_dim();
        let mut heads = BTreeMap::new();
        for s in schemas {
            let head = TaskHead::new(s.clone(), span_dim, &head_config);
            head.init_params(&mut params, rng);
            heads.insert(s.name, head);
        }
        ModelBundle {
            encoder,
            head_config,
            heads,
            params,
        }
    }

    pub fn head(&self, task: TaskName) -> Result<&TaskHead, ModelError> {
        self.heads.get(&task).ok_or(ModelError::UnknownTask(task))
    }

    /// Eval-mode scores for one instance.
    pub fn score(&self, task: TaskName, inst: &SentenceInstance) -> Result<ScoredInstance, ModelError> {
        let head = self.head(task)?;
        let mut g = Graph::new(0);
        Ok(forward(&mut g, &self.params, &self.encoder, head, inst)?.scored)
    }

    /// Attention maps of an eval-mode forward pass over `tokens`.
    pub fn attention_maps(&self, tokens: &[String]) -> Result<Vec<Tensor>, ModelError> {
        let mut g = Graph::new(0);
        Ok(self.encoder.encode(&mut g, &self.params, tokens)?.attention_maps)
    }

    /// Names of the parameters owned by `task`'s head.
    pub fn head_param_names(&self, task: TaskName) -> Vec<String> {
        let prefix = head_prefix(task);
        self.params.names().filter(|n| n.starts_with(&prefix)).map(String::from).collect()
    }

    pub fn save(&self, dir: &Path) -> Result<(), ModelError> {
        fs::create_dir_all(dir)?;
        let meta = BundleMeta {
            encoder: self.encoder.clone(),
            head_config: self.head_config.clone(),
            heads: self.heads.values().cloned().collect(),
        };
        let f = BufWriter::new(File::create(dir.join(META_FILE))?);
        serde_json::to_writer(f, &meta).map_err(|e| ModelError::Format(e.to_string()))?;
        let mut w = BufWriter::new(File::create(dir.join(PARAMS_FILE))?);
        self.params.write_to(&mut w)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, ModelError> {
        let f = BufReader::new(File::open(dir.join(META_FILE))?);
        let meta: BundleMeta = serde_json::from_reader(f).map_err(|e| ModelError::Format(e.to_string()))?;
        let mut r = BufReader::new(File::open(dir.join(PARAMS_FILE))?);
        let params = Parameters::read_from(&mut r)?;
        Ok(ModelBundle {
            encoder: meta.encoder,
            head_config: meta.head_config,
            heads: meta.heads.into_iter().map(|h| (h.schema.name, h)).collect(),
            params,
        })
    }
}
