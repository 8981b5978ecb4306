//! Evaluation metrics over gold/predicted annotation pairs.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::brat::Document;
use crate::decoders::{Prediction, ROOT_LABEL};
use crate::schema::{MetricKind, SentenceInstance, TaskSchema};

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("gold and predicted documents differ: {0}")]
    DocumentMismatch(String),
    #[error("token {token} of item {item} has no predicted head")]
    MissingHead { item: usize, token: usize },
}

pub type SpanKey = (usize, usize, String);
pub type RelationKey = ((usize, usize), (usize, usize), String);

/// Span and relation tuples of one document or instance.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Annotations {
    pub tokens: usize,
    pub spans: Vec<SpanKey>,
    pub relations: Vec<RelationKey>,
}

impl Annotations {
    pub fn from_document(doc: &Document) -> Self {
        let by_id: HashMap<&str, (usize, usize)> = doc
            .spans
            .iter()
            .map(|s| (s.span_id.as_str(), (s.token_begin, s.token_end)))
            .collect();
        Annotations {
            tokens: doc.num_tokens(),
            spans: doc
                .spans
                .iter()
                .map(|s| (s.token_begin, s.token_end, s.label.clone()))
                .collect(),
            relations: doc
                .relations
                .iter()
                .filter_map(|r| {
                    Some((
                        *by_id.get(r.head_span_id.as_str())?,
                        *by_id.get(r.tail_span_id.as_str())?,
                        r.label.clone(),
                    ))
                })
                .collect(),
        }
    }

    pub fn from_instance(inst: &SentenceInstance, schema: &TaskSchema) -> Self {
        Annotations {
            tokens: inst.len(),
            spans: inst
                .gold_spans
                .iter()
                .map(|s| (s.begin, s.end, schema.span_class_name(s.label).to_string()))
                .collect(),
            relations: inst
                .gold_relations
                .iter()
                .map(|r| {
                    let (h, t) = (&inst.gold_spans[r.head], &inst.gold_spans[r.tail]);
                    ((h.begin, h.end), (t.begin, t.end), schema.relation_class_name(r.label).to_string())
                })
                .collect(),
        }
    }

    pub fn from_prediction(pred: &Prediction, tokens: usize) -> Self {
        Annotations {
            tokens,
            spans: pred.spans.iter().map(|s| (s.begin, s.end, s.label.clone())).collect(),
            relations: pred
                .relations
                .iter()
                .map(|r| {
                    let (h, t) = (&pred.spans[r.head], &pred.spans[r.tail]);
                    ((h.begin, h.end), (t.begin, t.end), r.label.clone())
                })
                .collect(),
        }
    }
}

/// Matched / predicted / gold counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub correct: usize,
    pub predicted: usize,
    pub gold: usize,
}

impl Counts {
    pub fn add(&mut self, o: Counts) {
        self.correct += o.correct;
        self.predicted += o.predicted;
        self.gold += o.gold;
    }

    pub fn prf(&self) -> Prf {
        Prf::from_ratios(ratio(self.correct as f64, self.predicted as f64), ratio(self.correct as f64, self.gold as f64))
    }
}

fn ratio(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        0.0
    } else {
        a / b
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    pub fn from_ratios(precision: f64, recall: f64) -> Self {
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Prf { precision, recall, f1 }
    }
}

/// One-to-one multiset matching: each gold item matches at most one equal
/// prediction.
pub fn match_counts<T: std::hash::Hash + Eq>(gold: &[T], pred: &[T]) -> Counts {
    let mut remaining: HashMap<&T, usize> = HashMap::new();
    for g in gold {
        *remaining.entry(g).or_default() += 1;
    }
    let mut correct = 0;
    for p in pred {
        if let Some(c) = remaining.get_mut(p) {
            if *c > 0 {
                *c -= 1;
                correct += 1;
            }
        }
    }
    Counts {
        correct,
        predicted: pred.len(),
        gold: gold.len(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

/// Serializable metric result. `score` is the task's headline number (F1,
/// LAS, accuracy, averaged coref F1 or macro F1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub task: String,
    pub metric: MetricKind,
    pub score: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub counts: Counts,
    pub per_label: BTreeMap<String, LabelScore>,
    /// Component metrics (MUC, B3, CEAF-phi4 for coreference).
    pub components: BTreeMap<String, Prf>,
}

impl MetricReport {
    fn from_counts(task: &str, metric: MetricKind, counts: Counts) -> Self {
        let prf = counts.prf();
        MetricReport {
            task: task.to_string(),
            metric,
            score: prf.f1,
            precision: prf.precision,
            recall: prf.recall,
            f1: prf.f1,
            counts,
            per_label: BTreeMap::new(),
            components: BTreeMap::new(),
        }
    }
}

fn per_label<T, F>(gold: &[T], pred: &[T], label: F) -> BTreeMap<String, (Counts, usize)>
where
    T: std::hash::Hash + Eq + Clone,
    F: Fn(&T) -> &str,
{
    let mut labels: BTreeSet<String> = BTreeSet::new();
    labels.extend(gold.iter().map(|x| label(x).to_string()));
    labels.extend(pred.iter().map(|x| label(x).to_string()));
    labels
        .into_iter()
        .map(|l| {
            let g: Vec<T> = gold.iter().filter(|x| label(x) == l).cloned().collect();
            let p: Vec<T> = pred.iter().filter(|x| label(x) == l).cloned().collect();
            let support = g.len();
            (l, (match_counts(&g, &p), support))
        })
        .collect()
}

fn label_scores(m: BTreeMap<String, (Counts, usize)>) -> BTreeMap<String, LabelScore> {
    m.into_iter()
        .map(|(l, (c, support))| {
            let prf = c.prf();
            (
                l,
                LabelScore {
                    precision: prf.precision,
                    recall: prf.recall,
                    f1: prf.f1,
                    support,
                },
            )
        })
        .collect()
}

fn merge_label_counts(into: &mut BTreeMap<String, (Counts, usize)>, from: BTreeMap<String, (Counts, usize)>) {
    for (l, (c, s)) in from {
        let e = into.entry(l).or_default();
        e.0.add(c);
        e.1 += s;
    }
}

/// Exact-match span F1 micro-averaged over items.
pub fn span_f1(task: &str, items: &[(Annotations, Annotations)]) -> MetricReport {
    let mut counts = Counts::default();
    let mut labels = BTreeMap::new();
    for (g, p) in items {
        counts.add(match_counts(&g.spans, &p.spans));
        merge_label_counts(&mut labels, per_label(&g.spans, &p.spans, |s| &s.2));
    }
    let mut r = MetricReport::from_counts(task, MetricKind::SpanF1, counts);
    r.per_label = label_scores(labels);
    r
}

/// Relation F1: both endpoint boundaries and the label must match.
pub fn relation_f1(task: &str, items: &[(Annotations, Annotations)]) -> MetricReport {
    let mut counts = Counts::default();
    let mut labels = BTreeMap::new();
    for (g, p) in items {
        counts.add(match_counts(&g.relations, &p.relations));
        merge_label_counts(&mut labels, per_label(&g.relations, &p.relations, |r| &r.2));
    }
    let mut r = MetricReport::from_counts(task, MetricKind::RelationF1, counts);
    r.per_label = label_scores(labels);
    r
}

/// Labeled-bracket F1 over phrasal brackets. Brackets are the span tuples;
/// preterminals never appear as spans, so single-token phrasal brackets
/// count like any other.
pub fn bracket_f1(task: &str, items: &[(Annotations, Annotations)]) -> MetricReport {
    let mut r = span_f1(task, items);
    r.metric = MetricKind::BracketF1;
    r
}

/// Head and label of every token: relations from single-token spans give
/// the head; a token covered by a single-token span without an incoming
/// relation is attached to the root. Tokens with neither are `None`.
pub fn dependency_heads(a: &Annotations) -> Vec<Option<(Option<usize>, String)>> {
    let mut out: Vec<Option<(Option<usize>, String)>> = vec![None; a.tokens];
    for s in &a.spans {
        if s.0 == s.1 && s.0 < a.tokens {
            out[s.0] = Some((None, ROOT_LABEL.to_string()));
        }
    }
    let mut seen = vec![false; a.tokens];
    for ((hb, _), (tb, te), label) in &a.relations {
        if tb == te && *tb < a.tokens && !seen[*tb] {
            seen[*tb] = true;
            out[*tb] = Some((Some(*hb), label.clone()));
        }
    }
    out
}

/// Labeled attachment score. Every gold word must have a predicted head.
pub fn las(task: &str, items: &[(Annotations, Annotations)]) -> Result<MetricReport, MetricError> {
    let mut correct = 0;
    let mut total = 0;
    for (i, (g, p)) in items.iter().enumerate() {
        if g.tokens != p.tokens {
            return Err(MetricError::DocumentMismatch(format!(
                "item {i}: {} gold tokens vs {} predicted",
                g.tokens, p.tokens
            )));
        }
        let gh = dependency_heads(g);
        let ph = dependency_heads(p);
        for (t, gold) in gh.iter().enumerate() {
            let Some(gold) = gold else { continue };
            let Some(pred) = &ph[t] else {
                return Err(MetricError::MissingHead { item: i, token: t });
            };
            total += 1;
            if gold == pred {
                correct += 1;
            }
        }
    }
    let acc = ratio(correct as f64, total as f64);
    Ok(MetricReport {
        task: task.to_string(),
        metric: MetricKind::Las,
        score: acc,
        precision: acc,
        recall: acc,
        f1: acc,
        counts: Counts {
            correct,
            predicted: total,
            gold: total,
        },
        per_label: BTreeMap::new(),
        components: BTreeMap::new(),
    })
}

/// Label accuracy on gold span boundaries: a gold span is correct when a
/// prediction with the same boundaries carries the same label.
pub fn accuracy(task: &str, items: &[(Annotations, Annotations)]) -> MetricReport {
    let mut correct = 0;
    let mut gold = 0;
    let mut predicted = 0;
    let mut labels: BTreeMap<String, (Counts, usize)> = BTreeMap::new();
    for (g, p) in items {
        let mut by_span: HashMap<(usize, usize), Vec<&str>> = HashMap::new();
        for s in &p.spans {
            by_span.entry((s.0, s.1)).or_default().push(&s.2);
        }
        predicted += p.spans.len();
        for s in &g.spans {
            gold += 1;
            let hit = by_span.get_mut(&(s.0, s.1)).and_then(|v| {
                let pos = v.iter().position(|l| *l == s.2)?;
                v.remove(pos);
                Some(())
            });
            let e = labels.entry(s.2.clone()).or_default();
            e.1 += 1;
            e.0.gold += 1;
            if hit.is_some() {
                correct += 1;
                e.0.correct += 1;
            }
        }
    }
    let acc = ratio(correct as f64, gold as f64);
    MetricReport {
        task: task.to_string(),
        metric: MetricKind::Accuracy,
        score: acc,
        precision: acc,
        recall: acc,
        f1: acc,
        counts: Counts {
            correct,
            predicted,
            gold,
        },
        per_label: label_scores(labels),
        components: BTreeMap::new(),
    }
}

/// Macro-averaged relation F1 over the labels present in gold or
/// prediction, excluding `other` when given.
pub fn macro_f1(task: &str, items: &[(Annotations, Annotations)], other: Option<&str>) -> MetricReport {
    let mut counts = Counts::default();
    let mut labels = BTreeMap::new();
    for (g, p) in items {
        counts.add(match_counts(&g.relations, &p.relations));
        merge_label_counts(&mut labels, per_label(&g.relations, &p.relations, |r| &r.2));
    }
    let scored: Vec<f64> = labels
        .iter()
        .filter(|(l, _)| Some(l.as_str()) != other)
        .map(|(_, (c, _))| c.prf().f1)
        .collect();
    let macro_avg = if scored.is_empty() {
        0.0
    } else {
        scored.iter().sum::<f64>() / scored.len() as f64
    };
    let mut r = MetricReport::from_counts(task, MetricKind::MacroF1, counts);
    r.score = macro_avg;
    r.per_label = label_scores(labels);
    r
}

pub type Mention = (usize, usize);

/// Coreference clusters: connected components (two or more mentions) of
/// the relation graph over span boundaries.
pub fn clusters_of(a: &Annotations) -> Vec<Vec<Mention>> {
    let mut index: BTreeMap<Mention, usize> = BTreeMap::new();
    for ((hb, he), (tb, te), _) in &a.relations {
        let n = index.len();
        index.entry((*hb, *he)).or_insert(n);
        let n = index.len();
        index.entry((*tb, *te)).or_insert(n);
    }
    let mut parent: Vec<usize> = (0..index.len()).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for ((hb, he), (tb, te), _) in &a.relations {
        let a = find(&mut parent, index[&(*hb, *he)]);
        let b = find(&mut parent, index[&(*tb, *te)]);
        if a != b {
            parent[a.max(b)] = a.min(b);
        }
    }
    let mut groups: BTreeMap<usize, Vec<Mention>> = BTreeMap::new();
    for (&m, &i) in &index {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(m);
    }
    groups.into_values().filter(|g| g.len() > 1).collect()
}

/// Numerator and denominator pairs for recall and precision.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CorefCounts {
    pub recall_num: f64,
    pub recall_den: f64,
    pub precision_num: f64,
    pub precision_den: f64,
}

impl CorefCounts {
    pub fn add(&mut self, o: CorefCounts) {
        self.recall_num += o.recall_num;
        self.recall_den += o.recall_den;
        self.precision_num += o.precision_num;
        self.precision_den += o.precision_den;
    }

    pub fn prf(&self) -> Prf {
        Prf::from_ratios(
            ratio(self.precision_num, self.precision_den),
            ratio(self.recall_num, self.recall_den),
        )
    }
}

fn muc_side(keys: &[Vec<Mention>], responses: &[Vec<Mention>]) -> (f64, f64) {
    let owner: HashMap<Mention, usize> = responses
        .iter()
        .enumerate()
        .flat_map(|(i, c)| c.iter().map(move |m| (*m, i)))
        .collect();
    let mut num = 0.0;
    let mut den = 0.0;
    for k in keys {
        let mut parts: BTreeSet<usize> = BTreeSet::new();
        let mut twinless = 0;
        for m in k {
            match owner.get(m) {
                Some(&i) => {
                    parts.insert(i);
                }
                None => twinless += 1,
            }
        }
        num += (k.len() - parts.len() - twinless) as f64;
        den += (k.len() - 1) as f64;
    }
    (num, den)
}

/// Link-based MUC counts.
pub fn muc(gold: &[Vec<Mention>], pred: &[Vec<Mention>]) -> CorefCounts {
    let (rn, rd) = muc_side(gold, pred);
    let (pn, pd) = muc_side(pred, gold);
    CorefCounts {
        recall_num: rn,
        recall_den: rd,
        precision_num: pn,
        precision_den: pd,
    }
}

fn overlap(a: &[Mention], b: &[Mention]) -> usize {
    let s: BTreeSet<&Mention> = a.iter().collect();
    b.iter().filter(|m| s.contains(m)).count()
}

/// Mention-based B-cubed counts.
pub fn b_cubed(gold: &[Vec<Mention>], pred: &[Vec<Mention>]) -> CorefCounts {
    let side = |keys: &[Vec<Mention>], resp: &[Vec<Mention>]| -> (f64, f64) {
        let mut num = 0.0;
        let mut den = 0.0;
        for k in keys {
            for r in resp {
                let o = overlap(k, r) as f64;
                num += o * o / k.len() as f64;
            }
            den += k.len() as f64;
        }
        (num, den)
    };
    let (rn, rd) = side(gold, pred);
    let (pn, pd) = side(pred, gold);
    CorefCounts {
        recall_num: rn,
        recall_den: rd,
        precision_num: pn,
        precision_den: pd,
    }
}

/// Maximum-weight assignment of rows to columns of a (possibly
/// rectangular) weight matrix; returns the total weight and, per row, the
/// assigned column (if any).
pub fn max_weight_assignment(weights: &[Vec<f64>]) -> (f64, Vec<Option<usize>>) {
    let rows = weights.len();
    let cols = weights.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return (0.0, vec![None; rows]);
    }
    let n = rows.max(cols);
    let maxw = weights.iter().flatten().cloned().fold(0.0, f64::max);
    // Hungarian algorithm (shortest augmenting paths with potentials) on
    // the padded square cost matrix maxw - w.
    let cost = |i: usize, j: usize| -> f64 {
        if i < rows && j < cols {
            maxw - weights[i][j]
        } else {
            maxw
        }
    };
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![None; rows];
    let mut total = 0.0;
    for j in 1..=n {
        let i = p[j];
        if i >= 1 && i - 1 < rows && j - 1 < cols {
            assign[i - 1] = Some(j - 1);
            total += weights[i - 1][j - 1];
        }
    }
    (total, assign)
}

/// Entity-based CEAF with the phi4 similarity and an optimal alignment.
pub fn ceaf_e(gold: &[Vec<Mention>], pred: &[Vec<Mention>]) -> CorefCounts {
    let weights: Vec<Vec<f64>> = gold
        .iter()
        .map(|k| {
            pred.iter()
                .map(|r| 2.0 * overlap(k, r) as f64 / (k.len() + r.len()) as f64)
                .collect()
        })
        .collect();
    let (sim, _) = max_weight_assignment(&weights);
    CorefCounts {
        recall_num: sim,
        recall_den: gold.len() as f64,
        precision_num: sim,
        precision_den: pred.len() as f64,
    }
}

/// MUC, B-cubed and CEAF-phi4 accumulated over documents; the headline is
/// the mean of the three F1 values.
pub fn coref_avg_f1(task: &str, items: &[(Annotations, Annotations)]) -> MetricReport {
    let mut m = CorefCounts::default();
    let mut b = CorefCounts::default();
    let mut c = CorefCounts::default();
    for (g, p) in items {
        let (gc, pc) = (clusters_of(g), clusters_of(p));
        m.add(muc(&gc, &pc));
        b.add(b_cubed(&gc, &pc));
        c.add(ceaf_e(&gc, &pc));
    }
    let (mp, bp, cp) = (m.prf(), b.prf(), c.prf());
    let avg = |f: fn(&Prf) -> f64| (f(&mp) + f(&bp) + f(&cp)) / 3.0;
    let mut components = BTreeMap::new();
    components.insert("muc".to_string(), mp);
    components.insert("b_cubed".to_string(), bp);
    components.insert("ceaf_phi4".to_string(), cp);
    MetricReport {
        task: task.to_string(),
        metric: MetricKind::CorefAvgF1,
        score: avg(|x| x.f1),
        precision: avg(|x| x.precision),
        recall: avg(|x| x.recall),
        f1: avg(|x| x.f1),
        counts: Counts::default(),
        per_label: BTreeMap::new(),
        components,
    }
}

/// The schema's metric over aligned items.
pub fn evaluate(schema: &TaskSchema, items: &[(Annotations, Annotations)]) -> Result<MetricReport, MetricError> {
    let task = schema.name.as_str();
    Ok(match schema.metric {
        MetricKind::SpanF1 => span_f1(task, items),
        MetricKind::RelationF1 => relation_f1(task, items),
        MetricKind::CorefAvgF1 => coref_avg_f1(task, items),
        MetricKind::Las => las(task, items)?,
        MetricKind::BracketF1 => bracket_f1(task, items),
        MetricKind::Accuracy => accuracy(task, items),
        MetricKind::MacroF1 => macro_f1(task, items, schema.other_label.as_deref()),
    })
}

/// Pairs documents by id and evaluates them. Documents must have the same
/// tokens.
pub fn evaluate_documents(schema: &TaskSchema, gold: &[Document], pred: &[Document]) -> Result<MetricReport, MetricError> {
    let by_id: HashMap<&str, &Document> = pred.iter().map(|d| (d.doc_id.as_str(), d)).collect();
    if gold.len() != pred.len() {
        return Err(MetricError::DocumentMismatch(format!(
            "{} gold documents vs {} predicted",
            gold.len(),
            pred.len()
        )));
    }
    let mut items = Vec::with_capacity(gold.len());
    for g in gold {
        let p = by_id
            .get(g.doc_id.as_str())
            .ok_or_else(|| MetricError::DocumentMismatch(format!("no prediction for {}", g.doc_id)))?;
        if g.tokens() != p.tokens() {
            return Err(MetricError::DocumentMismatch(format!("tokens of {} differ", g.doc_id)));
        }
        items.push((Annotations::from_document(g), Annotations::from_document(p)));
    }
    evaluate(schema, &items)
}
