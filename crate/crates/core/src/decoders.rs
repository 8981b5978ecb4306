//! Turning span and pair scores into task-valid predictions.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::model::ScoredInstance;
use crate::numerics::Tensor;
use crate::schema::{DecoderKind, TaskSchema};

/// Label given to attachments to the synthetic dependency root.
pub const ROOT_LABEL: &str = "root";

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PredSpan {
    pub begin: usize,
    pub end: usize,
    pub label: String,
}

/// Directed relation between two entries of [`Prediction::spans`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredRelation {
    pub head: usize,
    pub tail: usize,
    pub label: String,
}

/// Decoder output with instance-local token indices.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub spans: Vec<PredSpan>,
    pub relations: Vec<PredRelation>,
    /// Coreference clusters as indices into `spans`.
    pub clusters: Vec<Vec<usize>>,
    /// Spans attached to the synthetic dependency root.
    pub roots: Vec<usize>,
}

impl Prediction {
    /// Head of each token of an `n`-token dependency prediction: `None` is
    /// the root, `Some(t)` a token index; paired with the label. Tokens
    /// without an attachment are reported as `(None, "")`.
    pub fn dependency_heads(&self, n: usize) -> Vec<(Option<usize>, String)> {
        let mut out = vec![(None, String::new()); n];
        for &r in &self.roots {
            out[self.spans[r].begin] = (None, ROOT_LABEL.to_string());
        }
        for rel in &self.relations {
            let dep = self.spans[rel.tail].begin;
            out[dep] = (Some(self.spans[rel.head].begin), rel.label.clone());
        }
        out
    }
}

/// Index of the largest entry of `row[from..]`, lowest index on ties.
fn argmax_from(row: &[f64], from: usize) -> usize {
    let mut best = from;
    for i in from + 1..row.len() {
        if row[i] > row[best] {
            best = i;
        }
    }
    best
}

fn span_classes(scored: &ScoredInstance, exclude_neg: bool) -> Vec<usize> {
    (0..scored.spans.len())
        .map(|i| argmax_from(scored.span_logits.row_slice(i), usize::from(exclude_neg)))
        .collect()
}

/// Spans whose argmax label is not NEG_SPAN (in gold-span mode the argmax
/// excludes NEG_SPAN), and kept pairs whose argmax is not NEG_REL with both
/// endpoints extracted.
pub fn decode_generic(scored: &ScoredInstance, schema: &TaskSchema) -> Prediction {
    let classes = span_classes(scored, schema.gold_span_mode);
    let mut pred = Prediction::default();
    let mut emitted: HashMap<usize, usize> = HashMap::new();
    for (i, &c) in classes.iter().enumerate() {
        if c != 0 {
            let (b, e) = scored.spans[i];
            emitted.insert(i, pred.spans.len());
            pred.spans.push(PredSpan {
                begin: b,
                end: e,
                label: schema.span_class_name(c).to_string(),
            });
        }
    }
    for (p, &(j, k)) in scored.pairs.iter().enumerate() {
        let c = argmax_from(scored.pair_logits.row_slice(p), 0);
        if c == 0 {
            continue;
        }
        if let (Some(&h), Some(&t)) = (emitted.get(&scored.kept[j]), emitted.get(&scored.kept[k])) {
            pred.relations.push(PredRelation {
                head: h,
                tail: t,
                label: schema.relation_class_name(c).to_string(),
            });
        }
    }
    pred
}

/// Antecedent choice for each kept span given `scores[j][k]` for `k < j`;
/// the dummy scores 0 and wins ties, then the earliest antecedent.
pub fn choose_antecedents(scores: &[Vec<f64>]) -> Vec<Option<usize>> {
    scores
        .iter()
        .map(|row| {
            let mut best: Option<usize> = None;
            let mut best_score = 0.0;
            for (k, &s) in row.iter().enumerate() {
                if s > best_score {
                    best = Some(k);
                    best_score = s;
                }
            }
            best
        })
        .collect()
}

/// Connected components with at least two members of the antecedent links.
pub fn link_clusters(links: &[Option<usize>]) -> Vec<Vec<usize>> {
    let n = links.len();
    let mut root: Vec<usize> = (0..n).collect();
    // links point backwards, so one forward pass resolves every chain
    for j in 0..n {
        if let Some(k) = links[j] {
            root[j] = root[k];
        }
    }
    let mut groups: HashMap<usize, Vec<usize>> = HashMap::new();
    for (j, &r) in root.iter().enumerate() {
        groups.entry(r).or_default().push(j);
    }
    let mut clusters: Vec<Vec<usize>> = groups.into_values().filter(|g| g.len() > 1).collect();
    clusters.sort();
    clusters
}

/// Links every kept span to its best antecedent (or none) and returns the
/// non-singleton clusters. Emitted spans are the clustered mentions;
/// relations are the links, anaphor to antecedent.
pub fn decode_coref(scored: &ScoredInstance, schema: &TaskSchema) -> Prediction {
    let kept = scored.kept.len();
    let row_of: HashMap<(usize, usize), usize> = scored.pairs.iter().enumerate().map(|(i, &p)| (p, i)).collect();
    let col = usize::from(scored.pair_logits.cols() > 1);
    let scores: Vec<Vec<f64>> = (0..kept)
        .map(|j| (0..j).map(|k| scored.pair_logits.get(row_of[&(j, k)], col)).collect())
        .collect();
    let links = choose_antecedents(&scores);
    let clusters = link_clusters(&links);
    let mut pred = Prediction::default();
    let mut index: HashMap<usize, usize> = HashMap::new();
    let mention = schema.span_labels.first().cloned().unwrap_or_default();
    let relation = schema.relation_labels.first().cloned().unwrap_or_default();
    let mut members: Vec<usize> = clusters.iter().flatten().copied().collect();
    members.sort_unstable();
    for j in members {
        let (b, e) = scored.spans[scored.kept[j]];
        index.insert(j, pred.spans.len());
        pred.spans.push(PredSpan {
            begin: b,
            end: e,
            label: mention.clone(),
        });
    }
    for (j, link) in links.iter().enumerate() {
        if let Some(k) = link {
            pred.relations.push(PredRelation {
                head: index[&j],
                tail: index[k],
                label: relation.clone(),
            });
        }
    }
    pred.clusters = clusters
        .iter()
        .map(|c| c.iter().map(|j| index[j]).collect())
        .collect();
    pred
}

/// Greedy top-down parse of `n` tokens. `score(b, e)` returns the class
/// scores of span `(b, e)` with NEG_SPAN at index 0. The root takes its best
/// non-NEG label; other nodes take their overall argmax. Each node splits at
/// the `m` maximising `max(score(b, m)) + max(score(m + 1, e))`, lowest `m`
/// on ties. Returns the labelled brackets `(b, e, class)` in preorder.
pub fn greedy_parse(n: usize, score: &dyn Fn(usize, usize) -> Vec<f64>) -> Vec<(usize, usize, usize)> {
    fn best_any(score: &dyn Fn(usize, usize) -> Vec<f64>, b: usize, e: usize) -> f64 {
        score(b, e).into_iter().fold(f64::NEG_INFINITY, f64::max)
    }
    fn rec(score: &dyn Fn(usize, usize) -> Vec<f64>, b: usize, e: usize, root: bool, out: &mut Vec<(usize, usize, usize)>) {
        let row = score(b, e);
        let label = argmax_from(&row, usize::from(root && row.len() > 1));
        if label != 0 {
            out.push((b, e, label));
        }
        if b == e {
            return;
        }
        let mut best_m = b;
        let mut best = f64::NEG_INFINITY;
        for m in b..e {
            let s = best_any(score, b, m) + best_any(score, m + 1, e);
            if s > best {
                best = s;
                best_m = m;
            }
        }
        rec(score, b, best_m, false, out);
        rec(score, best_m + 1, e, false, out);
    }
    let mut out = Vec::new();
    if n > 0 {
        rec(score, 0, n - 1, true, &mut out);
    }
    out
}

fn log_softmax_rows(t: &Tensor) -> Tensor {
    let mut out = t.clone();
    let c = t.cols();
    for r in 0..t.rows() {
        let row = &mut out.data_mut()[r * c..(r + 1) * c];
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        for v in row.iter_mut() {
            *v -= lse;
        }
    }
    out
}

/// Greedy constituency decoding over label log-probabilities, one tree per
/// sentence of the instance.
pub fn decode_constituency(scored: &ScoredInstance, schema: &TaskSchema, sentences: &[(usize, usize)]) -> Prediction {
    let logp = log_softmax_rows(&scored.span_logits);
    let row_of: HashMap<(usize, usize), usize> = scored.spans.iter().enumerate().map(|(i, &s)| (s, i)).collect();
    let width = schema.num_span_classes();
    let mut pred = Prediction::default();
    for &(start, end) in sentences {
        let score = |b: usize, e: usize| -> Vec<f64> {
            match row_of.get(&(b + start, e + start)) {
                Some(&r) => logp.row_slice(r).to_vec(),
                // spans beyond the length bound: certainly not a constituent
                None => {
                    let mut v = vec![f64::NEG_INFINITY; width];
                    v[0] = 0.0;
                    v
                }
            }
        };
        for (b, e, c) in greedy_parse(end - start, &score) {
            pred.spans.push(PredSpan {
                begin: b + start,
                end: e + start,
                label: schema.span_class_name(c).to_string(),
            });
        }
    }
    pred
}

/// Per-word parent choice from pair probabilities `probs[j][k]` (class
/// distribution of head `j` over dependent `k`, NEG_REL at index 0).
/// Returns for each word `k` its parent (`None` = root) and label class.
/// Each word's parent is the `j != k` with the highest non-NEG probability
/// (lowest `j` on ties); the single root is the word whose chosen
/// attachment has the largest NEG_REL margin `p_neg - p_best` (lowest index
/// on ties).
pub fn choose_heads(n: usize, probs: &dyn Fn(usize, usize) -> Vec<f64>) -> Vec<(Option<usize>, usize)> {
    let mut out = vec![(None, 0); n];
    let mut margin = vec![f64::INFINITY; n];
    for k in 0..n {
        let mut best: Option<(usize, usize, f64, f64)> = None;
        for j in (0..n).filter(|&j| j != k) {
            let p = probs(j, k);
            let c = argmax_from(&p, 1);
            if best.is_none_or(|b| p[c] > b.2) {
                best = Some((j, c, p[c], p[0]));
            }
        }
        if let Some((j, c, pb, pn)) = best {
            out[k] = (Some(j), c);
            margin[k] = pn - pb;
        }
    }
    let mut root = 0;
    for k in 1..n {
        if margin[k] > margin[root] {
            root = k;
        }
    }
    if n > 0 {
        out[root] = (None, 0);
    }
    out
}

/// Dependency decoding over single-word candidates: every word gets exactly
/// one parent, one of them the synthetic root. Words outside the kept set
/// (only possible when the schema prunes below one span per word) also
/// attach to the root.
pub fn decode_dependency(scored: &ScoredInstance, schema: &TaskSchema) -> Prediction {
    let probs = scored.pair_probs();
    let row_of: HashMap<(usize, usize), usize> = scored.pairs.iter().enumerate().map(|(i, &p)| (p, i)).collect();
    let kept = scored.kept.len();
    let heads = choose_heads(kept, &|j, k| probs.row_slice(row_of[&(j, k)]).to_vec());
    let word = schema.span_labels.first().cloned().unwrap_or_default();
    let mut pred = Prediction::default();
    let mut index = vec![usize::MAX; scored.spans.len()];
    for (i, &(b, e)) in scored.spans.iter().enumerate() {
        index[i] = pred.spans.len();
        pred.spans.push(PredSpan {
            begin: b,
            end: e,
            label: word.clone(),
        });
    }
    let mut attached = vec![false; scored.spans.len()];
    for (k, (head, c)) in heads.into_iter().enumerate() {
        let dep = scored.kept[k];
        attached[dep] = true;
        match head {
            None => pred.roots.push(index[dep]),
            Some(j) => pred.relations.push(PredRelation {
                head: index[scored.kept[j]],
                tail: index[dep],
                label: schema.relation_class_name(c).to_string(),
            }),
        }
    }
    for (i, a) in attached.iter().enumerate() {
        if !a {
            pred.roots.push(index[i]);
        }
    }
    pred.roots.sort_unstable();
    pred
}

/// Drops spans overlapping a more confident span, most confident first
/// (ties to the earlier span), along with their relations. Confidence is
/// the probability of the emitted label.
pub fn resolve_overlaps(pred: Prediction, scored: &ScoredInstance) -> Prediction {
    let probs = scored.span_probs();
    let row: HashMap<(usize, usize), usize> = scored.spans.iter().enumerate().map(|(i, &s)| (s, i)).collect();
    let confidence: Vec<f64> = pred
        .spans
        .iter()
        .map(|s| {
            let r = row[&(s.begin, s.end)];
            probs.row_slice(r)[1..].iter().cloned().fold(f64::MIN, f64::max)
        })
        .collect();
    let mut order: Vec<usize> = (0..pred.spans.len()).collect();
    order.sort_by(|&a, &b| {
        confidence[b]
            .total_cmp(&confidence[a])
            .then((pred.spans[a].begin, pred.spans[a].end).cmp(&(pred.spans[b].begin, pred.spans[b].end)))
    });
    let mut keep = vec![false; pred.spans.len()];
    let mut taken = vec![false; scored.n];
    for i in order {
        let s = &pred.spans[i];
        if (s.begin..=s.end).all(|t| !taken[t]) {
            keep[i] = true;
            taken[s.begin..=s.end].iter_mut().for_each(|t| *t = true);
        }
    }
    let mut index = vec![None; pred.spans.len()];
    let mut out = Prediction::default();
    for (i, s) in pred.spans.into_iter().enumerate() {
        if keep[i] {
            index[i] = Some(out.spans.len());
            out.spans.push(s);
        }
    }
    for r in pred.relations {
        if let (Some(head), Some(tail)) = (index[r.head], index[r.tail]) {
            out.relations.push(PredRelation { head, tail, ..r });
        }
    }
    out
}

/// Decoder selected by the schema.
pub fn decode(scored: &ScoredInstance, schema: &TaskSchema, sentences: &[(usize, usize)]) -> Prediction {
    match schema.decoder {
        DecoderKind::Generic | DecoderKind::SpanOnly if !schema.constraints.allow_overlap => {
            resolve_overlaps(decode_generic(scored, schema), scored)
        }
        DecoderKind::Generic | DecoderKind::SpanOnly => decode_generic(scored, schema),
        DecoderKind::Coref => decode_coref(scored, schema),
        DecoderKind::Constituency => decode_constituency(scored, schema, sentences),
        DecoderKind::Dependency => decode_dependency(scored, schema),
    }
}

/// CoNLL-U lines for one sentence (ID, FORM, HEAD, DEPREL filled; other
/// columns `_`).
pub fn to_conllu(tokens: &[String], heads: &[(Option<usize>, String)]) -> String {
    let mut out = String::new();
    for (i, (tok, (head, label))) in tokens.iter().zip(heads).enumerate() {
        let h = head.map_or(0, |h| h + 1);
        out.push_str(&format!("{}\t{tok}\t_\t_\t_\t_\t{h}\t{label}\t_\t_\n", i + 1));
    }
    out.push('\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{builtin_schema, LossMode, TaskName};

    fn scored(spans: Vec<(usize, usize)>, span_logits: Vec<Vec<f64>>, kept: Vec<usize>, mode: LossMode, pair_logits: Vec<Vec<f64>>) -> ScoredInstance {
        let n = spans.iter().map(|s| s.1 + 1).max().unwrap_or(0);
        let pairs = crate::model::pair_indices(kept.len(), mode);
        assert_eq!(pairs.len(), pair_logits.len());
        let width = pair_logits.first().map_or(1, Vec::len);
        ScoredInstance {
            n,
            spans,
            span_logits: Tensor::from_rows(&span_logits).unwrap(),
            kept,
            pairs,
            pair_logits: if pair_logits.is_empty() {
                Tensor::zeros(0, width)
            } else {
                Tensor::from_rows(&pair_logits).unwrap()
            },
        }
    }

    #[test]
    fn generic_all_negative_is_empty() {
        let schema = builtin_schema(TaskName::Ner);
        let s = scored(vec![(0, 0), (1, 1)], vec![vec![5.0, 0., 0., 0., 0.]; 2], vec![], LossMode::Pairwise, vec![]);
        assert_eq!(decode_generic(&s, &schema), Prediction::default());
    }

    #[test]
    fn overlaps_resolved_by_confidence() {
        let mut schema = builtin_schema(TaskName::Re);
        schema.gold_span_mode = false;
        schema.span_labels = vec!["A".into(), "B".into()];
        schema.relation_labels = vec!["r".into()];
        // (1,2) is the most confident and blocks (0,1) and (1,1).
        let s = scored(
            vec![(0, 1), (1, 2), (1, 1), (3, 3)],
            vec![vec![0., 4., 0.], vec![0., 0., 5.], vec![0., 3., 0.], vec![0., 0., 2.]],
            vec![1, 3],
            LossMode::Pairwise,
            vec![vec![0., 5.], vec![0., 5.]],
        );
        let raw = decode_generic(&s, &schema);
        assert_eq!((raw.spans.len(), raw.relations.len()), (4, 2));
        let pred = decode(&s, &schema, &[(0, 4)]);
        let kept: Vec<(usize, usize)> = pred.spans.iter().map(|p| (p.begin, p.end)).collect();
        assert_eq!(kept, vec![(1, 2), (3, 3)]);
        assert_eq!(pred.relations.len(), 2);
        assert!(pred.relations.iter().all(|r| r.head < 2 && r.tail < 2));

        schema.constraints.allow_overlap = true;
        assert_eq!(decode(&s, &schema, &[(0, 4)]), raw);
    }

    #[test]
    fn generic_relation_requires_extracted_endpoints() {
        let schema = builtin_schema(TaskName::OpenIE);
        let rel = |c: usize| {
            let mut v = vec![0.0; schema.num_relation_classes()];
            v[c] = 5.0;
            v
        };
        let s = scored(
            vec![(0, 0), (1, 1)],
            vec![vec![0., 5., 0.], vec![0., 0., 5.]],
            vec![0, 1],
            LossMode::Pairwise,
            vec![rel(1), rel(0)],
        );
        let p = decode_generic(&s, &schema);
        assert_eq!(p.relations, vec![PredRelation { head: 0, tail: 1, label: "ARG0".into() }]);
        let s = scored(
            vec![(0, 0), (1, 1)],
            vec![vec![5., 0., 0.], vec![0., 0., 5.]],
            vec![0, 1],
            LossMode::Pairwise,
            vec![rel(2), rel(0)],
        );
        assert!(decode_generic(&s, &schema).relations.is_empty());
    }

    #[test]
    fn gold_span_mode_never_predicts_negative() {
        let schema = builtin_schema(TaskName::Absa);
        let s = scored(vec![(0, 1)], vec![vec![9., 1., 2., 0., 0.]], vec![0], LossMode::Pairwise, vec![]);
        assert_eq!(decode_generic(&s, &schema).spans[0].label, "negative");
    }

    #[test]
    fn coref_examples() {
        assert_eq!(choose_antecedents(&[vec![], vec![-1.0], vec![-0.5, -2.0]]), vec![None; 3]);
        assert!(link_clusters(&[None, None, None]).is_empty());
        assert_eq!(link_clusters(&[None, Some(0), Some(1)]), vec![vec![0, 1, 2]]);
        assert_eq!(choose_antecedents(&[vec![0.2, 0.9]]), vec![Some(1)]);
    }

    #[test]
    fn coref_decoding_emits_clusters() {
        let schema = builtin_schema(TaskName::Coref);
        // kept spans 0..3; pairs (1,0), (2,0), (2,1)
        let s = scored(
            vec![(0, 0), (2, 2), (4, 4)],
            vec![vec![0., 1.]; 3],
            vec![0, 1, 2],
            LossMode::Head,
            vec![vec![0., 2.0], vec![0., -0.2], vec![0., -1.0]],
        );
        let p = decode_coref(&s, &schema);
        assert_eq!(p.clusters, vec![vec![0, 1]]);
        assert_eq!(p.spans.len(), 2);
        assert_eq!(p.relations.len(), 1);
    }

    #[test]
    fn parse_single_and_pair() {
        let one = |_: usize, _: usize| vec![0.0, -1.0, -2.0];
        assert_eq!(greedy_parse(1, &one), vec![(0, 0, 1)]);
        let two = |b: usize, e: usize| if (b, e) == (0, 1) { vec![0.0, -1.0] } else { vec![0.0, -3.0] };
        assert_eq!(greedy_parse(2, &two), vec![(0, 1, 1)]);
    }

    #[test]
    fn dependency_two_words() {
        // word 1 heads word 0 as nsubj; word 0 -> word 1 is NEG
        let probs = |j: usize, k: usize| {
            if (j, k) == (1, 0) {
                vec![0.1, 0.8, 0.1]
            } else {
                vec![0.9, 0.05, 0.05]
            }
        };
        assert_eq!(choose_heads(2, &probs), vec![(Some(1), 1), (None, 0)]);
    }

    #[test]
    fn dependency_ties_use_lowest_head() {
        let heads = choose_heads(4, &|_, _| vec![0.25, 0.25, 0.25, 0.25]);
        assert_eq!(heads, vec![(None, 0), (Some(0), 1), (Some(0), 1), (Some(0), 1)]);
    }

    #[test]
    fn dependency_prediction_shape() {
        let schema = builtin_schema(TaskName::Dep);
        let k = 3;
        let pairs = crate::model::pair_indices(k, LossMode::Pairwise);
        let logits: Vec<Vec<f64>> = pairs
            .iter()
            .map(|&(j, d)| {
                let mut v = vec![0.0; schema.num_relation_classes()];
                v[1 + (j * 7 + d) % 5] = 3.0;
                v
            })
            .collect();
        let s = scored(vec![(0, 0), (1, 1), (2, 2)], vec![vec![0., 1.]; 3], vec![0, 1, 2], LossMode::Pairwise, logits);
        let p = decode_dependency(&s, &schema);
        assert_eq!(p.roots.len(), 1);
        assert_eq!(p.relations.len(), 2);
        let heads = p.dependency_heads(3);
        assert_eq!(heads.iter().filter(|h| h.0.is_none()).count(), 1);
        let conllu = to_conllu(&["a".into(), "b".into(), "c".into()], &heads);
        assert_eq!(conllu.lines().filter(|l| l.contains("\t0\troot\t")).count(), 1);
    }
}
