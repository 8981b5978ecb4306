//! Random documents, annotations and score tensors.

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use spanrel::brat::Document;
use spanrel::metrics::Annotations;
use spanrel::model::{pair_indices, ScoredInstance};
use spanrel::numerics::Tensor;
use spanrel::schema::{builtin_schema, Constraints, LossMode, Pruning, TaskName, TaskSchema};

pub const SPAN_LABELS: &[&str] = &["PER", "LOC", "ORG"];
pub const RELATION_LABELS: &[&str] = &["rel-a", "rel-b"];
const WORDS: &[&str] = &[
    "the", "cat", "Zoë", "naïve", "東京", "ran", "über", "x", "42", "Ω", "a-b", "it's", "déjà", "vu", "🙂",
];

/// Schema accepting everything [`random_document`] produces.
pub fn document_schema() -> TaskSchema {
    TaskSchema {
        span_labels: SPAN_LABELS.iter().map(|s| s.to_string()).collect(),
        relation_labels: RELATION_LABELS.iter().map(|s| s.to_string()).collect(),
        max_span_length: Some(4),
        pruning: Pruning::Fixed(5),
        constraints: Constraints {
            allow_overlap: true,
            tree: None,
        },
        ..builtin_schema(TaskName::OpenIE)
    }
}

/// A document with 1-4 sentences, in-sentence spans of up to 4 tokens and
/// relations between distinct spans.
pub fn random_document(rng: &mut ChaCha8Rng, doc_id: &str) -> Document {
    let sentences: Vec<Vec<String>> = (0..rng.random_range(1..=4))
        .map(|_| {
            (0..rng.random_range(1..=8))
                .map(|_| WORDS.choose(rng).unwrap().to_string())
                .collect()
        })
        .collect();
    let mut doc = Document::from_tokens(doc_id, &sentences);
    let mut ids = Vec::new();
    let mut offset = 0;
    for s in &sentences {
        for _ in 0..rng.random_range(0..=3) {
            let b = rng.random_range(0..s.len());
            let e = rng.random_range(b..s.len().min(b + 4));
            ids.push(doc.add_span(SPAN_LABELS.choose(rng).unwrap(), offset + b, offset + e));
        }
        offset += s.len();
    }
    if ids.len() >= 2 {
        for _ in 0..rng.random_range(0..=3) {
            let h = rng.random_range(0..ids.len());
            let mut t = rng.random_range(0..ids.len() - 1);
            if t >= h {
                t += 1;
            }
            let (h, t) = (ids[h].clone(), ids[t].clone());
            doc.add_relation(RELATION_LABELS.choose(rng).unwrap(), &h, &t);
        }
    }
    doc
}

fn random_span(rng: &mut ChaCha8Rng, n: usize) -> (usize, usize) {
    let b = rng.random_range(0..n);
    (b, rng.random_range(b..n.min(b + 3)))
}

/// Up to `max_spans` labeled spans (duplicates allowed) over `n` tokens and
/// a few relations between them.
pub fn random_annotations(rng: &mut ChaCha8Rng, n: usize, max_spans: usize) -> Annotations {
    let spans: Vec<_> = (0..rng.random_range(0..=max_spans))
        .map(|_| {
            let (b, e) = random_span(rng, n);
            (b, e, SPAN_LABELS[rng.random_range(0..2)].to_string())
        })
        .collect();
    let mut relations = Vec::new();
    if !spans.is_empty() {
        for _ in 0..rng.random_range(0..=spans.len()) {
            let h = spans.choose(rng).unwrap();
            let t = spans.choose(rng).unwrap();
            relations.push(((h.0, h.1), (t.0, t.1), RELATION_LABELS.choose(rng).unwrap().to_string()));
        }
    }
    Annotations {
        tokens: n,
        spans,
        relations,
    }
}

/// A prediction derived from `gold`: some items kept, some relabeled or
/// shifted, some dropped, some random extras.
pub fn perturb(rng: &mut ChaCha8Rng, gold: &Annotations, max_spans: usize) -> Annotations {
    let n = gold.tokens;
    let mut spans = Vec::new();
    for s in &gold.spans {
        match rng.random_range(0..4) {
            0 => {}
            1 => spans.push((s.0, s.1, SPAN_LABELS[rng.random_range(0..2)].to_string())),
            2 => {
                let (b, e) = random_span(rng, n);
                spans.push((b, e, s.2.clone()));
            }
            _ => spans.push(s.clone()),
        }
    }
    let mut relations = Vec::new();
    for r in &gold.relations {
        if !rng.random_bool(0.7) {
            continue;
        }
        if rng.random_bool(0.2) {
            relations.push((r.0, r.1, RELATION_LABELS.choose(rng).unwrap().to_string()));
        } else {
            relations.push(r.clone());
        }
    }
    let extra = random_annotations(rng, n, max_spans.saturating_sub(spans.len()).min(2));
    spans.extend(extra.spans);
    relations.extend(extra.relations);
    Annotations {
        tokens: n,
        spans,
        relations,
    }
}

/// Dependency annotation: every token is a word span, one token is the root
/// and the others have a random head.
pub fn random_dependency(rng: &mut ChaCha8Rng, n: usize) -> Annotations {
    let root = rng.random_range(0..n);
    let labels = ["nsubj", "obj", "det"];
    Annotations {
        tokens: n,
        spans: (0..n).map(|t| (t, t, "word".to_string())).collect(),
        relations: (0..n)
            .filter(|&t| t != root)
            .map(|t| {
                let mut h = rng.random_range(0..n - 1);
                if h >= t {
                    h += 1;
                }
                ((h, h), (t, t), labels.choose(rng).unwrap().to_string())
            })
            .collect(),
    }
}

/// Prediction derived from a dependency annotation: some heads or labels
/// changed.
pub fn perturb_dependency(rng: &mut ChaCha8Rng, gold: &Annotations) -> Annotations {
    let n = gold.tokens;
    let mut out = gold.clone();
    for r in out.relations.iter_mut() {
        if rng.random_bool(0.3) {
            r.2 = "obj".into();
        }
        if rng.random_bool(0.3) {
            let t = (r.1).0;
            let mut h = rng.random_range(0..n - 1);
            if h >= t {
                h += 1;
            }
            r.0 = (h, h);
        }
    }
    out
}

/// Coreference annotation: up to `max_mentions` distinct mentions linked
/// into random chains.
pub fn random_coref(rng: &mut ChaCha8Rng, n: usize, max_mentions: usize) -> Annotations {
    let mut mentions: Vec<(usize, usize)> = (0..rng.random_range(0..=max_mentions)).map(|_| random_span(rng, n)).collect();
    mentions.sort();
    mentions.dedup();
    let mut relations = Vec::new();
    for j in 1..mentions.len() {
        if rng.random_bool(0.6) {
            let k = rng.random_range(0..j);
            relations.push((mentions[j], mentions[k], "coref".to_string()));
        }
    }
    Annotations {
        tokens: n,
        spans: mentions.iter().map(|&(b, e)| (b, e, "mention".to_string())).collect(),
        relations,
    }
}

/// Random nested bracketing over `n` tokens with at most `max` labeled
/// brackets, built from a random binary tree.
pub fn random_tree(rng: &mut ChaCha8Rng, n: usize, max: usize) -> Annotations {
    fn rec(rng: &mut ChaCha8Rng, b: usize, e: usize, out: &mut Vec<(usize, usize)>) {
        out.push((b, e));
        if b < e {
            let m = rng.random_range(b..e);
            rec(rng, b, m, out);
            rec(rng, m + 1, e, out);
        }
    }
    let mut nodes = Vec::new();
    rec(rng, 0, n - 1, &mut nodes);
    let labels = ["S", "NP", "VP"];
    let mut spans = Vec::new();
    for (b, e) in nodes {
        if rng.random_bool(0.5) {
            spans.push((b, e, labels.choose(rng).unwrap().to_string()));
        }
    }
    spans.truncate(max);
    Annotations {
        tokens: n,
        spans,
        relations: vec![],
    }
}

fn random_tensor(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Tensor {
    let data = (0..rows * cols)
        .map(|_| {
            // coarse values make exact ties common
            if rng.random_bool(0.2) {
                rng.random_range(-2..=2) as f64
            } else {
                rng.random_range(-scale..scale)
            }
        })
        .collect();
    Tensor::new(rows, cols, data).unwrap()
}

/// Scores over every span of an `n`-token sentence (all kept, no pairs).
pub fn random_span_scores(rng: &mut ChaCha8Rng, n: usize, classes: usize) -> ScoredInstance {
    let spans: Vec<(usize, usize)> = (0..n).flat_map(|b| (b..n).map(move |e| (b, e))).collect();
    ScoredInstance {
        n,
        span_logits: random_tensor(rng, spans.len(), classes, 4.0),
        kept: (0..spans.len()).collect(),
        spans,
        pairs: vec![],
        pair_logits: Tensor::zeros(0, 1),
    }
}

/// Scores for single-word candidates with all ordered pairs.
pub fn random_dependency_scores(rng: &mut ChaCha8Rng, n: usize, classes: usize) -> ScoredInstance {
    let pairs = pair_indices(n, LossMode::Pairwise);
    ScoredInstance {
        n,
        spans: (0..n).map(|t| (t, t)).collect(),
        span_logits: random_tensor(rng, n, 2, 1.0),
        kept: (0..n).collect(),
        pair_logits: random_tensor(rng, pairs.len(), classes, 4.0),
        pairs,
    }
}

/// Scores for a random kept subset of spans with backward (antecedent)
/// pairs and a single scalar score per pair.
pub fn random_coref_scores(rng: &mut ChaCha8Rng, n: usize) -> ScoredInstance {
    let spans: Vec<(usize, usize)> = (0..n).flat_map(|b| (b..n.min(b + 3)).map(move |e| (b, e))).collect();
    let kept: Vec<usize> = (0..spans.len()).filter(|_| rng.random_bool(0.5)).collect();
    let pairs = pair_indices(kept.len(), LossMode::Head);
    ScoredInstance {
        n,
        span_logits: random_tensor(rng, spans.len(), 2, 1.0),
        spans,
        pair_logits: random_tensor(rng, pairs.len(), 1, 3.0),
        kept,
        pairs,
    }
}
