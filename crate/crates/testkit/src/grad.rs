//! Finite-difference checks of the primitives and of the full model loss.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spanrel::encoder::{Encoder, EncoderConfig, Vocab};
use spanrel::model::{forward, instance_loss, HeadConfig, ModelBundle, ModelError};
use spanrel::numerics::{grad_check, grad_check_floor, Graph, NumericsError, Parameters, Tensor, Var};
use spanrel::schema::{builtin_schema, GoldRelation, GoldSpan, Pruning, SentenceInstance, TaskName, TaskSchema};

pub type Build = fn(&mut Graph, &Parameters) -> Result<Var, NumericsError>;

/// A differentiable operation under test. Shapes with a zero dimension are
/// drawn at random in `1..4` per seed.
pub struct Primitive {
    pub name: &'static str,
    pub shapes: &'static [(&'static str, usize, usize)],
    /// Inputs shifted to be at least 0.5 (for `log`).
    pub positive: bool,
    pub build: Build,
}

fn random(rng: &mut ChaCha8Rng, rows: usize, cols: usize, away_from_zero: bool) -> Tensor {
    let data = (0..rows * cols)
        .map(|_| {
            let v: f64 = rng.random_range(-1.0..1.0);
            if away_from_zero && v.abs() < 0.05 {
                v.signum() * 0.05 + v
            } else {
                v
            }
        })
        .collect();
    Tensor::new(rows, cols, data).unwrap()
}

/// Reduces an output to a scalar through a fixed random weighting, so every
/// output entry carries a distinct upstream gradient.
fn weighted_sum(g: &mut Graph, y: Var, seed: u64) -> Result<Var, NumericsError> {
    let shape = g.value(y).shape();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcdef);
    let w = g.constant(random(&mut rng, shape[0], shape[1], false))?;
    let m = g.mul(y, w)?;
    g.sum(m)
}

/// Largest relative error of `p` over `seeds` random inputs.
pub fn primitive_error(p: &Primitive, seeds: u64) -> f64 {
    let mut worst: f64 = 0.0;
    for seed in 0..seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Parameters::new();
        for &(n, r, c) in p.shapes {
            let r = if r == 0 { rng.random_range(1..4) } else { r };
            let c = if c == 0 { rng.random_range(1..4) } else { c };
            let mut t = random(&mut rng, r, c, true);
            if p.positive {
                t = t.map(|v| v.abs() + 0.5);
            }
            params.insert(n, t);
        }
        let err = grad_check(
            |g, ps| {
                let y = (p.build)(g, ps)?;
                weighted_sum(g, y, seed)
            },
            &params,
            1e-5,
        )
        .unwrap();
        worst = worst.max(err);
    }
    worst
}

fn a(g: &mut Graph, p: &Parameters) -> Var {
    g.param("a", p.value("a").unwrap()).unwrap()
}

fn b(g: &mut Graph, p: &Parameters) -> Var {
    g.param("b", p.value("b").unwrap()).unwrap()
}

pub const PRIMITIVES: &[Primitive] = &[
    Primitive {
        name: "matmul",
        shapes: &[("a", 3, 2), ("b", 2, 4)],
        positive: false,
        build: |g, p| {
            let (x, y) = (a(g, p), b(g, p));
            g.matmul(x, y)
        },
    },
    Primitive {
        name: "add/sub/scale",
        shapes: &[("a", 2, 3), ("b", 2, 3)],
        positive: false,
        build: |g, p| {
            let (x, y) = (a(g, p), b(g, p));
            let s = g.add(x, y)?;
            let h = g.scale(y, 0.5)?;
            g.sub(s, h)
        },
    },
    Primitive {
        name: "add_row",
        shapes: &[("a", 3, 4), ("b", 1, 4)],
        positive: false,
        build: |g, p| {
            let (x, y) = (a(g, p), b(g, p));
            g.add_row(x, y)
        },
    },
    Primitive {
        name: "mul",
        shapes: &[("a", 2, 3), ("b", 2, 3)],
        positive: false,
        build: |g, p| {
            let (x, y) = (a(g, p), b(g, p));
            g.mul(x, y)
        },
    },
    Primitive {
        name: "concat/transpose",
        shapes: &[("a", 2, 3), ("b", 2, 2)],
        positive: false,
        build: |g, p| {
            let (x, y) = (a(g, p), b(g, p));
            let c = g.concat_cols(&[x, y, x])?;
            let t = g.transpose(c)?;
            let r = g.concat_rows(&[t, t])?;
            g.transpose(r)
        },
    },
    Primitive {
        name: "slice",
        shapes: &[("a", 4, 5)],
        positive: false,
        build: |g, p| {
            let x = a(g, p);
            let r = g.slice_rows(x, 1, 3)?;
            g.slice_cols(r, 2, 5)
        },
    },
    Primitive {
        name: "sigmoid",
        shapes: &[("a", 0, 0)],
        positive: false,
        build: |g, p| {
            let x = a(g, p);
            let y = g.scale(x, 3.0)?;
            g.sigmoid(y)
        },
    },
    Primitive {
        name: "tanh",
        shapes: &[("a", 0, 0)],
        positive: false,
        build: |g, p| {
            let x = a(g, p);
            g.tanh(x)
        },
    },
    Primitive {
        name: "relu",
        shapes: &[("a", 0, 0)],
        positive: false,
        build: |g, p| {
            let x = a(g, p);
            g.relu(x)
        },
    },
    Primitive {
        name: "softmax",
        shapes: &[("a", 3, 4)],
        positive: false,
        build: |g, p| {
            let x = a(g, p);
            let r = g.softmax(x, 1)?;
            let c = g.softmax(x, 0)?;
            g.add(r, c)
        },
    },
    Primitive {
        name: "log/log_softmax",
        shapes: &[("a", 0, 0)],
        positive: true,
        build: |g, p| {
            let x = a(g, p);
            let l = g.log(x)?;
            let ls = g.log_softmax(x)?;
            g.add(l, ls)
        },
    },
    Primitive {
        name: "embedding_lookup",
        shapes: &[("a", 5, 3)],
        positive: false,
        build: |g, p| {
            let x = a(g, p);
            g.embedding_lookup(x, &[4, 0, 4, 2])
        },
    },
    Primitive {
        name: "gather_elems",
        shapes: &[("a", 3, 3)],
        positive: false,
        build: |g, p| {
            let x = a(g, p);
            g.gather_elems(x, &[(0, 0), (2, 1), (0, 0), (1, 2)])
        },
    },
    Primitive {
        name: "sum/mean/logsumexp",
        shapes: &[("a", 0, 0)],
        positive: false,
        build: |g, p| {
            let x = a(g, p);
            let s = g.sum(x)?;
            let m = g.mean(x)?;
            let l = g.logsumexp(x)?;
            let k = g.scale(m, -2.5)?;
            let t = g.add(s, k)?;
            g.add(t, l)
        },
    },
    Primitive {
        name: "dropout (eval)",
        shapes: &[("a", 2, 2)],
        positive: false,
        build: |g, p| {
            let x = a(g, p);
            g.dropout(x, 0.5)
        },
    },
];

const WORDS: [&str; 6] = ["a", "b", "c", "d", "e", "f"];

/// Schemas for the full-loss check: pairwise (OpenIE) and head (Coref)
/// loss, every candidate kept.
///
/// Pruning selects spans by comparing scores, which makes the loss
/// piecewise: a perturbation that reorders two nearly tied candidates jumps
/// to a different kept set.
pub fn loss_check_schemas() -> [TaskSchema; 2] {
    [TaskName::OpenIE, TaskName::Coref].map(|t| {
        let mut s = builtin_schema(t);
        s.max_span_length = Some(2);
        s.pruning = Pruning::Fixed(usize::MAX);
        s
    })
}

fn check_bundle(schema: &TaskSchema, seed: u64) -> ModelBundle {
    let cfg = EncoderConfig {
        embed_dim: 4,
        bilstm_layers: 2,
        bilstm_hidden: 3,
        attn_layers: 1,
        attn_heads: 2,
        dropout: 0.0,
        ..EncoderConfig::default()
    };
    let enc = Encoder::new(cfg, Vocab::from_tokens(WORDS)).unwrap();
    let hc = HeadConfig {
        mlp_hidden: 5,
        mlp_layers: 2,
        dropout: 0.0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = ModelBundle::new(enc, hc, std::slice::from_ref(schema), None, &mut rng);
    // zero-initialised biases put fully dead relu layers exactly on the
    // kink; a generic point avoids that, and a non-zero attention vector
    // makes span weights non-uniform
    let names: Vec<String> = b
        .params
        .names()
        .filter(|n| n.contains(".b") || n.ends_with("w_attn"))
        .map(String::from)
        .collect();
    for n in names {
        for v in b.params.get_mut(&n).unwrap().data_mut() {
            *v += rng.random_range(-0.5..0.5);
        }
    }
    b
}

/// Random 5-token instance with three gold spans and two relations.
pub fn check_instance(task: TaskName, rng: &mut ChaCha8Rng, labels: usize, relations: usize) -> SentenceInstance {
    let tokens: Vec<String> = (0..5).map(|_| WORDS[rng.random_range(0..WORDS.len())].to_string()).collect();
    let gold_spans = vec![
        GoldSpan {
            begin: 0,
            end: rng.random_range(0..2),
            label: rng.random_range(1..=labels),
        },
        GoldSpan {
            begin: 2,
            end: 2,
            label: rng.random_range(1..=labels),
        },
        GoldSpan {
            begin: 3,
            end: rng.random_range(3..5),
            label: rng.random_range(1..=labels),
        },
    ];
    let gold_relations = vec![
        GoldRelation {
            head: 2,
            tail: 0,
            label: rng.random_range(1..=relations),
        },
        GoldRelation {
            head: 1,
            tail: 2,
            label: rng.random_range(1..=relations),
        },
    ];
    SentenceInstance {
        task,
        doc_id: "x".into(),
        token_offset: 0,
        tokens,
        sentence_starts: vec![0],
        gold_spans,
        gold_relations,
    }
}

/// Relative error of the full loss gradient for one random model and
/// instance.
pub fn full_loss_error(schema: &TaskSchema, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
    let b = check_bundle(schema, seed);
    let inst = check_instance(schema.name, &mut rng, schema.span_labels.len(), schema.relation_labels.len());
    let head = b.head(schema.name).unwrap().clone();
    grad_check_floor(
        |g, p| {
            let fwd = forward(g, p, &b.encoder, &head, &inst).map_err(|e| match e {
                ModelError::Numerics(n) => n,
                other => panic!("{other}"),
            })?;
            assert!(!fwd.scored.pairs.is_empty());
            Ok(instance_loss(g, &fwd, &inst, &head.schema)?.loss)
        },
        &b.params,
        1e-5,
        1e-6,
    )
    .unwrap()
    .max_relative_error
}
