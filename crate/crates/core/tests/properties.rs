use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use spanrel::analysis::{attention_similarity, mean_similarity, similarity_grid, AttentionProfile};
use spanrel::brat::{parse_document, serialize_document, validate_document};
use spanrel::metrics::{accuracy, bracket_f1, coref_avg_f1, relation_f1, span_f1};
use spanrel::model::{cross_entropy, prune_count, prune_spans};
use spanrel::numerics::{Graph, Tensor};
use spanrel::schema::Pruning;
use spanrel_testkit::gen;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 300, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn brat_round_trip(seed in any::<u64>()) {
        let doc = gen::random_document(&mut rng(seed), "doc");
        prop_assert!(validate_document(&doc, &gen::document_schema()).is_empty());
        let (txt, ann) = serialize_document(&doc);
        let parsed = parse_document("doc", &txt, &ann).unwrap();
        prop_assert!(parsed.equivalent(&doc));
        let (txt2, ann2) = serialize_document(&parsed);
        prop_assert_eq!((&txt, &ann), (&txt2, &ann2));
        prop_assert_eq!(parse_document("doc", &txt2, &ann2).unwrap(), parsed);
    }

    #[test]
    fn parser_never_panics(txt in "(?s).{0,40}", ann in "(?s).{0,80}") {
        let _ = parse_document("x", &txt, &ann);
    }

    #[test]
    fn parser_never_panics_on_near_valid_lines(
        txt in "[a-z ]{0,20}\n?[a-zé ]{0,10}",
        id in "[TRX#][0-9]{0,2}",
        label in "[A-Za-z-]{0,6}",
        b in 0usize..40,
        e in 0usize..40,
        surface in "[a-z ]{0,8}",
    ) {
        let t = format!("{id}\t{label} {b} {e}\t{surface}\n");
        let r = format!("{id}\t{label} Arg1:T{b} Arg2:T{e}\n");
        let _ = parse_document("x", &txt, &t);
        let _ = parse_document("x", &txt, &format!("T1\tA 0 1\t{}\n{r}", txt.chars().next().unwrap_or(' ')));
    }

    #[test]
    fn pruning_contract(probs in prop::collection::vec(0u8..6, 1..30), k1 in 1usize..35, extra in 0usize..10) {
        let neg: Vec<f64> = probs.iter().map(|&p| p as f64 / 5.0).collect();
        let spans: Vec<(usize, usize)> = (0..neg.len()).map(|i| (i / 3, i / 3 + i % 3)).collect();
        let k2 = k1 + extra;
        let a = prune_spans(&spans, &neg, k1);
        let b = prune_spans(&spans, &neg, k2);
        prop_assert_eq!(a.len(), k1.min(neg.len()));
        prop_assert!(a.iter().all(|i| b.contains(i)), "raising K dropped a span");
        prop_assert!(a.windows(2).all(|w| spans[w[0]] < spans[w[1]]));
        for &i in &a {
            for j in (0..neg.len()).filter(|j| !a.contains(j)) {
                prop_assert!(neg[i] < neg[j] || (neg[i] == neg[j] && spans[i] < spans[j]));
            }
        }
    }

    #[test]
    fn ratio_pruning_count(tau in 0.01f64..1.0, tau_extra in 0.0f64..0.5, n in 1usize..60, c in 0usize..200) {
        let k = prune_count(Pruning::Ratio(tau), n, c);
        let expected = c.min(((tau * n as f64 - 1e-9).ceil() as usize).max(1));
        prop_assert_eq!(k, expected);
        prop_assert!(prune_count(Pruning::Ratio(tau + tau_extra), n, c) >= k);
        prop_assert!(k * k.saturating_sub(1) <= expected * expected);
    }

    #[test]
    fn loss_is_shift_invariant(logits in prop::collection::vec(-20.0f64..20.0, 2..8), shift in -50.0f64..50.0, target in 0usize..8) {
        let target = target % logits.len();
        let loss = |row: Vec<f64>| {
            let mut g = Graph::new(0);
            let x = g.constant(Tensor::row(&row)).unwrap();
            let l = cross_entropy(&mut g, x, &[target]).unwrap();
            g.value(l).item()
        };
        let shifted: Vec<f64> = logits.iter().map(|v| v + shift).collect();
        prop_assert!((loss(logits) - loss(shifted)).abs() < 1e-9);
    }

    #[test]
    fn softmax_rows_sum_to_one(logits in prop::collection::vec(-30.0f64..30.0, 1..12)) {
        let mut g = Graph::new(0);
        let x = g.constant(Tensor::row(&logits)).unwrap();
        let s = g.softmax(x, 1).unwrap();
        prop_assert!((g.value(s).sum() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn metric_symmetry_and_bounds(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.random_range(1..=10);
        let g = gen::random_annotations(&mut r, n, 5);
        let p = gen::perturb(&mut r, &g, 5);
        let gp = [(g.clone(), p.clone())];
        let pg = [(p.clone(), g.clone())];
        prop_assert_eq!(span_f1("t", &gp).precision, span_f1("t", &pg).recall);
        prop_assert_eq!(relation_f1("t", &gp).precision, relation_f1("t", &pg).recall);
        for rep in [span_f1("t", &gp), relation_f1("t", &gp), bracket_f1("t", &gp), accuracy("t", &gp), coref_avg_f1("t", &gp)] {
            for v in [rep.precision, rep.recall, rep.f1, rep.score] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
            let expect = if rep.precision + rep.recall > 0.0 { 2.0 * rep.precision * rep.recall / (rep.precision + rep.recall) } else { 0.0 };
            if rep.components.is_empty() {
                prop_assert!((rep.f1 - expect).abs() < 1e-12);
            }
        }
        let same = [(g.clone(), g.clone())];
        if !g.spans.is_empty() {
            prop_assert_eq!(span_f1("t", &same).f1, 1.0);
        }
        if !g.relations.is_empty() {
            prop_assert_eq!(relation_f1("t", &same).f1, 1.0);
        }
        let empty = [(g.clone(), spanrel::metrics::Annotations { tokens: n, ..Default::default() })];
        prop_assert_eq!(span_f1("t", &empty).recall, 0.0);
    }

    #[test]
    fn attention_similarity_properties(seed in any::<u64>(), layers in 1usize..3, heads in 1usize..4, sents in 1usize..5) {
        let mut r = rng(seed);
        let profile = |name: &str, r: &mut ChaCha8Rng| {
            let lens: Vec<usize> = (0..sents).map(|i| 1 + (i * 7 + seed as usize) % 5).collect();
            let maps = lens.iter().map(|&n| (0..layers * heads).map(|_| {
                let mut t = Tensor::zeros(n, n);
                for row in 0..n {
                    let w: Vec<f64> = (0..n).map(|_| r.random_range(0.01..1.0)).collect();
                    let z: f64 = w.iter().sum();
                    for (c, v) in w.iter().enumerate() { t.set(row, c, v / z); }
                }
                t
            }).collect()).collect();
            AttentionProfile { task: name.into(), layers, heads, sentences: lens.iter().map(|&n| vec!["w".to_string(); n]).collect(), maps }
        };
        let a = profile("a", &mut r);
        let b = profile("b", &mut r);
        for k in 0..layers * heads {
            prop_assert_eq!(attention_similarity(&a, &a, k).unwrap(), 0.0);
            let s = attention_similarity(&a, &b, k).unwrap();
            prop_assert!(s <= 0.0);
            prop_assert_eq!(s, attention_similarity(&b, &a, k).unwrap());
        }
        let heads_first = mean_similarity(&similarity_grid(&a, &b).unwrap());
        // sentences outer, heads inner
        let mut total = 0.0;
        for s in 0..sents {
            let mut per = 0.0;
            for k in 0..layers * heads {
                let d: f64 = a.maps[s][k].data().iter().zip(b.maps[s][k].data()).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
                per += -d;
            }
            total += per / (layers * heads) as f64;
        }
        let sentences_first = total / sents as f64;
        prop_assert!((heads_first - sentences_first).abs() < 1e-12);
    }
}

use rand::Rng;
