use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use spanrel::analysis::{extract_attention, similarity_grid, AnalysisError};
use spanrel::encoder::{Encoder, EncoderConfig, Vocab};
use spanrel::model::{HeadConfig, ModelBundle};
use spanrel::schema::{builtin_schema, TaskName};

fn bundle(layers: usize, heads: usize, seed: u64) -> ModelBundle {
    let cfg = EncoderConfig {
        embed_dim: 8,
        bilstm_layers: 1,
        bilstm_hidden: 4,
        attn_layers: layers,
        attn_heads: heads,
        dropout: 0.5,
        ..EncoderConfig::default()
    };
    let enc = Encoder::new(cfg, Vocab::from_tokens(["a", "b", "c", "d"])).unwrap();
    ModelBundle::new(
        enc,
        HeadConfig::default(),
        &[builtin_schema(TaskName::Ner)],
        None,
        &mut ChaCha8Rng::seed_from_u64(seed),
    )
}

fn sentences() -> Vec<Vec<String>> {
    (0..10)
        .map(|i| (0..3 + i % 4).map(|j| ["a", "b", "c", "d", "zz"][(i + j) % 5].to_string()).collect())
        .collect()
}

#[test]
fn maps_have_expected_layout_and_are_stochastic() {
    let b = bundle(2, 4, 1);
    let s = sentences();
    let p = extract_attention(&b, "NER", &s).unwrap();
    assert_eq!(p.maps.len(), 10);
    for (sent, maps) in s.iter().zip(&p.maps) {
        assert_eq!(maps.len(), 8);
        for m in maps {
            assert_eq!(m.shape(), [sent.len(), sent.len()]);
            for r in 0..m.rows() {
                assert!((m.row_slice(r).iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }
    }
    // eval mode: dropout off, so extraction is repeatable
    assert_eq!(extract_attention(&b, "NER", &s).unwrap(), p);
    let grid = similarity_grid(&p, &p).unwrap();
    assert_eq!((grid.len(), grid[0].len()), (2, 4));
    assert!(grid.iter().flatten().all(|&v| v == 0.0));
    let other = extract_attention(&bundle(2, 4, 2), "POS", &s).unwrap();
    assert!(similarity_grid(&p, &other).unwrap().iter().flatten().all(|&v| v < 0.0));
}

#[test]
fn no_attention_layers_is_an_error() {
    let b = bundle(0, 1, 1);
    assert!(matches!(extract_attention(&b, "NER", &sentences()), Err(AnalysisError::NoAttentionLayers)));
}
