use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use spanrel::encoder::EncoderConfig;
use spanrel::model::{HeadConfig, ModelBundle};
use spanrel::schema::{Pruning, SentenceInstance, TaskName};
use spanrel::synthetic::{synthetic_task_data, SyntheticTask};
use spanrel::trainer::*;

fn small() -> (EncoderConfig, HeadConfig) {
    (
        EncoderConfig {
            embed_dim: 16,
            bilstm_layers: 1,
            bilstm_hidden: 16,
            attn_layers: 1,
            attn_heads: 2,
            dropout: 0.0,
            ..EncoderConfig::default()
        },
        HeadConfig {
            mlp_hidden: 32,
            mlp_layers: 2,
            dropout: 0.0,
        },
    )
}

fn tasks(train: usize, dev: usize) -> Vec<TaskData> {
    vec![
        synthetic_task_data(SyntheticTask::Relations, train, dev, 1).unwrap(),
        synthetic_task_data(SyntheticTask::Entities, train / 2, dev, 2).unwrap(),
    ]
}

fn bundle(tasks: &[TaskData]) -> ModelBundle {
    let (e, h) = small();
    build_bundle(e, h, tasks, None, 5).unwrap()
}

#[test]
fn single_batch_overfits() {
    // keep every candidate: the kept set is piecewise constant in the
    // parameters and a swap jumps the loss
    let mut t = vec![synthetic_task_data(SyntheticTask::Relations, 2, 1, 1).unwrap()];
    t[0].schema.pruning = Pruning::Fixed(usize::MAX);
    let mut b = bundle(&t);
    let batch: Vec<&SentenceInstance> = t[0].train.iter().collect();
    let cfg = TrainerConfig::default();
    let pool = thread_pool();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut losses = Vec::new();
    for _ in 0..500 {
        losses.push(train_step(&mut b, TaskName::Re, &batch, &cfg, &mut rng, &pool).unwrap());
        if *losses.last().unwrap() < 0.01 {
            break;
        }
    }
    let last = *losses.last().unwrap();
    assert!(last < 0.01, "final loss {last} after {} steps", losses.len());
    for w in losses.windows(2) {
        assert!(w[1] < w[0], "loss rose from {} to {}", w[0], w[1]);
    }
}

#[test]
fn training_is_deterministic() {
    let t = tasks(16, 4);
    let cfg = TrainerConfig {
        mode: TrainMode::Mtl,
        max_epochs: 2,
        batch_size: 4,
        ..TrainerConfig::default()
    };
    let run = || {
        let mut b = bundle(&t);
        let log = train_mtl(&mut b, &cfg, &t).unwrap();
        (log.losses(), b.params)
    };
    let (l1, p1) = run();
    let (l2, p2) = run();
    assert_eq!(l1.iter().map(|l| l.map(f64::to_bits)).collect::<Vec<_>>(), l2.iter().map(|l| l.map(f64::to_bits)).collect::<Vec<_>>());
    for n in p1.names() {
        assert_eq!(p1.get(n).unwrap().data(), p2.get(n).unwrap().data(), "{n}");
    }
}

#[test]
fn step_on_one_task_leaves_other_head_bitwise_unchanged() {
    let t = tasks(8, 2);
    let mut b = bundle(&t);
    let before = b.params.clone();
    let batch: Vec<&SentenceInstance> = t[0].train.iter().take(4).collect();
    let pool = thread_pool();
    train_step(&mut b, TaskName::Re, &batch, &TrainerConfig::default(), &mut ChaCha8Rng::seed_from_u64(1), &pool).unwrap();
    let ner = b.head_param_names(TaskName::Ner);
    assert!(!ner.is_empty());
    for n in &ner {
        assert_eq!(before.get(n).unwrap().data(), b.params.get(n).unwrap().data(), "{n}");
    }
    let mut moved = 0;
    for n in b.head_param_names(TaskName::Re) {
        if before.get(&n).unwrap().data() != b.params.get(&n).unwrap().data() {
            moved += 1;
        }
    }
    assert!(moved > 0);
}

#[test]
fn fine_tuning_keeps_other_heads_and_zero_epochs_is_identity() {
    let t = tasks(8, 4);
    let mut b = bundle(&t);
    let cfg = TrainerConfig {
        max_epochs: 1,
        batch_size: 4,
        ..TrainerConfig::default()
    };
    let before = b.params.clone();
    let zero = TrainerConfig {
        fine_tune_epochs: Some(0),
        ..cfg.clone()
    };
    let log = fine_tune(&mut b, &zero, &t, TaskName::Re).unwrap();
    assert!(log.entries.is_empty());
    for n in before.names() {
        assert_eq!(before.get(n).unwrap().data(), b.params.get(n).unwrap().data());
    }
    fine_tune(&mut b, &cfg, &t, TaskName::Re).unwrap();
    for n in b.head_param_names(TaskName::Ner) {
        assert_eq!(before.get(&n).unwrap().data(), b.params.get(&n).unwrap().data(), "{n}");
    }
    assert!(matches!(fine_tune(&mut b, &cfg, &t, TaskName::Pos), Err(TrainError::UnknownTask(TaskName::Pos))));
}

#[test]
fn one_epoch_and_checkpoint_round_trip() {
    let t = tasks(8, 4);
    let mut b = bundle(&t[..1]);
    let cfg = TrainerConfig {
        max_epochs: 1,
        batch_size: 4,
        ..TrainerConfig::default()
    };
    let log = train_stl(&mut b, &cfg, &t[0]).unwrap();
    assert_eq!(log.epochs_run, 1);
    assert_eq!(log.entries.len(), 1);
    let dir = tempfile::tempdir().unwrap();
    b.save(dir.path()).unwrap();
    let loaded = ModelBundle::load(dir.path()).unwrap();
    let r1 = evaluate_instances(&b, &t[0].schema, &t[0].dev).unwrap();
    let r2 = evaluate_instances(&loaded, &t[0].schema, &t[0].dev).unwrap();
    assert_eq!(r1.score.to_bits(), r2.score.to_bits());
    assert_eq!(r1.score.to_bits(), log.entries[0].dev_metric.to_bits());
    let mut jsonl = Vec::new();
    log.write_jsonl(&mut jsonl).unwrap();
    let line: serde_json::Value = serde_json::from_slice(jsonl.split(|&c| c == b'\n').next().unwrap()).unwrap();
    for key in ["epoch", "task", "loss", "dev_metric"] {
        assert!(line.get(key).is_some(), "{key}");
    }
}

#[test]
fn empty_dataset_is_rejected() {
    let mut t = tasks(4, 2);
    t[0].dev.clear();
    let mut b = bundle(&t[..1]);
    let err = train_stl(&mut b, &TrainerConfig::default(), &t[0]).unwrap_err();
    assert!(matches!(err, TrainError::EmptyDataset(_)));
}

#[test]
fn pairwise_grid_is_square() {
    let t = tasks(4, 2);
    let (e, h) = small();
    let cfg = TrainerConfig {
        max_epochs: 1,
        batch_size: 4,
        ..TrainerConfig::default()
    };
    let grid = pairwise_grid(&e, &h, &cfg, &t, true).unwrap();
    assert_eq!(grid.tasks, vec!["RE", "NER"]);
    assert_eq!(grid.values.len(), 2);
    assert!(grid.values.iter().all(|r| r.len() == 2 && r.iter().all(|v| (0.0..=1.0).contains(v))));
}
