//! Scratch experiment sizing, not part of the suite.

use closp::corpus::{generate_synthetic_corpus, queries_from_label_sets, GeneratorConfig, DEFAULT_PRIORS};
use closp::encoders::{EncoderConfig, Modality};
use closp::evalsuite::{evaluate_retrieval, Scope};
use closp::retrieval::index_corpus;
use closp::trainer::{train, ModelCheckpoint, TrainConfig};

#[test]
fn size_the_transfer_experiment() {
    for seed in [31u64, 32, 33, 34, 35, 36] {
        let mut priors = DEFAULT_PRIORS;
        for p in priors.iter_mut().take(8) {
            *p = (*p * 2.0).min(0.6);
        }
        let gen = GeneratorConfig {
            sar_count: 300,
            msi_count: 300,
            priors,
            ..GeneratorConfig::default()
        };
        let corpus = generate_synthetic_corpus(&gen, seed).unwrap();

        let mut train_items = Vec::new();
        let mut held_sar = Vec::new();
        let (mut sar_seen, mut msi_seen) = (0usize, 0usize);
        for item in &corpus {
            match item.modality {
                Modality::Sar if sar_seen < 128 => {
                    sar_seen += 1;
                    train_items.push(item.clone());
                }
                Modality::Msi if msi_seen < 128 => {
                    msi_seen += 1;
                    train_items.push(item.clone());
                }
                Modality::Sar => held_sar.push(item.clone()),
                Modality::Msi => {}
            }
        }

        let encoder = EncoderConfig {
            embed_dim: 16,
            ..EncoderConfig::default()
        };
        let joint_cfg = TrainConfig {
            epochs: 40,
            batch_size: 32,
            max_lr: 3e-3,
            seed,
            ..TrainConfig::default()
        };
        let sar_cfg = TrainConfig {
            batch_size: 16,
            modality: Some(Modality::Sar),
            ..joint_cfg.clone()
        };
        let joint = train(&encoder, &joint_cfg, &train_items).unwrap();
        let solo = train(&encoder, &sar_cfg, &train_items).unwrap();
        assert_eq!(joint.checkpoint.step, solo.checkpoint.step);

        let queries = queries_from_label_sets(held_sar.iter().map(|i| i.labels)).unwrap();
        let score = |ckpt: &ModelCheckpoint| -> f64 {
            let index = index_corpus(ckpt, &held_sar).unwrap();
            let report = evaluate_retrieval(ckpt, &index, &queries, Scope::Sar).unwrap();
            report.mean.iter().find(|m| m.k == 100).unwrap().ndcg
        };
        let j = score(&joint.checkpoint);
        let s = score(&solo.checkpoint);
        println!("seed {seed}: joint {j:.4} solo {s:.4} margin {:+.4}", j - s);
    }
}
