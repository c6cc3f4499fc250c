//! Acceptance gate: twelve checks, one test each. Gradient correctness,
//! loss closed forms, metric oracles, end-to-end learning, the two
//! directional effects (cross-modal transfer, geographic structuring),
//! geodesy, split fidelity, land-cover harmonization, and byte-level
//! reproducibility. Every tolerance is pinned inline; the compute-heavy
//! checks serialize on one mutex so wall-clock budgets are measured on an
//! otherwise idle core.

use std::collections::HashSet;
use std::sync::{Mutex, MutexGuard, OnceLock};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use closp::corpus::{
    generate_synthetic_corpus, graded_relevance, map_clc_to_dw, queries_from_label_sets,
    save_corpus, stratified_split, CorpusItem, GeneratorConfig, CLC_TO_DW,
};
use closp::encoders::{
    image_embedding, location_embedding, text_embedding, EncoderConfig, LinearNodes,
    LocationNodes, Modality, Model, TextNodes, VisionNodes,
};
use closp::evalsuite::{
    evaluate_retrieval, haversine_km, macro_prf, most_frequent_labels, precision_recall_at_k,
    random_baseline, spatial_probe, zero_shot_classify, ndcg_at_k, ClassificationReport, Scope,
};
use closp::ndmath::{grad_check, ComputeGraph, NodeId, Tensor};
use closp::objective::{
    contrastive_loss, contrastive_loss_node, geo_loss, geo_loss_node, BatchEmbeddings,
    Temperature,
};
use closp::retrieval::{index_corpus, search, EmbeddingIndex, EmbeddingRecord};
use closp::rng::{substream, Stream};
use closp::trainer::{train, ModelCheckpoint, TrainConfig};
use closp::vocab::{lookup, LabelSet, LABEL_COUNT};
use closp::Result;

static HEAVY: Mutex<()> = Mutex::new(());

fn heavy_guard() -> MutexGuard<'static, ()> {
    HEAVY.lock().unwrap_or_else(|e| e.into_inner())
}

/// The 2,000-item corpus shared by the learning and split checks.
fn big_corpus() -> &'static [CorpusItem] {
    static CORPUS: OnceLock<Vec<CorpusItem>> = OnceLock::new();
    CORPUS.get_or_init(|| generate_synthetic_corpus(&GeneratorConfig::default(), 20).unwrap())
}

fn partition(items: &[CorpusItem], ids: &[u64]) -> (Vec<CorpusItem>, Vec<CorpusItem>) {
    let chosen: HashSet<u64> = ids.iter().copied().collect();
    let (inside, outside) = items
        .iter()
        .cloned()
        .partition(|item| chosen.contains(&item.id));
    (inside, outside)
}

fn unit_row(rng: &mut ChaCha12Rng, d: usize) -> Tensor {
    loop {
        let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        let t = Tensor::new(&[d], v).unwrap();
        if t.norm() > 1e-6 {
            return t.l2_normalized().unwrap();
        }
    }
}

fn unit_rows(rng: &mut ChaCha12Rng, n: usize, d: usize) -> Vec<Tensor> {
    (0..n).map(|_| unit_row(rng, d)).collect()
}

fn mean_ndcg_at(report: &closp::evalsuite::RetrievalReport, k: usize) -> f64 {
    report
        .mean
        .iter()
        .find(|m| m.k == k)
        .expect("cutoff present")
        .ndcg
}

// ---------------------------------------------------------------------------
// 1: analytic gradients of both objectives, end to end through the encoders

type Scene = (Tensor, Modality, LabelSet, f64, f64);

fn random_scenes(config: &EncoderConfig, seed: u64) -> Vec<Scene> {
    let mut rng = substream(seed, Stream::Probe);
    (0..4)
        .map(|k| {
            let modality = if k < 2 { Modality::Sar } else { Modality::Msi };
            let extent = modality.channels() * config.image_side * config.image_side;
            let values: Vec<f64> = (0..extent).map(|_| StandardNormal.sample(&mut rng)).collect();
            let image = Tensor::new(
                &[modality.channels(), config.image_side, config.image_side],
                values,
            )
            .unwrap();
            let mut labels = LabelSet::new();
            labels.insert(rng.gen_range(0..LABEL_COUNT));
            labels.insert(rng.gen_range(0..LABEL_COUNT));
            let lon = rng.gen_range(-180.0..180.0);
            let lat = rng.gen_range(-90.0..90.0);
            (image, modality, labels, lon, lat)
        })
        .collect()
}

fn lin(ids: &[NodeId], at: usize) -> LinearNodes {
    LinearNodes {
        w: ids[at],
        b: ids[at + 1],
    }
}

fn vision(ids: &[NodeId], at: usize) -> VisionNodes {
    VisionNodes {
        conv1: lin(ids, at),
        conv2: lin(ids, at + 2),
        conv3: lin(ids, at + 4),
        head: lin(ids, at + 6),
    }
}

/// Leaf layout shared with `Model::named_params`: text block, SAR block,
/// MSI block, then (for the full model) the location block, log_tau last.
fn trunk(ids: &[NodeId]) -> (TextNodes, VisionNodes, VisionNodes) {
    let text = TextNodes {
        table: ids[0],
        hidden: lin(ids, 1),
        out: lin(ids, 3),
    };
    (text, vision(ids, 5), vision(ids, 13))
}

fn location_nodes(ids: &[NodeId], layers: usize) -> LocationNodes {
    LocationNodes {
        sine: (0..layers).map(|i| lin(ids, 21 + 2 * i)).collect(),
        out: lin(ids, 21 + 2 * layers),
    }
}

#[allow(clippy::type_complexity)]
fn embed_scenes(
    g: &mut ComputeGraph,
    text: &TextNodes,
    sar: &VisionNodes,
    msi: &VisionNodes,
    location: Option<(&LocationNodes, &EncoderConfig)>,
    scenes: &[Scene],
) -> Result<(Vec<NodeId>, Vec<NodeId>, Vec<NodeId>)> {
    let mut img = Vec::new();
    let mut txt = Vec::new();
    let mut loc = Vec::new();
    for (image, modality, labels, lon, lat) in scenes {
        let pixels = g.constant(image.clone());
        let tower = match modality {
            Modality::Sar => sar,
            Modality::Msi => msi,
        };
        img.push(image_embedding(g, tower, pixels)?);
        txt.push(text_embedding(g, text, labels)?);
        if let Some((nodes, config)) = location {
            loc.push(location_embedding(g, nodes, config, *lon, *lat)?);
        }
    }
    Ok((img, txt, loc))
}

#[test]
fn c01_gradients_match_central_differences_for_both_objectives() {
    let _guard = heavy_guard();
    let started = Instant::now();
    let config = EncoderConfig {
        embed_dim: 8,
        image_side: 8,
        sh_degree: 2,
        siren_layers: 2,
        siren_omega0: 30.0,
    };
    let model = Model::init(config.clone(), 41).unwrap();
    let scenes = random_scenes(&config, 41);
    let named = model.named_params();
    let layers = config.siren_layers;

    // location-weighted objective: every parameter group participates.
    // probe step 1e-5: small enough that no relu pre-activation straddles
    // the central difference and the omega0-cubed sine truncation stays
    // well under the 1e-4 gate
    let geo_params: Vec<Tensor> = named.iter().map(|(_, t)| (*t).clone()).collect();
    let geo_rel = grad_check(
        |g, ids| {
            let (text, sar, msi) = trunk(ids);
            let location = location_nodes(ids, layers);
            let log_tau = ids[23 + 2 * layers];
            let (img, txt, loc) =
                embed_scenes(g, &text, &sar, &msi, Some((&location, &config)), &scenes)?;
            geo_loss_node(g, &img, &txt, &loc, log_tau, 0.5)
        },
        &geo_params,
        1e-5,
    )
    .unwrap();
    assert!(geo_rel <= 1e-4, "geo objective gradient error {geo_rel}");

    // plain contrastive objective: every group it touches
    let joint_params: Vec<Tensor> = named
        .iter()
        .filter(|(name, _)| !name.starts_with("loc."))
        .map(|(_, t)| (*t).clone())
        .collect();
    let joint_rel = grad_check(
        |g, ids| {
            let (text, sar, msi) = trunk(ids);
            let log_tau = ids[21];
            let (img, txt, _) = embed_scenes(g, &text, &sar, &msi, None, &scenes)?;
            contrastive_loss_node(g, &img, &txt, log_tau)
        },
        &joint_params,
        1e-5,
    )
    .unwrap();
    assert!(joint_rel <= 1e-4, "contrastive gradient error {joint_rel}");

    let elapsed = started.elapsed().as_secs_f64();
    assert!(elapsed <= 60.0, "gradient check took {elapsed:.1}s");
    println!(
        "criterion 1 PASS: max rel err geo {geo_rel:.2e}, contrastive {joint_rel:.2e} in {elapsed:.1}s"
    );
}

// ---------------------------------------------------------------------------
// 2: loss closed forms

#[test]
fn c02_loss_closed_forms() {
    let tau1 = Temperature::new(1.0).unwrap();

    let e0 = Tensor::new(&[4], vec![1.0, 0.0, 0.0, 0.0]).unwrap();
    let e1 = Tensor::new(&[4], vec![0.0, 1.0, 0.0, 0.0]).unwrap();

    let single = BatchEmbeddings::from_rows(&[e0.clone()], &[e0.clone()], None).unwrap();
    assert_eq!(contrastive_loss(&single, tau1).unwrap(), 0.0);

    let pair = BatchEmbeddings::from_rows(
        &[e0.clone(), e1.clone()],
        &[e0.clone(), e1.clone()],
        None,
    )
    .unwrap();
    let want = (1.0 + (-1.0f64).exp()).ln();
    assert!((contrastive_loss(&pair, tau1).unwrap() - want).abs() <= 1e-9);

    let n = 8;
    let same = vec![e0.clone(); n];
    let collapsed = BatchEmbeddings::from_rows(&same, &same, None).unwrap();
    assert!((contrastive_loss(&collapsed, tau1).unwrap() - (n as f64).ln()).abs() <= 1e-9);

    let mut rng = substream(2, Stream::Probe);
    let img = unit_rows(&mut rng, 6, 16);
    let txt = unit_rows(&mut rng, 6, 16);
    let loc = unit_rows(&mut rng, 6, 16);
    let batch = BatchEmbeddings::from_rows(&img, &txt, Some(&loc)).unwrap();
    let temp = Temperature::default();
    let gap = (geo_loss(&batch, temp, 1.0).unwrap() - contrastive_loss(&batch, temp).unwrap()).abs();
    assert!(gap <= 1e-12, "alpha=1 gap {gap}");

    println!("criterion 2 PASS: closed forms hold (N=1 exact, N=2 and collapsed within 1e-9, alpha=1 within 1e-12)");
}

// ---------------------------------------------------------------------------
// 3: random-init loss level

#[test]
fn c03_random_unit_embeddings_sit_near_ln_n() {
    let tau1 = Temperature::new(1.0).unwrap();
    let mut rng = substream(3, Stream::Probe);
    let draws = 20;
    let mut total = 0.0;
    for _ in 0..draws {
        let img = unit_rows(&mut rng, 64, 32);
        let txt = unit_rows(&mut rng, 64, 32);
        let batch = BatchEmbeddings::from_rows(&img, &txt, None).unwrap();
        total += contrastive_loss(&batch, tau1).unwrap();
    }
    let mean = total / draws as f64;
    let target = 64f64.ln();
    assert!(
        (mean - target).abs() <= 0.05 * target,
        "mean loss {mean} vs ln 64 = {target}"
    );
    println!("criterion 3 PASS: mean loss {mean:.4} within 5% of ln 64 = {target:.4}");
}

// ---------------------------------------------------------------------------
// 4: metric and search oracles

fn reference_ndcg(ranking: &[i32], corpus: &[i32], k: usize) -> f64 {
    let dcg: f64 = ranking
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, &r)| r as f64 / ((i + 2) as f64).log2())
        .sum();
    let mut ideal = corpus.to_vec();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let idcg: f64 = ideal
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, &r)| r as f64 / ((i + 2) as f64).log2())
        .sum();
    if idcg == 0.0 {
        0.0
    } else {
        dcg / idcg
    }
}

#[test]
fn c04_metrics_and_search_match_brute_force_oracles() {
    let mut rng = substream(4, Stream::Probe);
    for instance in 0..1000 {
        let n = rng.gen_range(1..=100usize);
        let k = rng.gen_range(1..=n);

        // ranking metrics against a random permutation of graded documents
        let corpus_rels: Vec<i32> = (0..n).map(|_| rng.gen_range(0..=10)).collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let ranking: Vec<i32> = order.iter().map(|&i| corpus_rels[i]).collect();

        let got = ndcg_at_k(&ranking, &corpus_rels, k).unwrap();
        let want = reference_ndcg(&ranking, &corpus_rels, k);
        assert_eq!(got, want, "ndcg diverged on instance {instance}");

        let relevant: HashSet<u64> = (0..n as u64).filter(|_| rng.gen_bool(0.3)).collect();
        let retrieved: Vec<u64> = order.iter().map(|&i| i as u64).collect();
        let (p, r) = precision_recall_at_k(&retrieved, &relevant, k).unwrap();
        let hits = retrieved
            .iter()
            .take(k)
            .filter(|id| relevant.contains(id))
            .count() as f64;
        assert_eq!(p, hits / k as f64);
        let want_r = if relevant.is_empty() {
            0.0
        } else {
            hits / relevant.len() as f64
        };
        assert_eq!(r, want_r);

        // exact top-k against a full sort
        let d = rng.gen_range(2..=8usize);
        let records: Vec<EmbeddingRecord> = (0..n)
            .map(|i| EmbeddingRecord {
                id: order[i] as u64,
                modality: Modality::Sar,
                vector: unit_row(&mut rng, d),
                lon: 0.0,
                lat: 0.0,
                labels: LabelSet::new(),
            })
            .collect();
        let query = unit_row(&mut rng, d);
        let mut expected: Vec<(u64, f64)> = records
            .iter()
            .map(|rec| (rec.id, query.dot(&rec.vector).unwrap()))
            .collect();
        expected.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        expected.truncate(k);

        let index = EmbeddingIndex::new(records).unwrap();
        let ranked = search(&index, &query, k).unwrap();
        let got: Vec<(u64, f64)> = ranked.hits().iter().map(|h| (h.id, h.score)).collect();
        assert_eq!(got, expected, "search diverged on instance {instance}");
    }
    println!("criterion 4 PASS: 1000 random instances match the oracles exactly");
}

// ---------------------------------------------------------------------------
// 5: Monte-Carlo dummy retriever against the analytic baseline

#[test]
fn c05_random_baseline_matches_monte_carlo() {
    let _guard = heavy_guard();
    let mut rng = substream(5, Stream::Baseline);
    let n = 500;
    let trials = 10_000;
    let corpus_rels: Vec<i32> = (0..n)
        .map(|_| if rng.gen_bool(0.15) { rng.gen_range(1..=10) } else { 0 })
        .collect();
    let relevant_total = corpus_rels.iter().filter(|&&r| r >= 5).count();
    assert!(relevant_total > 0, "degenerate draw");

    let cutoffs = [10, 50, 100];
    // per-cutoff samples of (ndcg, precision, recall)
    let mut samples: Vec<[Vec<f64>; 3]> = cutoffs
        .iter()
        .map(|_| [Vec::new(), Vec::new(), Vec::new()])
        .collect();

    let mut order: Vec<usize> = (0..n).collect();
    for _ in 0..trials {
        order.shuffle(&mut rng);
        for (ci, &k) in cutoffs.iter().enumerate() {
            let ranking: Vec<i32> = order.iter().take(k).map(|&i| corpus_rels[i]).collect();
            let hits = ranking.iter().filter(|&&r| r >= 5).count() as f64;
            samples[ci][0].push(reference_ndcg(&ranking, &corpus_rels, k));
            samples[ci][1].push(hits / k as f64);
            samples[ci][2].push(hits / relevant_total as f64);
        }
    }

    for (ci, &k) in cutoffs.iter().enumerate() {
        let analytic = random_baseline(n, &corpus_rels, k).unwrap();
        let targets = [analytic.ndcg, analytic.precision, analytic.recall];
        let names = ["ndcg", "precision", "recall"];
        for m in 0..3 {
            let xs = &samples[ci][m];
            let mean = xs.iter().sum::<f64>() / xs.len() as f64;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64;
            let se = (var / xs.len() as f64).sqrt();
            let gap = (mean - targets[m]).abs();
            assert!(
                gap <= 3.0 * se + 1e-12,
                "{}@{k}: monte-carlo {mean} vs closed form {} (gap {gap}, 3se {})",
                names[m],
                targets[m],
                3.0 * se
            );
        }
    }
    println!("criterion 5 PASS: closed forms within 3 standard errors at K in {{10, 50, 100}}");
}

// ---------------------------------------------------------------------------
// 6: end-to-end learning on the 2,000-item corpus

#[test]
fn c06_default_training_learns_the_synthetic_task() {
    let _guard = heavy_guard();
    let corpus = big_corpus();
    let encoder = EncoderConfig::default();
    let config = TrainConfig::default();

    let started = Instant::now();
    let outcome = train(&encoder, &config, corpus).unwrap();
    let train_secs = started.elapsed().as_secs_f64();
    assert!(train_secs <= 300.0, "training took {train_secs:.0}s");

    let first = outcome.epoch_losses[0];
    let last = *outcome.epoch_losses.last().unwrap();
    assert!(
        last <= 0.7 * first,
        "loss fell only from {first:.4} to {last:.4}"
    );

    let index = index_corpus(&outcome.checkpoint, corpus).unwrap();
    let queries = queries_from_label_sets(corpus.iter().map(|i| i.labels)).unwrap();
    let report = evaluate_retrieval(&outcome.checkpoint, &index, &queries, Scope::All).unwrap();
    let trained = mean_ndcg_at(&report, 100);

    let mut chance_total = 0.0;
    for q in &queries {
        let rels: Vec<i32> = corpus
            .iter()
            .map(|item| graded_relevance(q.labels(), &item.labels).unwrap() as i32)
            .collect();
        chance_total += random_baseline(corpus.len(), &rels, 100).unwrap().ndcg;
    }
    let chance = chance_total / queries.len() as f64;
    assert!(
        trained >= 2.0 * chance,
        "trained ndcg@100 {trained:.4} vs chance {chance:.4}"
    );

    let (predictions, _) = zero_shot_classify(&outcome.checkpoint, corpus).unwrap();
    let truth: Vec<LabelSet> = corpus.iter().map(|i| i.labels).collect();
    let model_f1 = macro_prf(&predictions, &truth).unwrap().f1;
    let dummy = vec![most_frequent_labels(&truth, 2); truth.len()];
    let dummy_f1 = macro_prf(&dummy, &truth).unwrap().f1;
    assert!(
        model_f1 > dummy_f1,
        "zero-shot macro-F1 {model_f1:.4} vs dummy {dummy_f1:.4}"
    );

    println!(
        "criterion 6 PASS: {train_secs:.0}s train, loss {first:.3}->{last:.3}, \
         ndcg@100 {trained:.3} vs chance {chance:.3}, macro-F1 {model_f1:.3} vs dummy {dummy_f1:.3}"
    );
}

// ---------------------------------------------------------------------------
// 7: joint training transfers to SAR retrieval

#[test]
fn c07_joint_training_beats_sar_only_on_sar_scope() {
    let _guard = heavy_guard();
    let mut wins = 0;
    let mut margins = Vec::new();
    for seed in [31, 32, 33] {
        let gen = GeneratorConfig {
            sar_count: 300,
            msi_count: 300,
            ..GeneratorConfig::default()
        };
        let corpus = generate_synthetic_corpus(&gen, seed).unwrap();

        // first 64 scenes of each modality train; remaining SAR scenes are
        // the retrieval database, so both arms see the same SAR training set
        let mut train_items = Vec::new();
        let mut held_sar = Vec::new();
        let (mut sar_seen, mut msi_seen) = (0usize, 0usize);
        for item in &corpus {
            match item.modality {
                Modality::Sar if sar_seen < 64 => {
                    sar_seen += 1;
                    train_items.push(item.clone());
                }
                Modality::Msi if msi_seen < 64 => {
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
        // 128 items / batch 32 = 4 steps over 18 epochs; the SAR arm sees
        // 64 items / 32 = 2 steps over 36 epochs: 72 steps either way
        let joint_cfg = TrainConfig {
            epochs: 18,
            batch_size: 32,
            max_lr: 3e-3,
            seed,
            ..TrainConfig::default()
        };
        let sar_cfg = TrainConfig {
            epochs: 36,
            modality: Some(Modality::Sar),
            ..joint_cfg.clone()
        };
        let joint = train(&encoder, &joint_cfg, &train_items).unwrap();
        let sar_only = train(&encoder, &sar_cfg, &train_items).unwrap();
        assert_eq!(joint.checkpoint.step, sar_only.checkpoint.step);

        let queries = queries_from_label_sets(held_sar.iter().map(|i| i.labels)).unwrap();
        let score = |ckpt: &ModelCheckpoint| -> f64 {
            let index = index_corpus(ckpt, &held_sar).unwrap();
            let report = evaluate_retrieval(ckpt, &index, &queries, Scope::Sar).unwrap();
            mean_ndcg_at(&report, 100)
        };
        let joint_ndcg = score(&joint.checkpoint);
        let solo_ndcg = score(&sar_only.checkpoint);
        margins.push(joint_ndcg - solo_ndcg);
        if joint_ndcg > solo_ndcg {
            wins += 1;
        }
    }
    assert!(wins >= 2, "joint won {wins}/3 seeds, margins {margins:?}");
    println!("criterion 7 PASS: joint beat SAR-only on {wins}/3 seeds, margins {margins:?}");
}

// ---------------------------------------------------------------------------
// 8: the location term organizes the embedding space geographically

#[test]
fn c08_location_term_raises_spatial_rank_correlation() {
    let _guard = heavy_guard();
    let mut wins = 0;
    let mut gaps = Vec::new();
    for seed in [41, 42, 43] {
        let gen = GeneratorConfig {
            sar_count: 300,
            msi_count: 300,
            ..GeneratorConfig::default()
        };
        let corpus = generate_synthetic_corpus(&gen, seed).unwrap();
        let encoder = EncoderConfig {
            embed_dim: 16,
            ..EncoderConfig::default()
        };
        let base = TrainConfig {
            epochs: 12,
            batch_size: 32,
            max_lr: 3e-3,
            train_fraction: 1.0 / 3.0,
            seed,
            ..TrainConfig::default()
        };
        let geo_cfg = TrainConfig {
            use_location: true,
            alpha: 0.5,
            ..base.clone()
        };
        let split = stratified_split(&corpus, base.train_fraction, seed).unwrap();
        let (train_items, held_out) = partition(&corpus, &split.train_ids);

        let plain = train(&encoder, &base, &train_items).unwrap();
        let geo = train(&encoder, &geo_cfg, &train_items).unwrap();
        assert_eq!(plain.checkpoint.step, geo.checkpoint.step);

        let plain_probe = spatial_probe(&plain.checkpoint, &held_out, 150, seed).unwrap();
        let geo_probe = spatial_probe(&geo.checkpoint, &held_out, 150, seed).unwrap();
        gaps.push(geo_probe.spearman - plain_probe.spearman);
        if geo_probe.spearman - plain_probe.spearman >= 0.05 {
            wins += 1;
        }
    }
    assert!(wins >= 2, "geo term helped on {wins}/3 seeds, gaps {gaps:?}");
    println!("criterion 8 PASS: spearman gap >= 0.05 on {wins}/3 seeds, gaps {gaps:?}");
}

// ---------------------------------------------------------------------------
// 9: geodesy

#[test]
fn c09_haversine_matches_closed_forms_and_is_a_metric() {
    let half = std::f64::consts::PI * 6371.0;
    assert!((haversine_km(0.0, 0.0, 180.0, 0.0).unwrap() - half).abs() <= 0.1);
    assert!((haversine_km(0.0, -90.0, 0.0, 90.0).unwrap() - half).abs() <= 0.1);
    assert!((haversine_km(10.0, 0.0, 100.0, 0.0).unwrap() - half / 2.0).abs() <= 0.1);
    assert_eq!(haversine_km(25.0, -30.0, 25.0, -30.0).unwrap(), 0.0);

    let mut rng = substream(9, Stream::Probe);
    for _ in 0..1000 {
        let mut point = || {
            (
                rng.gen_range(-180.0..180.0f64),
                rng.gen_range(-90.0..90.0f64),
            )
        };
        let (a, b, c) = (point(), point(), point());
        let ab = haversine_km(a.0, a.1, b.0, b.1).unwrap();
        let ba = haversine_km(b.0, b.1, a.0, a.1).unwrap();
        assert!((ab - ba).abs() <= 1e-9);
        let bc = haversine_km(b.0, b.1, c.0, c.1).unwrap();
        let ac = haversine_km(a.0, a.1, c.0, c.1).unwrap();
        assert!(ac <= ab + bc + 1e-9, "triangle violated: {ac} > {ab} + {bc}");
    }
    println!("criterion 9 PASS: closed forms within 0.1 km; symmetry and triangle hold on 1000 triples");
}

// ---------------------------------------------------------------------------
// 10: split fidelity on the 2,000-item corpus

#[test]
fn c10_stratified_split_is_homogeneous() {
    let corpus = big_corpus();
    let fraction = TrainConfig::default().train_fraction;
    let split = stratified_split(corpus, fraction, 0).unwrap();
    assert!(split.p_value >= 0.95, "p = {}", split.p_value);

    let train_ids: HashSet<u64> = split.train_ids.iter().copied().collect();
    let mut total = [0u64; LABEL_COUNT];
    let mut in_train = [0u64; LABEL_COUNT];
    for item in corpus {
        for l in item.labels.indices() {
            total[l] += 1;
            if train_ids.contains(&item.id) {
                in_train[l] += 1;
            }
        }
    }
    for l in 0..LABEL_COUNT {
        assert!(total[l] > 0, "label {l} absent from the corpus");
        let got = in_train[l] as f64 / total[l] as f64;
        assert!(
            (got - fraction).abs() <= 0.05,
            "label {l}: train share {got:.3} vs target {fraction}"
        );
    }
    println!(
        "criterion 10 PASS: p = {:.4}, every label within 5 points of {fraction}",
        split.p_value
    );
}

// ---------------------------------------------------------------------------
// 11: land-cover harmonization table

#[test]
fn c11_corine_table_round_trips() {
    assert_eq!(CLC_TO_DW.len(), 44);
    for (clc, dw) in CLC_TO_DW {
        assert_eq!(map_clc_to_dw(clc).unwrap(), dw);
        lookup(dw).expect("harmonized target is in the vocabulary");
    }
    assert_eq!(map_clc_to_dw("Rice fields").unwrap(), "flooded vegetation");
    assert_eq!(map_clc_to_dw("Burnt areas").unwrap(), "burned area");
    assert_eq!(map_clc_to_dw("Sea and ocean").unwrap(), "water");
    println!("criterion 11 PASS: all 44 rows round-trip; spot rows verbatim");
}

// ---------------------------------------------------------------------------
// 12: byte-level reproducibility

/// Full small-scale pipeline: corpus files, checkpoint file, retrieval
/// report, classification report, and probe table, all as bytes.
fn pipeline_artifacts() -> (Vec<u8>, Vec<u8>, String, String, String) {
    let gen = GeneratorConfig {
        sar_count: 20,
        msi_count: 20,
        image_side: 12,
        ..GeneratorConfig::default()
    };
    let encoder = EncoderConfig {
        embed_dim: 8,
        image_side: 12,
        ..EncoderConfig::default()
    };
    let config = TrainConfig {
        epochs: 2,
        batch_size: 4,
        max_lr: 1e-3,
        train_fraction: 0.5,
        seed: 9,
        ..TrainConfig::default()
    };

    let corpus = generate_synthetic_corpus(&gen, 9).unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_corpus(dir.path(), &corpus).unwrap();
    let mut corpus_bytes = Vec::new();
    for file in ["metadata.jsonl", "images_sar.bin", "images_msi.bin"] {
        corpus_bytes.extend(std::fs::read(dir.path().join(file)).unwrap());
    }

    let split = stratified_split(&corpus, config.train_fraction, config.seed).unwrap();
    let (train_items, held_out) = partition(&corpus, &split.train_ids);
    let outcome = train(&encoder, &config, &train_items).unwrap();
    let ckpt_path = dir.path().join("model.ckpt");
    outcome.checkpoint.save(&ckpt_path).unwrap();
    let ckpt_bytes = std::fs::read(&ckpt_path).unwrap();

    let index = index_corpus(&outcome.checkpoint, &held_out).unwrap();
    let queries = queries_from_label_sets(held_out.iter().map(|i| i.labels)).unwrap();
    let report = evaluate_retrieval(&outcome.checkpoint, &index, &queries, Scope::All).unwrap();
    let eval_json = report.flat_json().to_string();

    let (predictions, matrix) = zero_shot_classify(&outcome.checkpoint, &held_out).unwrap();
    let truth: Vec<LabelSet> = held_out.iter().map(|i| i.labels).collect();
    let classification = ClassificationReport {
        threshold: matrix.threshold(),
        item_count: held_out.len(),
        scores: macro_prf(&predictions, &truth).unwrap(),
    };
    let classify_json = classification.flat_json().to_string();

    let probe_csv = spatial_probe(&outcome.checkpoint, &held_out, 5, 9)
        .unwrap()
        .to_csv();

    (corpus_bytes, ckpt_bytes, eval_json, classify_json, probe_csv)
}

#[test]
fn c12_same_seed_runs_are_byte_identical() {
    let _guard = heavy_guard();
    let first = pipeline_artifacts();
    let second = pipeline_artifacts();
    assert_eq!(first.0, second.0, "corpus bytes diverged");
    assert_eq!(first.1, second.1, "checkpoint bytes diverged");
    assert_eq!(first.2, second.2, "retrieval report diverged");
    assert_eq!(first.3, second.3, "classification report diverged");
    assert_eq!(first.4, second.4, "probe table diverged");
    println!("criterion 12 PASS: corpus, checkpoint, and reports byte-identical across runs");
}
