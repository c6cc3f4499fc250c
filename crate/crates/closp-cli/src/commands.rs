//! Implementations behind the CLI subcommands.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;
use std::time::Instant;

use serde_json::json;

use closp::corpus::{
    generate_synthetic_corpus, graded_relevance, label_marginals, load_corpus,
    queries_from_label_sets, save_corpus, stratified_split, CorpusItem,
};
use closp::encoders::Modality;
use closp::evalsuite::{
    evaluate_retrieval, macro_prf, spatial_probe, zero_shot_classify, ClassificationReport, Scope,
};
use closp::retrieval::{fuse_rankings, index_corpus, search, EmbeddingIndex, RankedList};
use closp::trainer::{train, ModelCheckpoint, TrainConfig};
use closp::vocab::LabelSet;
use closp::{Error, Result};

use crate::config::{GenFile, TrainFile};
use crate::manifest::RunManifest;

fn read_config(path: &Path) -> Result<String> {
    fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))
}

/// Every image in a saved corpus has the same side, so checking the first
/// item catches a geometry mismatch before any heavy work starts.
fn require_side(expected: usize, items: &[CorpusItem]) -> Result<()> {
    if let Some(item) = items.first() {
        let side = item.image.shape()[1];
        if side != expected {
            return Err(Error::Config(format!(
                "corpus images are {side}x{side} but the model expects {expected}x{expected}"
            )));
        }
    }
    Ok(())
}

fn require_dim(checkpoint: &ModelCheckpoint, index: &EmbeddingIndex) -> Result<()> {
    let expected = checkpoint.model.config.embed_dim;
    if index.dim() != expected {
        return Err(Error::Config(format!(
            "checkpoint embeds D={expected} but the index holds D={}",
            index.dim()
        )));
    }
    Ok(())
}

/// Re-derives the deterministic train/retrieval partition the checkpoint
/// was built with and keeps one side, preserving corpus order.
fn split_side(items: &[CorpusItem], train: &TrainConfig, keep_train: bool) -> Result<Vec<CorpusItem>> {
    let split = stratified_split(items, train.train_fraction, train.seed)?;
    let ids = if keep_train {
        split.train_ids
    } else {
        split.retrieval_ids
    };
    let keep: HashSet<u64> = ids.into_iter().collect();
    Ok(items
        .iter()
        .filter(|item| keep.contains(&item.id))
        .cloned()
        .collect())
}

pub fn gen_corpus(config: Option<&Path>, seed: u64, out: &Path) -> Result<()> {
    let started = Instant::now();
    let file = match config {
        Some(path) => GenFile::parse(&read_config(path)?)?,
        None => GenFile::default(),
    };
    let items = generate_synthetic_corpus(&file.generator, seed)?;
    save_corpus(out, &items)?;

    let sar = items
        .iter()
        .filter(|i| i.modality == Modality::Sar)
        .count();
    println!(
        "wrote {} items ({sar} SAR, {} MSI) to {}",
        items.len(),
        items.len() - sar,
        out.display()
    );

    let mut manifest = RunManifest::new(
        "gen-corpus",
        seed,
        json!({
            "generator": file.generator,
            "label_marginals": label_marginals(&items),
        }),
    );
    if let Some(path) = config {
        manifest = manifest.input(path);
    }
    manifest.output(out).write(out, started)
}

pub fn train_model(
    config: Option<&Path>,
    corpus: &Path,
    out: &Path,
    seed: Option<u64>,
    alpha: Option<f64>,
) -> Result<()> {
    let started = Instant::now();
    let mut file = match config {
        Some(path) => TrainFile::parse(&read_config(path)?)?,
        None => TrainFile::default(),
    };
    if let Some(seed) = seed {
        file.train.seed = seed;
    }
    if let Some(alpha) = alpha {
        file.train.alpha = alpha;
    }
    file.encoder.validate()?;
    file.train.validate()?;

    let items = load_corpus(corpus)?;
    require_side(file.encoder.image_side, &items)?;
    let split = stratified_split(&items, file.train.train_fraction, file.train.seed)?;
    let keep: HashSet<u64> = split.train_ids.iter().copied().collect();
    let train_items: Vec<CorpusItem> = items
        .iter()
        .filter(|item| keep.contains(&item.id))
        .cloned()
        .collect();

    let outcome = train(&file.encoder, &file.train, &train_items)?;
    outcome.checkpoint.save(out)?;

    let losses = out.with_extension("losses.csv");
    let mut csv = String::from("epoch,mean_loss\n");
    for (epoch, loss) in outcome.epoch_losses.iter().enumerate() {
        csv.push_str(&format!("{},{loss}\n", epoch + 1));
    }
    fs::write(&losses, csv)?;

    let first = outcome.epoch_losses.first().copied().unwrap_or(f64::NAN);
    let last = outcome.epoch_losses.last().copied().unwrap_or(f64::NAN);
    println!(
        "trained {} epochs on {} items ({} steps); mean loss {first:.4} -> {last:.4}",
        file.train.epochs,
        train_items.len(),
        outcome.checkpoint.step,
    );

    let mut manifest = RunManifest::new(
        "train",
        file.train.seed,
        json!({
            "encoder": file.encoder,
            "train": file.train,
            "split": { "chi2_stat": split.chi2_stat, "p_value": split.p_value },
        }),
    );
    if let Some(path) = config {
        manifest = manifest.input(path);
    }
    manifest
        .input(corpus)
        .output(out)
        .output(&losses)
        .write(out, started)
}

pub fn build_index(checkpoint: &Path, corpus: &Path, out: &Path) -> Result<()> {
    let started = Instant::now();
    let ckpt = ModelCheckpoint::load(checkpoint)?;
    let items = load_corpus(corpus)?;
    require_side(ckpt.model.config.image_side, &items)?;
    let held_out = split_side(&items, &ckpt.train, false)?;

    let index = index_corpus(&ckpt, &held_out)?;
    index.save(out)?;
    println!(
        "indexed {} held-out items at D={} into {}",
        index.len(),
        index.dim(),
        out.display()
    );

    RunManifest::new(
        "index",
        ckpt.train.seed,
        json!({ "embed_dim": index.dim(), "train": ckpt.train }),
    )
    .input(checkpoint)
    .input(corpus)
    .output(out)
    .write(out, started)
}

pub fn run_query(
    checkpoint: &Path,
    index_paths: &[std::path::PathBuf],
    text: &str,
    k: usize,
    out: &Path,
) -> Result<()> {
    let started = Instant::now();
    if index_paths.is_empty() || index_paths.len() > 2 {
        return Err(Error::Config(format!(
            "pass --index once, or twice to fuse; got {} paths",
            index_paths.len()
        )));
    }
    let ckpt = ModelCheckpoint::load(checkpoint)?;
    let labels = LabelSet::parse(text)?;
    if labels.is_empty() {
        return Err(Error::Config("the query names no labels".into()));
    }
    let query = ckpt.model.encode_text(&labels)?;

    let mut indices = Vec::with_capacity(index_paths.len());
    for path in index_paths {
        let index = EmbeddingIndex::load(path)?;
        require_dim(&ckpt, &index)?;
        indices.push(index);
    }
    let ranked: RankedList = if indices.len() == 1 {
        search(&indices[0], &query, k)?
    } else {
        let a = search(&indices[0], &query, k)?;
        let b = search(&indices[1], &query, k)?;
        fuse_rankings(&a, &b, k)?
    };

    let mut records = HashMap::new();
    for index in &indices {
        for record in index.records() {
            records.insert(record.id, record);
        }
    }

    let mut hits = Vec::with_capacity(ranked.len());
    println!("rank\tid\tscore\trel\tlabels");
    for (rank, hit) in ranked.hits().iter().enumerate() {
        let record = records
            .get(&hit.id)
            .ok_or_else(|| Error::Contract(format!("hit {} is not in any index", hit.id)))?;
        let rel = graded_relevance(&labels, &record.labels)?;
        println!(
            "{}\t{}\t{:.6}\t{rel}\t{}",
            rank + 1,
            hit.id,
            hit.score,
            record.labels.render()
        );
        hits.push(json!({
            "id": hit.id,
            "score": hit.score,
            "relevance": rel,
            "labels": record.labels.render(),
        }));
    }

    let body = json!({ "query": labels.render(), "k": k, "hits": hits });
    fs::write(out, serde_json::to_string_pretty(&body).unwrap() + "\n")?;

    let mut manifest = RunManifest::new(
        "query",
        ckpt.train.seed,
        json!({ "text": labels.render(), "k": k }),
    )
    .input(checkpoint);
    for path in index_paths {
        manifest = manifest.input(path);
    }
    manifest.output(out).write(out, started)
}

pub fn evaluate(checkpoint: &Path, index_path: &Path, scope: Scope, out: &Path) -> Result<()> {
    let started = Instant::now();
    let ckpt = ModelCheckpoint::load(checkpoint)?;
    let index = EmbeddingIndex::load(index_path)?;
    require_dim(&ckpt, &index)?;

    let scoped = index
        .records()
        .iter()
        .filter(|r| match scope {
            Scope::All => true,
            Scope::Sar => r.modality == Modality::Sar,
            Scope::Msi => r.modality == Modality::Msi,
        })
        .map(|r| r.labels.clone());
    let queries = queries_from_label_sets(scoped)?;
    let report = evaluate_retrieval(&ckpt, &index, &queries, scope)?;

    println!("{}", report.text_table());
    let flat = report.flat_json();
    fs::write(out, serde_json::to_string_pretty(&flat).unwrap() + "\n")?;

    RunManifest::new(
        "eval",
        ckpt.train.seed,
        json!({ "scope": scope.to_string(), "query_count": queries.len() }),
    )
    .input(checkpoint)
    .input(index_path)
    .output(out)
    .write(out, started)
}

pub fn classify(checkpoint: &Path, corpus: &Path, out: &Path) -> Result<()> {
    let started = Instant::now();
    let ckpt = ModelCheckpoint::load(checkpoint)?;
    let items = load_corpus(corpus)?;
    require_side(ckpt.model.config.image_side, &items)?;
    let held_out = split_side(&items, &ckpt.train, false)?;

    let (predictions, matrix) = zero_shot_classify(&ckpt, &held_out)?;
    let truth: Vec<LabelSet> = held_out.iter().map(|item| item.labels.clone()).collect();
    let scores = macro_prf(&predictions, &truth)?;
    let report = ClassificationReport {
        threshold: matrix.threshold(),
        item_count: held_out.len(),
        scores,
    };

    println!("{}", report.text_table());
    fs::write(
        out,
        serde_json::to_string_pretty(&report.flat_json()).unwrap() + "\n",
    )?;

    RunManifest::new(
        "classify",
        ckpt.train.seed,
        json!({ "item_count": held_out.len(), "threshold": report.threshold }),
    )
    .input(checkpoint)
    .input(corpus)
    .output(out)
    .write(out, started)
}

pub fn geo_probe(checkpoint: &Path, corpus: &Path, k: usize, seed: u64, out: &Path) -> Result<()> {
    let started = Instant::now();
    let ckpt = ModelCheckpoint::load(checkpoint)?;
    let items = load_corpus(corpus)?;
    require_side(ckpt.model.config.image_side, &items)?;
    let held_out = split_side(&items, &ckpt.train, false)?;

    let probe = spatial_probe(&ckpt, &held_out, k, seed)?;
    println!(
        "spatial probe over {} pairs: pearson {:.4}, spearman {:.4}",
        probe.pairs.len(),
        probe.pearson,
        probe.spearman
    );
    fs::write(out, probe.to_csv())?;

    RunManifest::new(
        "geo-probe",
        seed,
        json!({ "pairs": k, "pearson": probe.pearson, "spearman": probe.spearman }),
    )
    .input(checkpoint)
    .input(corpus)
    .output(out)
    .write(out, started)
}
