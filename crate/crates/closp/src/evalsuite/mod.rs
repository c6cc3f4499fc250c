//! Graded-relevance retrieval metrics with analytic random baselines,
//! retrieval evaluation over index scopes, zero-shot classification, and
//! the spatial-distance probe.

mod classify;
mod geo;
mod report;

use std::collections::{HashMap, HashSet};

use crate::corpus::{graded_relevance, is_relevant, Query};
use crate::encoders::Modality;
use crate::error::{Error, Result};
use crate::ndmath::Tensor;
use crate::retrieval::{fuse_rankings, search, EmbeddingIndex, RankedList};
use crate::trainer::ModelCheckpoint;
use crate::vocab::{LabelSet, LABEL_COUNT};

pub use classify::{macro_prf, most_frequent_labels, zero_shot_classify, ClassPrf, MacroPrf,
    SimilarityMatrix};
pub use geo::{chi_square_labels, correlation, haversine_km, spatial_probe, ProbePair,
    SpatialProbe, EARTH_RADIUS_KM};
pub use report::{ClassificationReport, CutoffSummary, QueryMetrics, RetrievalReport};

/// Rank cutoffs every retrieval report covers.
pub const CUTOFFS: [usize; 4] = [10, 50, 100, 1000];

/// Which part of the corpus a retrieval evaluation runs against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scope {
    All,
    Sar,
    Msi,
}

impl Scope {
    pub fn tag(&self) -> &'static str {
        match self {
            Scope::All => "all",
            Scope::Sar => "sar",
            Scope::Msi => "msi",
        }
    }

    pub fn parse(text: &str) -> Result<Scope> {
        match text.trim().to_lowercase().as_str() {
            "all" => Ok(Scope::All),
            "sar" => Ok(Scope::Sar),
            "msi" => Ok(Scope::Msi),
            other => Err(Error::Config(format!(
                "unknown scope {other:?}, expected all, sar, or msi"
            ))),
        }
    }
}

impl std::fmt::Display for Scope {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

fn check_rels(rels: &[i32]) -> Result<()> {
    if let Some(bad) = rels.iter().find(|&&r| r < 0) {
        return Err(Error::Domain(format!("negative relevance {bad}")));
    }
    Ok(())
}

fn dcg<'a>(rels: impl Iterator<Item = &'a i32>) -> f64 {
    rels.enumerate()
        .map(|(i, &r)| r as f64 / ((i + 2) as f64).log2())
        .sum()
}

/// nDCG@K with linear gain and 1/log2(rank+1) discount, normalized by the
/// ideal ordering of the whole corpus's relevance multiset. Returns 0 when
/// that ideal is 0.
pub fn ndcg_at_k(retrieved_rels: &[i32], corpus_rels: &[i32], k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::Contract("K must be at least 1".into()));
    }
    check_rels(retrieved_rels)?;
    check_rels(corpus_rels)?;
    let got = dcg(retrieved_rels.iter().take(k));
    let mut ideal = corpus_rels.to_vec();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let best = dcg(ideal.iter().take(k));
    if best == 0.0 {
        return Ok(0.0);
    }
    Ok(got / best)
}

/// P@K and R@K under binary relevance. P divides by K itself; R is 0 when
/// nothing is relevant.
pub fn precision_recall_at_k(
    retrieved_ids: &[u64],
    relevant: &HashSet<u64>,
    k: usize,
) -> Result<(f64, f64)> {
    if k == 0 {
        return Err(Error::Contract("K must be at least 1".into()));
    }
    let hits = retrieved_ids
        .iter()
        .take(k)
        .filter(|id| relevant.contains(id))
        .count() as f64;
    let p = hits / k as f64;
    let r = if relevant.is_empty() {
        0.0
    } else {
        hits / relevant.len() as f64
    };
    Ok((p, r))
}

/// Expected metrics of a uniform random ranking.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineMetrics {
    pub ndcg: f64,
    pub precision: f64,
    pub recall: f64,
}

/// Closed forms for the uniform-sampling retriever: R@K = K/|D|,
/// P@K = R_q/|D|, and nDCG@K = R_m * sum(1/log2(i+1)) / IDCG@K, where R_q
/// counts relevant items and R_m is the mean graded relevance.
pub fn random_baseline(
    corpus_size: usize,
    query_rels: &[i32],
    k: usize,
) -> Result<BaselineMetrics> {
    if corpus_size == 0 {
        return Err(Error::Contract("corpus must be non-empty".into()));
    }
    if query_rels.len() != corpus_size {
        return Err(Error::Contract(format!(
            "{} relevance grades for a corpus of {corpus_size}",
            query_rels.len()
        )));
    }
    if k == 0 || k > corpus_size {
        return Err(Error::Contract(format!(
            "K must lie in 1..=|D| = {corpus_size}, got {k}"
        )));
    }
    check_rels(query_rels)?;
    let d = corpus_size as f64;
    let recall = k as f64 / d;
    let r_q = query_rels.iter().filter(|&&r| r >= 5).count() as f64;
    let precision = r_q / d;
    let r_m = query_rels.iter().map(|&r| r as f64).sum::<f64>() / d;
    let discount_sum: f64 = (1..=k).map(|i| 1.0 / ((i + 1) as f64).log2()).sum();
    let mut ideal = query_rels.to_vec();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let idcg = dcg(ideal.iter().take(k));
    let ndcg = if idcg == 0.0 {
        0.0
    } else {
        r_m * discount_sum / idcg
    };
    Ok(BaselineMetrics {
        ndcg,
        precision,
        recall,
    })
}

/// Evaluates text queries against one index scope: encodes each query,
/// searches, and reports nDCG/P/R at every cutoff plus per-class nDCG from
/// the single-label queries.
pub fn evaluate_retrieval(
    checkpoint: &ModelCheckpoint,
    index: &EmbeddingIndex,
    queries: &[Query],
    scope: Scope,
) -> Result<RetrievalReport> {
    let restricted;
    let idx = match scope {
        Scope::All => index,
        Scope::Sar => {
            restricted = index.restricted_to(Modality::Sar);
            &restricted
        }
        Scope::Msi => {
            restricted = index.restricted_to(Modality::Msi);
            &restricted
        }
    };
    if idx.is_empty() {
        return Err(Error::Data(format!("scope {scope} holds no records")));
    }
    let corpus: Vec<(u64, LabelSet)> = idx.records().iter().map(|r| (r.id, r.labels)).collect();
    build_report(checkpoint, &corpus, queries, scope.tag().into(), |q, k| {
        search(idx, q, k)
    })
}

/// Evaluates queries against two per-modality indices whose rankings are
/// min-max fused per query. Ids must be disjoint across the two.
pub fn evaluate_retrieval_fused(
    checkpoint: &ModelCheckpoint,
    sar_index: &EmbeddingIndex,
    msi_index: &EmbeddingIndex,
    queries: &[Query],
) -> Result<RetrievalReport> {
    let mut corpus: Vec<(u64, LabelSet)> = sar_index
        .records()
        .iter()
        .chain(msi_index.records())
        .map(|r| (r.id, r.labels))
        .collect();
    corpus.sort_by_key(|(id, _)| *id);
    if corpus.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(Error::Contract(
            "fused indices must not share record ids".into(),
        ));
    }
    if corpus.is_empty() {
        return Err(Error::Data("both indices are empty".into()));
    }
    build_report(checkpoint, &corpus, queries, "fused".into(), |q, k| {
        let a = search(sar_index, q, k)?;
        let b = search(msi_index, q, k)?;
        fuse_rankings(&a, &b, k)
    })
}

fn build_report(
    checkpoint: &ModelCheckpoint,
    corpus: &[(u64, LabelSet)],
    queries: &[Query],
    scope: String,
    mut run_query: impl FnMut(&Tensor, usize) -> Result<RankedList>,
) -> Result<RetrievalReport> {
    if queries.is_empty() {
        return Err(Error::Contract("no queries to evaluate".into()));
    }
    let k_max = *CUTOFFS.iter().max().expect("cutoffs non-empty");
    let labels_by_id: HashMap<u64, LabelSet> = corpus.iter().copied().collect();

    let mut per_query = Vec::with_capacity(queries.len());
    for query in queries {
        let qv = checkpoint.model.encode_text(query.labels())?;
        let ranked = run_query(&qv, k_max)?;

        let mut all_rels = Vec::with_capacity(corpus.len());
        let mut relevant = HashSet::new();
        for (id, labels) in corpus {
            let rel = graded_relevance(query.labels(), labels)?;
            all_rels.push(rel as i32);
            if is_relevant(rel) {
                relevant.insert(*id);
            }
        }
        let ranked_ids = ranked.ids();
        let ranked_rels: Vec<i32> = ranked_ids
            .iter()
            .map(|id| {
                let labels = labels_by_id
                    .get(id)
                    .ok_or_else(|| Error::Contract(format!("hit {id} is not in the corpus")))?;
                Ok(graded_relevance(query.labels(), labels)? as i32)
            })
            .collect::<Result<_>>()?;

        let mut at = Vec::with_capacity(CUTOFFS.len());
        for k in CUTOFFS {
            let ndcg = ndcg_at_k(&ranked_rels, &all_rels, k)?;
            let (p, r) = precision_recall_at_k(&ranked_ids, &relevant, k)?;
            at.push(CutoffSummary {
                k,
                ndcg,
                precision: p,
                recall: r,
            });
        }
        per_query.push(QueryMetrics {
            text: query.text(),
            at,
        });
    }

    let mean = CUTOFFS
        .iter()
        .enumerate()
        .map(|(slot, &k)| {
            let n = per_query.len() as f64;
            CutoffSummary {
                k,
                ndcg: per_query.iter().map(|q| q.at[slot].ndcg).sum::<f64>() / n,
                precision: per_query.iter().map(|q| q.at[slot].precision).sum::<f64>() / n,
                recall: per_query.iter().map(|q| q.at[slot].recall).sum::<f64>() / n,
            }
        })
        .collect();

    let last = CUTOFFS.len() - 1;
    let per_class_ndcg = (0..LABEL_COUNT)
        .map(|j| {
            let singleton = LabelSet::from_indices(&[j]).expect("class index in range");
            queries
                .iter()
                .position(|q| *q.labels() == singleton)
                .map(|i| per_query[i].at[last].ndcg)
        })
        .collect();

    Ok(RetrievalReport {
        scope,
        index_size: corpus.len(),
        mean,
        per_query,
        per_class_ndcg,
    })
}
