//! Embedding index over the retrieval corpus: exact top-K inner-product
//! search and min-max score fusion across per-modality indices.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::binio;
use crate::corpus::CorpusItem;
use crate::encoders::Modality;
use crate::error::{Error, Result};
use crate::ndmath::Tensor;
use crate::trainer::ModelCheckpoint;
use crate::vocab::{vocabulary_hash, LabelSet};

const UNIT_NORM_TOL: f64 = 1e-6;

/// One indexed item: its embedding plus the metadata evaluation needs.
#[derive(Debug, Clone)]
pub struct EmbeddingRecord {
    pub id: u64,
    pub modality: Modality,
    pub vector: Tensor,
    pub lon: f64,
    pub lat: f64,
    pub labels: LabelSet,
}

/// Immutable embedding store. All vectors share one dimension and ids are
/// unique; both are enforced at construction.
#[derive(Debug, Clone)]
pub struct EmbeddingIndex {
    dim: usize,
    records: Vec<EmbeddingRecord>,
}

impl EmbeddingIndex {
    pub fn new(records: Vec<EmbeddingRecord>) -> Result<Self> {
        let dim = match records.first() {
            Some(r) => r.vector.len(),
            None => 0,
        };
        let mut seen = HashSet::with_capacity(records.len());
        for r in &records {
            if r.vector.rank() != 1 || r.vector.len() != dim {
                return Err(Error::Shape(format!(
                    "record {} has vector shape {:?}, index dimension is {dim}",
                    r.id,
                    r.vector.shape()
                )));
            }
            if (r.vector.norm() - 1.0).abs() > UNIT_NORM_TOL {
                return Err(Error::Contract(format!(
                    "record {} vector norm {} is not 1",
                    r.id,
                    r.vector.norm()
                )));
            }
            if !seen.insert(r.id) {
                return Err(Error::Contract(format!("duplicate record id {}", r.id)));
            }
        }
        Ok(EmbeddingIndex { dim, records })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Embedding dimension; 0 for an empty index.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn records(&self) -> &[EmbeddingRecord] {
        &self.records
    }

    pub fn record(&self, id: u64) -> Option<&EmbeddingRecord> {
        self.records.iter().find(|r| r.id == id)
    }

    /// A new index holding only records of one modality.
    pub fn restricted_to(&self, modality: Modality) -> EmbeddingIndex {
        let records: Vec<EmbeddingRecord> = self
            .records
            .iter()
            .filter(|r| r.modality == modality)
            .cloned()
            .collect();
        let dim = if records.is_empty() { 0 } else { self.dim };
        EmbeddingIndex { dim, records }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<EmbeddingIndex> {
        let mut r = BufReader::new(File::open(path)?);
        Self::read_from(&mut r)
    }

    fn write_to(&self, w: &mut impl Write) -> Result<()> {
        binio::write_header(w, binio::KIND_INDEX)?;
        binio::write_u64(w, vocabulary_hash())?;
        binio::write_u32(w, self.dim as u32)?;
        binio::write_u64(w, self.records.len() as u64)?;
        for r in &self.records {
            binio::write_u64(w, r.id)?;
            binio::write_u32(w, match r.modality {
                Modality::Sar => 0,
                Modality::Msi => 1,
            })?;
            binio::write_f64(w, r.lon)?;
            binio::write_f64(w, r.lat)?;
            let mask: u32 = r.labels.indices().map(|i| 1 << i).sum();
            binio::write_u32(w, mask)?;
            binio::write_f64s(w, r.vector.values())?;
        }
        Ok(())
    }

    fn read_from(r: &mut impl Read) -> Result<EmbeddingIndex> {
        binio::read_header(r, binio::KIND_INDEX)?;
        let vocab = binio::read_u64(r)?;
        if vocab != vocabulary_hash() {
            return Err(Error::Format(format!(
                "index was built against vocabulary {vocab:#018x}, this build uses {:#018x}",
                vocabulary_hash()
            )));
        }
        let dim = binio::read_u32(r)? as usize;
        let count = binio::read_u64(r)? as usize;
        if count > 0 && dim == 0 {
            return Err(Error::Format("records with zero dimension".into()));
        }
        let mut records = Vec::with_capacity(count.min(1 << 20));
        for _ in 0..count {
            let id = binio::read_u64(r)?;
            let modality = match binio::read_u32(r)? {
                0 => Modality::Sar,
                1 => Modality::Msi,
                other => return Err(Error::Format(format!("modality tag {other}"))),
            };
            let lon = binio::read_f64(r)?;
            let lat = binio::read_f64(r)?;
            let mask = binio::read_u32(r)?;
            let indices: Vec<usize> = (0..32).filter(|i| mask & (1 << i) != 0).collect();
            let labels = LabelSet::from_indices(&indices)
                .map_err(|e| Error::Format(format!("record {id}: {e}")))?;
            let vector = Tensor::new(&[dim], binio::read_f64s(r, dim)?)?;
            records.push(EmbeddingRecord {
                id,
                modality,
                vector,
                lon,
                lat,
                labels,
            });
        }
        EmbeddingIndex::new(records)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub id: u64,
    pub score: f64,
}

/// Search results in descending score order, ties broken by ascending id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RankedList {
    hits: Vec<Hit>,
}

impl RankedList {
    pub fn new(hits: Vec<Hit>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(hits.len());
        for pair in hits.windows(2) {
            if pair[1].score > pair[0].score {
                return Err(Error::Contract(format!(
                    "scores must be non-increasing: {} before {}",
                    pair[0].score, pair[1].score
                )));
            }
        }
        for h in &hits {
            if !seen.insert(h.id) {
                return Err(Error::Contract(format!("duplicate id {} in ranking", h.id)));
            }
        }
        Ok(RankedList { hits })
    }

    pub fn empty() -> Self {
        RankedList { hits: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.hits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hits.is_empty()
    }

    pub fn hits(&self) -> &[Hit] {
        &self.hits
    }

    pub fn ids(&self) -> Vec<u64> {
        self.hits.iter().map(|h| h.id).collect()
    }
}

/// Descending score with ascending-id tie break, truncated to `k`.
fn ranked_from_scores(mut scored: Vec<Hit>, k: usize) -> RankedList {
    scored.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .expect("scores are finite")
            .then(a.id.cmp(&b.id))
    });
    scored.truncate(k);
    RankedList { hits: scored }
}

/// Embeds every item with its modality's encoder. One record per item.
pub fn index_corpus(checkpoint: &ModelCheckpoint, items: &[CorpusItem]) -> Result<EmbeddingIndex> {
    let mut records = Vec::with_capacity(items.len());
    for item in items {
        item.validate()?;
        let vector = checkpoint.model.encode_image(&item.image, item.modality)?;
        records.push(EmbeddingRecord {
            id: item.id,
            modality: item.modality,
            vector,
            lon: item.lon,
            lat: item.lat,
            labels: item.labels,
        });
    }
    EmbeddingIndex::new(records)
}

/// Exact top-K by inner product. Returns min(K, index size) hits; an empty
/// index yields an empty list.
pub fn search(index: &EmbeddingIndex, query: &Tensor, k: usize) -> Result<RankedList> {
    if k == 0 {
        return Err(Error::Contract("K must be at least 1".into()));
    }
    if index.is_empty() {
        return Ok(RankedList::empty());
    }
    if query.rank() != 1 || query.len() != index.dim {
        return Err(Error::Shape(format!(
            "query shape {:?} against index dimension {}",
            query.shape(),
            index.dim
        )));
    }
    if (query.norm() - 1.0).abs() > UNIT_NORM_TOL {
        return Err(Error::Contract(format!(
            "query norm {} is not 1",
            query.norm()
        )));
    }
    let scored: Vec<Hit> = index
        .records
        .iter()
        .map(|r| {
            let score = query.dot(&r.vector)?;
            Ok(Hit { id: r.id, score })
        })
        .collect::<Result<_>>()?;
    Ok(ranked_from_scores(scored, k))
}

/// Min-max normalizes each list to [0, 1] independently, merges, and keeps
/// the top K. Lists must come from disjoint id spaces.
pub fn fuse_rankings(a: &RankedList, b: &RankedList, k: usize) -> Result<RankedList> {
    if k == 0 {
        return Err(Error::Contract("K must be at least 1".into()));
    }
    let ids_a: HashSet<u64> = a.hits.iter().map(|h| h.id).collect();
    if let Some(shared) = b.hits.iter().find(|h| ids_a.contains(&h.id)) {
        return Err(Error::Contract(format!(
            "id {} appears in both rankings",
            shared.id
        )));
    }
    let mut merged = min_max(&a.hits);
    merged.extend(min_max(&b.hits));
    Ok(ranked_from_scores(merged, k))
}

/// (s - min) / (max - min) per hit; a constant list (including a single
/// hit) maps every score to 1.0.
fn min_max(hits: &[Hit]) -> Vec<Hit> {
    if hits.is_empty() {
        return Vec::new();
    }
    let max = hits.iter().map(|h| h.score).fold(f64::NEG_INFINITY, f64::max);
    let min = hits.iter().map(|h| h.score).fold(f64::INFINITY, f64::min);
    let span = max - min;
    hits.iter()
        .map(|h| Hit {
            id: h.id,
            score: if span == 0.0 { 1.0 } else { (h.score - min) / span },
        })
        .collect()
}
