//! Corpus data model: the synthetic multi-sensor corpus generator, CORINE
//! label harmonization, stratified splitting, query enumeration, and graded
//! relevance.

mod clc;
mod generate;
mod io;
mod relevance;
mod split;

pub use clc::{map_clc_to_dw, CLC_TO_DW};
pub use generate::{generate_synthetic_corpus, label_marginals, GeneratorConfig, DEFAULT_PRIORS};
pub use io::{load_corpus, save_corpus};
pub use relevance::{enumerate_queries, graded_relevance, is_relevant, queries_from_label_sets};
pub use split::stratified_split;

use serde::{Deserialize, Serialize};

use crate::encoders::Modality;
use crate::error::{Error, Result};
use crate::ndmath::Tensor;
use crate::vocab::{self, LabelSet};

/// Crisis stream an item belongs to. A tag always implies the matching
/// crisis label is present in the item's label set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CrisisTag {
    Wildfire,
    Flood,
    Earthquake,
}

impl CrisisTag {
    /// The vocabulary label this tag guarantees.
    pub fn label_index(self) -> usize {
        match self {
            CrisisTag::Wildfire => vocab::BURNED_AREA,
            CrisisTag::Flood => vocab::FLOODED_AREA,
            CrisisTag::Earthquake => vocab::EARTHQUAKE_DAMAGE,
        }
    }
}

/// One corpus item: an image with its annotations and footprint center.
#[derive(Debug, Clone)]
pub struct CorpusItem {
    pub id: u64,
    pub modality: Modality,
    pub image: Tensor,
    pub labels: LabelSet,
    pub lon: f64,
    pub lat: f64,
    pub crisis: Option<CrisisTag>,
    pub source: String,
}

impl CorpusItem {
    /// Structural checks an item must satisfy; the loader applies them to
    /// everything read from disk.
    pub fn validate(&self) -> Result<()> {
        let c = self.modality.channels();
        let square = matches!(self.image.shape(), [ch, h, w] if *ch == c && h == w);
        if !square {
            return Err(Error::Data(format!(
                "item {}: image shape {:?} does not fit {} ({} channels)",
                self.id,
                self.image.shape(),
                self.modality,
                c
            )));
        }
        if self.labels.is_empty() {
            return Err(Error::Data(format!("item {}: empty label set", self.id)));
        }
        if let Some(tag) = self.crisis {
            if !self.labels.contains(tag.label_index()) {
                return Err(Error::Data(format!(
                    "item {}: crisis tag without its label \"{}\"",
                    self.id,
                    vocab::name(tag.label_index())
                )));
            }
        }
        let lon_ok = self.lon.is_finite() && (-180.0..=180.0).contains(&self.lon);
        let lat_ok = self.lat.is_finite() && (-90.0..=90.0).contains(&self.lat);
        if !lon_ok || !lat_ok {
            return Err(Error::Data(format!(
                "item {}: coordinates ({}, {}) out of range",
                self.id, self.lon, self.lat
            )));
        }
        Ok(())
    }

    pub fn image_side(&self) -> usize {
        self.image.shape()[1]
    }
}

/// A retrieval query: a non-empty set of vocabulary labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Query {
    labels: LabelSet,
}

impl Query {
    pub fn new(labels: LabelSet) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::Contract("a query needs at least one label".into()));
        }
        Ok(Query { labels })
    }

    pub fn labels(&self) -> &LabelSet {
        &self.labels
    }

    /// Canonical textual form: labels in vocabulary order joined by ". ".
    pub fn text(&self) -> String {
        self.labels.render()
    }
}

/// Outcome of a stratified split: disjoint id sets covering the corpus,
/// plus the homogeneity statistic between their label distributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitResult {
    pub train_ids: Vec<u64>,
    pub retrieval_ids: Vec<u64>,
    pub chi2_stat: f64,
    pub p_value: f64,
}
