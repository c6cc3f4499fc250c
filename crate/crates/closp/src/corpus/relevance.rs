//! Query enumeration and graded relevance between label sets.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::vocab::LabelSet;

use super::{CorpusItem, Query};

/// Graded relevance on a 0..=10 scale: the label-set IoU scaled by ten and
/// rounded half away from zero. Exact in integer arithmetic.
pub fn graded_relevance(query: &LabelSet, item: &LabelSet) -> Result<u8> {
    if query.is_empty() || item.is_empty() {
        return Err(Error::Contract(
            "relevance is defined only for non-empty label sets".into(),
        ));
    }
    let i = query.intersection(item).len() as u32;
    let u = query.union(item).len() as u32;
    Ok(((20 * i + u) / (2 * u)) as u8)
}

/// The fixed relevance cutoff: grades of five or more count as relevant.
pub fn is_relevant(rel: u8) -> bool {
    debug_assert!(rel <= 10);
    rel >= 5
}

/// Every distinct non-empty label combination that co-occurs in at least
/// one item, in canonical order (singletons first, vocabulary order within
/// a length).
pub fn enumerate_queries(corpus: &[CorpusItem]) -> Result<Vec<Query>> {
    if corpus.is_empty() {
        return Err(Error::Contract("cannot enumerate queries of an empty corpus".into()));
    }
    queries_from_label_sets(corpus.iter().map(|item| item.labels))
}

/// Same enumeration over bare label sets, for callers that hold embedding
/// records rather than corpus items.
pub fn queries_from_label_sets(sets: impl IntoIterator<Item = LabelSet>) -> Result<Vec<Query>> {
    let mut seen: BTreeSet<LabelSet> = BTreeSet::new();
    for set in sets {
        for subset in set.subsets() {
            seen.insert(subset);
        }
    }
    if seen.is_empty() {
        return Err(Error::Contract("no label sets to enumerate".into()));
    }
    seen.into_iter().map(Query::new).collect()
}
