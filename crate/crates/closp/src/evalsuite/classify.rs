//! Zero-shot multilabel classification over the 12-class vocabulary and
//! macro-averaged precision/recall/F1.

use crate::corpus::CorpusItem;
use crate::error::{Error, Result};
use crate::ndmath::Tensor;
use crate::trainer::ModelCheckpoint;
use crate::vocab::{LabelSet, LABEL_COUNT};

/// Item-by-class cosine similarities together with the global mean used as
/// the decision threshold.
#[derive(Debug, Clone)]
pub struct SimilarityMatrix {
    scores: Tensor,
    threshold: f64,
}

impl SimilarityMatrix {
    /// `scores` must be [items, 12]. The threshold is the mean over every
    /// entry of the whole matrix.
    pub fn new(scores: Tensor) -> Result<Self> {
        match scores.shape() {
            [_, c] if *c == LABEL_COUNT => {}
            other => {
                return Err(Error::Shape(format!(
                    "similarity matrix must be items x {LABEL_COUNT}, got {other:?}"
                )))
            }
        }
        let threshold = scores.values().iter().sum::<f64>() / scores.len() as f64;
        Ok(SimilarityMatrix { scores, threshold })
    }

    pub fn items(&self) -> usize {
        self.scores.shape()[0]
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn score(&self, item: usize, class: usize) -> f64 {
        self.scores.at(&[item, class])
    }

    /// One label set per item: class j is predicted for item i iff
    /// S[i][j] strictly exceeds the global-mean threshold.
    pub fn predictions(&self) -> Vec<LabelSet> {
        (0..self.items())
            .map(|i| {
                let mut set = LabelSet::new();
                for j in 0..LABEL_COUNT {
                    if self.score(i, j) > self.threshold {
                        set.insert(j);
                    }
                }
                set
            })
            .collect()
    }
}

/// Scores every item against every class keyword and thresholds at the
/// matrix mean. Returns predictions aligned with `corpus` order.
pub fn zero_shot_classify(
    checkpoint: &ModelCheckpoint,
    corpus: &[CorpusItem],
) -> Result<(Vec<LabelSet>, SimilarityMatrix)> {
    if corpus.is_empty() {
        return Err(Error::Contract("cannot classify an empty corpus".into()));
    }
    let mut class_vectors = Vec::with_capacity(LABEL_COUNT);
    for j in 0..LABEL_COUNT {
        let singleton = LabelSet::from_indices(&[j])?;
        class_vectors.push(checkpoint.model.encode_text(&singleton)?);
    }
    let mut values = Vec::with_capacity(corpus.len() * LABEL_COUNT);
    for item in corpus {
        let u = checkpoint.model.encode_image(&item.image, item.modality)?;
        for v in &class_vectors {
            values.push(u.dot(v)?);
        }
    }
    let matrix = SimilarityMatrix::new(Tensor::new(&[corpus.len(), LABEL_COUNT], values)?)?;
    Ok((matrix.predictions(), matrix))
}

/// Per-class precision, recall, and F1; 0/0 counts as 0 throughout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassPrf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Items truly carrying this class.
    pub support: u64,
}

/// Macro scores: unweighted means of the per-class values over all 12
/// classes, absent classes included.
#[derive(Debug, Clone)]
pub struct MacroPrf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub per_class: Vec<ClassPrf>,
}

pub fn macro_prf(predictions: &[LabelSet], truth: &[LabelSet]) -> Result<MacroPrf> {
    if predictions.len() != truth.len() {
        return Err(Error::Shape(format!(
            "{} predictions against {} truth sets",
            predictions.len(),
            truth.len()
        )));
    }
    let ratio = |num: f64, den: f64| if den == 0.0 { 0.0 } else { num / den };
    let mut per_class = Vec::with_capacity(LABEL_COUNT);
    for j in 0..LABEL_COUNT {
        let mut tp = 0u64;
        let mut fp = 0u64;
        let mut fn_ = 0u64;
        let mut support = 0u64;
        for (pred, real) in predictions.iter().zip(truth) {
            let (p, t) = (pred.contains(j), real.contains(j));
            support += u64::from(t);
            match (p, t) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                (false, false) => {}
            }
        }
        let precision = ratio(tp as f64, (tp + fp) as f64);
        let recall = ratio(tp as f64, (tp + fn_) as f64);
        let f1 = ratio(2.0 * precision * recall, precision + recall);
        per_class.push(ClassPrf {
            precision,
            recall,
            f1,
            support,
        });
    }
    let n = LABEL_COUNT as f64;
    Ok(MacroPrf {
        precision: per_class.iter().map(|c| c.precision).sum::<f64>() / n,
        recall: per_class.iter().map(|c| c.recall).sum::<f64>() / n,
        f1: per_class.iter().map(|c| c.f1).sum::<f64>() / n,
        per_class,
    })
}

/// The `n` most frequent classes in the truth sets, ties resolved toward
/// the lower vocabulary index. This is the baseline classifier's fixed
/// prediction.
pub fn most_frequent_labels(truth: &[LabelSet], n: usize) -> LabelSet {
    let mut counts = [0u64; LABEL_COUNT];
    for t in truth {
        for j in t.indices() {
            counts[j] += 1;
        }
    }
    let mut order: Vec<usize> = (0..LABEL_COUNT).collect();
    order.sort_by_key(|&j| (std::cmp::Reverse(counts[j]), j));
    let mut set = LabelSet::new();
    for &j in order.iter().take(n) {
        set.insert(j);
    }
    set
}
