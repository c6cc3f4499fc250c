//! Iterative multi-label stratified splitting.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{substream, Stream};
use crate::stats::chi_square_homogeneity;
use crate::vocab::LABEL_COUNT;

use super::{CorpusItem, SplitResult};

/// Splits a corpus into a training part and a retrieval part while keeping
/// per-label proportions close to `train_fraction`.
///
/// Iterative stratification: repeatedly take the label with the fewest
/// unassigned items and hand its items to the side with the greatest
/// remaining demand for that label; ties fall back to overall remaining
/// capacity, then to a seeded coin. Items are visited in seeded-random
/// order, not corpus order: the demand rule is greedy, so a fixed sweep
/// would route the head of the corpus to the larger side and correlate
/// the split with however the corpus happens to be laid out (for the
/// synthetic generator, one whole modality block). The returned result
/// carries the chi-square homogeneity statistic between the two sides'
/// label count distributions.
pub fn stratified_split(
    corpus: &[CorpusItem],
    train_fraction: f64,
    seed: u64,
) -> Result<SplitResult> {
    if corpus.is_empty() {
        return Err(Error::Contract("cannot split an empty corpus".into()));
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Domain(format!(
            "train fraction must lie strictly inside (0, 1), got {train_fraction}"
        )));
    }
    let mut rng = substream(seed, Stream::Split);
    let n = corpus.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);

    let mut assigned: Vec<Option<bool>> = vec![None; n]; // true = train
    let mut remaining_with: [usize; LABEL_COUNT] = [0; LABEL_COUNT];
    for item in corpus {
        for l in item.labels.indices() {
            remaining_with[l] += 1;
        }
    }
    // Fractional demands per side: per-label and overall.
    let fractions = [train_fraction, 1.0 - train_fraction];
    let mut label_demand = [[0.0; LABEL_COUNT]; 2];
    for (side, frac) in fractions.iter().enumerate() {
        for l in 0..LABEL_COUNT {
            label_demand[side][l] = remaining_with[l] as f64 * frac;
        }
    }
    let mut total_demand = [n as f64 * fractions[0], n as f64 * fractions[1]];

    let mut unassigned = n;
    while unassigned > 0 {
        let rarest = (0..LABEL_COUNT)
            .filter(|&l| remaining_with[l] > 0)
            .min_by_key(|&l| remaining_with[l]);
        // Items whose every label is exhausted cannot exist: counts track
        // unassigned items, and every item has at least one label.
        let l = match rarest {
            Some(l) => l,
            None => unreachable!("unassigned items but no remaining labels"),
        };
        for &k in &order {
            if assigned[k].is_some() || !corpus[k].labels.contains(l) {
                continue;
            }
            let side = pick_side(&label_demand, &total_demand, l, &mut rng);
            assigned[k] = Some(side == 0);
            unassigned -= 1;
            total_demand[side] -= 1.0;
            for lab in corpus[k].labels.indices() {
                remaining_with[lab] -= 1;
                label_demand[side][lab] -= 1.0;
            }
        }
    }

    let mut train_ids = Vec::new();
    let mut retrieval_ids = Vec::new();
    let mut train_counts = [0u64; LABEL_COUNT];
    let mut retr_counts = [0u64; LABEL_COUNT];
    for (k, item) in corpus.iter().enumerate() {
        let to_train = assigned[k].expect("all items assigned");
        if to_train {
            train_ids.push(item.id);
            for l in item.labels.indices() {
                train_counts[l] += 1;
            }
        } else {
            retrieval_ids.push(item.id);
            for l in item.labels.indices() {
                retr_counts[l] += 1;
            }
        }
    }
    train_ids.sort_unstable();
    retrieval_ids.sort_unstable();
    let (chi2_stat, p_value) = chi_square_homogeneity(&train_counts, &retr_counts)?;
    Ok(SplitResult {
        train_ids,
        retrieval_ids,
        chi2_stat,
        p_value,
    })
}

fn pick_side(
    label_demand: &[[f64; LABEL_COUNT]; 2],
    total_demand: &[f64; 2],
    l: usize,
    rng: &mut impl Rng,
) -> usize {
    let (a, b) = (label_demand[0][l], label_demand[1][l]);
    if a > b {
        0
    } else if b > a {
        1
    } else if total_demand[0] > total_demand[1] {
        0
    } else if total_demand[1] > total_demand[0] {
        1
    } else if rng.gen::<bool>() {
        0
    } else {
        1
    }
}
