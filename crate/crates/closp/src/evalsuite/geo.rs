//! Geographic distance, correlation, the spatial-distance probe, and the
//! label-distribution homogeneity test.

use rand::seq::index;

use crate::corpus::CorpusItem;
use crate::error::{Error, Result};
use crate::rng::{substream, Stream};
use crate::stats;
use crate::trainer::ModelCheckpoint;
use crate::vocab::LABEL_COUNT;

pub const EARTH_RADIUS_KM: f64 = 6371.0;

/// Great-circle distance between two lon/lat points in kilometers.
pub fn haversine_km(lon1: f64, lat1: f64, lon2: f64, lat2: f64) -> Result<f64> {
    for (lon, lat) in [(lon1, lat1), (lon2, lat2)] {
        if !((-180.0..=180.0).contains(&lon) && (-90.0..=90.0).contains(&lat)) {
            return Err(Error::Domain(format!(
                "coordinates out of range: lon {lon}, lat {lat}"
            )));
        }
    }
    let phi1 = lat1.to_radians();
    let phi2 = lat2.to_radians();
    let dphi = (lat2 - lat1).to_radians();
    let dlambda = (lon2 - lon1).to_radians();
    let a = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    Ok(2.0 * EARTH_RADIUS_KM * a.sqrt().min(1.0).asin())
}

/// Pearson and Spearman correlation of two series.
pub fn correlation(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    if x.len() < 3 {
        return Err(Error::Contract(format!(
            "correlation needs at least 3 points, got {}",
            x.len()
        )));
    }
    Ok((stats::pearson(x, y)?, stats::spearman(x, y)?))
}

/// One positional pairing from the two disjoint probe samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbePair {
    pub pair_id: usize,
    pub id_a: u64,
    pub id_b: u64,
    pub km: f64,
    pub cosine_distance: f64,
}

#[derive(Debug, Clone)]
pub struct SpatialProbe {
    pub pearson: f64,
    pub spearman: f64,
    pub pairs: Vec<ProbePair>,
}

impl SpatialProbe {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("pair_id,km,cosine_distance\n");
        for p in &self.pairs {
            out.push_str(&format!("{},{},{}\n", p.pair_id, p.km, p.cosine_distance));
        }
        out
    }
}

/// Draws two disjoint uniform samples of `n` items, pairs them positionally,
/// and correlates geographic distance with embedding cosine distance.
pub fn spatial_probe(
    checkpoint: &ModelCheckpoint,
    corpus: &[CorpusItem],
    n: usize,
    seed: u64,
) -> Result<SpatialProbe> {
    if n < 3 {
        return Err(Error::Contract(format!(
            "probe needs at least 3 pairs for correlation, got {n}"
        )));
    }
    if corpus.len() < 2 * n {
        return Err(Error::Data(format!(
            "probe needs {} items for {n} disjoint pairs, corpus has {}",
            2 * n,
            corpus.len()
        )));
    }
    let mut rng = substream(seed, Stream::Probe);
    let picks = index::sample(&mut rng, corpus.len(), 2 * n).into_vec();
    let mut pairs = Vec::with_capacity(n);
    for (pair_id, (&ia, &ib)) in picks[..n].iter().zip(&picks[n..]).enumerate() {
        let (a, b) = (&corpus[ia], &corpus[ib]);
        let ea = checkpoint.model.encode_image(&a.image, a.modality)?;
        let eb = checkpoint.model.encode_image(&b.image, b.modality)?;
        pairs.push(ProbePair {
            pair_id,
            id_a: a.id,
            id_b: b.id,
            km: haversine_km(a.lon, a.lat, b.lon, b.lat)?,
            cosine_distance: 1.0 - ea.dot(&eb)?,
        });
    }
    let km: Vec<f64> = pairs.iter().map(|p| p.km).collect();
    let cd: Vec<f64> = pairs.iter().map(|p| p.cosine_distance).collect();
    let (pearson, spearman) = correlation(&km, &cd)?;
    Ok(SpatialProbe {
        pearson,
        spearman,
        pairs,
    })
}

/// Two-sample homogeneity test over the 12 per-label counts, 11 degrees of
/// freedom.
pub fn chi_square_labels(counts_a: &[u64], counts_b: &[u64]) -> Result<(f64, f64)> {
    if counts_a.len() != LABEL_COUNT || counts_b.len() != LABEL_COUNT {
        return Err(Error::Shape(format!(
            "expected {LABEL_COUNT} label counts per side, got {} and {}",
            counts_a.len(),
            counts_b.len()
        )));
    }
    stats::chi_square_homogeneity(counts_a, counts_b)
}
