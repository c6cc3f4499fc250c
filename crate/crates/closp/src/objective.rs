//! Symmetric contrastive objective over image/text pairs, with an optional
//! location term, and a learnable temperature.
//!
//! Both losses exist twice: as plain functions of embedding values, used by
//! tests and evaluation, and as graph builders that extend a [`ComputeGraph`]
//! so training can differentiate through them. The two paths must agree to
//! machine precision; a test pins that.

use crate::error::{Error, Result};
use crate::ndmath::{ComputeGraph, NodeId, Tensor};

/// Loss temperature, parameterized by its logarithm so tau stays positive
/// no matter what the optimizer does to the underlying value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Temperature {
    log_tau: f64,
}

/// Conventional starting temperature for contrastive pretraining.
pub const INITIAL_TAU: f64 = 0.07;

impl Temperature {
    pub fn new(tau: f64) -> Result<Self> {
        if !(tau > 0.0) {
            return Err(Error::Domain(format!("temperature must be positive, got {tau}")));
        }
        Ok(Temperature { log_tau: tau.ln() })
    }

    pub fn from_log(log_tau: f64) -> Self {
        Temperature { log_tau }
    }

    pub fn tau(&self) -> f64 {
        self.log_tau.exp()
    }

    pub fn log_tau(&self) -> f64 {
        self.log_tau
    }
}

impl Default for Temperature {
    fn default() -> Self {
        Temperature {
            log_tau: INITIAL_TAU.ln(),
        }
    }
}

/// A batch of aligned embeddings: row k of every matrix belongs to the same
/// corpus item. Rows are unit vectors; the constructor enforces it.
#[derive(Debug, Clone)]
pub struct BatchEmbeddings {
    img: Tensor,
    txt: Tensor,
    loc: Option<Tensor>,
}

impl BatchEmbeddings {
    /// Builds a batch from per-item embedding vectors (rank 1, all of one
    /// dimension). `loc_rows`, when given, must pair up with the others.
    pub fn from_rows(
        img_rows: &[Tensor],
        txt_rows: &[Tensor],
        loc_rows: Option<&[Tensor]>,
    ) -> Result<Self> {
        if img_rows.is_empty() {
            return Err(Error::Contract("batch must contain at least one item".into()));
        }
        if txt_rows.len() != img_rows.len() {
            return Err(Error::Shape(format!(
                "{} image rows but {} text rows",
                img_rows.len(),
                txt_rows.len()
            )));
        }
        if let Some(rows) = loc_rows {
            if rows.len() != img_rows.len() {
                return Err(Error::Shape(format!(
                    "{} image rows but {} location rows",
                    img_rows.len(),
                    rows.len()
                )));
            }
        }
        let d = img_rows[0].len();
        Ok(BatchEmbeddings {
            img: stack_unit_rows(img_rows, d, "image")?,
            txt: stack_unit_rows(txt_rows, d, "text")?,
            loc: loc_rows.map(|rows| stack_unit_rows(rows, d, "location")).transpose()?,
        })
    }

    pub fn len(&self) -> usize {
        self.img.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dim(&self) -> usize {
        self.img.shape()[1]
    }

    pub fn img(&self) -> &Tensor {
        &self.img
    }

    pub fn txt(&self) -> &Tensor {
        &self.txt
    }

    pub fn loc(&self) -> Option<&Tensor> {
        self.loc.as_ref()
    }
}

fn stack_unit_rows(rows: &[Tensor], d: usize, what: &str) -> Result<Tensor> {
    let mut values = Vec::with_capacity(rows.len() * d);
    for (k, row) in rows.iter().enumerate() {
        if row.rank() != 1 || row.len() != d {
            return Err(Error::Shape(format!(
                "{what} row {k} has shape {:?}, expected [{d}]",
                row.shape()
            )));
        }
        let norm = row.norm();
        if (norm - 1.0).abs() > 1e-6 {
            return Err(Error::Contract(format!(
                "{what} row {k} has norm {norm}, embeddings must be unit vectors"
            )));
        }
        values.extend_from_slice(row.values());
    }
    Tensor::new(&[rows.len(), d], values)
}

/// Mean of the two cross-entropy directions of a square logit matrix whose
/// diagonal holds the positive pairs: rows as anchors plus columns as
/// anchors, averaged.
pub fn symmetric_cross_entropy_from_logits(logits: &Tensor) -> Result<f64> {
    let n = match logits.shape() {
        [r, c] if r == c => *r,
        other => {
            return Err(Error::Shape(format!(
                "logits must be square, got {other:?}"
            )))
        }
    };
    let by_rows = anchored_cross_entropy(logits, n)?;
    let by_cols = anchored_cross_entropy(&logits.transposed()?, n)?;
    Ok(0.5 * (by_rows + by_cols))
}

fn anchored_cross_entropy(logits: &Tensor, n: usize) -> Result<f64> {
    let mut total = 0.0;
    for k in 0..n {
        let row = Tensor::new(&[n], logits.values()[k * n..(k + 1) * n].to_vec())?;
        total -= row.log_softmax_row()?.values()[k];
    }
    Ok(total / n as f64)
}

fn scaled_similarities(a: &Tensor, b: &Tensor, temp: Temperature) -> Result<Tensor> {
    Ok(a.matmul(&b.transposed()?)?.scale(1.0 / temp.tau()))
}

/// Symmetric image/text contrastive loss: cross-entropy of matching the
/// diagonal, averaged over the image-anchored and text-anchored directions.
pub fn contrastive_loss(batch: &BatchEmbeddings, temp: Temperature) -> Result<f64> {
    let logits = scaled_similarities(batch.img(), batch.txt(), temp)?;
    symmetric_cross_entropy_from_logits(&logits)
}

/// Contrastive loss with a location term: the image/text loss weighted by
/// `alpha` plus the location/image loss weighted by `1 - alpha`. `alpha = 1`
/// recovers [`contrastive_loss`] exactly.
pub fn geo_loss(batch: &BatchEmbeddings, temp: Temperature, alpha: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Domain(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    let loc = batch
        .loc()
        .ok_or_else(|| Error::Contract("geo loss needs location embeddings".into()))?;
    let text_image = contrastive_loss(batch, temp)?;
    let loc_logits = scaled_similarities(loc, batch.img(), temp)?;
    let loc_image = symmetric_cross_entropy_from_logits(&loc_logits)?;
    Ok(alpha * text_image + (1.0 - alpha) * loc_image)
}

fn inverse_tau_node(g: &mut ComputeGraph, log_tau: NodeId) -> NodeId {
    let neg = g.scale(log_tau, -1.0);
    g.exp(neg)
}

fn anchored_node(
    g: &mut ComputeGraph,
    a: NodeId,
    b: NodeId,
    inv_tau: NodeId,
) -> Result<NodeId> {
    let bt = g.transpose(b)?;
    let sim = g.matmul(a, bt)?;
    let logits = g.mul_scalar(sim, inv_tau)?;
    let ls = g.log_softmax_rows(logits)?;
    let d = g.diag(ls)?;
    let m = g.mean(d);
    Ok(g.scale(m, -1.0))
}

fn symmetric_node(
    g: &mut ComputeGraph,
    a: NodeId,
    b: NodeId,
    inv_tau: NodeId,
) -> Result<NodeId> {
    let ab = anchored_node(g, a, b, inv_tau)?;
    let ba = anchored_node(g, b, a, inv_tau)?;
    let total = g.add(ab, ba)?;
    Ok(g.scale(total, 0.5))
}

fn concat_batch(g: &mut ComputeGraph, rows: &[NodeId], what: &str) -> Result<NodeId> {
    if rows.is_empty() {
        return Err(Error::Contract(format!("batch has no {what} rows")));
    }
    g.concat_rows(rows)
}

/// Graph form of [`contrastive_loss`]. `img_rows` and `txt_rows` are 1 x D
/// embedding nodes, `log_tau` a scalar node; the loss is differentiable
/// w.r.t. all of them.
pub fn contrastive_loss_node(
    g: &mut ComputeGraph,
    img_rows: &[NodeId],
    txt_rows: &[NodeId],
    log_tau: NodeId,
) -> Result<NodeId> {
    if img_rows.len() != txt_rows.len() {
        return Err(Error::Shape(format!(
            "{} image rows but {} text rows",
            img_rows.len(),
            txt_rows.len()
        )));
    }
    let img = concat_batch(g, img_rows, "image")?;
    let txt = concat_batch(g, txt_rows, "text")?;
    let inv_tau = inverse_tau_node(g, log_tau);
    symmetric_node(g, img, txt, inv_tau)
}

/// Graph form of [`geo_loss`].
pub fn geo_loss_node(
    g: &mut ComputeGraph,
    img_rows: &[NodeId],
    txt_rows: &[NodeId],
    loc_rows: &[NodeId],
    log_tau: NodeId,
    alpha: f64,
) -> Result<NodeId> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Domain(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    if img_rows.len() != txt_rows.len() || img_rows.len() != loc_rows.len() {
        return Err(Error::Shape(format!(
            "row counts disagree: {} image, {} text, {} location",
            img_rows.len(),
            txt_rows.len(),
            loc_rows.len()
        )));
    }
    let img = concat_batch(g, img_rows, "image")?;
    let txt = concat_batch(g, txt_rows, "text")?;
    let loc = concat_batch(g, loc_rows, "location")?;
    let inv_tau = inverse_tau_node(g, log_tau);
    let text_image = symmetric_node(g, img, txt, inv_tau)?;
    let loc_image = symmetric_node(g, loc, img, inv_tau)?;
    let weighted_ti = g.scale(text_image, alpha);
    let weighted_li = g.scale(loc_image, 1.0 - alpha);
    g.add(weighted_ti, weighted_li)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ndmath::grad_check;
    use crate::rng::{substream, Stream};
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use rand_chacha::ChaCha12Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn unit_row(rng: &mut ChaCha12Rng, d: usize) -> Tensor {
        loop {
            let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
            let t = Tensor::new(&[d], v).unwrap();
            if t.norm() > 1e-6 {
                return t.l2_normalized().unwrap();
            }
        }
    }

    fn random_batch(seed: u64, n: usize, d: usize, with_loc: bool) -> BatchEmbeddings {
        let mut rng = substream(seed, Stream::Probe);
        let img: Vec<Tensor> = (0..n).map(|_| unit_row(&mut rng, d)).collect();
        let txt: Vec<Tensor> = (0..n).map(|_| unit_row(&mut rng, d)).collect();
        let loc: Vec<Tensor> = (0..n).map(|_| unit_row(&mut rng, d)).collect();
        BatchEmbeddings::from_rows(&img, &txt, with_loc.then_some(&loc[..])).unwrap()
    }

    fn basis(d: usize, i: usize) -> Tensor {
        let mut v = vec![0.0; d];
        v[i] = 1.0;
        Tensor::new(&[d], v).unwrap()
    }

    #[test]
    fn single_item_batch_has_zero_loss() {
        let row = [basis(4, 2)];
        let batch = BatchEmbeddings::from_rows(&row, &row, None).unwrap();
        let loss = contrastive_loss(&batch, Temperature::default()).unwrap();
        assert_eq!(loss, 0.0);
    }

    #[test]
    fn two_orthonormal_pairs_at_unit_temperature() {
        let rows = [basis(3, 0), basis(3, 1)];
        let batch = BatchEmbeddings::from_rows(&rows, &rows, None).unwrap();
        let loss = contrastive_loss(&batch, Temperature::new(1.0).unwrap()).unwrap();
        let expected = (1.0 + (-1.0f64).exp()).ln();
        assert_abs_diff_eq!(loss, expected, epsilon = 1e-12);
        assert_abs_diff_eq!(loss, 0.313_261_687_518_222_8, epsilon = 1e-12);
    }

    #[test]
    fn identical_embeddings_cost_ln_n() {
        let n = 5;
        let rows: Vec<Tensor> = (0..n).map(|_| basis(7, 3)).collect();
        let batch = BatchEmbeddings::from_rows(&rows, &rows, None).unwrap();
        let loss = contrastive_loss(&batch, Temperature::new(0.37).unwrap()).unwrap();
        assert_abs_diff_eq!(loss, (n as f64).ln(), epsilon = 1e-12);
    }

    #[test]
    fn losses_are_invariant_under_batch_permutation() {
        let n = 6;
        let d = 8;
        let mut rng = substream(21, Stream::Probe);
        let img: Vec<Tensor> = (0..n).map(|_| unit_row(&mut rng, d)).collect();
        let txt: Vec<Tensor> = (0..n).map(|_| unit_row(&mut rng, d)).collect();
        let loc: Vec<Tensor> = (0..n).map(|_| unit_row(&mut rng, d)).collect();
        let perm = [4, 0, 5, 2, 1, 3];
        let pick = |rows: &[Tensor]| -> Vec<Tensor> {
            perm.iter().map(|&i| rows[i].clone()).collect()
        };

        let a = BatchEmbeddings::from_rows(&img, &txt, Some(&loc)).unwrap();
        let b = BatchEmbeddings::from_rows(&pick(&img), &pick(&txt), Some(&pick(&loc))).unwrap();
        let temp = Temperature::default();
        assert_abs_diff_eq!(
            contrastive_loss(&a, temp).unwrap(),
            contrastive_loss(&b, temp).unwrap(),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            geo_loss(&a, temp, 0.3).unwrap(),
            geo_loss(&b, temp, 0.3).unwrap(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn losses_are_nonnegative_on_random_batches() {
        for seed in 0..5 {
            let batch = random_batch(seed, 7, 10, true);
            let temp = Temperature::default();
            assert!(contrastive_loss(&batch, temp).unwrap() >= 0.0);
            assert!(geo_loss(&batch, temp, 0.5).unwrap() >= 0.0);
        }
    }

    #[test]
    fn random_unit_embeddings_cost_about_ln_n() {
        let n = 64;
        let d = 32;
        let expected = (n as f64).ln();
        let temp = Temperature::new(1.0).unwrap();
        for seed in 0..20 {
            let batch = random_batch(100 + seed, n, d, false);
            let loss = contrastive_loss(&batch, temp).unwrap();
            assert!(
                (loss - expected).abs() <= 0.05 * expected,
                "seed {seed}: loss {loss} vs ln {n} = {expected}"
            );
        }
    }

    #[test]
    fn alpha_one_recovers_the_contrastive_loss() {
        let batch = random_batch(3, 5, 12, true);
        let temp = Temperature::default();
        let plain = contrastive_loss(&batch, temp).unwrap();
        let geo = geo_loss(&batch, temp, 1.0).unwrap();
        assert_abs_diff_eq!(geo, plain, epsilon = 1e-12);
    }

    #[test]
    fn locations_equal_to_texts_make_both_halves_agree() {
        let mut rng = substream(8, Stream::Probe);
        let n = 4;
        let d = 9;
        let img: Vec<Tensor> = (0..n).map(|_| unit_row(&mut rng, d)).collect();
        let txt: Vec<Tensor> = (0..n).map(|_| unit_row(&mut rng, d)).collect();
        let batch = BatchEmbeddings::from_rows(&img, &txt, Some(&txt)).unwrap();
        let temp = Temperature::default();
        let geo = geo_loss(&batch, temp, 0.5).unwrap();
        let plain = contrastive_loss(&batch, temp).unwrap();
        assert_abs_diff_eq!(geo, plain, epsilon = 1e-12);
    }

    #[test]
    fn two_orthonormal_triples_match_the_pairwise_closed_form() {
        let rows = [basis(3, 0), basis(3, 1)];
        let batch = BatchEmbeddings::from_rows(&rows, &rows, Some(&rows)).unwrap();
        let loss = geo_loss(&batch, Temperature::new(1.0).unwrap(), 0.5).unwrap();
        assert_abs_diff_eq!(loss, (1.0 + (-1.0f64).exp()).ln(), epsilon = 1e-12);
    }

    #[test]
    fn geo_loss_rejects_bad_inputs() {
        let no_loc = random_batch(4, 3, 6, false);
        let with_loc = random_batch(4, 3, 6, true);
        let temp = Temperature::default();
        assert!(matches!(
            geo_loss(&no_loc, temp, 0.5),
            Err(Error::Contract(_))
        ));
        assert!(matches!(
            geo_loss(&with_loc, temp, 1.2),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            geo_loss(&with_loc, temp, -0.1),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            geo_loss(&with_loc, temp, f64::NAN),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn batch_construction_validates_rows() {
        assert!(matches!(
            BatchEmbeddings::from_rows(&[], &[], None),
            Err(Error::Contract(_))
        ));
        let a = [basis(4, 0), basis(4, 1)];
        let b = [basis(4, 0)];
        assert!(matches!(
            BatchEmbeddings::from_rows(&a, &b, None),
            Err(Error::Shape(_))
        ));
        let long = [basis(4, 0).scale(1.01), basis(4, 1)];
        assert!(matches!(
            BatchEmbeddings::from_rows(&long, &a, None),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn graph_losses_match_the_value_losses() {
        let n = 5;
        let d = 8;
        let mut rng = substream(31, Stream::Probe);
        let img: Vec<Tensor> = (0..n).map(|_| unit_row(&mut rng, d)).collect();
        let txt: Vec<Tensor> = (0..n).map(|_| unit_row(&mut rng, d)).collect();
        let loc: Vec<Tensor> = (0..n).map(|_| unit_row(&mut rng, d)).collect();
        let batch = BatchEmbeddings::from_rows(&img, &txt, Some(&loc)).unwrap();
        let temp = Temperature::default();

        let mut g = ComputeGraph::new();
        let as_row = |g: &mut ComputeGraph, t: &Tensor| {
            g.constant(Tensor::new(&[1, d], t.values().to_vec()).unwrap())
        };
        let img_ids: Vec<NodeId> = img.iter().map(|t| as_row(&mut g, t)).collect();
        let txt_ids: Vec<NodeId> = txt.iter().map(|t| as_row(&mut g, t)).collect();
        let loc_ids: Vec<NodeId> = loc.iter().map(|t| as_row(&mut g, t)).collect();
        let log_tau = g.constant(Tensor::scalar(temp.log_tau()));

        let c = contrastive_loss_node(&mut g, &img_ids, &txt_ids, log_tau).unwrap();
        assert_abs_diff_eq!(
            g.value(c).values()[0],
            contrastive_loss(&batch, temp).unwrap(),
            epsilon = 1e-12
        );
        let geo = geo_loss_node(&mut g, &img_ids, &txt_ids, &loc_ids, log_tau, 0.4).unwrap();
        assert_abs_diff_eq!(
            g.value(geo).values()[0],
            geo_loss(&batch, temp, 0.4).unwrap(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn temperature_gradient_passes_the_numeric_check() {
        let n = 4;
        let d = 6;
        let mut rng = substream(17, Stream::Probe);
        let img: Vec<Tensor> = (0..n).map(|_| unit_row(&mut rng, d)).collect();
        let txt: Vec<Tensor> = (0..n).map(|_| unit_row(&mut rng, d)).collect();
        let rel = grad_check(
            |g, ids| {
                let rows = |g: &mut ComputeGraph, src: &[Tensor]| -> Vec<NodeId> {
                    src.iter()
                        .map(|t| g.constant(Tensor::new(&[1, d], t.values().to_vec()).unwrap()))
                        .collect()
                };
                let img_ids = rows(g, &img);
                let txt_ids = rows(g, &txt);
                contrastive_loss_node(g, &img_ids, &txt_ids, ids[0])
            },
            &[Tensor::scalar(INITIAL_TAU.ln())],
            1e-4,
        )
        .unwrap();
        assert!(rel <= 1e-4, "relative error {rel}");
    }

    #[test]
    fn lowering_an_off_diagonal_logit_never_raises_the_loss() {
        let n = 5;
        let mut rng = substream(42, Stream::Probe);
        let base: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let logits = Tensor::new(&[n, n], base.clone()).unwrap();
        let loss = symmetric_cross_entropy_from_logits(&logits).unwrap();
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let mut bumped = base.clone();
                bumped[i * n + j] -= 0.4;
                let lower = symmetric_cross_entropy_from_logits(
                    &Tensor::new(&[n, n], bumped).unwrap(),
                )
                .unwrap();
                assert!(
                    lower <= loss + 1e-12,
                    "decreasing logit ({i},{j}) raised the loss"
                );
            }
        }
    }
}
