//! Training loop: batch composition over the two image modalities, one Adam
//! instance across all parameters including the temperature, and a
//! warmup-plus-cosine learning rate schedule.

mod checkpoint;
mod optim;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::CorpusItem;
use crate::encoders::{
    image_embedding, location_embedding, text_embedding, EncoderConfig, Modality, Model,
};
use crate::error::{Error, Result};
use crate::ndmath::ComputeGraph;
use crate::objective::{contrastive_loss_node, geo_loss_node};
use crate::rng::{substream, Stream};

pub use checkpoint::ModelCheckpoint;
pub use optim::{adam_step, lr_schedule, AdamState, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Items per step. Even; joint batches take half from each modality.
    pub batch_size: usize,
    pub max_lr: f64,
    /// None derives 5% of the total step count.
    pub warmup_steps: Option<usize>,
    /// Weight of the image/text term. Must be exactly 1 without location.
    pub alpha: f64,
    pub seed: u64,
    pub use_location: bool,
    /// Restricts training to one image modality; None trains on both.
    pub modality: Option<Modality>,
    /// Share of the corpus the stratified split assigns to training. The
    /// loop itself only sees the resulting train split; the value rides
    /// along so later pipeline stages can re-derive the same split.
    pub train_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 64,
            max_lr: 1e-4,
            warmup_steps: None,
            alpha: 1.0,
            seed: 0,
            use_location: false,
            modality: None,
            train_fraction: 0.2,
        }
    }
}

impl TrainConfig {
    /// Default configuration for the location-aware objective.
    pub fn geo() -> Self {
        Self {
            alpha: 0.5,
            use_location: true,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size < 2 || self.batch_size % 2 != 0 {
            return Err(Error::Config(format!(
                "batch_size must be even and at least 2, got {}",
                self.batch_size
            )));
        }
        if !(self.max_lr > 0.0) {
            return Err(Error::Config(format!(
                "max_lr must be positive, got {}",
                self.max_lr
            )));
        }
        if self.use_location {
            if !(self.alpha > 0.0 && self.alpha <= 1.0) {
                return Err(Error::Config(format!(
                    "alpha must lie in (0, 1] when location is used, got {}",
                    self.alpha
                )));
            }
        } else if self.alpha != 1.0 {
            return Err(Error::Config(format!(
                "alpha must be 1 when location is unused, got {}",
                self.alpha
            )));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config(format!(
                "train_fraction must lie in (0, 1), got {}",
                self.train_fraction
            )));
        }
        Ok(())
    }

    /// Applies one `key=value` assignment; used by config file parsing.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
        where
            T::Err: std::fmt::Display,
        {
            value
                .parse()
                .map_err(|e| Error::Config(format!("{key}: cannot parse {value:?}: {e}")))
        }
        match key {
            "epochs" => self.epochs = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "max_lr" => self.max_lr = parse(key, value)?,
            "warmup_steps" => self.warmup_steps = Some(parse(key, value)?),
            "alpha" => self.alpha = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "use_location" => self.use_location = parse(key, value)?,
            "modality" => self.modality = Some(Modality::parse(value)?),
            "train_fraction" => self.train_fraction = parse(key, value)?,
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }
}

/// One training example: the corpus item plus its rendered label text.
#[derive(Debug, Clone)]
pub struct BatchEntry<'a> {
    pub item: &'a CorpusItem,
    pub text: String,
}

impl<'a> BatchEntry<'a> {
    fn new(item: &'a CorpusItem) -> Self {
        let text = item.labels.render();
        BatchEntry { item, text }
    }
}

/// Draws `m` SAR and `m` MSI items without replacement within the batch,
/// interleaves them, then shuffles. Deterministic given the rng state.
pub fn compose_batch<'a, R: Rng>(
    items: &'a [CorpusItem],
    m: usize,
    rng: &mut R,
) -> Result<Vec<BatchEntry<'a>>> {
    if m == 0 {
        return Err(Error::Contract("batch half-size must be positive".into()));
    }
    let sar = draw(items, m, Modality::Sar, rng)?;
    let msi = draw(items, m, Modality::Msi, rng)?;
    let mut batch: Vec<BatchEntry> = Vec::with_capacity(2 * m);
    for (s, x) in sar.into_iter().zip(msi) {
        batch.push(s);
        batch.push(x);
    }
    batch.shuffle(rng);
    Ok(batch)
}

/// Draws `n` items of one modality without replacement within the batch.
fn compose_batch_single<'a, R: Rng>(
    items: &'a [CorpusItem],
    n: usize,
    modality: Modality,
    rng: &mut R,
) -> Result<Vec<BatchEntry<'a>>> {
    if n == 0 {
        return Err(Error::Contract("batch size must be positive".into()));
    }
    let mut batch = draw(items, n, modality, rng)?;
    batch.shuffle(rng);
    Ok(batch)
}

fn draw<'a, R: Rng>(
    items: &'a [CorpusItem],
    n: usize,
    modality: Modality,
    rng: &mut R,
) -> Result<Vec<BatchEntry<'a>>> {
    let pool: Vec<&CorpusItem> = items.iter().filter(|i| i.modality == modality).collect();
    if pool.len() < n {
        return Err(Error::Data(format!(
            "need {n} {modality} items per batch, train split has {}",
            pool.len()
        )));
    }
    let picks = rand::seq::index::sample(rng, pool.len(), n);
    Ok(picks.into_iter().map(|i| BatchEntry::new(pool[i])).collect())
}

/// A finished training run: the checkpoint, the mean loss per epoch, and
/// how many location-encoder evaluations happened.
#[derive(Debug)]
pub struct TrainOutcome {
    pub checkpoint: ModelCheckpoint,
    pub epoch_losses: Vec<f64>,
    pub location_evals: u64,
}

/// Trains a fresh model on the given split. Steps per epoch is the number
/// of whole batches the split can fill; a trailing partial batch is dropped.
pub fn train(
    encoder: &EncoderConfig,
    config: &TrainConfig,
    items: &[CorpusItem],
) -> Result<TrainOutcome> {
    encoder.validate()?;
    config.validate()?;

    let eligible = match config.modality {
        None => items.len(),
        Some(m) => items.iter().filter(|i| i.modality == m).count(),
    };
    let steps_per_epoch = eligible / config.batch_size;
    if steps_per_epoch == 0 {
        return Err(Error::Data(format!(
            "{eligible} usable items cannot fill one batch of {}",
            config.batch_size
        )));
    }
    let total_steps = config.epochs * steps_per_epoch;
    let warmup = match config.warmup_steps {
        Some(w) => w,
        None if total_steps == 1 => 0,
        None => (total_steps / 20).clamp(1, total_steps - 1),
    };

    let mut model = Model::init(encoder.clone(), config.seed)?;
    let mut rng = substream(config.seed, Stream::Batch);
    let mut adam = {
        let params: Vec<&crate::ndmath::Tensor> =
            model.named_params().into_iter().map(|(_, t)| t).collect();
        AdamState::new(&params)
    };

    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let mut location_evals = 0u64;
    let mut step = 0usize;
    for _ in 0..config.epochs {
        let mut epoch_sum = 0.0;
        for _ in 0..steps_per_epoch {
            let batch = match config.modality {
                None => compose_batch(items, config.batch_size / 2, &mut rng)?,
                Some(m) => compose_batch_single(items, config.batch_size, m, &mut rng)?,
            };

            let mut g = ComputeGraph::new();
            let nodes = model.register(&mut g, true);
            let mut img_rows = Vec::with_capacity(batch.len());
            let mut txt_rows = Vec::with_capacity(batch.len());
            let mut loc_rows = Vec::with_capacity(batch.len());
            for entry in &batch {
                let image = g.constant(entry.item.image.clone());
                let route = match entry.item.modality {
                    Modality::Sar => &nodes.sar,
                    Modality::Msi => &nodes.msi,
                };
                img_rows.push(image_embedding(&mut g, route, image)?);
                txt_rows.push(text_embedding(&mut g, &nodes.text, &entry.item.labels)?);
                if config.use_location {
                    loc_rows.push(location_embedding(
                        &mut g,
                        &nodes.location,
                        encoder,
                        entry.item.lon,
                        entry.item.lat,
                    )?);
                    location_evals += 1;
                }
            }
            let loss_node = if config.use_location {
                geo_loss_node(&mut g, &img_rows, &txt_rows, &loc_rows, nodes.log_tau, config.alpha)?
            } else {
                contrastive_loss_node(&mut g, &img_rows, &txt_rows, nodes.log_tau)?
            };

            let loss = g.value(loss_node).values()[0];
            if !loss.is_finite() {
                return Err(Error::Numeric {
                    step,
                    message: format!("loss became {loss}"),
                });
            }
            epoch_sum += loss;

            g.backward(loss_node)?;
            let lr = lr_schedule(step, total_steps, warmup, config.max_lr)?;
            let ordered = nodes.ordered();
            let grads: Vec<&[f64]> = ordered
                .iter()
                .map(|&id| {
                    g.grad(id).ok_or_else(|| Error::Contract(
                        "trainable parameter received no gradient".into(),
                    ))
                })
                .collect::<Result<_>>()?;
            let mut params: Vec<&mut crate::ndmath::Tensor> =
                model.named_params_mut().into_iter().map(|(_, t)| t).collect();
            adam_step(&mut params, &grads, &mut adam, lr)?;
            step += 1;
        }
        epoch_losses.push(epoch_sum / steps_per_epoch as f64);
    }

    Ok(TrainOutcome {
        checkpoint: ModelCheckpoint {
            model,
            train: config.clone(),
            step: step as u64,
        },
        epoch_losses,
        location_evals,
    })
}
