//! Checkpoint container: both configs, the step counter, the vocabulary
//! fingerprint, and every parameter tensor, bit-exact.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::binio;
use crate::encoders::{EncoderConfig, Model};
use crate::error::{Error, Result};
use crate::trainer::TrainConfig;
use crate::vocab::vocabulary_hash;

/// A trained model together with the configuration that produced it.
#[derive(Debug, Clone)]
pub struct ModelCheckpoint {
    pub model: Model,
    pub train: TrainConfig,
    pub step: u64,
}

impl ModelCheckpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<ModelCheckpoint> {
        let mut r = BufReader::new(File::open(path)?);
        Self::read_from(&mut r)
    }

    fn write_to(&self, w: &mut impl Write) -> Result<()> {
        binio::write_header(w, binio::KIND_CHECKPOINT)?;
        let encoder = serde_json::to_string(&self.model.config)
            .map_err(|e| Error::Format(format!("encoder config does not serialize: {e}")))?;
        let train = serde_json::to_string(&self.train)
            .map_err(|e| Error::Format(format!("train config does not serialize: {e}")))?;
        binio::write_string(w, &encoder)?;
        binio::write_string(w, &train)?;
        binio::write_u64(w, self.step)?;
        binio::write_u64(w, vocabulary_hash())?;
        let params = self.model.named_params();
        binio::write_u32(w, params.len() as u32)?;
        for (name, tensor) in params {
            binio::write_tensor_block(w, &name, tensor)?;
        }
        Ok(())
    }

    fn read_from(r: &mut impl Read) -> Result<ModelCheckpoint> {
        binio::read_header(r, binio::KIND_CHECKPOINT)?;
        let encoder: EncoderConfig = serde_json::from_str(&binio::read_string(r)?)
            .map_err(|e| Error::Format(format!("bad encoder config: {e}")))?;
        let train: TrainConfig = serde_json::from_str(&binio::read_string(r)?)
            .map_err(|e| Error::Format(format!("bad train config: {e}")))?;
        let step = binio::read_u64(r)?;
        let vocab = binio::read_u64(r)?;
        if vocab != vocabulary_hash() {
            return Err(Error::Format(format!(
                "checkpoint was built against vocabulary {vocab:#018x}, \
                 this build uses {:#018x}",
                vocabulary_hash()
            )));
        }
        // Seed value is irrelevant here; every tensor gets overwritten.
        let mut model = Model::init(encoder, 0)?;
        let count = binio::read_u32(r)? as usize;
        let expected = model.named_params().len();
        if count != expected {
            return Err(Error::Format(format!(
                "checkpoint holds {count} tensors, model has {expected}"
            )));
        }
        for (name, slot) in model.named_params_mut() {
            let (block_name, tensor) = binio::read_tensor_block(r)?;
            if block_name != name {
                return Err(Error::Format(format!(
                    "tensor order mismatch: found {block_name:?} where {name:?} belongs"
                )));
            }
            if tensor.shape() != slot.shape() {
                return Err(Error::Format(format!(
                    "tensor {name:?} has shape {:?}, model expects {:?}",
                    tensor.shape(),
                    slot.shape()
                )));
            }
            *slot = tensor;
        }
        Ok(ModelCheckpoint { model, train, step })
    }
}
