//! The four encoders that share one embedding space: label-set text, SAR
//! imagery, MSI imagery, and geographic location. All emit unit-norm rows
//! of dimension `embed_dim`.

mod model;
mod sh;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use model::{
    image_embedding, location_embedding, text_embedding, LinearNodes, LocationNodes, Model,
    ModelNodes, TextNodes, VisionNodes, WeightBias,
};
pub use sh::sh_encode;

pub const SAR_CHANNELS: usize = 2;
pub const MSI_CHANNELS: usize = 12;

/// Width of the location network's hidden layers; also the ceiling on the
/// spherical-harmonic feature width.
pub const SIREN_HIDDEN: usize = 32;

/// Which vision route an image takes. Radar and multispectral imagery get
/// disjoint parameter sets; nothing is shared between the two.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Sar,
    Msi,
}

impl Modality {
    pub fn channels(&self) -> usize {
        match self {
            Modality::Sar => SAR_CHANNELS,
            Modality::Msi => MSI_CHANNELS,
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Modality::Sar => "sar",
            Modality::Msi => "msi",
        }
    }

    pub fn parse(text: &str) -> Result<Modality> {
        match text.trim().to_lowercase().as_str() {
            "sar" => Ok(Modality::Sar),
            "msi" => Ok(Modality::Msi),
            other => Err(Error::Config(format!(
                "unknown modality {other:?}, expected sar or msi"
            ))),
        }
    }
}

impl std::fmt::Display for Modality {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    /// Shared embedding dimension D.
    pub embed_dim: usize,
    /// Image side length; inputs are channels x side x side.
    pub image_side: usize,
    /// Maximum spherical-harmonic degree for location features.
    pub sh_degree: usize,
    /// Number of sine layers in the location network.
    pub siren_layers: usize,
    /// Frequency scale applied inside every sine layer.
    pub siren_omega0: f64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            embed_dim: 32,
            image_side: 24,
            sh_degree: 3,
            siren_layers: 2,
            siren_omega0: 30.0,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.embed_dim < 2 {
            return Err(Error::Config(format!(
                "embed_dim must be at least 2, got {}",
                self.embed_dim
            )));
        }
        if self.image_side < 8 {
            return Err(Error::Config(format!(
                "image_side must be at least 8, got {}",
                self.image_side
            )));
        }
        if self.sh_dim() > SIREN_HIDDEN {
            return Err(Error::Config(format!(
                "sh_degree {} yields {} features, more than the location network's input width {}",
                self.sh_degree,
                self.sh_dim(),
                SIREN_HIDDEN
            )));
        }
        if self.siren_layers == 0 {
            return Err(Error::Config("siren_layers must be positive".into()));
        }
        if !(self.siren_omega0 > 0.0) {
            return Err(Error::Config(format!(
                "siren_omega0 must be positive, got {}",
                self.siren_omega0
            )));
        }
        Ok(())
    }

    /// Spherical-harmonic feature width, (degree+1)^2.
    pub fn sh_dim(&self) -> usize {
        (self.sh_degree + 1) * (self.sh_degree + 1)
    }
}
