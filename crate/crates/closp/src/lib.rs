//! Tri-modal contrastive retrieval over synthetic satellite corpora.
//!
//! The crate trains a shared embedding space for three kinds of evidence
//! about a patch of the Earth: a set of land-cover labels, a radar or
//! multispectral image, and the patch's coordinates. Retrieval, zero-shot
//! classification, and the geographic probes all reduce to inner products
//! in that space.
//!
//! Everything runs on the CPU in 64-bit floats at desk scale: corpora of a
//! few thousand records, embeddings of a few dozen dimensions. The point is
//! not throughput but a system small enough that every number it produces
//! can be checked against an independent oracle.

mod binio;
pub mod corpus;
pub mod encoders;
pub mod error;
pub mod evalsuite;
pub mod ndmath;
pub mod objective;
pub mod retrieval;
pub mod rng;
pub mod stats;
pub mod trainer;
pub mod vocab;

pub use error::{Error, Result};
