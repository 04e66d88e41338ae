//! Deterministic data engine for anatomy-anchored synthetic plaque
//! pretraining on volumetric CT, together with the segmentation and
//! detection metrics used to evaluate models trained on it.
//!
//! The pipeline is built from small pure stages:
//!
//! - [`volume`]: HU grids, the CVOL container, a NIfTI-1 subset reader,
//!   resampling and padded cropping.
//! - [`transforms`]: clinical windowing and joint geometric augmentation.
//! - [`synth`]: Gaussian-blob lesion synthesis and artery-anchored injection.
//! - [`noise`]: per-voxel Beer-Lambert photon noise with electronic noise.
//! - [`sampler`]: the end-to-end patch sampler and the CSHD shard format.
//! - [`losses`]: composite Tversky + focal loss with analytic gradients.
//! - [`metrics`]: Dice, clDice, surface distance, lesion matching, AUROC.
//! - [`archcheck`]: shape bookkeeping for the reference encoder-decoder.
//! - [`phantom`]: synthetic vessel phantoms so everything runs without
//!   clinical data.
//!
//! All randomness flows through [`rng::derive_rng`], so every output is a
//! pure function of `(master_seed, stream id, index)`.

pub mod archcheck;
pub mod error;
pub mod losses;
pub mod metrics;
pub mod noise;
pub mod phantom;
pub mod rng;
pub mod sampler;
pub mod synth;
pub mod transforms;
pub mod volume;

pub use error::{Error, Result};
pub use volume::{Dims, MaskVolume, Spacing, Volume};
