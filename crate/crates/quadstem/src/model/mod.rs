//! The two band-split separation architectures: a shared encoder with
//! per-stem dedicated decoders, and a query-conditioned variant with a
//! single shared decoder selected per stem by a learnable FiLM condition.

pub mod checkpoint;
pub mod config;
pub mod network;
pub mod params;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointFile};
pub use config::{Arch, ModelConfig};
pub use network::{
    decode_band_masks, encode, film, forward_bandit, forward_banquet, MixtureEmbedding,
    QueryCondition, StemMask,
};
pub use params::{ModelParams, ParamCounts};
