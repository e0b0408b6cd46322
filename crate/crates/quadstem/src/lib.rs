//! Four-stem cinematic audio source separation toolkit.
//!
//! Separates soundtrack mixtures into dialogue (DX), singing-vocal music
//! (MX-V), instrumental music (MX-I), and effects (FX) stems using band-split
//! spectral masking models: a dedicated-decoder architecture and a
//! query-conditioned single-decoder architecture. The crate also covers the
//! surrounding pipeline — synthetic mixture generation, training, SNR
//! evaluation with paired statistics, and learned-query analysis.

pub mod analysis;
pub mod autograd;
pub mod config;
pub mod dsp;
pub mod datagen;
pub mod error;
pub mod eval;
pub mod model;
pub mod stem;
pub mod training;

pub use error::{QuadstemError, Result};
