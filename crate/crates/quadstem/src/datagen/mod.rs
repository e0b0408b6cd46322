//! Synthetic four-stem mixture generation: source pools, deterministic
//! manifests, and audio rendering.

pub mod manifest;
pub mod pool;
pub mod synth;

pub use manifest::{
    build_manifest, read_manifest, write_manifest, LevelConfig, MixEvent, MixManifestEntry,
};
pub use pool::{index_pools, split_pools, validate_pools, PoolEntry, PoolReport, StemPools};
pub use synth::{
    example_dir, read_example, synthesize_example, target_stem, write_example, MixtureExample,
};
