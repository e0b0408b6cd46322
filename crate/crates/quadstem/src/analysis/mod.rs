//! Query-vector analysis: extraction of the learned per-stem conditioning
//! scales, z-normalization, feature clustering, and clustermap output.

pub mod cluster;
pub mod clustermap;
pub mod queries;

pub use cluster::cluster_order;
pub use clustermap::{emit_clustermap, read_clustermap_csv};
pub use queries::{extract_queries, z_normalize, QueryMatrix};
