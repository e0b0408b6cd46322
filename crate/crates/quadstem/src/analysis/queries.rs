//! Extraction and normalization of learned query vectors.

use ndarray::Array2;

use crate::error::{QuadstemError, Result};
use crate::model::{Arch, ModelConfig, ModelParams};
use crate::stem::Stem;

/// Stems × features matrix of query scales, rows labeled in model stem order.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryMatrix {
    pub values: Array2<f64>,
    pub stems: Vec<Stem>,
}

/// Pulls the per-stem γ vectors out of a query-conditioned model.
pub fn extract_queries(cfg: &ModelConfig, params: &ModelParams) -> Result<QueryMatrix> {
    if cfg.arch != Arch::Banquet {
        return Err(QuadstemError::InvalidInput(
            "query extraction requires the query-conditioned architecture".into(),
        ));
    }
    let d = cfg.embed_dim;
    let mut values = Array2::zeros((cfg.stems.len(), d));
    for (i, &stem) in cfg.stems.iter().enumerate() {
        let gamma = params.get(&format!("query.{}.gamma", stem.file_token()))?;
        if gamma.dim() != (1, d) {
            return Err(QuadstemError::ShapeMismatch(format!(
                "query vector for {stem}: {:?}",
                gamma.dim()
            )));
        }
        values.row_mut(i).assign(&gamma.row(0));
    }
    Ok(QueryMatrix { values, stems: cfg.stems.clone() })
}

/// Z-normalizes each feature column (population standard deviation).
/// Constant columns map to zeros; the operation is idempotent.
pub fn z_normalize(m: &QueryMatrix) -> QueryMatrix {
    let (n, d) = m.values.dim();
    let mut out = Array2::zeros((n, d));
    for j in 0..d {
        let col = m.values.column(j);
        let mean = col.sum() / n as f64;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        let std = var.sqrt();
        for i in 0..n {
            out[[i, j]] = if std == 0.0 { 0.0 } else { (m.values[[i, j]] - mean) / std };
        }
    }
    QueryMatrix { values: out, stems: m.stems.clone() }
}
