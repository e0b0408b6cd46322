use std::collections::BTreeMap;

use ndarray::Array2;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;

use crate::error::{QuadstemError, Result};
use crate::model::config::{Arch, ModelConfig};
use crate::stem::Stem;

/// Standard deviation of the Gaussian perturbation applied to the gamma
/// query vectors at initialization, keeping stems distinguishable at step 0.
pub const QUERY_INIT_SIGMA: f64 = 0.02;

/// All learnable state, keyed by a stable dotted name. The map order is
/// deterministic, which the optimizer and checkpoint format rely on.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub arrays: BTreeMap<String, Array2<f64>>,
}

/// Per-component parameter counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct ParamCounts {
    pub encoder: usize,
    pub decoders: usize,
    pub queries: usize,
    pub total: usize,
}

/// Name of the decoder bank owning a stem: dedicated per stem for the
/// multi-decoder architecture, a single shared bank otherwise.
pub fn decoder_bank_name(arch: Arch, stem: Stem) -> String {
    match arch {
        Arch::Bandit => format!("dec.{}", stem.file_token()),
        Arch::Banquet => "dec.shared".to_string(),
    }
}

fn bank_names(cfg: &ModelConfig) -> Vec<String> {
    match cfg.arch {
        Arch::Bandit => cfg.stems.iter().map(|s| decoder_bank_name(cfg.arch, *s)).collect(),
        Arch::Banquet => vec!["dec.shared".to_string()],
    }
}

/// The exact shape of every parameter array implied by a configuration.
pub fn shape_map(cfg: &ModelConfig) -> BTreeMap<String, (usize, usize)> {
    let d = cfg.embed_dim;
    let h = cfg.seq_hidden;
    let hd = cfg.decoder_hidden;
    let mut shapes = BTreeMap::new();

    for b in 0..cfg.n_bands() {
        let w = cfg.band_spec.band_width(b);
        shapes.insert(format!("enc.band{b:03}.w"), (2 * w, d));
        shapes.insert(format!("enc.band{b:03}.b"), (1, d));
    }
    for l in 0..cfg.n_seq_layers {
        for axis in ["time", "band"] {
            let p = format!("enc.layer{l:02}.{axis}");
            shapes.insert(format!("{p}.wx"), (d, h));
            shapes.insert(format!("{p}.wh"), (h, h));
            shapes.insert(format!("{p}.b"), (1, h));
            shapes.insert(format!("{p}.wo"), (h, d));
            shapes.insert(format!("{p}.bo"), (1, d));
            shapes.insert(format!("{p}.ln_g"), (1, d));
            shapes.insert(format!("{p}.ln_b"), (1, d));
        }
    }
    for bank in bank_names(cfg) {
        for b in 0..cfg.n_bands() {
            let w = cfg.band_spec.band_width(b);
            let p = format!("{bank}.band{b:03}");
            shapes.insert(format!("{p}.w1"), (d, hd));
            shapes.insert(format!("{p}.b1"), (1, hd));
            shapes.insert(format!("{p}.w2v"), (hd, 2 * w));
            shapes.insert(format!("{p}.b2v"), (1, 2 * w));
            shapes.insert(format!("{p}.w2g"), (hd, 2 * w));
            shapes.insert(format!("{p}.b2g"), (1, 2 * w));
        }
    }
    if cfg.arch == Arch::Banquet {
        for s in &cfg.stems {
            shapes.insert(format!("query.{}.gamma", s.file_token()), (1, d));
            shapes.insert(format!("query.{}.beta", s.file_token()), (1, d));
        }
    }
    shapes
}

impl ModelParams {
    /// Random initialization: uniform fan-in scaling for weight matrices,
    /// zeros for biases, identity-centered layer norms and FiLM queries.
    pub fn init(cfg: &ModelConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, QUERY_INIT_SIGMA).unwrap();
        let mut arrays = BTreeMap::new();
        for (name, (rows, cols)) in shape_map(cfg) {
            let leaf = name.rsplit('.').next().unwrap();
            let value = match leaf {
                "b" | "bo" | "b1" | "b2v" | "b2g" | "ln_b" | "beta" => {
                    Array2::zeros((rows, cols))
                }
                "ln_g" => Array2::ones((rows, cols)),
                "gamma" => Array2::from_shape_fn((rows, cols), |_| 1.0 + noise.sample(&mut rng)),
                _ => {
                    let bound = (1.0 / rows as f64).sqrt();
                    Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-bound..bound))
                }
            };
            arrays.insert(name, value);
        }
        Self { arrays }
    }

    pub fn get(&self, name: &str) -> Result<&Array2<f64>> {
        self.arrays
            .get(name)
            .ok_or_else(|| QuadstemError::Config(format!("missing parameter '{name}'")))
    }

    /// Validates this parameter set against a configuration: every expected
    /// array present with the exact shape, nothing extra, all values finite.
    pub fn validate_against(&self, cfg: &ModelConfig) -> Result<()> {
        let expected = shape_map(cfg);
        for (name, shape) in &expected {
            let arr = self.get(name)?;
            if arr.dim() != *shape {
                return Err(QuadstemError::Checkpoint(format!(
                    "parameter '{name}' has shape {:?}, config implies {:?}",
                    arr.dim(),
                    shape
                )));
            }
            if arr.iter().any(|v| !v.is_finite()) {
                return Err(QuadstemError::NonFinite(format!("parameter '{name}'")));
            }
        }
        for name in self.arrays.keys() {
            if !expected.contains_key(name) {
                return Err(QuadstemError::Checkpoint(format!(
                    "unexpected parameter '{name}' for this configuration"
                )));
            }
        }
        Ok(())
    }

    pub fn count_parameters(&self) -> ParamCounts {
        let mut counts = ParamCounts { encoder: 0, decoders: 0, queries: 0, total: 0 };
        for (name, arr) in &self.arrays {
            let n = arr.len();
            if name.starts_with("enc.") {
                counts.encoder += n;
            } else if name.starts_with("dec.") {
                counts.decoders += n;
            } else if name.starts_with("query.") {
                counts.queries += n;
            }
            counts.total += n;
        }
        counts
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stem::SetupKind;

    fn with_stems(mut cfg: ModelConfig, stems: Vec<Stem>) -> ModelConfig {
        cfg.stems = stems;
        cfg
    }

    #[test]
    fn init_matches_shape_map_and_validates() {
        let cfg = ModelConfig::toy(Arch::Banquet, SetupKind::SplitMx);
        let params = ModelParams::init(&cfg, 42);
        params.validate_against(&cfg).unwrap();
    }

    #[test]
    fn banquet_grows_by_two_d_per_stem() {
        let base = ModelConfig::toy(Arch::Banquet, SetupKind::SplitMx);
        let one = with_stems(base.clone(), vec![Stem::Dx]);
        let total_s = ModelParams::init(&base, 0).count_parameters().total;
        let total_1 = ModelParams::init(&one, 0).count_parameters().total;
        let s = base.stems.len();
        assert_eq!(total_s - total_1, (s - 1) * 2 * base.embed_dim);
    }

    #[test]
    fn bandit_grows_by_one_decoder_bank_per_stem() {
        let base = ModelConfig::toy(Arch::Bandit, SetupKind::SplitMx);
        let one = with_stems(base.clone(), vec![Stem::Dx]);
        let c_s = ModelParams::init(&base, 0).count_parameters();
        let c_1 = ModelParams::init(&one, 0).count_parameters();
        let s = base.stems.len();
        let bank_size = c_1.decoders;
        assert_eq!(c_s.total - c_1.total, (s - 1) * bank_size);
        assert_eq!(c_s.decoders, s * bank_size);
    }

    #[test]
    fn full_scale_ratio_in_expected_band() {
        let bandit = ModelConfig::full_scale(Arch::Bandit, SetupKind::SplitMx);
        let banquet = ModelConfig::full_scale(Arch::Banquet, SetupKind::SplitMx);
        let bt = ModelParams::init(&bandit, 0).count_parameters().total as f64;
        let bq = ModelParams::init(&banquet, 0).count_parameters().total as f64;
        let ratio = bq / bt;
        assert!((0.40..=0.70).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn shape_mismatch_fails_closed() {
        let cfg = ModelConfig::toy(Arch::Bandit, SetupKind::SplitMx);
        let mut params = ModelParams::init(&cfg, 1);
        let name = "enc.band000.b".to_string();
        params.arrays.insert(name, Array2::zeros((2, 2)));
        assert!(params.validate_against(&cfg).is_err());
    }
}
