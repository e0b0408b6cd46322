//! Project configuration file: one TOML document covering model, data
//! generation, training, and evaluation. Unknown keys are rejected.

use std::path::Path;
use std::str::FromStr;

use crate::datagen::LevelConfig;
use crate::dsp::{make_band_spec, StftConfig, Window};
use crate::error::{QuadstemError, Result};
use crate::model::{Arch, ModelConfig};
use crate::stem::SetupKind;
use crate::training::TrainConfig;

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub arch: String,
    pub setup: String,
    pub sample_rate: u32,
    pub n_fft: usize,
    pub hop: usize,
    pub n_bands: usize,
    pub embed_dim: usize,
    pub n_seq_layers: usize,
    pub seq_hidden: usize,
    pub decoder_hidden: usize,
    pub film_bias: bool,
}

impl Default for ModelSection {
    fn default() -> Self {
        // Toy-scale defaults; the full-scale shape is opt-in via config.
        Self {
            arch: "banquet".into(),
            setup: "split".into(),
            sample_rate: 16_000,
            n_fft: 512,
            hop: 128,
            n_bands: 16,
            embed_dim: 32,
            n_seq_layers: 2,
            seq_hidden: 64,
            decoder_hidden: 64,
            film_bias: true,
        }
    }
}

impl ModelSection {
    pub fn to_model_config(&self) -> Result<ModelConfig> {
        let arch = Arch::from_str(&self.arch)?;
        let setup = SetupKind::from_str(&self.setup)?;
        let stft = StftConfig {
            n_fft: self.n_fft,
            hop: self.hop,
            window: Window::SqrtHann,
            center_pad: true,
        };
        stft.validate()?;
        let band_spec = make_band_spec(stft.n_bins(), self.n_bands, self.sample_rate)?;
        let cfg = ModelConfig {
            arch,
            stems: setup.stems(),
            band_spec,
            embed_dim: self.embed_dim,
            n_seq_layers: self.n_seq_layers,
            seq_hidden: self.seq_hidden,
            decoder_hidden: self.decoder_hidden,
            film_bias: self.film_bias,
            stft,
            sample_rate: self.sample_rate,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatagenSection {
    pub duration_secs: f64,
    pub sample_rate: u32,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub levels: LevelConfig,
}

impl Default for DatagenSection {
    fn default() -> Self {
        Self {
            duration_secs: 3.0,
            sample_rate: 16_000,
            n_train: 8,
            n_val: 2,
            n_test: 2,
            levels: LevelConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    /// Dataset split evaluated by default.
    pub split: String,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self { split: "test".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Default, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProjectConfig {
    pub schema_version: SchemaVersion,
    pub model: ModelSection,
    pub datagen: DatagenSection,
    pub training: TrainConfig,
    pub evaluation: EvalSection,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(transparent)]
pub struct SchemaVersion(pub u32);

impl Default for SchemaVersion {
    fn default() -> Self {
        Self(CONFIG_SCHEMA_VERSION)
    }
}

impl ProjectConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: ProjectConfig = toml::from_str(&text)
            .map_err(|e| QuadstemError::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version.0 != CONFIG_SCHEMA_VERSION {
            return Err(QuadstemError::Config(format!(
                "unsupported config schema {}",
                self.schema_version.0
            )));
        }
        self.model.to_model_config()?;
        self.training.validate()?;
        if !(self.datagen.duration_secs > 0.0) {
            return Err(QuadstemError::Config("datagen.duration_secs must be positive".into()));
        }
        Ok(())
    }

    /// Full effective configuration as TOML, defaults included.
    pub fn dump(&self) -> String {
        toml::to_string_pretty(self).expect("config serialization")
    }
}
