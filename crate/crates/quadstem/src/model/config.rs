use crate::dsp::bands::{make_band_spec, BandSpec};
use crate::dsp::stft::{StftConfig, Window};
use crate::error::{QuadstemError, Result};
use crate::stem::{SetupKind, Stem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arch {
    Bandit,
    Banquet,
}

impl std::fmt::Display for Arch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Arch::Bandit => "bandit",
            Arch::Banquet => "banquet",
        })
    }
}

impl std::str::FromStr for Arch {
    type Err = QuadstemError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bandit" => Ok(Arch::Bandit),
            "banquet" => Ok(Arch::Banquet),
            other => Err(QuadstemError::InvalidInput(format!("unknown arch '{other}'"))),
        }
    }
}

/// Architecture hyperparameters shared by both model families.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ModelConfig {
    pub arch: Arch,
    pub stems: Vec<Stem>,
    pub band_spec: BandSpec,
    /// Embedding width D of the per-band features.
    pub embed_dim: usize,
    pub n_seq_layers: usize,
    pub seq_hidden: usize,
    pub decoder_hidden: usize,
    /// Whether FiLM carries the additive term. Query vectors always include
    /// it; disabling forces it to zero at application time.
    pub film_bias: bool,
    pub stft: StftConfig,
    pub sample_rate: u32,
}

impl ModelConfig {
    /// Small configuration for fast desk-scale training and CI.
    pub fn toy(arch: Arch, setup: SetupKind) -> Self {
        let sample_rate = 16_000;
        let stft = StftConfig { n_fft: 512, hop: 128, window: Window::SqrtHann, center_pad: true };
        let band_spec = make_band_spec(stft.n_fft / 2 + 1, 16, sample_rate).expect("toy bands");
        Self {
            arch,
            stems: setup.stems(),
            band_spec,
            embed_dim: 32,
            n_seq_layers: 2,
            seq_hidden: 64,
            decoder_hidden: 64,
            film_bias: true,
            stft,
            sample_rate,
        }
    }

    /// Full-size configuration (44.1 kHz scale):
    /// 64 musical bands, deeper dual-path stack.
    pub fn full_scale(arch: Arch, setup: SetupKind) -> Self {
        let sample_rate = 44_100;
        let stft = StftConfig::default();
        let band_spec = make_band_spec(stft.n_fft / 2 + 1, 64, sample_rate).expect("bands");
        Self {
            arch,
            stems: setup.stems(),
            band_spec,
            embed_dim: 128,
            n_seq_layers: 8,
            seq_hidden: 512,
            decoder_hidden: 256,
            film_bias: true,
            stft,
            sample_rate,
        }
    }

    pub fn n_bands(&self) -> usize {
        self.band_spec.n_bands()
    }

    pub fn validate(&self) -> Result<()> {
        if self.embed_dim == 0
            || self.n_seq_layers == 0
            || self.seq_hidden == 0
            || self.decoder_hidden == 0
        {
            return Err(QuadstemError::Config("model dimensions must be >= 1".into()));
        }
        if self.stems.is_empty() {
            return Err(QuadstemError::Config("stem list is empty".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for s in &self.stems {
            if !seen.insert(*s) {
                return Err(QuadstemError::Config(format!("duplicate stem {s}")));
            }
        }
        self.band_spec.validate()?;
        self.stft.validate()?;
        if self.band_spec.n_bins != self.stft.n_bins() {
            return Err(QuadstemError::Config(format!(
                "band spec covers {} bins but STFT yields {}",
                self.band_spec.n_bins,
                self.stft.n_bins()
            )));
        }
        Ok(())
    }
}
