use crate::error::{QuadstemError, Result};

/// Default project sample rate in Hz.
pub const DEFAULT_SAMPLE_RATE: u32 = 44_100;

/// Mono time-domain audio at full scale (+/-1.0 nominal).
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(QuadstemError::InvalidInput("sample_rate must be > 0".into()));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(QuadstemError::NonFinite("waveform contains non-finite samples".into()));
        }
        Ok(Self { samples, sample_rate })
    }

    pub fn zeros(len: usize, sample_rate: u32) -> Self {
        Self { samples: vec![0.0; len], sample_rate }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s * s).sum()
    }

    pub fn rms(&self) -> f64 {
        if self.samples.is_empty() {
            0.0
        } else {
            (self.energy() / self.samples.len() as f64).sqrt()
        }
    }

    /// Sample-wise sum. Lengths and rates must match.
    pub fn add(&self, other: &Waveform) -> Result<Waveform> {
        if self.sample_rate != other.sample_rate {
            return Err(QuadstemError::ShapeMismatch(format!(
                "sample rate {} vs {}",
                self.sample_rate, other.sample_rate
            )));
        }
        if self.len() != other.len() {
            return Err(QuadstemError::ShapeMismatch(format!(
                "length {} vs {}",
                self.len(),
                other.len()
            )));
        }
        let samples = self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| a + b)
            .collect();
        Ok(Waveform { samples, sample_rate: self.sample_rate })
    }

    pub fn scale(&self, gain: f64) -> Waveform {
        Waveform {
            samples: self.samples.iter().map(|s| s * gain).collect(),
            sample_rate: self.sample_rate,
        }
    }
}
