use ndarray::Array2;
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::dsp::wave::Waveform;
use crate::error::{QuadstemError, Result};

/// Analysis window shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    /// Square root of a periodic Hann window. Used as matched
    /// analysis/synthesis pair.
    SqrtHann,
    Hann,
    Rectangular,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct StftConfig {
    pub n_fft: usize,
    pub hop: usize,
    pub window: Window,
    pub center_pad: bool,
}

impl Default for StftConfig {
    fn default() -> Self {
        Self { n_fft: 2048, hop: 512, window: Window::SqrtHann, center_pad: true }
    }
}

impl StftConfig {
    pub fn n_bins(&self) -> usize {
        self.n_fft / 2 + 1
    }

    pub fn window_samples(&self) -> Vec<f64> {
        let n = self.n_fft;
        (0..n)
            .map(|i| {
                let hann = 0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos());
                match self.window {
                    Window::SqrtHann => hann.sqrt(),
                    Window::Hann => hann,
                    Window::Rectangular => 1.0,
                }
            })
            .collect()
    }

    /// Checks hop/window validity, including the NOLA condition needed for
    /// exact least-squares inversion.
    pub fn validate(&self) -> Result<()> {
        if self.n_fft == 0 || self.hop == 0 {
            return Err(QuadstemError::Config("n_fft and hop must be > 0".into()));
        }
        if self.hop > self.n_fft {
            return Err(QuadstemError::Config(format!(
                "hop {} exceeds n_fft {}",
                self.hop, self.n_fft
            )));
        }
        // Window-square overlap-add must be bounded away from zero everywhere.
        let w = self.window_samples();
        let mut wsum = vec![0.0; self.n_fft + self.hop];
        let mut offset = 0;
        while offset + self.n_fft <= wsum.len() {
            for (i, wi) in w.iter().enumerate() {
                wsum[offset + i] += wi * wi;
            }
            offset += self.hop;
        }
        let interior = &wsum[self.n_fft - self.hop..self.n_fft];
        if interior.iter().any(|&s| s < 1e-10) {
            return Err(QuadstemError::Config(
                "window/hop pair violates the overlap-add inversion condition".into(),
            ));
        }
        Ok(())
    }
}

/// Complex time-frequency representation, indexed (bin, frame).
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub values: Array2<Complex64>,
    pub sample_rate: u32,
    pub frame_rate: f64,
}

impl Spectrogram {
    pub fn n_bins(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_frames(&self) -> usize {
        self.values.ncols()
    }
}

/// Number of analysis frames for a signal of `len` samples.
pub fn num_frames(len: usize, cfg: &StftConfig) -> usize {
    let padded = if cfg.center_pad { len + cfg.n_fft } else { len };
    if padded < cfg.n_fft {
        0
    } else {
        (padded - cfg.n_fft) / cfg.hop + 1
    }
}

pub fn stft(wave: &Waveform, cfg: &StftConfig) -> Result<Spectrogram> {
    cfg.validate()?;
    if wave.is_empty() {
        return Err(QuadstemError::InvalidInput("stft of empty waveform".into()));
    }
    if wave.samples.iter().any(|s| !s.is_finite()) {
        return Err(QuadstemError::NonFinite("stft input".into()));
    }
    let frames = frame_signal(&wave.samples, cfg);
    let n = cfg.n_fft;
    let n_bins = cfg.n_bins();
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(n);
    let mut values = Array2::zeros((n_bins, frames.len()));
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for (t, frame) in frames.iter().enumerate() {
        for (i, &x) in frame.iter().enumerate() {
            buf[i] = Complex64::new(x, 0.0);
        }
        fft.process(&mut buf);
        for k in 0..n_bins {
            values[[k, t]] = buf[k];
        }
    }
    Ok(Spectrogram {
        values,
        sample_rate: wave.sample_rate,
        frame_rate: wave.sample_rate as f64 / cfg.hop as f64,
    })
}

// Windowed frame extraction shared by the public stft and its autograd twin.
pub(crate) fn frame_signal(samples: &[f64], cfg: &StftConfig) -> Vec<Vec<f64>> {
    let pad = if cfg.center_pad { cfg.n_fft / 2 } else { 0 };
    let n_frames = num_frames(samples.len(), cfg);
    let w = cfg.window_samples();
    (0..n_frames)
        .map(|t| {
            let start = t * cfg.hop;
            (0..cfg.n_fft)
                .map(|i| {
                    let idx = start + i;
                    let x = if idx < pad || idx >= pad + samples.len() {
                        0.0
                    } else {
                        samples[idx - pad]
                    };
                    x * w[i]
                })
                .collect()
        })
        .collect()
}

/// Inverse STFT via windowed overlap-add with window-square normalization.
pub fn istft(spec: &Spectrogram, cfg: &StftConfig, out_length: usize) -> Result<Waveform> {
    cfg.validate()?;
    if spec.n_bins() != cfg.n_bins() {
        return Err(QuadstemError::ShapeMismatch(format!(
            "spectrogram has {} bins, config implies {}",
            spec.n_bins(),
            cfg.n_bins()
        )));
    }
    let max_len = spec.n_frames() * cfg.hop + cfg.n_fft;
    if out_length > max_len {
        return Err(QuadstemError::InvalidInput(format!(
            "out_length {} exceeds representable length {}",
            out_length, max_len
        )));
    }
    let re: Vec<Vec<f64>> = (0..spec.n_frames())
        .map(|t| (0..spec.n_bins()).map(|k| spec.values[[k, t]].re).collect())
        .collect();
    let im: Vec<Vec<f64>> = (0..spec.n_frames())
        .map(|t| (0..spec.n_bins()).map(|k| spec.values[[k, t]].im).collect())
        .collect();
    let samples = istft_overlap_add(&re, &im, cfg, out_length);
    Waveform::new(samples, spec.sample_rate)
}

/// Core inverse transform over per-frame (re, im) bin vectors. Shared with
/// the autograd primitive so forward passes and gradients agree exactly.
pub(crate) fn istft_overlap_add(
    re: &[Vec<f64>],
    im: &[Vec<f64>],
    cfg: &StftConfig,
    out_length: usize,
) -> Vec<f64> {
    let n = cfg.n_fft;
    let n_bins = cfg.n_bins();
    let n_frames = re.len();
    let w = cfg.window_samples();
    let pad = if cfg.center_pad { n / 2 } else { 0 };
    let total = n_frames.saturating_sub(1) * cfg.hop + n;

    let mut planner = FftPlanner::new();
    let ifft = planner.plan_fft_inverse(n);
    let mut ola = vec![0.0; total];
    let mut wsum = vec![0.0; total];
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for t in 0..n_frames {
        // Hermitian-symmetric full spectrum from the half-spectrum bins.
        for k in 0..n_bins {
            buf[k] = Complex64::new(re[t][k], im[t][k]);
        }
        for k in n_bins..n {
            buf[k] = buf[n - k].conj();
        }
        ifft.process(&mut buf);
        let start = t * cfg.hop;
        for i in 0..n {
            ola[start + i] += buf[i].re / n as f64 * w[i];
            wsum[start + i] += w[i] * w[i];
        }
    }
    let mut out = vec![0.0; out_length];
    for (i, o) in out.iter_mut().enumerate() {
        let idx = i + pad;
        if idx < total && wsum[idx] > 1e-10 {
            *o = ola[idx] / wsum[idx];
        }
    }
    out
}
