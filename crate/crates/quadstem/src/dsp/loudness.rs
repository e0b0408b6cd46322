use crate::dsp::wave::Waveform;
use crate::error::{QuadstemError, Result};

/// Integrated loudness result. Fully gated input has no defined loudness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Loudness {
    Lufs(f64),
    Silence,
}

impl Loudness {
    pub fn lufs(self) -> Option<f64> {
        match self {
            Loudness::Lufs(v) => Some(v),
            Loudness::Silence => None,
        }
    }
}

/// Second-order IIR section with a0 normalized to 1.
struct Biquad {
    b0: f64,
    b1: f64,
    b2: f64,
    a1: f64,
    a2: f64,
    x1: f64,
    x2: f64,
    y1: f64,
    y2: f64,
}

impl Biquad {
    /// Stage 1 of the BS.1770-4 pre-filter (head-related high shelf).
    /// Coefficient formulas follow the pyloudnorm parameterization so the
    /// filter adapts to arbitrary sample rates.
    fn high_shelf(sample_rate: f64) -> Biquad {
        let gain_db = 3.99984385397;
        let q = 0.7071752369554193;
        let center_hz = 1681.9744509555319;
        let k = (std::f64::consts::PI * center_hz / sample_rate).tan();
        let vh = 10.0_f64.powf(gain_db / 20.0);
        let vb = vh.powf(0.4996667741545416);
        let a0 = 1.0 + k / q + k * k;
        Biquad {
            b0: (vh + vb * k / q + k * k) / a0,
            b1: 2.0 * (k * k - vh) / a0,
            b2: (vh - vb * k / q + k * k) / a0,
            a1: 2.0 * (k * k - 1.0) / a0,
            a2: (1.0 - k / q + k * k) / a0,
            x1: 0.0,
            x2: 0.0,
            y1: 0.0,
            y2: 0.0,
        }
    }

    /// Stage 2 of the BS.1770-4 pre-filter (low-cut).
    fn high_pass(sample_rate: f64) -> Biquad {
        let q = 0.5003270373238773;
        let center_hz = 38.13547087602444;
        let k = (std::f64::consts::PI * center_hz / sample_rate).tan();
        Biquad {
            b0: 1.0,
            b1: -2.0,
            b2: 1.0,
            a1: 2.0 * (k * k - 1.0) / (1.0 + k / q + k * k),
            a2: (1.0 - k / q + k * k) / (1.0 + k / q + k * k),
            x1: 0.0,
            x2: 0.0,
            y1: 0.0,
            y2: 0.0,
        }
    }

    #[inline]
    fn apply(&mut self, x0: f64) -> f64 {
        let y0 = self.b0 * x0 + self.b1 * self.x1 + self.b2 * self.x2
            - self.a1 * self.y1
            - self.a2 * self.y2;
        self.x2 = self.x1;
        self.x1 = x0;
        self.y2 = self.y1;
        self.y1 = y0;
        y0
    }
}

const ABSOLUTE_GATE_LUFS: f64 = -70.0;
const RELATIVE_GATE_LU: f64 = -10.0;

fn power_to_lufs(power: f64) -> f64 {
    -0.691 + 10.0 * power.log10()
}

/// Integrated loudness per ITU-R BS.1770-4 (mono path): K-weighting,
/// 400 ms gating blocks at 75 % overlap, absolute -70 LUFS and relative
/// -10 LU gating.
pub fn measure_loudness(wave: &Waveform) -> Result<Loudness> {
    let sr = wave.sample_rate as f64;
    let block = (0.4 * sr).round() as usize;
    if wave.len() < block {
        return Err(QuadstemError::InvalidInput(format!(
            "loudness needs at least 400 ms ({} samples), got {}",
            block,
            wave.len()
        )));
    }

    let mut shelf = Biquad::high_shelf(sr);
    let mut cut = Biquad::high_pass(sr);
    let weighted: Vec<f64> = wave
        .samples
        .iter()
        .map(|&x| cut.apply(shelf.apply(x)))
        .collect();

    let hop = block / 4;
    let mut block_powers = Vec::new();
    let mut start = 0;
    while start + block <= weighted.len() {
        let ms = weighted[start..start + block]
            .iter()
            .map(|x| x * x)
            .sum::<f64>()
            / block as f64;
        block_powers.push(ms);
        start += hop;
    }

    let above_abs: Vec<f64> = block_powers
        .iter()
        .copied()
        .filter(|&p| power_to_lufs(p) > ABSOLUTE_GATE_LUFS)
        .collect();
    if above_abs.is_empty() {
        return Ok(Loudness::Silence);
    }
    let mean_abs = above_abs.iter().sum::<f64>() / above_abs.len() as f64;
    let rel_threshold = power_to_lufs(mean_abs) + RELATIVE_GATE_LU;

    let gated: Vec<f64> = above_abs
        .into_iter()
        .filter(|&p| power_to_lufs(p) > rel_threshold)
        .collect();
    if gated.is_empty() {
        return Ok(Loudness::Silence);
    }
    let mean = gated.iter().sum::<f64>() / gated.len() as f64;
    Ok(Loudness::Lufs(power_to_lufs(mean)))
}

/// Gain (linear) that moves `wave` to `target_lufs`. Returns None for
/// silent input.
pub fn gain_to_target(wave: &Waveform, target_lufs: f64) -> Result<Option<f64>> {
    match measure_loudness(wave)? {
        Loudness::Silence => Ok(None),
        Loudness::Lufs(l) => Ok(Some(10.0_f64.powf((target_lufs - l) / 20.0))),
    }
}
