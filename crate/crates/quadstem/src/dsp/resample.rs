use crate::dsp::wave::Waveform;
use crate::error::Result;

/// Half-width of the windowed-sinc interpolation kernel, in input samples.
const KERNEL_HALF_WIDTH: usize = 32;

/// Windowed-sinc sample rate conversion (Hann-windowed, lowpassed to the
/// smaller of the two Nyquist frequencies when downsampling).
pub fn resample(wave: &Waveform, target_rate: u32) -> Result<Waveform> {
    if wave.sample_rate == target_rate {
        return Ok(wave.clone());
    }
    let ratio = target_rate as f64 / wave.sample_rate as f64;
    let cutoff = ratio.min(1.0); // relative to input Nyquist
    let out_len = (wave.len() as f64 * ratio).round() as usize;
    let half = KERNEL_HALF_WIDTH as f64 / cutoff;
    let x = &wave.samples;

    let mut out = Vec::with_capacity(out_len);
    for j in 0..out_len {
        let center = j as f64 / ratio;
        let lo = (center - half).floor().max(0.0) as usize;
        let hi = ((center + half).ceil() as usize).min(x.len().saturating_sub(1));
        let mut acc = 0.0;
        for (i, &xi) in x.iter().enumerate().take(hi + 1).skip(lo) {
            let d = i as f64 - center;
            let s = cutoff * sinc(cutoff * d);
            // Hann window over the kernel support.
            let w = 0.5 * (1.0 + (std::f64::consts::PI * d / half).cos());
            acc += xi * s * w;
        }
        out.push(acc);
    }
    Waveform::new(out, target_rate)
}

#[inline]
fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}
