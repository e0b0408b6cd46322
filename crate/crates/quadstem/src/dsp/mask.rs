use ndarray::Array2;
use num_complex::Complex64;

use crate::dsp::stft::Spectrogram;
use crate::error::{QuadstemError, Result};

/// Elementwise complex multiplicative masking of a mixture spectrogram.
pub fn apply_mask(mix: &Spectrogram, mask: &Array2<Complex64>) -> Result<Spectrogram> {
    if mix.values.dim() != mask.dim() {
        return Err(QuadstemError::ShapeMismatch(format!(
            "mix {:?} vs mask {:?}",
            mix.values.dim(),
            mask.dim()
        )));
    }
    if mask.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
        return Err(QuadstemError::NonFinite("mask".into()));
    }
    Ok(Spectrogram {
        values: &mix.values * mask,
        sample_rate: mix.sample_rate,
        frame_rate: mix.frame_rate,
    })
}
