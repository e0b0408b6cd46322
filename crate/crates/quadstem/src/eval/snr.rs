//! Signal-to-noise ratio of an estimate against its reference.

use crate::dsp::Waveform;
use crate::error::{QuadstemError, Result};

/// SNR in dB, clamped to [-60, 60] so degenerate estimates stay finite.
pub const SNR_CLAMP_DB: f64 = 60.0;

pub fn snr_db(reference: &Waveform, estimate: &Waveform) -> Result<f64> {
    if reference.len() != estimate.len() {
        return Err(QuadstemError::ShapeMismatch(format!(
            "reference {} samples vs estimate {}",
            reference.len(),
            estimate.len()
        )));
    }
    if reference.sample_rate != estimate.sample_rate {
        return Err(QuadstemError::ShapeMismatch(format!(
            "reference {} Hz vs estimate {} Hz",
            reference.sample_rate, estimate.sample_rate
        )));
    }
    let ref_energy = reference.energy();
    if ref_energy == 0.0 {
        return Err(QuadstemError::InvalidInput("all-zero reference".into()));
    }
    let err_energy: f64 = reference
        .samples
        .iter()
        .zip(&estimate.samples)
        .map(|(r, e)| (r - e) * (r - e))
        .sum();
    if err_energy == 0.0 {
        return Ok(SNR_CLAMP_DB);
    }
    Ok((10.0 * (ref_energy / err_energy).log10()).clamp(-SNR_CLAMP_DB, SNR_CLAMP_DB))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn wave(samples: Vec<f64>) -> Waveform {
        Waveform::new(samples, 16_000).unwrap()
    }

    #[test]
    fn perfect_estimate_hits_the_clamp() {
        let w = wave((0..100).map(|i| (i as f64 * 0.1).sin()).collect());
        assert_eq!(snr_db(&w, &w.clone()).unwrap(), 60.0);
    }

    #[test]
    fn known_error_energy_gives_closed_form_snr() {
        // Reference energy 100, error energy 1 -> exactly 20 dB.
        let reference = wave(vec![1.0; 100]);
        let mut est = vec![1.0; 100];
        est[0] = 0.0;
        assert_relative_eq!(snr_db(&reference, &wave(est)).unwrap(), 20.0, max_relative = 1e-12);
    }

    #[test]
    fn zero_estimate_gives_zero_db() {
        let reference = wave(vec![0.5; 64]);
        let est = wave(vec![0.0; 64]);
        assert_relative_eq!(snr_db(&reference, &est).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn awful_estimate_clamps_low() {
        let reference = wave(vec![1e-6; 64]);
        let est = wave(vec![1e3; 64]);
        assert_eq!(snr_db(&reference, &est).unwrap(), -60.0);
    }

    #[test]
    fn zero_reference_is_an_error() {
        let reference = wave(vec![0.0; 10]);
        let est = wave(vec![0.1; 10]);
        assert!(snr_db(&reference, &est).is_err());
    }

    #[test]
    fn length_mismatch_is_an_error() {
        let a = wave(vec![0.1; 10]);
        let b = wave(vec![0.1; 11]);
        assert!(snr_db(&a, &b).is_err());
    }
}
