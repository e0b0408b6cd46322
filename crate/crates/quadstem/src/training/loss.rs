//! Separation loss: per stem, an L1 spectral term over the real/imaginary
//! STFT parts plus an L1 waveform term, averaged over stems.

use std::collections::BTreeMap;

use crate::autograd::{stft_stacked, NodeId, Tape};
use crate::dsp::{StftConfig, Waveform};
use crate::error::{QuadstemError, Result};
use crate::stem::Stem;
use ndarray::Array2;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LossWeights {
    pub spectral: f64,
    pub waveform: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { spectral: 1.0, waveform: 1.0 }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LossValue {
    pub total: f64,
    pub spectral: f64,
    pub waveform: f64,
}

/// Nodes of the loss graph; `total` is the scalar to differentiate.
pub struct LossNodes {
    pub total: NodeId,
    pub spectral: NodeId,
    pub waveform: NodeId,
}

fn check_pair(stem: Stem, est: &Waveform, target: &Waveform) -> Result<()> {
    if est.len() != target.len() || est.sample_rate != target.sample_rate {
        return Err(QuadstemError::ShapeMismatch(format!(
            "stem {stem}: estimate {} samples @ {} Hz vs target {} samples @ {} Hz",
            est.len(),
            est.sample_rate,
            target.len(),
            target.sample_rate
        )));
    }
    Ok(())
}

fn mean_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64
}

/// Loss between estimate and target waveform sets. Both maps must cover the
/// same stems.
pub fn separation_loss(
    estimates: &BTreeMap<Stem, Waveform>,
    targets: &BTreeMap<Stem, Waveform>,
    stft: &StftConfig,
    weights: LossWeights,
) -> Result<LossValue> {
    if estimates.is_empty() {
        return Err(QuadstemError::InvalidInput("empty estimate set".into()));
    }
    if estimates.keys().ne(targets.keys()) {
        return Err(QuadstemError::InvalidInput("estimate/target stem sets differ".into()));
    }
    let mut spec_sum = 0.0;
    let mut wave_sum = 0.0;
    for (&stem, est) in estimates {
        let target = &targets[&stem];
        check_pair(stem, est, target)?;
        let est_spec = stft_stacked(&est.samples, stft);
        let target_spec = stft_stacked(&target.samples, stft);
        spec_sum += mean_abs_diff(&est_spec, &target_spec);
        wave_sum += est
            .samples
            .iter()
            .zip(&target.samples)
            .map(|(x, y)| (x - y).abs())
            .sum::<f64>()
            / est.len() as f64;
    }
    let n = estimates.len() as f64;
    let spectral = weights.spectral * spec_sum / n;
    let waveform = weights.waveform * wave_sum / n;
    Ok(LossValue { total: spectral + waveform, spectral, waveform })
}

/// Builds the same loss on the tape over estimated-waveform nodes, so the
/// scalar is differentiable through masking and synthesis.
pub fn loss_on_tape(
    tape: &mut Tape,
    est_nodes: &BTreeMap<Stem, NodeId>,
    targets: &BTreeMap<Stem, Waveform>,
    stft: &StftConfig,
    weights: LossWeights,
) -> Result<LossNodes> {
    if est_nodes.is_empty() {
        return Err(QuadstemError::InvalidInput("empty estimate set".into()));
    }
    if est_nodes.keys().ne(targets.keys()) {
        return Err(QuadstemError::InvalidInput("estimate/target stem sets differ".into()));
    }
    let mut spec_terms = Vec::new();
    let mut wave_terms = Vec::new();
    for (&stem, &est) in est_nodes {
        let target = &targets[&stem];
        let est_len = tape.value(est).ncols();
        if est_len != target.len() {
            return Err(QuadstemError::ShapeMismatch(format!(
                "stem {stem}: estimate {est_len} samples vs target {}",
                target.len()
            )));
        }
        let target_spec = tape.leaf(stft_stacked(&target.samples, stft));
        let est_spec = tape.stft(est, *stft);
        let spec_diff = tape.sub(est_spec, target_spec);
        spec_terms.push(tape.mean_abs(spec_diff));

        let target_wave =
            tape.leaf(Array2::from_shape_vec((1, target.len()), target.samples.clone()).unwrap());
        let wave_diff = tape.sub(est, target_wave);
        wave_terms.push(tape.mean_abs(wave_diff));
    }
    let n = est_nodes.len() as f64;
    let sum_nodes = |tape: &mut Tape, terms: &[NodeId]| {
        let mut acc = terms[0];
        for &t in &terms[1..] {
            acc = tape.add(acc, t);
        }
        acc
    };
    let spec_sum = sum_nodes(tape, &spec_terms);
    let wave_sum = sum_nodes(tape, &wave_terms);
    let spectral = tape.scale(spec_sum, weights.spectral / n);
    let waveform = tape.scale(wave_sum, weights.waveform / n);
    let total = tape.add(spectral, waveform);
    Ok(LossNodes { total, spectral, waveform })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::Window;
    use approx::assert_relative_eq;

    fn cfg() -> StftConfig {
        StftConfig { n_fft: 64, hop: 16, window: Window::SqrtHann, center_pad: true }
    }

    fn wave(samples: Vec<f64>) -> Waveform {
        Waveform::new(samples, 8000).unwrap()
    }

    #[test]
    fn identical_signals_give_zero_loss() {
        let w = wave((0..512).map(|i| (i as f64 * 0.05).sin()).collect());
        let est = BTreeMap::from([(Stem::Dx, w.clone())]);
        let tgt = BTreeMap::from([(Stem::Dx, w)]);
        let loss = separation_loss(&est, &tgt, &cfg(), LossWeights::default()).unwrap();
        assert_eq!(loss.total, 0.0);
    }

    #[test]
    fn waveform_only_constant_offset_is_mean_abs() {
        let est = BTreeMap::from([(Stem::Fx, wave(vec![0.5; 1024]))]);
        let tgt = BTreeMap::from([(Stem::Fx, wave(vec![0.0; 1024]))]);
        let w = LossWeights { spectral: 0.0, waveform: 1.0 };
        let loss = separation_loss(&est, &tgt, &cfg(), w).unwrap();
        assert_relative_eq!(loss.total, 0.5, max_relative = 1e-12);
    }

    #[test]
    fn loss_is_positively_homogeneous() {
        let base: Vec<f64> = (0..700).map(|i| (i as f64 * 0.11).sin() * 0.3).collect();
        let est = BTreeMap::from([(Stem::Dx, wave(base.clone()))]);
        let tgt = BTreeMap::from([(Stem::Dx, wave(vec![0.0; 700]))]);
        let w = LossWeights::default();
        let l1 = separation_loss(&est, &tgt, &cfg(), w).unwrap().total;
        let est3 = BTreeMap::from([(
            Stem::Dx,
            wave(base.iter().map(|x| 3.0 * x).collect()),
        )]);
        let l3 = separation_loss(&est3, &tgt, &cfg(), w).unwrap().total;
        assert_relative_eq!(l3, 3.0 * l1, max_relative = 1e-10);
    }

    #[test]
    fn tape_loss_matches_direct_loss() {
        let est_w: Vec<f64> = (0..600).map(|i| (i as f64 * 0.07).cos() * 0.4).collect();
        let tgt_w: Vec<f64> = (0..600).map(|i| (i as f64 * 0.03).sin() * 0.2).collect();
        let est = BTreeMap::from([(Stem::MxV, wave(est_w.clone()))]);
        let tgt = BTreeMap::from([(Stem::MxV, wave(tgt_w))]);
        let w = LossWeights { spectral: 0.7, waveform: 0.3 };
        let direct = separation_loss(&est, &tgt, &cfg(), w).unwrap();

        let mut tape = Tape::new();
        let est_node = tape.leaf(Array2::from_shape_vec((1, 600), est_w).unwrap());
        let nodes = BTreeMap::from([(Stem::MxV, est_node)]);
        let built = loss_on_tape(&mut tape, &nodes, &tgt, &cfg(), w).unwrap();
        assert_relative_eq!(tape.value(built.total)[[0, 0]], direct.total, max_relative = 1e-12);
        assert_relative_eq!(
            tape.value(built.spectral)[[0, 0]],
            direct.spectral,
            max_relative = 1e-12
        );
    }

    #[test]
    fn mismatched_stem_sets_are_rejected() {
        let w = wave(vec![0.0; 256]);
        let est = BTreeMap::from([(Stem::Dx, w.clone())]);
        let tgt = BTreeMap::from([(Stem::Fx, w)]);
        assert!(separation_loss(&est, &tgt, &cfg(), LossWeights::default()).is_err());
    }
}
