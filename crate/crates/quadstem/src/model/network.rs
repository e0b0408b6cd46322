use std::collections::BTreeMap;
use std::rc::Rc;

use ndarray::{Array1, Array2, Array3};
use num_complex::Complex64;

use crate::autograd::{stft_stacked, NodeId, Tape};
use crate::dsp::stft::Spectrogram;
use crate::dsp::wave::Waveform;
use crate::error::{QuadstemError, Result};
use crate::model::config::{Arch, ModelConfig};
use crate::model::params::{decoder_bank_name, ModelParams};
use crate::stem::Stem;

/// Variance floor used by every normalization layer so silent input stays
/// finite.
pub const NORM_EPS: f64 = 1e-5;

/// Band-split mixture embedding, indexed (band, frame, feature).
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureEmbedding {
    pub values: Array3<f64>,
}

impl MixtureEmbedding {
    pub fn n_bands(&self) -> usize {
        self.values.dim().0
    }

    pub fn n_frames(&self) -> usize {
        self.values.dim().1
    }

    pub fn embed_dim(&self) -> usize {
        self.values.dim().2
    }
}

/// Learnable per-stem FiLM condition.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryCondition {
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
    pub stem: Stem,
}

/// Full-bin complex mask for one stem.
#[derive(Debug, Clone, PartialEq)]
pub struct StemMask {
    pub values: Array2<Complex64>,
    pub stem: Stem,
}

/// Leaf nodes for every parameter array, keyed by parameter name.
pub fn param_nodes(tape: &mut Tape, params: &ModelParams) -> BTreeMap<String, NodeId> {
    params
        .arrays
        .iter()
        .map(|(name, arr)| (name.clone(), tape.leaf(arr.clone())))
        .collect()
}

fn node(nodes: &BTreeMap<String, NodeId>, name: &str) -> NodeId {
    *nodes.get(name).unwrap_or_else(|| panic!("missing parameter node '{name}'"))
}

/// Row permutation taking band-major (b*T + t) to time-major (t*B + b).
fn perm_to_time_major(n_bands: usize, n_frames: usize) -> Rc<Vec<usize>> {
    Rc::new(
        (0..n_bands * n_frames)
            .map(|i| (i % n_bands) * n_frames + i / n_bands)
            .collect(),
    )
}

fn perm_to_band_major(n_bands: usize, n_frames: usize) -> Rc<Vec<usize>> {
    Rc::new(
        (0..n_bands * n_frames)
            .map(|j| (j % n_frames) * n_bands + j / n_frames)
            .collect(),
    )
}

/// One recurrent sweep: `steps` tanh-RNN steps over contiguous row blocks of
/// `batch` rows each. Returns stacked hidden states in step order.
fn rnn_sweep(
    tape: &mut Tape,
    input: NodeId,
    steps: usize,
    batch: usize,
    wx: NodeId,
    wh: NodeId,
    bias: NodeId,
) -> NodeId {
    let hidden = tape.value(wx).ncols();
    let mut prev = tape.leaf(Array2::zeros((batch, hidden)));
    let mut outs = Vec::with_capacity(steps);
    for s in 0..steps {
        let x = tape.rows(input, s * batch, (s + 1) * batch);
        let xa = tape.matmul(x, wx);
        let hh = tape.matmul(prev, wh);
        let sum = tape.add(xa, hh);
        let pre = tape.add_row(sum, bias);
        let h = tape.tanh(pre);
        outs.push(h);
        prev = h;
    }
    tape.concat_rows(outs)
}

/// Residual recurrent block: sweep, project back to D, add input, layer norm.
fn residual_block(
    tape: &mut Tape,
    nodes: &BTreeMap<String, NodeId>,
    prefix: &str,
    input: NodeId,
    steps: usize,
    batch: usize,
) -> NodeId {
    let o = rnn_sweep(
        tape,
        input,
        steps,
        batch,
        node(nodes, &format!("{prefix}.wx")),
        node(nodes, &format!("{prefix}.wh")),
        node(nodes, &format!("{prefix}.b")),
    );
    let proj = tape.matmul(o, node(nodes, &format!("{prefix}.wo")));
    let proj = tape.add_row(proj, node(nodes, &format!("{prefix}.bo")));
    let res = tape.add(input, proj);
    let rn = tape.row_norm(res, NORM_EPS);
    let g = tape.mul_row(rn, node(nodes, &format!("{prefix}.ln_g")));
    tape.add_row(g, node(nodes, &format!("{prefix}.ln_b")))
}

/// Band-split encoder on the tape. Input is the stacked (2*n_bins, T)
/// spectrogram; output is the band-major (B*T, D) embedding.
pub fn encode_on_tape(
    tape: &mut Tape,
    nodes: &BTreeMap<String, NodeId>,
    cfg: &ModelConfig,
    spec: NodeId,
) -> NodeId {
    let nb = cfg.band_spec.n_bins;
    let n_frames = tape.value(spec).ncols();
    let n_bands = cfg.n_bands();

    let mut per_band = Vec::with_capacity(n_bands);
    for (b, &(lo, hi)) in cfg.band_spec.bands.iter().enumerate() {
        let re = tape.rows(spec, lo, hi);
        let im = tape.rows(spec, nb + lo, nb + hi);
        let both = tape.concat_rows(vec![re, im]);
        let xb = tape.transpose(both); // (T, 2w)
        let rn = tape.row_norm(xb, NORM_EPS);
        let h = tape.matmul(rn, node(nodes, &format!("enc.band{b:03}.w")));
        let h = tape.add_row(h, node(nodes, &format!("enc.band{b:03}.b")));
        per_band.push(h);
    }
    let mut z = tape.concat_rows(per_band); // band-major

    let to_t = perm_to_time_major(n_bands, n_frames);
    let to_b = perm_to_band_major(n_bands, n_frames);
    for l in 0..cfg.n_seq_layers {
        // Time sweep: recurrence over frames, batched across bands.
        let zt = tape.permute_rows(z, to_t.clone());
        let zt = residual_block(
            tape,
            nodes,
            &format!("enc.layer{l:02}.time"),
            zt,
            n_frames,
            n_bands,
        );
        // Band sweep: recurrence over bands, batched across frames.
        let zb = tape.permute_rows(zt, to_b.clone());
        z = residual_block(
            tape,
            nodes,
            &format!("enc.layer{l:02}.band"),
            zb,
            n_bands,
            n_frames,
        );
    }
    z
}

/// Band-agnostic FiLM on the tape: the same (gamma, beta) row applied at
/// every band and frame.
pub fn film_on_tape(
    tape: &mut Tape,
    emb: NodeId,
    gamma: NodeId,
    beta: Option<NodeId>,
) -> NodeId {
    let scaled = tape.mul_row(emb, gamma);
    match beta {
        Some(b) => tape.add_row(scaled, b),
        None => scaled,
    }
}

/// Per-band mask decoding on the tape. Returns the stacked (2*n_bins, T)
/// complex mask with tanh-saturated, sigmoid-gated real/imag parts.
pub fn decode_on_tape(
    tape: &mut Tape,
    nodes: &BTreeMap<String, NodeId>,
    cfg: &ModelConfig,
    bank: &str,
    emb: NodeId,
) -> NodeId {
    let n_bands = cfg.n_bands();
    let n_frames = tape.value(emb).nrows() / n_bands;
    let mut re_parts = Vec::with_capacity(n_bands);
    let mut im_parts = Vec::with_capacity(n_bands);
    for b in 0..n_bands {
        let w = cfg.band_spec.band_width(b);
        let p = format!("{bank}.band{b:03}");
        let e = tape.rows(emb, b * n_frames, (b + 1) * n_frames);
        let h = tape.matmul(e, node(nodes, &format!("{p}.w1")));
        let h = tape.add_row(h, node(nodes, &format!("{p}.b1")));
        let h = tape.tanh(h);
        let v = tape.matmul(h, node(nodes, &format!("{p}.w2v")));
        let v = tape.add_row(v, node(nodes, &format!("{p}.b2v")));
        let g = tape.matmul(h, node(nodes, &format!("{p}.w2g")));
        let g = tape.add_row(g, node(nodes, &format!("{p}.b2g")));
        let tv = tape.tanh(v);
        let sg = tape.sigmoid(g);
        let m = tape.mul(tv, sg); // (T, 2w)
        let re = tape.cols(m, 0, w);
        let im = tape.cols(m, w, 2 * w);
        re_parts.push(tape.transpose(re));
        im_parts.push(tape.transpose(im));
    }
    re_parts.extend(im_parts);
    tape.concat_rows(re_parts)
}

/// Stacked (2*n_bins, T) real layout of a complex spectrogram.
pub fn stack_spectrogram(spec: &Spectrogram) -> Array2<f64> {
    let nb = spec.n_bins();
    let t = spec.n_frames();
    let mut out = Array2::zeros((2 * nb, t));
    for k in 0..nb {
        for j in 0..t {
            out[[k, j]] = spec.values[[k, j]].re;
            out[[nb + k, j]] = spec.values[[k, j]].im;
        }
    }
    out
}

fn unstack_complex(stacked: &Array2<f64>) -> Array2<Complex64> {
    let nb = stacked.nrows() / 2;
    let t = stacked.ncols();
    Array2::from_shape_fn((nb, t), |(k, j)| {
        Complex64::new(stacked[[k, j]], stacked[[nb + k, j]])
    })
}

fn band_major_to_embedding(z: &Array2<f64>, n_bands: usize) -> MixtureEmbedding {
    let n_frames = z.nrows() / n_bands;
    let d = z.ncols();
    let values = Array3::from_shape_fn((n_bands, n_frames, d), |(b, t, j)| {
        z[[b * n_frames + t, j]]
    });
    MixtureEmbedding { values }
}

/// Computes the mixture embedding for a spectrogram.
pub fn encode(
    spec: &Spectrogram,
    params: &ModelParams,
    cfg: &ModelConfig,
) -> Result<MixtureEmbedding> {
    if spec.n_bins() != cfg.band_spec.n_bins {
        return Err(QuadstemError::ShapeMismatch(format!(
            "spectrogram has {} bins, band spec expects {}",
            spec.n_bins(),
            cfg.band_spec.n_bins
        )));
    }
    let mut tape = Tape::new();
    let nodes = param_nodes(&mut tape, params);
    let input = tape.leaf(stack_spectrogram(spec));
    let z = encode_on_tape(&mut tape, &nodes, cfg, input);
    Ok(band_major_to_embedding(tape.value(z), cfg.n_bands()))
}

/// Band-agnostic feature-wise affine modulation:
/// out[b,t,d] = gamma[d] * emb[b,t,d] + beta[d].
pub fn film(emb: &MixtureEmbedding, query: &QueryCondition) -> Result<MixtureEmbedding> {
    let d = emb.embed_dim();
    if query.gamma.len() != d || query.beta.len() != d {
        return Err(QuadstemError::ShapeMismatch(format!(
            "query length {} / {} vs embedding dim {d}",
            query.gamma.len(),
            query.beta.len()
        )));
    }
    let mut values = emb.values.clone();
    for mut lane in values.rows_mut() {
        for (j, v) in lane.iter_mut().enumerate() {
            *v = query.gamma[j] * *v + query.beta[j];
        }
    }
    Ok(MixtureEmbedding { values })
}

/// Decodes a full-bin complex mask for one stem from an embedding.
pub fn decode_band_masks(
    emb: &MixtureEmbedding,
    params: &ModelParams,
    cfg: &ModelConfig,
    stem: Stem,
) -> Result<StemMask> {
    if emb.n_bands() != cfg.n_bands() {
        return Err(QuadstemError::ShapeMismatch(format!(
            "embedding has {} bands, config expects {}",
            emb.n_bands(),
            cfg.n_bands()
        )));
    }
    let (n_bands, n_frames, d) = emb.values.dim();
    let mut tape = Tape::new();
    let nodes = param_nodes(&mut tape, params);
    let z = Array2::from_shape_fn((n_bands * n_frames, d), |(i, j)| {
        emb.values[[i / n_frames, i % n_frames, j]]
    });
    let z = tape.leaf(z);
    let bank = decoder_bank_name(cfg.arch, stem);
    let mask = decode_on_tape(&mut tape, &nodes, cfg, &bank, z);
    Ok(StemMask { values: unstack_complex(tape.value(mask)), stem })
}

fn check_input(mix: &Waveform, cfg: &ModelConfig) -> Result<()> {
    if mix.is_empty() {
        return Err(QuadstemError::InvalidInput("empty mixture".into()));
    }
    if mix.sample_rate != cfg.sample_rate {
        return Err(QuadstemError::InvalidInput(format!(
            "mixture at {} Hz, model expects {} Hz",
            mix.sample_rate, cfg.sample_rate
        )));
    }
    Ok(())
}

/// Builds the full separation graph on an existing tape: encoder once, then
/// per-stem conditioning, mask decoding, masking, and synthesis. Returns the
/// estimated-waveform node per stem.
pub fn forward_on_tape(
    tape: &mut Tape,
    nodes: &BTreeMap<String, NodeId>,
    cfg: &ModelConfig,
    mix: &Waveform,
    stems: &[Stem],
) -> Result<BTreeMap<Stem, NodeId>> {
    check_input(mix, cfg)?;
    let mix_stacked = Rc::new(stft_stacked(&mix.samples, &cfg.stft));
    let input = tape.leaf(mix_stacked.as_ref().clone());
    let emb = encode_on_tape(tape, nodes, cfg, input);

    let mut out = BTreeMap::new();
    for &stem in stems {
        if !cfg.stems.contains(&stem) {
            return Err(QuadstemError::InvalidInput(format!(
                "stem {stem} not in model stem set"
            )));
        }
        let stem_emb = match cfg.arch {
            Arch::Bandit => emb,
            Arch::Banquet => {
                let gamma = node(nodes, &format!("query.{}.gamma", stem.file_token()));
                let beta = cfg
                    .film_bias
                    .then(|| node(nodes, &format!("query.{}.beta", stem.file_token())));
                film_on_tape(tape, emb, gamma, beta)
            }
        };
        let bank = decoder_bank_name(cfg.arch, stem);
        let mask = decode_on_tape(tape, nodes, cfg, &bank, stem_emb);
        let est_spec = tape.complex_mul_const(mask, mix_stacked.clone());
        let est = tape.istft(est_spec, cfg.stft, mix.len());
        out.insert(stem, est);
    }
    Ok(out)
}

fn separate(
    mix: &Waveform,
    params: &ModelParams,
    cfg: &ModelConfig,
    stems: &[Stem],
) -> Result<BTreeMap<Stem, Waveform>> {
    let mut tape = Tape::new();
    let nodes = param_nodes(&mut tape, params);
    let est_nodes = forward_on_tape(&mut tape, &nodes, cfg, mix, stems)?;
    Ok(est_nodes
        .into_iter()
        .map(|(stem, id)| {
            let samples = tape.value(id).row(0).to_vec();
            (stem, Waveform { samples, sample_rate: mix.sample_rate })
        })
        .collect())
}

/// Separates a mixture with the dedicated-decoder architecture. Produces
/// every configured stem.
pub fn forward_bandit(
    mix: &Waveform,
    params: &ModelParams,
    cfg: &ModelConfig,
) -> Result<BTreeMap<Stem, Waveform>> {
    if cfg.arch != Arch::Bandit {
        return Err(QuadstemError::Config("forward_bandit requires arch=bandit".into()));
    }
    separate(mix, params, cfg, &cfg.stems.clone())
}

/// Separates a mixture with the query-conditioned shared-decoder
/// architecture. The encoder runs once; each requested stem applies its own
/// FiLM condition before the shared decoder.
pub fn forward_banquet(
    mix: &Waveform,
    params: &ModelParams,
    cfg: &ModelConfig,
    stems_requested: &[Stem],
) -> Result<BTreeMap<Stem, Waveform>> {
    if cfg.arch != Arch::Banquet {
        return Err(QuadstemError::Config("forward_banquet requires arch=banquet".into()));
    }
    separate(mix, params, cfg, stems_requested)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::stft::stft;
    use crate::stem::SetupKind;
    use ndarray::Array1;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn toy_wave(secs: f64, cfg: &ModelConfig, seed: u64) -> Waveform {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = (secs * cfg.sample_rate as f64) as usize;
        let samples = (0..n).map(|_| rng.gen_range(-0.5..0.5)).collect();
        Waveform::new(samples, cfg.sample_rate).unwrap()
    }

    #[test]
    fn encode_shape_contract() {
        let cfg = ModelConfig::toy(Arch::Bandit, SetupKind::SplitMx);
        let params = ModelParams::init(&cfg, 3);
        let wave = toy_wave(0.5, &cfg, 1);
        let spec = stft(&wave, &cfg.stft).unwrap();
        let emb = encode(&spec, &params, &cfg).unwrap();
        assert_eq!(emb.n_bands(), cfg.n_bands());
        assert_eq!(emb.embed_dim(), cfg.embed_dim);
        assert!(emb.values.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn default_config_has_64_bands() {
        let cfg = ModelConfig::full_scale(Arch::Bandit, SetupKind::SplitMx);
        assert_eq!(cfg.n_bands(), 64);
    }

    #[test]
    fn encode_zero_input_is_finite() {
        let cfg = ModelConfig::toy(Arch::Bandit, SetupKind::SplitMx);
        let params = ModelParams::init(&cfg, 3);
        let wave = Waveform::zeros(cfg.sample_rate as usize / 4, cfg.sample_rate);
        let spec = stft(&wave, &cfg.stft).unwrap();
        let emb = encode(&spec, &params, &cfg).unwrap();
        assert!(emb.values.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn encode_is_not_constant() {
        let cfg = ModelConfig::toy(Arch::Bandit, SetupKind::SplitMx);
        let params = ModelParams::init(&cfg, 3);
        let a = stft(&toy_wave(0.3, &cfg, 1), &cfg.stft).unwrap();
        let b = stft(&toy_wave(0.3, &cfg, 2), &cfg.stft).unwrap();
        let ea = encode(&a, &params, &cfg).unwrap();
        let eb = encode(&b, &params, &cfg).unwrap();
        assert_ne!(ea.values, eb.values);
    }

    #[test]
    fn film_identity_and_arithmetic() {
        let values = Array3::from_shape_fn((2, 3, 4), |(b, t, d)| (b + t + d) as f64 - 3.0);
        let emb = MixtureEmbedding { values };
        let identity = QueryCondition {
            gamma: Array1::ones(4),
            beta: Array1::zeros(4),
            stem: Stem::Dx,
        };
        let out = film(&emb, &identity).unwrap();
        assert_eq!(out.values, emb.values);

        // gamma=0, beta=b collapses to the constant beta row.
        let constant = QueryCondition {
            gamma: Array1::zeros(4),
            beta: Array1::from_vec(vec![1.0, 2.0, 3.0, 4.0]),
            stem: Stem::Dx,
        };
        let out = film(&emb, &constant).unwrap();
        for lane in out.values.rows() {
            assert_eq!(lane.to_vec(), vec![1.0, 2.0, 3.0, 4.0]);
        }

        // Elementwise affine spot checks: 3*2+1 = 7 and 0.5*(-1)+(-1) = -1.5.
        let mut emb1 = MixtureEmbedding { values: Array3::zeros((1, 1, 2)) };
        emb1.values[[0, 0, 0]] = 2.0;
        emb1.values[[0, 0, 1]] = -1.0;
        let q = QueryCondition {
            gamma: Array1::from_vec(vec![3.0, 0.5]),
            beta: Array1::from_vec(vec![1.0, -1.0]),
            stem: Stem::Fx,
        };
        let out = film(&emb1, &q).unwrap();
        assert_eq!(out.values[[0, 0, 0]], 7.0);
        assert_eq!(out.values[[0, 0, 1]], -1.5);
    }

    #[test]
    fn film_dimension_mismatch_rejected() {
        let emb = MixtureEmbedding { values: Array3::zeros((2, 3, 4)) };
        let q = QueryCondition {
            gamma: Array1::ones(5),
            beta: Array1::zeros(5),
            stem: Stem::Dx,
        };
        assert!(film(&emb, &q).is_err());
    }

    #[test]
    fn film_band_permutation_commutes() {
        let cfg = ModelConfig::toy(Arch::Banquet, SetupKind::SplitMx);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let values =
            Array3::from_shape_fn((cfg.n_bands(), 5, cfg.embed_dim), |_| rng.gen_range(-2.0..2.0));
        let emb = MixtureEmbedding { values };
        let q = QueryCondition {
            gamma: Array1::from_shape_fn(cfg.embed_dim, |_| rng.gen_range(-1.0..1.0)),
            beta: Array1::from_shape_fn(cfg.embed_dim, |_| rng.gen_range(-1.0..1.0)),
            stem: Stem::MxV,
        };
        // Reverse the band axis, then film == film, then reverse.
        let mut permuted = emb.values.clone();
        for b in 0..cfg.n_bands() {
            permuted
                .index_axis_mut(ndarray::Axis(0), b)
                .assign(&emb.values.index_axis(ndarray::Axis(0), cfg.n_bands() - 1 - b));
        }
        let f_then_p = {
            let f = film(&emb, &q).unwrap();
            let mut out = f.values.clone();
            for b in 0..cfg.n_bands() {
                out.index_axis_mut(ndarray::Axis(0), b)
                    .assign(&f.values.index_axis(ndarray::Axis(0), cfg.n_bands() - 1 - b));
            }
            out
        };
        let p_then_f = film(&MixtureEmbedding { values: permuted }, &q).unwrap().values;
        assert_eq!(f_then_p, p_then_f);
    }

    #[test]
    fn decoder_masks_cover_all_bins_and_saturate() {
        let cfg = ModelConfig::toy(Arch::Bandit, SetupKind::SplitMx);
        let params = ModelParams::init(&cfg, 5);
        let extreme = MixtureEmbedding {
            values: Array3::from_elem((cfg.n_bands(), 4, cfg.embed_dim), 1e4),
        };
        let mask = decode_band_masks(&extreme, &params, &cfg, Stem::Dx).unwrap();
        assert_eq!(mask.values.nrows(), cfg.band_spec.n_bins);
        assert!(mask
            .values
            .iter()
            .all(|c| c.re.is_finite() && c.im.is_finite() && c.re.abs() <= 1.0 && c.im.abs() <= 1.0));
    }

    #[test]
    fn different_decoder_banks_give_different_masks() {
        let cfg = ModelConfig::toy(Arch::Bandit, SetupKind::SplitMx);
        let params = ModelParams::init(&cfg, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let emb = MixtureEmbedding {
            values: Array3::from_shape_fn((cfg.n_bands(), 4, cfg.embed_dim), |_| {
                rng.gen_range(-1.0..1.0)
            }),
        };
        let a = decode_band_masks(&emb, &params, &cfg, Stem::Dx).unwrap();
        let b = decode_band_masks(&emb, &params, &cfg, Stem::Fx).unwrap();
        assert_ne!(a.values, b.values);
    }

    #[test]
    fn bandit_outputs_every_configured_stem_at_input_length() {
        for setup in [SetupKind::InstrumentalOnly, SetupKind::CombinedMx, SetupKind::SplitMx] {
            let cfg = ModelConfig::toy(Arch::Bandit, setup);
            let params = ModelParams::init(&cfg, 7);
            for secs in [0.13, 0.5] {
                let mix = toy_wave(secs, &cfg, 3);
                let est = forward_bandit(&mix, &params, &cfg).unwrap();
                assert_eq!(
                    est.keys().copied().collect::<Vec<_>>(),
                    {
                        let mut s = cfg.stems.clone();
                        s.sort();
                        s
                    }
                );
                for wave in est.values() {
                    assert_eq!(wave.len(), mix.len());
                }
            }
        }
    }

    #[test]
    fn bandit_rejects_banquet_config() {
        let cfg = ModelConfig::toy(Arch::Banquet, SetupKind::SplitMx);
        let params = ModelParams::init(&cfg, 7);
        let mix = toy_wave(0.2, &cfg, 3);
        assert!(forward_bandit(&mix, &params, &cfg).is_err());
    }

    #[test]
    fn banquet_single_stem_matches_full_request_bitwise() {
        let cfg = ModelConfig::toy(Arch::Banquet, SetupKind::SplitMx);
        let params = ModelParams::init(&cfg, 7);
        let mix = toy_wave(0.4, &cfg, 3);
        let all = forward_banquet(&mix, &params, &cfg, &cfg.stems.clone()).unwrap();
        let only = forward_banquet(&mix, &params, &cfg, &[Stem::MxV]).unwrap();
        assert_eq!(only[&Stem::MxV].samples, all[&Stem::MxV].samples);
    }

    #[test]
    fn banquet_swapping_queries_swaps_estimates() {
        let cfg = ModelConfig::toy(Arch::Banquet, SetupKind::SplitMx);
        let mut params = ModelParams::init(&cfg, 7);
        let mix = toy_wave(0.4, &cfg, 3);
        let before = forward_banquet(&mix, &params, &cfg, &[Stem::Dx, Stem::Fx]).unwrap();
        for leaf in ["gamma", "beta"] {
            let dx = params.arrays[&format!("query.dx.{leaf}")].clone();
            let fx = params.arrays[&format!("query.fx.{leaf}")].clone();
            params.arrays.insert(format!("query.dx.{leaf}"), fx);
            params.arrays.insert(format!("query.fx.{leaf}"), dx);
        }
        let after = forward_banquet(&mix, &params, &cfg, &[Stem::Dx, Stem::Fx]).unwrap();
        assert_eq!(before[&Stem::Dx].samples, after[&Stem::Fx].samples);
        assert_eq!(before[&Stem::Fx].samples, after[&Stem::Dx].samples);
    }

    #[test]
    fn banquet_identity_queries_collapse_stems() {
        let cfg = ModelConfig::toy(Arch::Banquet, SetupKind::SplitMx);
        let mut params = ModelParams::init(&cfg, 7);
        let mix = toy_wave(0.4, &cfg, 3);
        for stem in ["dx", "fx"] {
            params
                .arrays
                .insert(format!("query.{stem}.gamma"), Array2::ones((1, cfg.embed_dim)));
            params
                .arrays
                .insert(format!("query.{stem}.beta"), Array2::zeros((1, cfg.embed_dim)));
        }
        let est = forward_banquet(&mix, &params, &cfg, &[Stem::Dx, Stem::Fx]).unwrap();
        assert_eq!(est[&Stem::Dx].samples, est[&Stem::Fx].samples);
    }

    #[test]
    fn banquet_unknown_stem_rejected() {
        let cfg = ModelConfig::toy(Arch::Banquet, SetupKind::InstrumentalOnly);
        let params = ModelParams::init(&cfg, 7);
        let mix = toy_wave(0.2, &cfg, 3);
        assert!(forward_banquet(&mix, &params, &cfg, &[Stem::MxV]).is_err());
    }
}
