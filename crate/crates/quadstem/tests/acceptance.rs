//! End-to-end acceptance suite. Each test prints one PASS line for its
//! criterion; a failing criterion fails its test.

use std::collections::BTreeMap;
use std::path::Path;

use ndarray::Array1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use quadstem::analysis::{cluster_order, emit_clustermap, extract_queries, z_normalize};
use quadstem::autograd::Tape;
use quadstem::datagen::{
    build_manifest, index_pools, synthesize_example, LevelConfig, MixtureExample,
};
use quadstem::dsp::{
    istft, make_band_spec, stft, write_wav, StftConfig, Waveform, Window,
};
use quadstem::eval::{
    cohens_d_paired, median, snr_record, wilcoxon_signed_rank, SNR_CLAMP_DB,
};
use quadstem::model::network::{
    decode_band_masks, encode, film, forward_banquet, forward_on_tape, param_nodes,
    QueryCondition,
};
use quadstem::model::{
    load_checkpoint, save_checkpoint, Arch, CheckpointFile, ModelConfig, ModelParams,
};
use quadstem::stem::{SetupKind, Stem, StemClass};
use quadstem::training::{
    evaluate_loss, loss_on_tape, train, Dataset, ExampleAudio, LossWeights, TrainConfig,
};

const SR: u32 = 16_000;

fn tone(freqs: &[f64], amp: f64, secs: f64) -> Waveform {
    let n = (secs * SR as f64) as usize;
    let samples = (0..n)
        .map(|t| {
            freqs
                .iter()
                .map(|f| amp * (2.0 * std::f64::consts::PI * f * t as f64 / SR as f64).sin())
                .sum()
        })
        .collect();
    Waveform::new(samples, SR).unwrap()
}

/// Source tree with spectrally disjoint material per class, two songs each.
fn make_source_tree(root: &Path) {
    let banks: [(&str, Vec<(&str, Vec<f64>)>); 4] = [
        ("dx", vec![("talk1", vec![200.0, 310.0]), ("talk2", vec![250.0, 405.0])]),
        ("mx_v", vec![("song1", vec![620.0, 930.0]), ("song2", vec![710.0, 1065.0])]),
        ("mx_i", vec![("song1", vec![1400.0, 2100.0]), ("song2", vec![1700.0, 2550.0])]),
        ("fx", vec![("swoosh1", vec![3600.0, 4400.0]), ("swoosh2", vec![5200.0, 6100.0])]),
    ];
    for (sub, files) in banks {
        let dir = root.join(sub);
        std::fs::create_dir_all(&dir).unwrap();
        for (name, freqs) in files {
            write_wav(&dir.join(format!("{name}.wav")), &tone(&freqs, 0.22, 12.0)).unwrap();
        }
    }
}

fn toy_examples(setup: SetupKind, n: usize, seed: u64) -> Vec<MixtureExample> {
    let dir = tempfile::tempdir().unwrap();
    make_source_tree(dir.path());
    let pools = index_pools(dir.path()).unwrap();
    let manifest =
        build_manifest(&pools, setup, n, 3.0, SR, seed, &LevelConfig::default()).unwrap();
    manifest.iter().map(|e| synthesize_example(e).unwrap()).collect()
}

fn toy_dataset(examples: &[MixtureExample]) -> Dataset {
    Dataset {
        examples: examples
            .iter()
            .map(|ex| ExampleAudio {
                id: ex.manifest.example_id.clone(),
                mixture: ex.mixture.clone(),
                stems: ex.stems.clone(),
            })
            .collect(),
    }
}

#[test]
fn criterion_1_parameter_structure() {
    for (arch, setup) in [
        (Arch::Banquet, SetupKind::SplitMx),
        (Arch::Bandit, SetupKind::SplitMx),
    ] {
        let cfg4 = ModelConfig::toy(arch, setup);
        let mut cfg3 = cfg4.clone();
        cfg3.stems = vec![Stem::Dx, Stem::MxI, Stem::Fx];
        let c4 = ModelParams::init(&cfg4, 1).count_parameters();
        let c3 = ModelParams::init(&cfg3, 1).count_parameters();
        match arch {
            // One more stem costs exactly one query pair (gamma + beta).
            Arch::Banquet => assert_eq!(c4.total - c3.total, 2 * cfg4.embed_dim),
            // One more stem costs exactly one full decoder bank.
            Arch::Bandit => {
                assert_eq!(c4.decoders - c3.decoders, c4.decoders / 4);
                assert_eq!(c4.total - c3.total, c4.decoders / 4);
                assert_eq!(c4.encoder, c3.encoder);
            }
        }
    }
    let bandit = ModelParams::init(
        &ModelConfig::full_scale(Arch::Bandit, SetupKind::SplitMx),
        1,
    )
    .count_parameters();
    let banquet = ModelParams::init(
        &ModelConfig::full_scale(Arch::Banquet, SetupKind::SplitMx),
        1,
    )
    .count_parameters();
    let ratio = banquet.total as f64 / bandit.total as f64;
    assert!(
        (0.40..=0.70).contains(&ratio),
        "shared/dedicated parameter ratio {ratio:.3} outside [0.40, 0.70]"
    );
    println!(
        "PASS criterion 1: parameter structure (ratio {ratio:.3}, bandit {} / banquet {})",
        bandit.total, banquet.total
    );
}

#[test]
fn criterion_2_film_semantics() {
    let cfg = ModelConfig::toy(Arch::Banquet, SetupKind::SplitMx);
    let params = ModelParams::init(&cfg, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let wave = Waveform::new(
        (0..SR as usize).map(|_| rng.gen_range(-0.4..0.4)).collect(),
        SR,
    )
    .unwrap();
    let spec = stft(&wave, &cfg.stft).unwrap();
    let emb = encode(&spec, &params, &cfg).unwrap();
    let d = cfg.embed_dim;

    // Identity condition reproduces the embedding bit-exactly.
    let identity =
        QueryCondition { gamma: Array1::ones(d), beta: Array1::zeros(d), stem: Stem::Dx };
    let out = film(&emb, &identity).unwrap();
    assert!(out
        .values
        .iter()
        .zip(emb.values.iter())
        .all(|(a, b)| a.to_bits() == b.to_bits()));

    // FiLM is band-agnostic: permuting bands commutes with it.
    let query = QueryCondition {
        gamma: Array1::from_shape_fn(d, |i| 0.5 + 0.1 * i as f64),
        beta: Array1::from_shape_fn(d, |i| -0.2 + 0.03 * i as f64),
        stem: Stem::Fx,
    };
    let n_bands = emb.n_bands();
    let perm: Vec<usize> = (0..n_bands).rev().collect();
    let permute = |e: &quadstem::model::MixtureEmbedding| {
        let mut v = e.values.clone();
        for (dst, &src) in perm.iter().enumerate() {
            v.index_axis_mut(ndarray::Axis(0), dst)
                .assign(&e.values.index_axis(ndarray::Axis(0), src));
        }
        quadstem::model::MixtureEmbedding { values: v }
    };
    let a = film(&permute(&emb), &query).unwrap();
    let b = permute(&film(&emb, &query).unwrap());
    assert!(a.values.iter().zip(b.values.iter()).all(|(x, y)| x.to_bits() == y.to_bits()));

    // Swapping two stems' query vectors swaps their outputs exactly.
    let stems = [Stem::Dx, Stem::Fx];
    let before = forward_banquet(&wave, &params, &cfg, &stems).unwrap();
    let mut swapped = params.clone();
    for field in ["gamma", "beta"] {
        let dx = swapped.arrays[&format!("query.dx.{field}")].clone();
        let fx = swapped.arrays[&format!("query.fx.{field}")].clone();
        swapped.arrays.insert(format!("query.dx.{field}"), fx);
        swapped.arrays.insert(format!("query.fx.{field}"), dx);
    }
    let after = forward_banquet(&wave, &swapped, &cfg, &stems).unwrap();
    let bits =
        |w: &Waveform| w.samples.iter().map(|s| s.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&after[&Stem::Dx]), bits(&before[&Stem::Fx]));
    assert_eq!(bits(&after[&Stem::Fx]), bits(&before[&Stem::Dx]));
    println!("PASS criterion 2: FiLM semantics (identity, band permutation, query swap)");
}

#[test]
fn criterion_3_dsp_suite() {
    // Round trip below -80 dB relative RMS over 100 random signals.
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let configs = [
        StftConfig::default(),
        StftConfig { n_fft: 512, hop: 128, window: Window::SqrtHann, center_pad: true },
        StftConfig { n_fft: 256, hop: 64, window: Window::Hann, center_pad: true },
    ];
    for i in 0..100 {
        let cfg = &configs[i % configs.len()];
        let len = rng.gen_range(cfg.n_fft * 2..SR as usize);
        let wave = Waveform::new(
            (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            SR,
        )
        .unwrap();
        let back = istft(&stft(&wave, cfg).unwrap(), cfg, wave.len()).unwrap();
        let err: f64 = wave
            .samples
            .iter()
            .zip(&back.samples)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        let rel_db = 10.0 * (err / wave.energy()).log10();
        assert!(rel_db < -80.0, "round trip {rel_db:.1} dB (cfg {i})");
    }

    // Band partition invariants across the full grid.
    for n_bins in [257, 513, 1025] {
        for n_bands in 1..=64 {
            let spec = make_band_spec(n_bins, n_bands, 44_100).unwrap();
            spec.validate().unwrap();
            let mut covered = vec![0usize; n_bins];
            for &(lo, hi) in &spec.bands {
                for c in covered.iter_mut().take(hi).skip(lo) {
                    *c += 1;
                }
            }
            assert!(covered.iter().all(|&c| c == 1), "bins not covered exactly once");
        }
    }

    // Mask assembly covers every bin exactly once and stays finite.
    let cfg = ModelConfig::toy(Arch::Bandit, SetupKind::SplitMx);
    let params = ModelParams::init(&cfg, 5);
    let wave = tone(&[440.0], 0.3, 0.5);
    let spec = stft(&wave, &cfg.stft).unwrap();
    let emb = encode(&spec, &params, &cfg).unwrap();
    let mask = decode_band_masks(&emb, &params, &cfg, Stem::Dx).unwrap();
    assert_eq!(mask.values.dim(), (cfg.stft.n_bins(), spec.n_frames()));
    assert!(mask.values.iter().all(|c| c.re.is_finite() && c.im.is_finite()));
    println!("PASS criterion 3: DSP suite (round trip, band partition, mask assembly)");
}

#[test]
fn criterion_4_gradient_check() {
    let stft_cfg =
        StftConfig { n_fft: 64, hop: 16, window: Window::SqrtHann, center_pad: true };
    let cfg = ModelConfig {
        arch: Arch::Banquet,
        stems: vec![Stem::Dx, Stem::Fx],
        band_spec: make_band_spec(stft_cfg.n_bins(), 2, 8_000).unwrap(),
        embed_dim: 4,
        n_seq_layers: 1,
        seq_hidden: 4,
        decoder_hidden: 4,
        film_bias: true,
        stft: stft_cfg,
        sample_rate: 8_000,
    };
    let mut params = ModelParams::init(&cfg, 9);
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let mix = Waveform::new((0..400).map(|_| rng.gen_range(-0.5..0.5)).collect(), 8_000).unwrap();
    let targets: BTreeMap<Stem, Waveform> = cfg
        .stems
        .iter()
        .map(|&s| {
            let w =
                Waveform::new((0..400).map(|_| rng.gen_range(-0.3..0.3)).collect(), 8_000)
                    .unwrap();
            (s, w)
        })
        .collect();
    let weights = LossWeights::default();

    let loss_value = |params: &ModelParams| -> f64 {
        let mut tape = Tape::new();
        let nodes = param_nodes(&mut tape, params);
        let est = forward_on_tape(&mut tape, &nodes, &cfg, &mix, &cfg.stems).unwrap();
        let l = loss_on_tape(&mut tape, &est, &targets, &cfg.stft, weights).unwrap();
        tape.value(l.total)[[0, 0]]
    };
    let mut tape = Tape::new();
    let nodes = param_nodes(&mut tape, &params);
    let est = forward_on_tape(&mut tape, &nodes, &cfg, &mix, &cfg.stems).unwrap();
    let l = loss_on_tape(&mut tape, &est, &targets, &cfg.stft, weights).unwrap();
    let grads = tape.backward(l.total);

    for name in ["query.dx.gamma", "query.dx.beta", "dec.shared.band000.w1"] {
        let g = grads.get(nodes[name]).expect("gradient present").clone();
        // Check the largest-magnitude entry plus one interior entry.
        let (mut bi, mut bj, mut best) = (0, 0, 0.0f64);
        for ((i, j), &v) in g.indexed_iter() {
            if v.abs() > best {
                best = v.abs();
                bi = i;
                bj = j;
            }
        }
        assert!(best > 0.0, "{name}: all-zero gradient");
        for (i, j) in [(bi, bj), (g.nrows() / 2, g.ncols() / 2)] {
            let eps = 1e-6;
            let orig = params.arrays[name][[i, j]];
            params.arrays.get_mut(name).unwrap()[[i, j]] = orig + eps;
            let fp = loss_value(&params);
            params.arrays.get_mut(name).unwrap()[[i, j]] = orig - eps;
            let fm = loss_value(&params);
            params.arrays.get_mut(name).unwrap()[[i, j]] = orig;
            let numeric = (fp - fm) / (2.0 * eps);
            let analytic = g[[i, j]];
            let denom = analytic.abs().max(numeric.abs());
            if denom < 1e-8 {
                continue;
            }
            let rel = (analytic - numeric).abs() / denom;
            assert!(
                rel < 1e-4,
                "{name}[{i},{j}]: analytic {analytic:.3e} vs numeric {numeric:.3e} (rel {rel:.2e})"
            );
        }
    }
    println!("PASS criterion 4: gradient check (gamma, beta, decoder weight, rel err < 1e-4)");
}

#[test]
fn criterion_5_desk_scale_learning() {
    let examples = toy_examples(SetupKind::SplitMx, 8, 1234);
    let dataset = toy_dataset(&examples);
    let tcfg = TrainConfig {
        steps: 2000,
        batch_size: 2,
        segment_secs: 0.5,
        learning_rate: 1e-3,
        grad_clip: 5.0,
        seed: 77,
        checkpoint_every: 1000,
        val_every: 0,
        loss: LossWeights::default(),
        schedule_steps: None,
    };
    for arch in [Arch::Bandit, Arch::Banquet] {
        let cfg = ModelConfig::toy(arch, SetupKind::SplitMx);
        let mut params = ModelParams::init(&cfg, 2024);
        let (initial, _, _) =
            evaluate_loss(&cfg, &params, &dataset, tcfg.loss).unwrap();
        let dir = tempfile::tempdir().unwrap();
        train(&cfg, &mut params, &dataset, None, &tcfg, dir.path()).unwrap();
        let (fin, _, _) = evaluate_loss(&cfg, &params, &dataset, tcfg.loss).unwrap();
        assert!(
            fin < 0.1 * initial,
            "{arch:?}: train loss {initial:.5} -> {fin:.5} (above 10%)"
        );

        let mut snrs = Vec::new();
        for ex in &dataset.examples {
            let estimates = match arch {
                Arch::Banquet => forward_banquet(&ex.mixture, &params, &cfg, &cfg.stems).unwrap(),
                Arch::Bandit => {
                    quadstem::model::network::forward_bandit(&ex.mixture, &params, &cfg).unwrap()
                }
            };
            let rec = snr_record(&ex.id, "m", SetupKind::SplitMx, &ex.stems, &estimates).unwrap();
            for stem in SetupKind::SplitMx.stems() {
                snrs.push(rec.snr_db[&stem]);
            }
        }
        let med = median(&snrs).unwrap();
        assert!(med > 10.0, "{arch:?}: median train per-stem SNR {med:.2} dB <= 10 dB");
        println!(
            "PASS criterion 5 ({arch:?}): loss {initial:.4} -> {fin:.4}, median SNR {med:.1} dB"
        );
    }
}

#[test]
fn criterion_6_evaluation_protocol() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let refs: BTreeMap<Stem, Waveform> = SetupKind::SplitMx
        .stems()
        .into_iter()
        .map(|s| {
            let w = Waveform::new(
                (0..4000).map(|_| rng.gen_range(-0.4..0.4)).collect(),
                SR,
            )
            .unwrap();
            (s, w)
        })
        .collect();

    // Ground-truth estimates hit the clamp on every stem.
    let rec = snr_record("e", "m", SetupKind::SplitMx, &refs, &refs.clone()).unwrap();
    assert!(rec.snr_db.values().all(|&v| v == SNR_CLAMP_DB));

    // Exactly the expected column set.
    let keys: Vec<String> = rec.snr_db.keys().map(|s| s.to_string()).collect();
    let mut expected: Vec<String> =
        ["DX", "MX-V", "MX-I", "MX-*", "FX"].iter().map(|s| s.to_string()).collect();
    expected.sort_by_key(|name| {
        ["DX", "MX-V", "MX-I", "MX-*", "FX"].iter().position(|x| x == name)
    });
    assert_eq!(keys.len(), 5);
    for name in &expected {
        assert!(keys.contains(name), "missing column {name}");
    }

    // Combined-music SNR equals snr over externally summed estimates bit-exactly.
    let estimates: BTreeMap<Stem, Waveform> = refs
        .iter()
        .map(|(&s, w)| {
            let jittered =
                w.samples.iter().map(|x| x + rng.gen_range(-0.05..0.05)).collect();
            (s, Waveform::new(jittered, SR).unwrap())
        })
        .collect();
    let rec = snr_record("e", "m", SetupKind::SplitMx, &refs, &estimates).unwrap();
    let ref_sum = refs[&Stem::MxV].add(&refs[&Stem::MxI]).unwrap();
    let est_sum = estimates[&Stem::MxV].add(&estimates[&Stem::MxI]).unwrap();
    let external = quadstem::eval::snr_db(&ref_sum, &est_sum).unwrap();
    assert_eq!(rec.snr_db[&Stem::Mx].to_bits(), external.to_bits());
    println!("PASS criterion 6: evaluation protocol (clamp, column set, combined music)");
}

#[test]
fn criterion_7_statistics_oracle() {
    // Hand cases.
    let d = cohens_d_paired(&[0.0, 0.0], &[0.5, 1.5]).unwrap();
    assert!((d - 1.41421).abs() < 1e-5);
    let d = cohens_d_paired(&[0.0, 0.0, 0.0], &[1.0, 2.0, 3.0]).unwrap();
    assert_eq!(d, 2.0);

    let mut rng = ChaCha8Rng::seed_from_u64(53);
    for _ in 0..1000 {
        let n = rng.gen_range(2..50);
        let a: Vec<f64> = (0..n).map(|_| rng.gen_range(-20.0..20.0)).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-20.0..20.0)).collect();

        let mut s = a.clone();
        s.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let brute_median =
            if n % 2 == 1 { s[n / 2] } else { 0.5 * (s[n / 2 - 1] + s[n / 2]) };
        assert!((median(&a).unwrap() - brute_median).abs() < 1e-9);

        let mut sum = 0.0;
        for i in 0..n {
            sum += b[i] - a[i];
        }
        let mean = sum / n as f64;
        let mut ss = 0.0;
        for i in 0..n {
            let v = b[i] - a[i] - mean;
            ss += v * v;
        }
        let brute_d = mean / (ss / (n - 1) as f64).sqrt();
        assert!((cohens_d_paired(&a, &b).unwrap() - brute_d).abs() < 1e-9);
    }

    // Exact Wilcoxon identical to full sign-assignment enumeration.
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(5..=16);
        let a: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let b: Vec<f64> = a
            .iter()
            .map(|x| if rng.gen_bool(0.15) { *x } else { x + rng.gen_range(-2.0..2.0) })
            .collect();
        let diffs: Vec<f64> =
            a.iter().zip(&b).map(|(x, y)| y - x).filter(|&v| v != 0.0).collect();
        let fast = wilcoxon_signed_rank(&a, &b).unwrap();
        let brute = brute_wilcoxon(&diffs);
        assert_eq!(fast, brute, "seed {seed}");
    }
    assert_eq!(wilcoxon_signed_rank(&[1.0; 8], &[1.0; 8]).unwrap(), 1.0);
    println!("PASS criterion 7: statistics oracle (median, d, Wilcoxon vs brute force)");
}

fn brute_wilcoxon(diffs: &[f64]) -> f64 {
    if diffs.is_empty() {
        return 1.0;
    }
    let n = diffs.len();
    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    // Average ranks, doubled to stay integral.
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| abs[i].partial_cmp(&abs[j]).unwrap());
    let mut doubled = vec![0u64; n];
    let mut pos = 0;
    while pos < n {
        let mut end = pos + 1;
        while end < n && abs[idx[end]] == abs[idx[pos]] {
            end += 1;
        }
        for &i in &idx[pos..end] {
            doubled[i] = (pos + 1 + end) as u64;
        }
        pos = end;
    }
    let w_obs: u64 = diffs
        .iter()
        .zip(&doubled)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, &r)| r)
        .sum();
    let mut le = 0u64;
    let mut ge = 0u64;
    for mask in 0u64..(1 << n) {
        let w: u64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| doubled[i]).sum();
        if w <= w_obs {
            le += 1;
        }
        if w >= w_obs {
            ge += 1;
        }
    }
    (2.0 * (le.min(ge) as f64) / (1u64 << n) as f64).min(1.0)
}

#[test]
fn criterion_8_datagen_determinism_and_consistency() {
    let dir = tempfile::tempdir().unwrap();
    make_source_tree(dir.path());
    let pools = index_pools(dir.path()).unwrap();
    let levels = LevelConfig::default();

    // Byte-identical manifests for identical (pools, seed).
    let a = build_manifest(&pools, SetupKind::SplitMx, 20, 3.0, SR, 99, &levels).unwrap();
    let b = build_manifest(&pools, SetupKind::SplitMx, 20, 3.0, SR, 99, &levels).unwrap();
    assert_eq!(
        serde_json::to_vec(&a).unwrap(),
        serde_json::to_vec(&b).unwrap(),
        "manifests not byte-identical"
    );

    for entry in a.iter().take(6) {
        let ex = synthesize_example(entry).unwrap();
        // Mixture is exactly the sample sum of the stems.
        let mut sum = Waveform::zeros(ex.mixture.len(), SR);
        for stem in ex.stems.values() {
            sum = sum.add(stem).unwrap();
        }
        assert!(
            ex.mixture
                .samples
                .iter()
                .zip(&sum.samples)
                .all(|(x, y)| x.to_bits() == y.to_bits()),
            "mixture != exact stem sum"
        );
        // Vocal/instrumental alignment: both layers start at the same sample.
        let first_nonzero =
            |w: &Waveform| w.samples.iter().position(|&s| s != 0.0).unwrap();
        assert_eq!(
            first_nonzero(&ex.stems[&Stem::MxV]),
            first_nonzero(&ex.stems[&Stem::MxI]),
            "music layers misaligned"
        );
    }

    // Instrumental-only runs carry zero vocal material.
    let inst =
        build_manifest(&pools, SetupKind::InstrumentalOnly, 10, 3.0, SR, 7, &levels).unwrap();
    for entry in &inst {
        assert!(entry.events.iter().all(|ev| ev.class != StemClass::MxV));
    }
    let ex = synthesize_example(&inst[0]).unwrap();
    assert!(!ex.stems.contains_key(&Stem::MxV));
    println!("PASS criterion 8: datagen determinism, exact sums, alignment, vocal exclusion");
}

#[test]
fn criterion_9_analysis_pipeline() {
    let cfg = ModelConfig::toy(Arch::Banquet, SetupKind::SplitMx);
    let params = ModelParams::init(&cfg, 61);
    let dir = tempfile::tempdir().unwrap();
    let ckpt_path = dir.path().join("model.ckpt");
    save_checkpoint(&ckpt_path, &CheckpointFile::new(&cfg, &params)).unwrap();
    let (loaded_cfg, loaded_params, _) = load_checkpoint(&ckpt_path).unwrap();

    let queries = extract_queries(&loaded_cfg, &loaded_params).unwrap();
    assert_eq!(queries.values.dim(), (4, cfg.embed_dim));
    assert_eq!(queries.stems, vec![Stem::Dx, Stem::MxV, Stem::MxI, Stem::Fx]);

    let z = z_normalize(&queries);
    for j in 0..cfg.embed_dim {
        let col = z.values.column(j);
        let mean = col.sum() / 4.0;
        assert!(mean.abs() < 1e-10, "column {j} mean {mean}");
        let std = (col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 4.0).sqrt();
        assert!(
            (std - 1.0).abs() < 1e-10 || std == 0.0,
            "column {j} std {std}"
        );
    }

    // Valid permutation; duplicated columns cluster adjacently.
    let mut dup = z.clone();
    let col0 = dup.values.column(0).to_owned();
    dup.values.column_mut(cfg.embed_dim - 1).assign(&col0);
    let order = cluster_order(&dup).unwrap();
    let mut sorted = order.clone();
    sorted.sort_unstable();
    assert_eq!(sorted, (0..cfg.embed_dim).collect::<Vec<_>>());
    let p0 = order.iter().position(|&c| c == 0).unwrap();
    let p1 = order.iter().position(|&c| c == cfg.embed_dim - 1).unwrap();
    assert_eq!(p0.abs_diff(p1), 1, "duplicate columns not adjacent");

    let order = cluster_order(&z).unwrap();
    let (png, csv) = emit_clustermap(&z, &order, &dir.path().join("map")).unwrap();
    assert!(png.exists());
    let (stems, _, values) = quadstem::analysis::read_clustermap_csv(&csv).unwrap();
    assert_eq!(stems, z.stems);
    for (k, &c) in order.iter().enumerate() {
        for i in 0..4 {
            let expected = format!("{:.9}", z.values[[i, c]]).parse::<f64>().unwrap();
            assert_eq!(values[[i, k]], expected);
        }
    }
    println!("PASS criterion 9: analysis pipeline (z-normalize, clustering, clustermap)");
}
