//! Step-budgeted training loop: random segment batches, Adam with cosine
//! decay, JSONL metric log, periodic/best checkpoints, exact resumption.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::autograd::Tape;
use crate::dsp::io::read_audio;
use crate::dsp::Waveform;
use crate::error::{QuadstemError, Result};
use crate::model::checkpoint::{arrays_from_json, arrays_to_json, CheckpointFile};
use crate::model::network::{forward_on_tape, param_nodes};
use crate::model::{load_checkpoint, save_checkpoint, ModelConfig, ModelParams};
use crate::stem::Stem;
use crate::training::loss::{loss_on_tape, LossWeights};
use crate::training::optimizer::{cosine_lr, Adam, AdamConfig};

#[derive(Debug, Clone)]
pub struct ExampleAudio {
    pub id: String,
    pub mixture: Waveform,
    pub stems: BTreeMap<Stem, Waveform>,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub examples: Vec<ExampleAudio>,
}

impl Dataset {
    /// Loads every example directory under `dir` (one subdirectory per
    /// example, `mixture.wav` plus one wav per stem).
    pub fn from_dir(dir: &Path, stems: &[Stem]) -> Result<Self> {
        let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)
            .map_err(|e| QuadstemError::Data(format!("dataset dir {}: {e}", dir.display())))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_dir())
            .collect();
        entries.sort();
        if entries.is_empty() {
            return Err(QuadstemError::Data(format!("no examples under {}", dir.display())));
        }
        let mut examples = Vec::with_capacity(entries.len());
        for path in entries {
            let id = path.file_name().unwrap().to_string_lossy().into_owned();
            let mixture = read_audio(&path.join("mixture.wav"))?;
            let mut stem_waves = BTreeMap::new();
            for &stem in stems {
                stem_waves
                    .insert(stem, read_audio(&path.join(format!("{}.wav", stem.file_token())))?);
            }
            examples.push(ExampleAudio { id, mixture, stems: stem_waves });
        }
        Ok(Self { examples })
    }

    fn validate_for(&self, cfg: &ModelConfig) -> Result<()> {
        if self.examples.is_empty() {
            return Err(QuadstemError::Data("empty dataset".into()));
        }
        for ex in &self.examples {
            if ex.mixture.sample_rate != cfg.sample_rate {
                return Err(QuadstemError::Data(format!(
                    "example {}: sample rate {} vs model {}",
                    ex.id, ex.mixture.sample_rate, cfg.sample_rate
                )));
            }
            for &stem in &cfg.stems {
                let wave = ex.stems.get(&stem).ok_or_else(|| {
                    QuadstemError::Data(format!("example {}: missing stem {stem}", ex.id))
                })?;
                if wave.len() != ex.mixture.len() {
                    return Err(QuadstemError::Data(format!(
                        "example {}: stem {stem} length {} vs mixture {}",
                        ex.id,
                        wave.len(),
                        ex.mixture.len()
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub segment_secs: f64,
    pub learning_rate: f64,
    pub grad_clip: f64,
    pub seed: u64,
    pub checkpoint_every: usize,
    pub val_every: usize,
    pub loss: LossWeights,
    /// Horizon for the cosine schedule. Lets a run stop early (steps < horizon)
    /// and later resume without shifting the decay curve. None means `steps`.
    #[serde(default)]
    pub schedule_steps: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 1000,
            batch_size: 2,
            segment_secs: 1.0,
            learning_rate: 1e-3,
            grad_clip: 5.0,
            seed: 0,
            checkpoint_every: 250,
            val_every: 250,
            loss: LossWeights::default(),
            schedule_steps: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 || self.batch_size == 0 {
            return Err(QuadstemError::Config("steps and batch_size must be positive".into()));
        }
        if self.schedule_steps.is_some_and(|s| s < self.steps) {
            return Err(QuadstemError::Config(
                "schedule_steps must be at least steps".into(),
            ));
        }
        if !(self.segment_secs > 0.0) || !(self.learning_rate > 0.0) {
            return Err(QuadstemError::Config(
                "segment_secs and learning_rate must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(serde::Serialize, serde::Deserialize)]
struct TrainerState {
    step: usize,
    adam_step: usize,
    best_val: Option<f64>,
    m: serde_json::Value,
    v: serde_json::Value,
}

#[derive(serde::Serialize)]
struct MetricRecord<'a> {
    step: usize,
    split: &'a str,
    loss: f64,
    loss_spectral: f64,
    loss_waveform: f64,
    lr: f64,
    grad_norm: Option<f64>,
    wall_ms: u64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub steps_run: usize,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub best_val: Option<f64>,
    pub last_checkpoint: PathBuf,
    pub log_path: PathBuf,
}

/// Deterministic per-step RNG: resumption at step k replays the exact draw
/// sequence without persisting generator state.
fn step_rng(seed: u64, step: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ (step as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn crop(wave: &Waveform, start: usize, len: usize) -> Waveform {
    Waveform {
        samples: wave.samples[start..start + len].to_vec(),
        sample_rate: wave.sample_rate,
    }
}

struct BatchItem {
    mixture: Waveform,
    targets: BTreeMap<Stem, Waveform>,
}

fn sample_batch(
    dataset: &Dataset,
    cfg: &ModelConfig,
    tcfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Vec<BatchItem> {
    let seg_samples = (tcfg.segment_secs * cfg.sample_rate as f64).round() as usize;
    (0..tcfg.batch_size)
        .map(|_| {
            let ex = &dataset.examples[rng.gen_range(0..dataset.examples.len())];
            let len = seg_samples.min(ex.mixture.len());
            let start =
                if ex.mixture.len() > len { rng.gen_range(0..=ex.mixture.len() - len) } else { 0 };
            let targets = cfg
                .stems
                .iter()
                .map(|&s| (s, crop(&ex.stems[&s], start, len)))
                .collect();
            BatchItem { mixture: crop(&ex.mixture, start, len), targets }
        })
        .collect()
}

struct StepResult {
    loss: f64,
    spectral: f64,
    waveform: f64,
    grads: BTreeMap<String, Array2<f64>>,
}

fn loss_and_grads(
    cfg: &ModelConfig,
    params: &ModelParams,
    item: &BatchItem,
    weights: LossWeights,
) -> Result<StepResult> {
    let mut tape = Tape::new();
    let nodes = param_nodes(&mut tape, params);
    let est = forward_on_tape(&mut tape, &nodes, cfg, &item.mixture, &cfg.stems)?;
    let loss = loss_on_tape(&mut tape, &est, &item.targets, &cfg.stft, weights)?;
    let grads_by_node = tape.backward(loss.total);
    let mut grads = BTreeMap::new();
    for (name, &id) in &nodes {
        if let Some(g) = grads_by_node.get(id) {
            grads.insert(name.clone(), g.clone());
        }
    }
    Ok(StepResult {
        loss: tape.value(loss.total)[[0, 0]],
        spectral: tape.value(loss.spectral)[[0, 0]],
        waveform: tape.value(loss.waveform)[[0, 0]],
        grads,
    })
}

/// Mean full-example loss over a dataset, without gradients.
pub fn evaluate_loss(
    cfg: &ModelConfig,
    params: &ModelParams,
    dataset: &Dataset,
    weights: LossWeights,
) -> Result<(f64, f64, f64)> {
    let results: Vec<Result<StepResult>> = dataset
        .examples
        .par_iter()
        .map(|ex| {
            let item = BatchItem { mixture: ex.mixture.clone(), targets: ex.stems.clone() };
            loss_and_grads_free(cfg, params, &item, weights)
        })
        .collect();
    let mut total = 0.0;
    let mut spec = 0.0;
    let mut wav = 0.0;
    for r in &results {
        let r = r.as_ref().map_err(|e| QuadstemError::Data(e.to_string()))?;
        total += r.loss;
        spec += r.spectral;
        wav += r.waveform;
    }
    let n = dataset.examples.len() as f64;
    Ok((total / n, spec / n, wav / n))
}

fn loss_and_grads_free(
    cfg: &ModelConfig,
    params: &ModelParams,
    item: &BatchItem,
    weights: LossWeights,
) -> Result<StepResult> {
    let mut tape = Tape::new();
    let nodes = param_nodes(&mut tape, params);
    let est = forward_on_tape(&mut tape, &nodes, cfg, &item.mixture, &cfg.stems)?;
    let loss = loss_on_tape(&mut tape, &est, &item.targets, &cfg.stft, weights)?;
    Ok(StepResult {
        loss: tape.value(loss.total)[[0, 0]],
        spectral: tape.value(loss.spectral)[[0, 0]],
        waveform: tape.value(loss.waveform)[[0, 0]],
        grads: BTreeMap::new(),
    })
}

fn write_metric(file: &mut std::fs::File, record: &MetricRecord) -> Result<()> {
    let line = serde_json::to_string(record)?;
    writeln!(file, "{line}")?;
    Ok(())
}

fn save_with_state(
    path: &Path,
    cfg: &ModelConfig,
    params: &ModelParams,
    step: usize,
    opt: &Adam,
    best_val: Option<f64>,
) -> Result<()> {
    let mut ckpt = CheckpointFile::new(cfg, params);
    let state = TrainerState {
        step,
        adam_step: opt.step,
        best_val,
        m: arrays_to_json(&opt.m),
        v: arrays_to_json(&opt.v),
    };
    ckpt.trainer_state = Some(serde_json::to_value(state)?);
    save_checkpoint(path, &ckpt)
}

/// Runs (or resumes) training. If `out_dir/last.ckpt` exists it is loaded and
/// training continues from the stored step with identical parameter and
/// optimizer state; the configuration must match exactly.
pub fn train(
    cfg: &ModelConfig,
    params: &mut ModelParams,
    train_set: &Dataset,
    val_set: Option<&Dataset>,
    tcfg: &TrainConfig,
    out_dir: &Path,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    tcfg.validate()?;
    train_set.validate_for(cfg)?;
    if let Some(v) = val_set {
        v.validate_for(cfg)?;
    }
    std::fs::create_dir_all(out_dir)?;
    let last_path = out_dir.join("last.ckpt");
    let best_path = out_dir.join("best.ckpt");
    let log_path = out_dir.join("metrics.jsonl");

    let mut opt = Adam::new(AdamConfig { grad_clip: tcfg.grad_clip, ..AdamConfig::default() });
    let mut start_step = 0usize;
    let mut best_val: Option<f64> = None;
    if last_path.exists() {
        let (ckpt_cfg, ckpt_params, file) = load_checkpoint(&last_path)?;
        if &ckpt_cfg != cfg {
            return Err(QuadstemError::Checkpoint(
                "resume checkpoint config differs from requested config".into(),
            ));
        }
        let state_json = file.trainer_state.ok_or_else(|| {
            QuadstemError::Checkpoint("resume checkpoint lacks trainer state".into())
        })?;
        let state: TrainerState = serde_json::from_value(state_json)?;
        *params = ckpt_params;
        opt.step = state.adam_step;
        opt.m = arrays_from_json(&state.m)?;
        opt.v = arrays_from_json(&state.v)?;
        start_step = state.step;
        best_val = state.best_val;
        log::info!("resuming from {} at step {start_step}", last_path.display());
    }

    let mut log_file =
        std::fs::OpenOptions::new().create(true).append(true).open(&log_path)?;
    let mut initial_loss = f64::NAN;
    let mut final_loss = f64::NAN;

    for step in start_step..tcfg.steps {
        let t0 = Instant::now();
        let mut rng = step_rng(tcfg.seed, step);
        let batch = sample_batch(train_set, cfg, tcfg, &mut rng);

        let results: Vec<Result<StepResult>> = batch
            .par_iter()
            .map(|item| loss_and_grads(cfg, params, item, tcfg.loss))
            .collect();

        let mut grads: BTreeMap<String, Array2<f64>> = BTreeMap::new();
        let mut loss = 0.0;
        let mut spectral = 0.0;
        let mut waveform = 0.0;
        for r in results {
            let r = r?;
            loss += r.loss;
            spectral += r.spectral;
            waveform += r.waveform;
            for (name, g) in r.grads {
                grads
                    .entry(name)
                    .and_modify(|acc| *acc += &g)
                    .or_insert(g);
            }
        }
        let bn = tcfg.batch_size as f64;
        loss /= bn;
        spectral /= bn;
        waveform /= bn;
        for g in grads.values_mut() {
            *g /= bn;
        }
        if !loss.is_finite() {
            return Err(QuadstemError::Diverged(format!("non-finite loss at step {step}")));
        }
        if step == 0 {
            initial_loss = loss;
        }
        final_loss = loss;

        let lr = cosine_lr(tcfg.learning_rate, step, tcfg.schedule_steps.unwrap_or(tcfg.steps));
        let grad_norm = opt.apply(params, &grads, lr)?;

        write_metric(
            &mut log_file,
            &MetricRecord {
                step,
                split: "train",
                loss,
                loss_spectral: spectral,
                loss_waveform: waveform,
                lr,
                grad_norm: Some(grad_norm),
                wall_ms: t0.elapsed().as_millis() as u64,
            },
        )?;

        let done = step + 1;
        let last_step = done == tcfg.steps;
        if tcfg.val_every > 0 && (done % tcfg.val_every == 0 || last_step) {
            if let Some(vset) = val_set {
                let tv = Instant::now();
                let (vl, vs, vw) = evaluate_loss(cfg, params, vset, tcfg.loss)?;
                write_metric(
                    &mut log_file,
                    &MetricRecord {
                        step,
                        split: "val",
                        loss: vl,
                        loss_spectral: vs,
                        loss_waveform: vw,
                        lr,
                        grad_norm: None,
                        wall_ms: tv.elapsed().as_millis() as u64,
                    },
                )?;
                if best_val.map_or(true, |b| vl < b) {
                    best_val = Some(vl);
                    save_with_state(&best_path, cfg, params, done, &opt, best_val)?;
                }
            }
        }
        if done % tcfg.checkpoint_every == 0 || last_step {
            save_with_state(&last_path, cfg, params, done, &opt, best_val)?;
        }
    }

    Ok(TrainOutcome {
        steps_run: tcfg.steps - start_step,
        initial_loss,
        final_loss,
        best_val,
        last_checkpoint: last_path,
        log_path,
    })
}
