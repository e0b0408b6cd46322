use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::datagen::manifest::{MixEvent, MixManifestEntry};
use crate::dsp::io::{read_audio, write_wav};
use crate::dsp::loudness::gain_to_target;
use crate::dsp::resample::resample;
use crate::dsp::wave::Waveform;
use crate::error::{QuadstemError, Result};
use crate::stem::{SetupKind, Stem, StemClass};

/// One synthesized example: the mixture, its ground-truth stems, and the
/// recipe that produced them.
#[derive(Debug, Clone)]
pub struct MixtureExample {
    pub mixture: Waveform,
    pub stems: BTreeMap<Stem, Waveform>,
    pub manifest: MixManifestEntry,
}

/// The target stem a source-class event renders into under a setup.
pub fn target_stem(setup: SetupKind, class: StemClass) -> Stem {
    match (setup, class) {
        (_, StemClass::Dx) => Stem::Dx,
        (_, StemClass::Fx) => Stem::Fx,
        (SetupKind::CombinedMx, StemClass::MxV | StemClass::MxI) => Stem::Mx,
        (_, StemClass::MxV) => Stem::MxV,
        (_, StemClass::MxI) => Stem::MxI,
    }
}

fn render_event(
    ev: &MixEvent,
    target_lufs: f64,
    sample_rate: u32,
    stem: &mut [f64],
) -> Result<()> {
    let source = read_audio(&ev.source_path)?;
    let source = resample(&source, sample_rate)?;
    let start = (ev.source_offset * sample_rate as f64).round() as usize;
    let len = (ev.duration * sample_rate as f64).round() as usize;
    if start >= source.len() {
        return Err(QuadstemError::Data(format!(
            "event source offset {:.3}s beyond end of {}",
            ev.source_offset,
            ev.source_path.display()
        )));
    }
    let end = (start + len).min(source.len());
    let slice = Waveform::new(source.samples[start..end].to_vec(), sample_rate)?;

    // Level the excerpt to the stem's target loudness, then apply the
    // per-event gain. Excerpts too short or too quiet to meter keep unit
    // level gain.
    let level_gain = match gain_to_target(&slice, target_lufs) {
        Ok(Some(g)) => g,
        _ => 1.0,
    };
    let gain = level_gain * 10.0_f64.powf(ev.gain_db / 20.0);

    let place = (ev.placement_offset * sample_rate as f64).round() as usize;
    for (i, &s) in slice.samples.iter().enumerate() {
        if place + i < stem.len() {
            stem[place + i] += s * gain;
        }
    }
    Ok(())
}

/// Renders one manifest entry into audio. The mixture is the exact
/// sample-wise sum of the stems; summation is the final step.
pub fn synthesize_example(entry: &MixManifestEntry) -> Result<MixtureExample> {
    entry.validate()?;
    let sr = entry.sample_rate;
    let n = (entry.duration * sr as f64).round() as usize;

    let mut stems: BTreeMap<Stem, Waveform> = entry
        .setup
        .stems()
        .into_iter()
        .map(|s| (s, Waveform::zeros(n, sr)))
        .collect();

    for ev in &entry.events {
        let stem_id = target_stem(entry.setup, ev.class);
        let target = *entry.target_lufs.get(&ev.class).ok_or_else(|| {
            QuadstemError::Data(format!("no target loudness for class {}", ev.class))
        })?;
        let stem = stems.get_mut(&stem_id).ok_or_else(|| {
            QuadstemError::Data(format!("event class {} has no stem under {}", ev.class, entry.setup))
        })?;
        render_event(ev, target, sr, &mut stem.samples)?;
    }

    let mut mixture = Waveform::zeros(n, sr);
    for stem in stems.values() {
        for (m, s) in mixture.samples.iter_mut().zip(&stem.samples) {
            *m += s;
        }
    }
    Ok(MixtureExample { mixture, stems, manifest: entry.clone() })
}

/// Output directory of one example: `<root>/<split>/<example_id>/`.
pub fn example_dir(root: &Path, split: &str, example_id: &str) -> PathBuf {
    root.join(split).join(example_id)
}

/// Writes mixture.wav plus one wav per stem.
pub fn write_example(root: &Path, split: &str, example: &MixtureExample) -> Result<PathBuf> {
    let dir = example_dir(root, split, &example.manifest.example_id);
    std::fs::create_dir_all(&dir)?;
    write_wav(&dir.join("mixture.wav"), &example.mixture)?;
    for (stem, wave) in &example.stems {
        write_wav(&dir.join(format!("{}.wav", stem.file_token())), wave)?;
    }
    Ok(dir)
}

/// Loads a written example back from disk.
pub fn read_example(dir: &Path, setup: SetupKind) -> Result<(Waveform, BTreeMap<Stem, Waveform>)> {
    let mixture = read_audio(&dir.join("mixture.wav"))?;
    let mut stems = BTreeMap::new();
    for stem in setup.stems() {
        stems.insert(stem, read_audio(&dir.join(format!("{}.wav", stem.file_token())))?);
    }
    Ok((mixture, stems))
}
