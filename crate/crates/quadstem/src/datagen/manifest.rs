use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::datagen::pool::{PoolEntry, StemPools};
use crate::error::{QuadstemError, Result};
use crate::stem::{SetupKind, StemClass};

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

/// Per-class loudness targets (LUFS), mean plus uniform jitter half-width.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LevelConfig {
    pub dx_lufs: f64,
    pub dx_jitter: f64,
    pub mx_lufs: f64,
    pub mx_jitter: f64,
    pub fx_lufs: f64,
    pub fx_jitter: f64,
    /// Per-event gain jitter half-width in dB.
    pub event_gain_jitter: f64,
}

impl Default for LevelConfig {
    fn default() -> Self {
        Self {
            dx_lufs: -17.0,
            dx_jitter: 2.0,
            mx_lufs: -24.0,
            mx_jitter: 3.0,
            fx_lufs: -21.0,
            fx_jitter: 3.0,
            event_gain_jitter: 2.0,
        }
    }
}

impl LevelConfig {
    fn target(&self, class: StemClass) -> (f64, f64) {
        match class {
            StemClass::Dx => (self.dx_lufs, self.dx_jitter),
            StemClass::MxV | StemClass::MxI => (self.mx_lufs, self.mx_jitter),
            StemClass::Fx => (self.fx_lufs, self.fx_jitter),
        }
    }
}

/// One placed source excerpt.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MixEvent {
    pub class: StemClass,
    pub source_path: PathBuf,
    pub song_id: String,
    /// Seconds into the source file.
    pub source_offset: f64,
    /// Seconds into the example timeline.
    pub placement_offset: f64,
    /// Event length in seconds.
    pub duration: f64,
    /// Gain applied after loudness leveling, in dB.
    pub gain_db: f64,
}

/// Deterministic recipe for one synthesized example.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MixManifestEntry {
    pub schema_version: u32,
    pub example_id: String,
    pub seed: u64,
    pub setup: SetupKind,
    /// Example length in seconds.
    pub duration: f64,
    pub sample_rate: u32,
    /// Target integrated loudness per source class.
    pub target_lufs: BTreeMap<StemClass, f64>,
    pub events: Vec<MixEvent>,
}

impl MixManifestEntry {
    pub fn validate(&self) -> Result<()> {
        for ev in &self.events {
            if ev.placement_offset < 0.0
                || ev.placement_offset + ev.duration > self.duration + 1e-9
            {
                return Err(QuadstemError::Data(format!(
                    "{}: event at {:.3}s (+{:.3}s) exceeds [0, {:.3}]",
                    self.example_id, ev.placement_offset, ev.duration, self.duration
                )));
            }
            if self.setup == SetupKind::InstrumentalOnly && ev.class == StemClass::MxV {
                return Err(QuadstemError::Data(format!(
                    "{}: vocal event in instrumental-only setup",
                    self.example_id
                )));
            }
        }
        Ok(())
    }
}

/// Maximum length, in seconds, of one dialogue or effects event.
const EVENT_MAX_LEN: f64 = 3.0;
const EVENT_MIN_LEN: f64 = 0.8;
/// Average event density: one DX/FX event per this many seconds.
const EVENT_SPACING: f64 = 5.0;

fn pick<'a>(entries: &'a [&PoolEntry], rng: &mut ChaCha8Rng) -> &'a PoolEntry {
    entries[rng.gen_range(0..entries.len())]
}

fn required_classes(setup: SetupKind) -> Vec<StemClass> {
    match setup {
        SetupKind::InstrumentalOnly => vec![StemClass::Dx, StemClass::MxI, StemClass::Fx],
        _ => vec![StemClass::Dx, StemClass::MxV, StemClass::MxI, StemClass::Fx],
    }
}

/// Builds `n_examples` deterministic mixture recipes.
///
/// Dialogue and effects are event-based with random onsets; music is one
/// contiguous segment per example, with the vocal and instrumental layers of
/// the same song aligned sample-exactly.
pub fn build_manifest(
    pools: &StemPools,
    setup: SetupKind,
    n_examples: usize,
    duration: f64,
    sample_rate: u32,
    seed: u64,
    levels: &LevelConfig,
) -> Result<Vec<MixManifestEntry>> {
    if duration < EVENT_MIN_LEN {
        return Err(QuadstemError::InvalidInput(format!(
            "duration {duration} s below minimum event length {EVENT_MIN_LEN} s"
        )));
    }
    for class in required_classes(setup) {
        if pools.usable(class).is_empty() {
            return Err(QuadstemError::Data(format!("pool for {class} is empty")));
        }
    }
    let with_vocals = setup.includes_vocals();
    let paired = pools.paired_song_ids();
    if with_vocals && paired.is_empty() {
        return Err(QuadstemError::Data("no paired MX-V/MX-I songs available".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entries = Vec::with_capacity(n_examples);
    for i in 0..n_examples {
        let example_seed = rng.gen::<u64>();
        let mut ex_rng = ChaCha8Rng::seed_from_u64(example_seed);
        let mut events = Vec::new();
        let mut target_lufs = BTreeMap::new();
        for class in required_classes(setup) {
            let (mean, jitter) = levels.target(class);
            target_lufs.insert(class, mean + ex_rng.gen_range(-jitter..=jitter));
        }

        // Dialogue and effects: independent events with silence gaps.
        for class in [StemClass::Dx, StemClass::Fx] {
            let usable = pools.usable(class);
            let expected = (duration / EVENT_SPACING).max(1.0);
            let n_events = ex_rng.gen_range(1..=(2.0 * expected).ceil() as usize);
            for _ in 0..n_events {
                let src = pick(&usable, &mut ex_rng);
                let max_len = EVENT_MAX_LEN.min(src.duration).min(duration);
                let len = if max_len <= EVENT_MIN_LEN {
                    max_len
                } else {
                    ex_rng.gen_range(EVENT_MIN_LEN..=max_len)
                };
                let source_offset = if src.duration > len {
                    ex_rng.gen_range(0.0..=(src.duration - len))
                } else {
                    0.0
                };
                let placement = ex_rng.gen_range(0.0..=(duration - len));
                events.push(MixEvent {
                    class,
                    source_path: src.path.clone(),
                    song_id: src.song_id.clone(),
                    source_offset,
                    placement_offset: placement,
                    duration: len,
                    gain_db: ex_rng
                        .gen_range(-levels.event_gain_jitter..=levels.event_gain_jitter),
                });
            }
        }

        // Music: one contiguous segment; vocal/instrumental layers share
        // song, source offset, and placement.
        if with_vocals {
            let song = &paired[ex_rng.gen_range(0..paired.len())];
            let vocal = pools
                .usable(StemClass::MxV)
                .into_iter()
                .find(|e| &e.song_id == song)
                .expect("paired song has vocal entry")
                .clone();
            let inst = pools
                .usable(StemClass::MxI)
                .into_iter()
                .find(|e| &e.song_id == song)
                .expect("paired song has instrumental entry")
                .clone();
            let avail = vocal.duration.min(inst.duration);
            let len = duration.min(avail);
            let source_offset =
                if avail > len { ex_rng.gen_range(0.0..=(avail - len)) } else { 0.0 };
            let placement =
                if len < duration { ex_rng.gen_range(0.0..=(duration - len)) } else { 0.0 };
            for (class, src) in [(StemClass::MxV, &vocal), (StemClass::MxI, &inst)] {
                events.push(MixEvent {
                    class,
                    source_path: src.path.clone(),
                    song_id: song.clone(),
                    source_offset,
                    placement_offset: placement,
                    duration: len,
                    gain_db: ex_rng
                        .gen_range(-levels.event_gain_jitter..=levels.event_gain_jitter),
                });
            }
        } else {
            let usable = pools.usable(StemClass::MxI);
            let src = pick(&usable, &mut ex_rng);
            let len = duration.min(src.duration);
            let source_offset = if src.duration > len {
                ex_rng.gen_range(0.0..=(src.duration - len))
            } else {
                0.0
            };
            let placement =
                if len < duration { ex_rng.gen_range(0.0..=(duration - len)) } else { 0.0 };
            events.push(MixEvent {
                class: StemClass::MxI,
                source_path: src.path.clone(),
                song_id: src.song_id.clone(),
                source_offset,
                placement_offset: placement,
                duration: len,
                gain_db: ex_rng.gen_range(-levels.event_gain_jitter..=levels.event_gain_jitter),
            });
        }

        let entry = MixManifestEntry {
            schema_version: MANIFEST_SCHEMA_VERSION,
            example_id: format!("ex{i:05}"),
            seed: example_seed,
            setup,
            duration,
            sample_rate,
            target_lufs,
            events,
        };
        entry.validate()?;
        entries.push(entry);
    }
    Ok(entries)
}

pub fn write_manifest(path: &Path, entries: &[MixManifestEntry]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut out = std::fs::File::create(path)?;
    for entry in entries {
        serde_json::to_writer(&mut out, entry)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_manifest(path: &Path) -> Result<Vec<MixManifestEntry>> {
    let file = std::fs::File::open(path)?;
    let mut entries = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: MixManifestEntry = serde_json::from_str(&line)
            .map_err(|e| QuadstemError::Data(format!("{}:{}: {e}", path.display(), i + 1)))?;
        if entry.schema_version != MANIFEST_SCHEMA_VERSION {
            return Err(QuadstemError::Data(format!(
                "{}: unsupported manifest schema {}",
                path.display(),
                entry.schema_version
            )));
        }
        entries.push(entry);
    }
    Ok(entries)
}
