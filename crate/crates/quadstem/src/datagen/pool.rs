use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{QuadstemError, Result};
use crate::stem::StemClass;

/// One source recording available for mixture synthesis.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PoolEntry {
    pub path: PathBuf,
    pub class: StemClass,
    /// Source duration in seconds.
    pub duration: f64,
    /// Song / group id; MX-V and MX-I entries pair through it, and
    /// train/val/test splits never share one.
    pub song_id: String,
    /// Stems flagged with bleed are never sampled.
    #[serde(default)]
    pub bleed: bool,
}

/// The full set of source material, all classes together.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StemPools {
    pub entries: Vec<PoolEntry>,
}

/// Report produced by pool validation. Informational only.
#[derive(Debug, Clone, Default, serde::Serialize)]
pub struct PoolReport {
    pub unreadable: Vec<PathBuf>,
    pub bleed_excluded: Vec<PathBuf>,
    pub unpaired: Vec<PathBuf>,
    pub unusable_classes: Vec<StemClass>,
    pub usable_counts: BTreeMap<StemClass, usize>,
}

impl PoolReport {
    pub fn is_clean(&self) -> bool {
        self.unreadable.is_empty() && self.unpaired.is_empty() && self.unusable_classes.is_empty()
    }
}

impl StemPools {
    /// Entries of a class that are eligible for sampling (bleed excluded).
    pub fn usable(&self, class: StemClass) -> Vec<&PoolEntry> {
        self.entries
            .iter()
            .filter(|e| e.class == class && !e.bleed)
            .collect()
    }

    /// Song ids that have both a vocal and an instrumental music entry.
    pub fn paired_song_ids(&self) -> Vec<String> {
        let vocal: BTreeSet<_> = self
            .usable(StemClass::MxV)
            .iter()
            .map(|e| e.song_id.clone())
            .collect();
        let inst: BTreeSet<_> = self
            .usable(StemClass::MxI)
            .iter()
            .map(|e| e.song_id.clone())
            .collect();
        vocal.intersection(&inst).cloned().collect()
    }

    pub fn read_jsonl(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        let mut entries = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: PoolEntry = serde_json::from_str(&line).map_err(|e| {
                QuadstemError::Data(format!("{}:{}: {e}", path.display(), i + 1))
            })?;
            entries.push(entry);
        }
        Ok(Self { entries })
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let mut out = std::fs::File::create(path)?;
        for entry in &self.entries {
            serde_json::to_writer(&mut out, entry)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Builds pools from a source tree laid out as `<root>/{dx,mx_v,mx_i,fx}/`
/// with wav/flac files inside. The song id is the file stem; files whose
/// name contains `bleed` are indexed but flagged.
pub fn index_pools(root: &Path) -> Result<StemPools> {
    let classes = [
        ("dx", StemClass::Dx),
        ("mx_v", StemClass::MxV),
        ("mx_i", StemClass::MxI),
        ("fx", StemClass::Fx),
    ];
    let mut entries = Vec::new();
    for (dir_name, class) in classes {
        let dir = root.join(dir_name);
        if !dir.is_dir() {
            continue;
        }
        let mut paths: Vec<PathBuf> = std::fs::read_dir(&dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                matches!(
                    p.extension().and_then(|e| e.to_str()),
                    Some("wav") | Some("flac")
                )
            })
            .collect();
        paths.sort();
        for path in paths {
            let stem = path.file_stem().unwrap().to_string_lossy().into_owned();
            let bleed = stem.contains("bleed");
            let song_id = stem.replace(".bleed", "").replace("_bleed", "");
            let wave = crate::dsp::io::read_audio(&path)?;
            entries.push(PoolEntry {
                path,
                class,
                duration: wave.duration_secs(),
                song_id,
                bleed,
            });
        }
    }
    if entries.is_empty() {
        return Err(QuadstemError::Data(format!(
            "no audio found under {} (expected dx/, mx_v/, mx_i/, fx/ subdirectories)",
            root.display()
        )));
    }
    Ok(StemPools { entries })
}

/// Checks every pool entry: readability, bleed exclusions, music-pairing,
/// and whether each class has any usable material.
pub fn validate_pools(pools: &StemPools) -> PoolReport {
    let mut report = PoolReport::default();
    for entry in &pools.entries {
        if entry.bleed {
            report.bleed_excluded.push(entry.path.clone());
            continue;
        }
        if !entry.path.exists() {
            report.unreadable.push(entry.path.clone());
        }
    }
    let paired: BTreeSet<_> = pools.paired_song_ids().into_iter().collect();
    for class in [StemClass::MxV, StemClass::MxI] {
        for entry in pools.usable(class) {
            if !paired.contains(&entry.song_id) {
                report.unpaired.push(entry.path.clone());
            }
        }
    }
    for class in [StemClass::Dx, StemClass::MxV, StemClass::MxI, StemClass::Fx] {
        let n = pools.usable(class).len();
        report.usable_counts.insert(class, n);
        if n == 0 {
            report.unusable_classes.push(class);
        }
    }
    report
}

/// Deterministic train/val/test partition by song id. No song id appears in
/// two splits.
pub fn split_pools(pools: &StemPools, seed: u64) -> BTreeMap<String, StemPools> {
    let mut song_ids: Vec<String> = pools
        .entries
        .iter()
        .map(|e| e.song_id.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5f17_5f17);
    song_ids.shuffle(&mut rng);
    let n = song_ids.len();
    let n_test = (n / 10).max(usize::from(n >= 3));
    let n_val = (n / 10).max(usize::from(n >= 3));
    let mut assignment: BTreeMap<&str, &str> = BTreeMap::new();
    for (i, id) in song_ids.iter().enumerate() {
        let split = if i < n_test {
            "test"
        } else if i < n_test + n_val {
            "val"
        } else {
            "train"
        };
        assignment.insert(id.as_str(), split);
    }
    let mut out: BTreeMap<String, StemPools> = BTreeMap::new();
    for split in ["train", "val", "test"] {
        out.insert(split.to_string(), StemPools::default());
    }
    for entry in &pools.entries {
        let split = assignment[entry.song_id.as_str()];
        out.get_mut(split).unwrap().entries.push(entry.clone());
    }
    out
}
