//! Per-track evaluation records: full-track SNR per stem, with the derived
//! combined-music entry for split-setup models.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::dsp::Waveform;
use crate::error::{QuadstemError, Result};
use crate::eval::snr::snr_db;
use crate::model::network::{forward_bandit, forward_banquet};
use crate::model::{Arch, ModelConfig, ModelParams};
use crate::stem::{SetupKind, Stem};

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EvalRecord {
    pub example_id: String,
    pub model_id: String,
    pub setup: SetupKind,
    pub snr_db: BTreeMap<Stem, f64>,
    /// Stems with an all-zero reference, excluded from `snr_db`.
    #[serde(default)]
    pub skipped: Vec<Stem>,
}

/// SNR record from reference/estimate waveform sets. For the split setup the
/// combined-music entry is the SNR of summed estimates against summed
/// references.
pub fn snr_record(
    example_id: &str,
    model_id: &str,
    setup: SetupKind,
    references: &BTreeMap<Stem, Waveform>,
    estimates: &BTreeMap<Stem, Waveform>,
) -> Result<EvalRecord> {
    let mut snrs = BTreeMap::new();
    let mut skipped = Vec::new();
    for stem in setup.stems() {
        let reference = references
            .get(&stem)
            .ok_or_else(|| QuadstemError::InvalidInput(format!("missing reference {stem}")))?;
        let estimate = estimates
            .get(&stem)
            .ok_or_else(|| QuadstemError::InvalidInput(format!("missing estimate {stem}")))?;
        if reference.energy() == 0.0 {
            skipped.push(stem);
            continue;
        }
        snrs.insert(stem, snr_db(reference, estimate)?);
    }
    if setup == SetupKind::SplitMx {
        let ref_sum = references[&Stem::MxV].add(&references[&Stem::MxI])?;
        let est_sum = estimates[&Stem::MxV].add(&estimates[&Stem::MxI])?;
        if ref_sum.energy() == 0.0 {
            skipped.push(Stem::Mx);
        } else {
            snrs.insert(Stem::Mx, snr_db(&ref_sum, &est_sum)?);
        }
    }
    Ok(EvalRecord {
        example_id: example_id.to_string(),
        model_id: model_id.to_string(),
        setup,
        snr_db: snrs,
        skipped,
    })
}

/// Runs the model on a mixture and scores every setup stem against the
/// references.
pub fn evaluate_track(
    cfg: &ModelConfig,
    params: &ModelParams,
    setup: SetupKind,
    example_id: &str,
    model_id: &str,
    mixture: &Waveform,
    references: &BTreeMap<Stem, Waveform>,
) -> Result<EvalRecord> {
    let stems = setup.stems();
    for stem in &stems {
        if !cfg.stems.contains(stem) {
            return Err(QuadstemError::InvalidInput(format!(
                "model does not produce stem {stem}"
            )));
        }
    }
    let estimates = match cfg.arch {
        Arch::Bandit => forward_bandit(mixture, params, cfg)?,
        Arch::Banquet => forward_banquet(mixture, params, cfg, &stems)?,
    };
    snr_record(example_id, model_id, setup, references, &estimates)
}

pub fn write_records(path: &Path, records: &[EvalRecord]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut out = std::fs::File::create(path)?;
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_records(path: &Path) -> Result<Vec<EvalRecord>> {
    let file = std::fs::File::open(path)?;
    let mut records = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(serde_json::from_str(&line).map_err(|e| {
            QuadstemError::Data(format!("{}:{}: {e}", path.display(), i + 1))
        })?);
    }
    Ok(records)
}
