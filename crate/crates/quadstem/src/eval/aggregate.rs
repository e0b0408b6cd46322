//! Aggregation of evaluation records into per-setup medians, paired effect
//! sizes, and significance tests, rendered as a text table and CSV.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{QuadstemError, Result};
use crate::eval::record::EvalRecord;
use crate::eval::stats::{cohens_d_paired, median, wilcoxon_signed_rank};
use crate::stem::{SetupKind, Stem};

/// Column order of the rendered table.
pub const TABLE_COLUMNS: [Stem; 5] = [Stem::Dx, Stem::MxV, Stem::MxI, Stem::Mx, Stem::Fx];

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ModelRow {
    pub setup: SetupKind,
    pub model_id: String,
    pub n_tracks: usize,
    pub median_snr_db: BTreeMap<Stem, f64>,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EffectStat {
    pub d: f64,
    pub p: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PairRow {
    pub setup: SetupKind,
    /// Baseline model; effects are for `model_b` relative to `model_a`.
    pub model_a: String,
    pub model_b: String,
    pub effects: BTreeMap<Stem, EffectStat>,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EvalSummary {
    pub rows: Vec<ModelRow>,
    pub pairs: Vec<PairRow>,
}

type Grouped = BTreeMap<SetupKind, BTreeMap<String, BTreeMap<String, EvalRecord>>>;

fn group(records: &[EvalRecord]) -> Result<Grouped> {
    let mut grouped: Grouped = BTreeMap::new();
    for r in records {
        let prev = grouped
            .entry(r.setup)
            .or_default()
            .entry(r.model_id.clone())
            .or_default()
            .insert(r.example_id.clone(), r.clone());
        if prev.is_some() {
            return Err(QuadstemError::InvalidInput(format!(
                "duplicate record for model '{}' example '{}'",
                r.model_id, r.example_id
            )));
        }
    }
    Ok(grouped)
}

/// Summarizes records: per-(setup, model) stem medians, and for setups with
/// exactly two models, paired Cohen's d and Wilcoxon p per stem. Models in a
/// pairing must cover identical example sets.
pub fn aggregate(records: &[EvalRecord]) -> Result<EvalSummary> {
    if records.is_empty() {
        return Err(QuadstemError::InvalidInput("no records to aggregate".into()));
    }
    let grouped = group(records)?;
    let mut rows = Vec::new();
    let mut pairs = Vec::new();
    for (&setup, models) in &grouped {
        for (model_id, by_example) in models {
            let mut per_stem: BTreeMap<Stem, Vec<f64>> = BTreeMap::new();
            for record in by_example.values() {
                for (&stem, &v) in &record.snr_db {
                    per_stem.entry(stem).or_default().push(v);
                }
            }
            let median_snr_db = per_stem
                .into_iter()
                .map(|(stem, vals)| Ok((stem, median(&vals)?)))
                .collect::<Result<_>>()?;
            rows.push(ModelRow {
                setup,
                model_id: model_id.clone(),
                n_tracks: by_example.len(),
                median_snr_db,
            });
        }
        if models.len() == 2 {
            let mut it = models.iter();
            let (model_a, recs_a) = it.next().unwrap();
            let (model_b, recs_b) = it.next().unwrap();
            let ids_a: BTreeSet<&String> = recs_a.keys().collect();
            let ids_b: BTreeSet<&String> = recs_b.keys().collect();
            if ids_a != ids_b {
                return Err(QuadstemError::InvalidInput(format!(
                    "unpaired records for {setup}: '{model_a}' and '{model_b}' cover different examples"
                )));
            }
            let mut effects = BTreeMap::new();
            for &stem in &TABLE_COLUMNS {
                let mut a = Vec::new();
                let mut b = Vec::new();
                for id in &ids_a {
                    if let (Some(&va), Some(&vb)) =
                        (recs_a[*id].snr_db.get(&stem), recs_b[*id].snr_db.get(&stem))
                    {
                        a.push(va);
                        b.push(vb);
                    }
                }
                if a.len() >= 5 {
                    effects.insert(
                        stem,
                        EffectStat {
                            d: cohens_d_paired(&a, &b)?,
                            p: wilcoxon_signed_rank(&a, &b)?,
                            n: a.len(),
                        },
                    );
                }
            }
            pairs.push(PairRow {
                setup,
                model_a: model_a.clone(),
                model_b: model_b.clone(),
                effects,
            });
        } else if models.len() > 2 {
            return Err(QuadstemError::InvalidInput(format!(
                "setup {setup} has {} models; pairwise comparison needs exactly 2",
                models.len()
            )));
        }
    }
    Ok(EvalSummary { rows, pairs })
}

fn fmt_cell(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{v:>8.2}"),
        None => format!("{:>8}", "-"),
    }
}

/// Plain-text table: one row per setup × model with median SNR per stem
/// column, followed by effect-size rows where a model pair exists.
pub fn render_table(summary: &EvalSummary) -> String {
    let mut out = String::new();
    let header: Vec<String> =
        TABLE_COLUMNS.iter().map(|s| format!("{:>8}", s.to_string())).collect();
    out.push_str(&format!(
        "{:<12} {:<12} {:>4} {}\n",
        "setup",
        "model",
        "n",
        header.join(" ")
    ));
    for row in &summary.rows {
        let cells: Vec<String> = TABLE_COLUMNS
            .iter()
            .map(|s| fmt_cell(row.median_snr_db.get(s).copied()))
            .collect();
        out.push_str(&format!(
            "{:<12} {:<12} {:>4} {}\n",
            row.setup.to_string(),
            row.model_id,
            row.n_tracks,
            cells.join(" ")
        ));
        if let Some(pair) = summary
            .pairs
            .iter()
            .find(|p| p.setup == row.setup && p.model_b == row.model_id)
        {
            let d_cells: Vec<String> = TABLE_COLUMNS
                .iter()
                .map(|s| fmt_cell(pair.effects.get(s).map(|e| e.d)))
                .collect();
            out.push_str(&format!(
                "{:<12} {:<12} {:>4} {}\n",
                "",
                format!("d vs {}", pair.model_a),
                "",
                d_cells.join(" ")
            ));
            let p_cells: Vec<String> = TABLE_COLUMNS
                .iter()
                .map(|s| {
                    pair.effects
                        .get(s)
                        .map(|e| format!("{:>8}", format!("p={:.3}", e.p)))
                        .unwrap_or_else(|| format!("{:>8}", "-"))
                })
                .collect();
            out.push_str(&format!("{:<12} {:<12} {:>4} {}\n", "", "", "", p_cells.join(" ")));
        }
    }
    out
}

/// CSV with one row per (setup, model) and one median column per stem.
pub fn to_csv(summary: &EvalSummary) -> String {
    let mut out = String::from("setup,model,n_tracks");
    for s in TABLE_COLUMNS {
        out.push_str(&format!(",median_{s}"));
    }
    out.push('\n');
    for row in &summary.rows {
        out.push_str(&format!("{},{},{}", row.setup, row.model_id, row.n_tracks));
        for s in TABLE_COLUMNS {
            match row.median_snr_db.get(&s) {
                Some(v) => out.push_str(&format!(",{v:.6}")),
                None => out.push(','),
            }
        }
        out.push('\n');
    }
    for pair in &summary.pairs {
        out.push_str(&format!("{},d:{}-vs-{},", pair.setup, pair.model_b, pair.model_a));
        for s in TABLE_COLUMNS {
            match pair.effects.get(&s) {
                Some(e) => out.push_str(&format!(",{:.6}", e.d)),
                None => out.push(','),
            }
        }
        out.push('\n');
    }
    out
}
