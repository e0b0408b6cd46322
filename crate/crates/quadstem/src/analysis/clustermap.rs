//! Clustermap output: grayscale heatmap PNG plus a CSV of the reordered
//! matrix.

use std::path::Path;

use image::{GrayImage, Luma};
use ndarray::Array2;

use crate::analysis::queries::QueryMatrix;
use crate::error::{QuadstemError, Result};
use crate::stem::Stem;

/// Pixel size of one matrix cell in the rendered heatmap.
const CELL_PX: u32 = 16;

fn reorder(m: &QueryMatrix, order: &[usize]) -> Result<Array2<f64>> {
    let (n, d) = m.values.dim();
    if order.len() != d {
        return Err(QuadstemError::InvalidInput(format!(
            "order has {} entries for {d} columns",
            order.len()
        )));
    }
    let mut seen = vec![false; d];
    for &c in order {
        if c >= d || seen[c] {
            return Err(QuadstemError::InvalidInput("order is not a permutation".into()));
        }
        seen[c] = true;
    }
    let mut out = Array2::zeros((n, d));
    for (k, &c) in order.iter().enumerate() {
        out.column_mut(k).assign(&m.values.column(c));
    }
    Ok(out)
}

/// Writes `<out_base>.png` (stems × reordered features, light-is-large
/// grayscale) and `<out_base>.csv` (9-decimal values). Returns the pair of
/// written paths.
pub fn emit_clustermap(
    m: &QueryMatrix,
    order: &[usize],
    out_base: &Path,
) -> Result<(std::path::PathBuf, std::path::PathBuf)> {
    let values = reorder(m, order)?;
    let (n, d) = values.dim();

    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut img = GrayImage::new(d as u32 * CELL_PX, n as u32 * CELL_PX);
    for i in 0..n {
        for j in 0..d {
            let level = ((values[[i, j]] - lo) / span * 255.0).round() as u8;
            for py in 0..CELL_PX {
                for px in 0..CELL_PX {
                    img.put_pixel(
                        j as u32 * CELL_PX + px,
                        i as u32 * CELL_PX + py,
                        Luma([level]),
                    );
                }
            }
        }
    }
    if let Some(parent) = out_base.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let png_path = out_base.with_extension("png");
    img.save(&png_path)
        .map_err(|e| QuadstemError::Data(format!("{}: {e}", png_path.display())))?;

    let mut csv = String::from("stem");
    for &c in order {
        csv.push_str(&format!(",f{c}"));
    }
    csv.push('\n');
    for (i, stem) in m.stems.iter().enumerate() {
        csv.push_str(&stem.to_string());
        for j in 0..d {
            csv.push_str(&format!(",{:.9}", values[[i, j]]));
        }
        csv.push('\n');
    }
    let csv_path = out_base.with_extension("csv");
    std::fs::write(&csv_path, csv)?;
    Ok((png_path, csv_path))
}

/// Reads a clustermap CSV back into (stem labels, column labels, values).
pub fn read_clustermap_csv(path: &Path) -> Result<(Vec<Stem>, Vec<String>, Array2<f64>)> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| QuadstemError::Data(format!("{}: empty file", path.display())))?;
    let columns: Vec<String> = header.split(',').skip(1).map(str::to_string).collect();
    let mut stems = Vec::new();
    let mut rows = Vec::new();
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let stem: Stem = fields
            .next()
            .ok_or_else(|| QuadstemError::Data("missing stem label".into()))?
            .parse()?;
        stems.push(stem);
        let row: Vec<f64> = fields
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|e| QuadstemError::Data(format!("{}: {e}", path.display())))
            })
            .collect::<Result<_>>()?;
        if row.len() != columns.len() {
            return Err(QuadstemError::Data(format!(
                "{}: row width {} vs header {}",
                path.display(),
                row.len(),
                columns.len()
            )));
        }
        rows.push(row);
    }
    let n = stems.len();
    let d = columns.len();
    let values = Array2::from_shape_vec((n, d), rows.into_iter().flatten().collect())
        .map_err(|e| QuadstemError::Data(e.to_string()))?;
    Ok((stems, columns, values))
}
