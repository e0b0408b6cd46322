use crate::error::{QuadstemError, Result};

/// Partition of FFT bins into contiguous frequency bands.
///
/// Bands are half-open bin ranges `[lo, hi)`, sorted, disjoint, and covering
/// `[0, n_bins)` exactly. Widths are non-decreasing with band index.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct BandSpec {
    pub n_bins: usize,
    pub bands: Vec<(usize, usize)>,
}

impl BandSpec {
    pub fn n_bands(&self) -> usize {
        self.bands.len()
    }

    pub fn band_width(&self, b: usize) -> usize {
        self.bands[b].1 - self.bands[b].0
    }

    pub fn validate(&self) -> Result<()> {
        if self.bands.is_empty() {
            return Err(QuadstemError::Config("band spec has no bands".into()));
        }
        let mut cursor = 0usize;
        let mut prev_width = 0usize;
        for (i, &(lo, hi)) in self.bands.iter().enumerate() {
            if lo != cursor {
                return Err(QuadstemError::Config(format!(
                    "band {i} starts at {lo}, expected {cursor} (gap or overlap)"
                )));
            }
            if hi <= lo {
                return Err(QuadstemError::Config(format!("band {i} is empty")));
            }
            let width = hi - lo;
            if width < prev_width {
                return Err(QuadstemError::Config(format!(
                    "band {i} width {width} decreases below previous {prev_width}"
                )));
            }
            prev_width = width;
            cursor = hi;
        }
        if cursor != self.n_bins {
            return Err(QuadstemError::Config(format!(
                "bands cover [0, {cursor}) but n_bins is {}",
                self.n_bins
            )));
        }
        Ok(())
    }
}

/// Builds a musically spaced band partition: log-frequency spaced edges
/// between 20 Hz and Nyquist, snapped to integer bins, minimum one bin per
/// band, leftover low-frequency bins merged into band 0. Widths are then
/// made non-decreasing by sorting, which preserves total coverage because
/// the partition is rebuilt from the width sequence.
pub fn make_band_spec(n_bins: usize, n_bands: usize, sample_rate: u32) -> Result<BandSpec> {
    if n_bands == 0 || n_bins == 0 {
        return Err(QuadstemError::Config("n_bins and n_bands must be > 0".into()));
    }
    if n_bands > n_bins {
        return Err(QuadstemError::Config(format!(
            "n_bands {n_bands} exceeds n_bins {n_bins}"
        )));
    }
    let nyquist = sample_rate as f64 / 2.0;
    let f_lo = 20.0_f64.min(nyquist / 2.0);
    // Bin index of a frequency: bin k covers k * nyquist / (n_bins - 1).
    let hz_per_bin = if n_bins > 1 { nyquist / (n_bins - 1) as f64 } else { nyquist };

    // Log-spaced edge frequencies, snapped to bins.
    let mut widths = vec![0usize; n_bands];
    let log_lo = f_lo.ln();
    let log_hi = nyquist.ln();
    let mut prev_edge = 0usize; // band 0 absorbs everything below f_lo
    for (b, w) in widths.iter_mut().enumerate() {
        let frac = (b + 1) as f64 / n_bands as f64;
        let freq = (log_lo + frac * (log_hi - log_lo)).exp();
        let mut edge = (freq / hz_per_bin).round() as usize;
        if b + 1 == n_bands {
            edge = n_bins;
        }
        edge = edge.clamp(prev_edge, n_bins);
        *w = edge - prev_edge;
        prev_edge = edge;
    }

    // Enforce minimum width 1 by borrowing from the widest bands.
    let total: usize = widths.iter().sum();
    debug_assert_eq!(total, n_bins);
    loop {
        let Some(zero_idx) = widths.iter().position(|&w| w == 0) else { break };
        let widest = widths
            .iter()
            .enumerate()
            .max_by_key(|(_, &w)| w)
            .map(|(i, _)| i)
            .unwrap();
        if widths[widest] <= 1 {
            return Err(QuadstemError::Config(
                "cannot fit minimum band width of 1 bin".into(),
            ));
        }
        widths[widest] -= 1;
        widths[zero_idx] += 1;
    }

    // Monotone non-decreasing widths: log spacing already yields this in the
    // common case; sorting makes it unconditional.
    widths.sort_unstable();

    let mut bands = Vec::with_capacity(n_bands);
    let mut cursor = 0usize;
    for w in widths {
        bands.push((cursor, cursor + w));
        cursor += w;
    }
    let spec = BandSpec { n_bins, bands };
    spec.validate()?;
    Ok(spec)
}
