//! Paired statistics: median, Cohen's d, and the Wilcoxon signed-rank test.

use crate::error::{QuadstemError, Result};

pub fn median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(QuadstemError::InvalidInput("median of empty set".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("non-finite value in median"));
    let n = sorted.len();
    Ok(if n % 2 == 1 { sorted[n / 2] } else { (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0 })
}

/// Paired Cohen's d of `b` relative to `a`: mean(b−a) / sample-stddev(b−a)
/// with the n−1 denominator. All-zero differences give d = 0; identical
/// nonzero differences are degenerate and rejected.
pub fn cohens_d_paired(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(QuadstemError::InvalidInput("unpaired samples".into()));
    }
    let n = a.len();
    if n < 2 {
        return Err(QuadstemError::InvalidInput(format!("need at least 2 pairs, got {n}")));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| y - x).collect();
    if diffs.iter().all(|&d| d == 0.0) {
        return Ok(0.0);
    }
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1) as f64;
    if var == 0.0 {
        return Err(QuadstemError::InvalidInput(
            "degenerate pairing: nonzero differences with zero variance".into(),
        ));
    }
    Ok(mean / var.sqrt())
}

/// Average ranks of |d|, returned doubled so ties at .5 stay integral.
fn doubled_ranks(abs_diffs: &[f64]) -> Vec<u64> {
    let n = abs_diffs.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| abs_diffs[i].partial_cmp(&abs_diffs[j]).unwrap());
    let mut out = vec![0u64; n];
    let mut pos = 0;
    while pos < n {
        let mut end = pos + 1;
        while end < n && abs_diffs[idx[end]] == abs_diffs[idx[pos]] {
            end += 1;
        }
        // Ranks pos+1..=end share the average; doubled sum over the run is
        // (pos+1 + end) per element.
        let doubled = (pos + 1 + end) as u64;
        for &i in &idx[pos..end] {
            out[i] = doubled;
        }
        pos = end;
    }
    out
}

/// Exact two-sided p for the signed-rank statistic, enumerating the null
/// distribution over sign assignments by dynamic programming on doubled ranks.
fn exact_signed_rank_p(doubled: &[u64], w_doubled: u64) -> f64 {
    let total: u64 = doubled.iter().sum();
    let mut counts = vec![0.0f64; total as usize + 1];
    counts[0] = 1.0;
    for &r in doubled {
        for w in (r as usize..counts.len()).rev() {
            counts[w] += counts[w - r as usize];
        }
    }
    let all: f64 = counts.iter().sum();
    let lower: f64 = counts[..=w_doubled as usize].iter().sum();
    let upper: f64 = counts[w_doubled as usize..].iter().sum();
    (2.0 * (lower.min(upper)) / all).min(1.0)
}

/// Abramowitz–Stegun 7.1.26 erf approximation (|error| < 1.5e-7).
fn erf(x: f64) -> f64 {
    let sign = if x < 0.0 { -1.0 } else { 1.0 };
    let x = x.abs();
    let t = 1.0 / (1.0 + 0.3275911 * x);
    let poly = t
        * (0.254829592
            + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429))));
    sign * (1.0 - poly * (-x * x).exp())
}

fn normal_two_sided_p(z: f64) -> f64 {
    1.0 - erf(z.abs() / std::f64::consts::SQRT_2)
}

/// Threshold below which the exact null distribution is enumerated.
pub const WILCOXON_EXACT_MAX_N: usize = 25;

/// Two-sided Wilcoxon signed-rank test on paired samples. Zero differences
/// are dropped; all-zero differences give p = 1.0. Exact for ≤ 25 effective
/// pairs, normal approximation with continuity and tie corrections above.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(QuadstemError::InvalidInput("unpaired samples".into()));
    }
    if a.len() < 5 {
        return Err(QuadstemError::InvalidInput(format!(
            "need at least 5 pairs, got {}",
            a.len()
        )));
    }
    let diffs: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| y - x)
        .filter(|&d| d != 0.0)
        .collect();
    if diffs.is_empty() {
        return Ok(1.0);
    }
    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let doubled = doubled_ranks(&abs);
    let w_plus_doubled: u64 = diffs
        .iter()
        .zip(&doubled)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, &r)| r)
        .sum();

    let n = diffs.len();
    if n <= WILCOXON_EXACT_MAX_N {
        return Ok(exact_signed_rank_p(&doubled, w_plus_doubled));
    }

    let nf = n as f64;
    let w = w_plus_doubled as f64 / 2.0;
    let mu = nf * (nf + 1.0) / 4.0;
    // Tie correction: group sizes over equal |d| runs.
    let mut sorted = abs.clone();
    sorted.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && sorted[j] == sorted[i] {
            j += 1;
        }
        let t = (j - i) as f64;
        tie_term += t * t * t - t;
        i = j;
    }
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
    let centered = w - mu;
    let z = (centered - 0.5 * centered.signum()) / var.sqrt();
    Ok(normal_two_sided_p(z))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn median_hand_cases() {
        assert_eq!(median(&[1.0, 2.0, 3.0]).unwrap(), 2.0);
        assert_eq!(median(&[1.0, 2.0, 3.0, 4.0]).unwrap(), 2.5);
        assert!(median(&[]).is_err());
    }

    #[test]
    fn cohens_d_hand_cases() {
        // differences [0.5, 1.5]
        let d = cohens_d_paired(&[0.0, 0.0], &[0.5, 1.5]).unwrap();
        assert_relative_eq!(d, 1.0 / (0.5f64).sqrt(), max_relative = 1e-12);
        assert_relative_eq!(d, 1.41421, max_relative = 1e-5);
        // differences [1, 2, 3]
        let d = cohens_d_paired(&[0.0, 0.0, 0.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_relative_eq!(d, 2.0, max_relative = 1e-12);
    }

    #[test]
    fn cohens_d_symmetric_differences_vanish() {
        let d = cohens_d_paired(&[1.0, 1.0], &[1.0 + 0.3, 1.0 - 0.3]).unwrap();
        assert_relative_eq!(d, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn cohens_d_antisymmetry() {
        let a = [3.0, 1.0, 4.0, 1.5, 9.2];
        let b = [2.6, 5.3, 5.8, 9.7, 9.3];
        let dab = cohens_d_paired(&a, &b).unwrap();
        let dba = cohens_d_paired(&b, &a).unwrap();
        assert_relative_eq!(dab, -dba, max_relative = 1e-12);
    }

    #[test]
    fn cohens_d_degenerate_cases() {
        assert_eq!(cohens_d_paired(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!(cohens_d_paired(&[0.0, 0.0], &[1.0, 1.0]).is_err());
        assert!(cohens_d_paired(&[0.0], &[1.0]).is_err());
    }

    #[test]
    fn median_and_d_match_brute_force_on_random_vectors() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..1000 {
            let n = rng.gen_range(2..40);
            let a: Vec<f64> = (0..n).map(|_| rng.gen_range(-30.0..30.0)).collect();
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-30.0..30.0)).collect();

            // Brute-force median: value minimizing sum of |rank asymmetry|,
            // computed by explicit selection.
            let mut s = a.clone();
            s.sort_by(|x, y| x.partial_cmp(y).unwrap());
            let bf_median =
                if n % 2 == 1 { s[n / 2] } else { 0.5 * s[n / 2 - 1] + 0.5 * s[n / 2] };
            assert!((median(&a).unwrap() - bf_median).abs() < 1e-9);

            // Brute-force d with explicit accumulation loops.
            let mut sum = 0.0;
            for i in 0..n {
                sum += b[i] - a[i];
            }
            let mean = sum / n as f64;
            let mut ss = 0.0;
            for i in 0..n {
                let d = b[i] - a[i] - mean;
                ss += d * d;
            }
            let bf_d = mean / (ss / (n - 1) as f64).sqrt();
            assert!((cohens_d_paired(&a, &b).unwrap() - bf_d).abs() < 1e-9);
        }
    }

    /// Brute-force exact Wilcoxon: enumerate all 2^n sign assignments.
    fn brute_force_wilcoxon(a: &[f64], b: &[f64]) -> f64 {
        let diffs: Vec<f64> =
            a.iter().zip(b).map(|(x, y)| y - x).filter(|&d| d != 0.0).collect();
        if diffs.is_empty() {
            return 1.0;
        }
        let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
        let doubled = doubled_ranks(&abs);
        let w_obs: u64 = diffs
            .iter()
            .zip(&doubled)
            .filter(|(d, _)| **d > 0.0)
            .map(|(_, &r)| r)
            .sum();
        let n = diffs.len();
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
        let total = (1u64 << n) as f64;
        (2.0 * (le.min(ge) as f64) / total).min(1.0)
    }

    #[test]
    fn exact_wilcoxon_matches_brute_force_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..50 {
            let n = rng.gen_range(5..=14);
            let a: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
            // Occasionally inject ties and zeros.
            let b: Vec<f64> = a
                .iter()
                .map(|x| {
                    if rng.gen_bool(0.2) {
                        *x
                    } else if rng.gen_bool(0.3) {
                        x + 1.0
                    } else {
                        x + rng.gen_range(-3.0..3.0)
                    }
                })
                .collect();
            let fast = wilcoxon_signed_rank(&a, &b).unwrap();
            let brute = brute_force_wilcoxon(&a, &b);
            assert_eq!(fast, brute, "n={n}");
        }
    }

    #[test]
    fn wilcoxon_hand_cases() {
        let a = vec![0.0; 20];
        assert_eq!(wilcoxon_signed_rank(&a, &a).unwrap(), 1.0);

        let b: Vec<f64> = vec![1.0; 20];
        let p = wilcoxon_signed_rank(&a, &b).unwrap();
        assert!(p < 0.01, "uniform shift p = {p}");
        // All 20 positive: W+ at the maximum; two-sided p = 2 / 2^20.
        assert_relative_eq!(p, 2.0 / (1u64 << 20) as f64, max_relative = 1e-12);

        let alt: Vec<f64> =
            (0..20).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let p = wilcoxon_signed_rank(&a, &alt).unwrap();
        assert!(p > 0.5, "alternating-sign p = {p}");
    }

    #[test]
    fn wilcoxon_large_n_uses_sane_approximation() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a: Vec<f64> = (0..100).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b: Vec<f64> = a.iter().map(|x| x + 0.5 + rng.gen_range(-0.1..0.1)).collect();
        let p = wilcoxon_signed_rank(&a, &b).unwrap();
        assert!(p < 1e-6, "strong consistent shift should be significant, p = {p}");

        let c: Vec<f64> = a.iter().map(|x| x + rng.gen_range(-0.01..0.01)).collect();
        let p = wilcoxon_signed_rank(&a, &c).unwrap();
        assert!(p > 0.01, "noise-only shift should not be extreme, p = {p}");
    }

    #[test]
    fn wilcoxon_small_n_rejected() {
        assert!(wilcoxon_signed_rank(&[1.0; 4], &[2.0; 4]).is_err());
    }
}
