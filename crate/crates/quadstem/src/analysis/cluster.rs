//! Agglomerative average-linkage clustering of feature columns, used to
//! reorder the clustermap.

use crate::analysis::queries::QueryMatrix;
use crate::error::{QuadstemError, Result};

fn column_distance(m: &QueryMatrix, i: usize, j: usize) -> f64 {
    m.values
        .column(i)
        .iter()
        .zip(m.values.column(j).iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

#[derive(Clone)]
struct ClusterNode {
    /// Leaf columns in left-to-right dendrogram order.
    leaves: Vec<usize>,
    size: usize,
}

/// Leaf order of agglomerative hierarchical clustering over feature columns
/// (Euclidean distance, average linkage). Ties merge the lowest-index pair,
/// so the permutation is deterministic; duplicate columns merge first and
/// end up adjacent.
pub fn cluster_order(m: &QueryMatrix) -> Result<Vec<usize>> {
    let d = m.values.ncols();
    if d == 0 {
        return Err(QuadstemError::InvalidInput("empty query matrix".into()));
    }
    if !m.values.iter().all(|v| v.is_finite()) {
        return Err(QuadstemError::NonFinite("query matrix".into()));
    }
    let mut active: Vec<ClusterNode> =
        (0..d).map(|i| ClusterNode { leaves: vec![i], size: 1 }).collect();
    // Average-linkage distance between active clusters, updated by the
    // Lance–Williams recurrence.
    let mut dist = vec![vec![0.0f64; d]; d];
    for i in 0..d {
        for j in (i + 1)..d {
            dist[i][j] = column_distance(m, i, j);
            dist[j][i] = dist[i][j];
        }
    }
    let mut alive: Vec<bool> = vec![true; d];
    for _ in 1..d {
        let mut best: Option<(usize, usize)> = None;
        for i in 0..d {
            if !alive[i] {
                continue;
            }
            for j in (i + 1)..d {
                if !alive[j] {
                    continue;
                }
                if best.map_or(true, |(bi, bj)| dist[i][j] < dist[bi][bj]) {
                    best = Some((i, j));
                }
            }
        }
        let (i, j) = best.expect("at least two active clusters");
        let (ni, nj) = (active[i].size as f64, active[j].size as f64);
        for k in 0..d {
            if alive[k] && k != i && k != j {
                let merged = (ni * dist[i][k] + nj * dist[j][k]) / (ni + nj);
                dist[i][k] = merged;
                dist[k][i] = merged;
            }
        }
        let right = std::mem::take(&mut active[j].leaves);
        active[i].leaves.extend(right);
        active[i].size += active[j].size;
        alive[j] = false;
    }
    let root = alive.iter().position(|&a| a).unwrap();
    Ok(active[root].leaves.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stem::Stem;
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn matrix(values: Array2<f64>) -> QueryMatrix {
        let stems = vec![Stem::Dx, Stem::MxV, Stem::MxI, Stem::Fx];
        QueryMatrix { values, stems }
    }

    fn random_matrix(d: usize, seed: u64) -> QueryMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        matrix(Array2::from_shape_fn((4, d), |_| rng.gen_range(-1.0..1.0)))
    }

    #[test]
    fn order_is_a_permutation() {
        for seed in 0..10 {
            let m = random_matrix(16, seed);
            let order = cluster_order(&m).unwrap();
            let mut sorted = order.clone();
            sorted.sort_unstable();
            assert_eq!(sorted, (0..16).collect::<Vec<_>>());
        }
    }

    #[test]
    fn duplicate_columns_end_up_adjacent() {
        let mut m = random_matrix(12, 77);
        let dup = m.values.column(2).to_owned();
        m.values.column_mut(9).assign(&dup);
        let order = cluster_order(&m).unwrap();
        let p2 = order.iter().position(|&c| c == 2).unwrap();
        let p9 = order.iter().position(|&c| c == 9).unwrap();
        assert_eq!(p2.abs_diff(p9), 1, "duplicates not adjacent: {order:?}");
    }

    #[test]
    fn order_is_invariant_to_uniform_scaling() {
        let m = random_matrix(10, 5);
        let scaled = QueryMatrix { values: &m.values * 7.3, stems: m.stems.clone() };
        assert_eq!(cluster_order(&m).unwrap(), cluster_order(&scaled).unwrap());
    }

    #[test]
    fn single_column_matrix_works() {
        let m = matrix(Array2::zeros((4, 1)));
        assert_eq!(cluster_order(&m).unwrap(), vec![0]);
    }
}
