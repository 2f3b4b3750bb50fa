//! Agglomerative clustering of scalar features with Ward's minimum-variance
//! linkage, the two-cluster cut, and the minority-is-defective rule.
//!
//! Cluster ids follow creation order: leaves are `0..n`, and the cluster made
//! by merge `i` gets id `n + i`. Each step merges the pair with the smallest
//! increase in within-cluster sum of squares,
//!
//! ```text
//! delta(A, B) = |A| |B| / (|A| + |B|) * (mean_A - mean_B)^2
//! ```
//!
//! breaking exact ties by the lexicographically smallest `(id_a, id_b)` pair.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::periodic_blocks::BlockLabel;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge<T> {
    /// Smaller of the two merged cluster ids.
    pub left: usize,
    pub right: usize,
    /// Ward increment paid by this merge.
    pub cost: T,
    /// Leaf count of the merged cluster.
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dendrogram<T> {
    pub merges: Vec<Merge<T>>,
    pub n_leaves: usize,
}

impl<T: Scalar> Dendrogram<T> {
    /// Leaf indices under `cluster`, ascending.
    pub fn leaves_of(&self, cluster: usize) -> Vec<usize> {
        let mut stack = vec![cluster];
        let mut leaves = Vec::new();
        while let Some(id) = stack.pop() {
            if id < self.n_leaves {
                leaves.push(id);
            } else {
                let m = &self.merges[id - self.n_leaves];
                stack.push(m.left);
                stack.push(m.right);
            }
        }
        leaves.sort_unstable();
        leaves
    }

    /// Writes `step,left,right,cost,size` rows.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut csv = csv::Writer::from_writer(writer);
        csv.write_record(["step", "left", "right", "cost", "size"])?;
        for (step, m) in self.merges.iter().enumerate() {
            csv.write_record([
                step.to_string(),
                m.left.to_string(),
                m.right.to_string(),
                m.cost.to_string(),
                m.size.to_string(),
            ])?;
        }
        csv.flush()?;
        Ok(())
    }
}

#[inline]
fn ward_delta<T: Scalar>(size_a: usize, sum_a: T, size_b: usize, sum_b: T) -> T {
    let (na, nb) = (T::of_usize(size_a), T::of_usize(size_b));
    let diff = sum_a / na - sum_b / nb;
    na * nb / (na + nb) * diff * diff
}

/// Builds the full Ward dendrogram of 1-D `features`.
///
/// Keeps, for every active cluster, its nearest neighbour among clusters with
/// a larger id, so each step scans O(n) candidates instead of all pairs.
/// Distances come straight from cluster sizes and sums rather than a
/// Lance-Williams update, so no distance matrix is stored.
pub fn ward_cluster<T: Scalar>(features: &[T]) -> Result<Dendrogram<T>> {
    let n = features.len();
    if n < 2 {
        return Err(Error::argument(format!("Ward clustering needs at least 2 features, got {n}")));
    }
    if features.iter().any(|f| !f.is_finite()) {
        return Err(Error::argument("features must be finite"));
    }

    let mut active = vec![true; n];
    let mut ids: Vec<usize> = (0..n).collect();
    let mut sizes = vec![1usize; n];
    let mut sums: Vec<T> = features.to_vec();
    let mut nn: Vec<Option<usize>> = vec![None; n];
    let mut nn_cost = vec![T::infinity(); n];

    let delta = |sizes: &[usize], sums: &[T], s: usize, t: usize| {
        ward_delta(sizes[s], sums[s], sizes[t], sums[t])
    };
    let refresh = |s: usize,
                   active: &[bool],
                   ids: &[usize],
                   sizes: &[usize],
                   sums: &[T]|
     -> (Option<usize>, T) {
        let mut best: (Option<usize>, T) = (None, T::infinity());
        for t in 0..n {
            if !active[t] || t == s || ids[t] < ids[s] {
                continue;
            }
            let d = delta(sizes, sums, s, t);
            let better = match best.0 {
                None => true,
                Some(b) => d < best.1 || (d == best.1 && ids[t] < ids[b]),
            };
            if better {
                best = (Some(t), d);
            }
        }
        best
    };

    for s in 0..n {
        (nn[s], nn_cost[s]) = refresh(s, &active, &ids, &sizes, &sums);
    }

    let mut merges = Vec::with_capacity(n - 1);
    for step in 0..n - 1 {
        let mut pick: Option<usize> = None;
        for s in 0..n {
            if !active[s] || nn[s].is_none() {
                continue;
            }
            let better = match pick {
                None => true,
                Some(p) => nn_cost[s] < nn_cost[p] || (nn_cost[s] == nn_cost[p] && ids[s] < ids[p]),
            };
            if better {
                pick = Some(s);
            }
        }
        let sa = pick.expect("at least two active clusters remain");
        let sb = nn[sa].expect("picked cluster has a neighbour");
        let cost = nn_cost[sa];
        let size = sizes[sa] + sizes[sb];
        merges.push(Merge { left: ids[sa], right: ids[sb], cost, size });

        // New cluster takes slot `sa`; it has the largest id so far.
        active[sb] = false;
        ids[sa] = n + step;
        sizes[sa] = size;
        sums[sa] = sums[sa] + sums[sb];
        nn[sa] = None;
        nn_cost[sa] = T::infinity();

        for k in 0..n {
            if !active[k] || k == sa {
                continue;
            }
            if nn[k] == Some(sa) || nn[k] == Some(sb) {
                (nn[k], nn_cost[k]) = refresh(k, &active, &ids, &sizes, &sums);
            } else {
                let d = delta(&sizes, &sums, k, sa);
                if nn[k].is_none() || d < nn_cost[k] {
                    nn[k] = Some(sa);
                    nn_cost[k] = d;
                }
            }
        }
    }
    Ok(Dendrogram { merges, n_leaves: n })
}

/// Leaf sets on either side of the final merge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TwoClusterPartition {
    /// `clusters[0]` descends from the smaller id of the final merge.
    pub clusters: [Vec<usize>; 2],
}

/// Undoes the final merge.
pub fn cut_two<T: Scalar>(d: &Dendrogram<T>) -> Result<TwoClusterPartition> {
    let last = d
        .merges
        .last()
        .filter(|_| d.n_leaves >= 2 && d.merges.len() == d.n_leaves - 1)
        .ok_or_else(|| Error::argument("dendrogram is incomplete"))?;
    Ok(TwoClusterPartition { clusters: [d.leaves_of(last.left), d.leaves_of(last.right)] })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    /// Cluster (0 or 1) of each leaf.
    pub labels: Vec<usize>,
    pub defective_cluster: usize,
    pub sizes: [usize; 2],
}

impl ClusterAssignment {
    pub fn block_labels(&self) -> Vec<BlockLabel> {
        self.labels
            .iter()
            .map(|&c| {
                if c == self.defective_cluster {
                    BlockLabel::Defective
                } else {
                    BlockLabel::DefectFree
                }
            })
            .collect()
    }
}

fn median<T: Scalar>(values: &[T]) -> T {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite energies"));
    let mid = sorted.len() / 2;
    if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        (sorted[mid - 1] + sorted[mid]) / T::of(2.0)
    }
}

/// Marks the smaller cluster defective.
///
/// On a size tie the cluster whose mean lies farther from the median energy
/// is defective, and after that cluster 0.
pub fn select_defective<T: Scalar>(
    partition: &TwoClusterPartition,
    energies: &[T],
) -> Result<ClusterAssignment> {
    let sizes = [partition.clusters[0].len(), partition.clusters[1].len()];
    if sizes[0] == 0 || sizes[1] == 0 {
        return Err(Error::argument("both clusters must be non-empty"));
    }
    let mut labels = vec![usize::MAX; energies.len()];
    for (cluster, members) in partition.clusters.iter().enumerate() {
        for &leaf in members {
            let slot = labels
                .get_mut(leaf)
                .ok_or_else(|| Error::argument(format!("leaf {leaf} has no energy")))?;
            *slot = cluster;
        }
    }
    if labels.contains(&usize::MAX) {
        return Err(Error::argument("partition does not cover every energy"));
    }

    let defective_cluster = if sizes[0] != sizes[1] {
        if sizes[0] < sizes[1] {
            0
        } else {
            1
        }
    } else {
        let med = median(energies);
        let deviation = |members: &[usize]| {
            let sum = members.iter().fold(T::zero(), |acc, &i| acc + energies[i]);
            (sum / T::of_usize(members.len()) - med).abs()
        };
        let (d0, d1) = (deviation(&partition.clusters[0]), deviation(&partition.clusters[1]));
        // Deviations equal up to rounding count as a tie.
        let slack = T::of(64.0) * T::epsilon() * (d0.max(d1) + med.abs());
        if d1 - d0 > slack {
            1
        } else {
            0
        }
    };
    Ok(ClusterAssignment { labels, defective_cluster, sizes })
}

/// Gate threshold that clears defect-free synthetic textures while keeping
/// single-block defects. Clean 8x8-block grids land near 1e4 to 5e4.
pub const SUGGESTED_MIN_SEPARATION: f64 = 1e5;

/// Optional no-defect gate: true when the final merge costs at most `tau`
/// times the median merge cost, i.e. the two-cluster split is not distinct.
pub fn below_separation<T: Scalar>(d: &Dendrogram<T>, tau: f64) -> bool {
    let Some(last) = d.merges.last() else {
        return true;
    };
    let costs: Vec<T> = d.merges.iter().map(|m| m.cost).collect();
    last.cost <= T::of(tau) * median(&costs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn partition(a: &[usize], b: &[usize]) -> TwoClusterPartition {
        TwoClusterPartition { clusters: [a.to_vec(), b.to_vec()] }
    }

    #[test]
    fn identical_points_merge_first_at_zero_cost() {
        let d = ward_cluster(&[0.0, 0.0, 5.0]).unwrap();
        assert_eq!(d.merges[0], Merge { left: 0, right: 1, cost: 0.0, size: 2 });
        assert_eq!(d.merges.len(), 2);
    }

    #[test]
    fn outlier_is_split_last() {
        // (0,1) and (0,2) tie at 0.5 * 0.25^2; the smaller pair wins
        let d = ward_cluster(&[1.0, 1.25, 0.75, 5.0]).unwrap();
        assert_eq!(d.merges[0], Merge { left: 0, right: 1, cost: 0.03125, size: 2 });
        // {0.75} joins {1.0, 1.25}: 2/3 * 0.375^2
        assert_eq!(d.merges[1], Merge { left: 2, right: 4, cost: 0.09375, size: 3 });
        // {5.0} vs mean 1.0: 3/4 * 16
        assert_eq!(d.merges[2], Merge { left: 3, right: 5, cost: 12.0, size: 4 });

        let cut = cut_two(&d).unwrap();
        assert_eq!(cut, partition(&[3], &[0, 1, 2]));
    }

    #[test]
    fn lone_outlier_forms_its_own_cluster() {
        let d = ward_cluster(&[1.0, 1.1, 0.9, 5.0]).unwrap();
        assert_eq!(cut_two(&d).unwrap(), partition(&[3], &[0, 1, 2]));
        assert!((d.merges[2].cost - 12.0f64).abs() < 1e-12);
    }

    #[test]
    fn two_leaves() {
        let d = ward_cluster(&[2.0, -1.0]).unwrap();
        assert_eq!(d.merges, vec![Merge { left: 0, right: 1, cost: 4.5, size: 2 }]);
        assert_eq!(cut_two(&d).unwrap(), partition(&[0], &[1]));
    }

    #[test]
    fn all_equal_features_follow_tie_rule() {
        let d = ward_cluster(&[3.0; 5]).unwrap();
        let pairs: Vec<_> = d.merges.iter().map(|m| (m.left, m.right)).collect();
        // (0,1)->5, (2,3)->6, (4,5)->7, (6,7)->8
        assert_eq!(pairs, vec![(0, 1), (2, 3), (4, 5), (6, 7)]);
        assert!(d.merges.iter().all(|m| m.cost == 0.0));
        assert_eq!(cut_two(&d).unwrap(), partition(&[2, 3], &[0, 1, 4]));
    }

    #[test]
    fn too_few_or_bad_features() {
        assert!(ward_cluster::<f64>(&[]).is_err());
        assert!(ward_cluster(&[1.0]).is_err());
        assert!(ward_cluster(&[1.0, f64::NAN]).is_err());
    }

    #[test]
    fn minority_cluster_is_defective() {
        let a: Vec<usize> = (0..97).collect();
        let b: Vec<usize> = (97..100).collect();
        let energies = vec![1.0; 100];
        let assignment = select_defective(&partition(&a, &b), &energies).unwrap();
        assert_eq!(assignment.defective_cluster, 1);
        assert_eq!(assignment.sizes, [97, 3]);
        assert_eq!(assignment.block_labels().iter().filter(|l| l.is_defective()).count(), 3);
    }

    #[test]
    fn size_tie_uses_median_deviation() {
        let energies = [1.0, 9.0, 1.0, 9.0, 1.1];
        let p = partition(&[1, 3], &[0, 2]);
        assert!(select_defective(&p, &energies).is_err(), "leaf 4 is unassigned");

        let energies = [1.0, 9.0, 1.1, 9.0];
        let p = partition(&[0, 2], &[1, 3]);
        // median = (1.1 + 9.0) / 2 = 5.05; deviations 4.0 vs 3.95
        let assignment = select_defective(&p, &energies).unwrap();
        assert_eq!(assignment.defective_cluster, 0);

        let energies = [1.0, 1.0, 1.1, 9.0, 9.0, 1.0, 1.1, 1.0];
        let p = TwoClusterPartition { clusters: [vec![0, 1, 2, 5], vec![3, 4, 6, 7]] };
        // median 1.05; cluster 1 mean 5.025 deviates more
        assert_eq!(select_defective(&p, &energies).unwrap().defective_cluster, 1);
    }

    #[test]
    fn symmetric_tie_picks_cluster_zero() {
        let energies = [0.0, 0.0, 2.0, 2.0];
        let p = partition(&[2, 3], &[0, 1]);
        assert_eq!(select_defective(&p, &energies).unwrap().defective_cluster, 0);
    }

    #[test]
    fn separation_gate() {
        let clean = ward_cluster(&[1.0, 1.01, 0.99, 1.02, 0.98]).unwrap();
        let defect = ward_cluster(&[1.0, 1.01, 0.99, 1.02, 9.0]).unwrap();
        assert!(below_separation(&clean, 100.0));
        assert!(!below_separation(&defect, 100.0));
    }

    #[test]
    fn csv_dump() {
        let d = ward_cluster(&[0.0, 0.0, 5.0]).unwrap();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "step,left,right,cost,size");
        assert_eq!(lines[1], "0,0,1,0,2");
        assert_eq!(lines.len(), 3);
    }

    proptest! {
        #[test]
        fn every_leaf_merged_once(features in proptest::collection::vec(-50.0f64..50.0, 2..40)) {
            let d = ward_cluster(&features).unwrap();
            let n = features.len();
            prop_assert_eq!(d.merges.len(), n - 1);
            let mut seen = vec![false; 2 * n - 1];
            for m in &d.merges {
                prop_assert!(m.left < m.right);
                prop_assert!(!seen[m.left] && !seen[m.right]);
                seen[m.left] = true;
                seen[m.right] = true;
                prop_assert!(m.cost >= 0.0);
            }
            prop_assert_eq!(d.merges.last().unwrap().size, n);
            let cut = cut_two(&d).unwrap();
            prop_assert_eq!(cut.clusters[0].len() + cut.clusters[1].len(), n);
        }

        #[test]
        fn labels_invariant_under_rescaling(
            features in proptest::collection::vec(0.0f64..10.0, 2..40),
            factor in 1e-3f64..1e3,
        ) {
            let base = cut_two(&ward_cluster(&features).unwrap()).unwrap();
            let scaled: Vec<f64> = features.iter().map(|f| f * factor).collect();
            let other = cut_two(&ward_cluster(&scaled).unwrap()).unwrap();
            let a = select_defective(&base, &features).unwrap();
            let b = select_defective(&other, &scaled).unwrap();
            prop_assert_eq!(a.block_labels(), b.block_labels());
        }
    }
}
