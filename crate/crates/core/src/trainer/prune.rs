use crate::abps::{PerformanceModel, PolicyId, PolicyLibrary};
use crate::error::{config, Result};

/// Policies whose type-averaged histograms are closer than this in total
/// variation count as one performance cluster.
pub const TV_CLUSTER_THRESHOLD: f64 = 0.15;

fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// Type-averaged histogram and mean of each policy, in `ids` order.
fn profiles(perf: &PerformanceModel, ids: &[PolicyId]) -> Result<Vec<(Vec<f64>, f64)>> {
    let n = perf.types().len() as f64;
    ids.iter()
        .map(|&p| {
            let mut hist = vec![0.0; perf.num_bins()];
            let mut mean = 0.0;
            for t in 0..perf.types().len() {
                for (h, m) in hist.iter_mut().zip(perf.masses(t, p)?) {
                    *h += m / n;
                }
                mean += perf.expected(t, p)? / n;
            }
            Ok((hist, mean))
        })
        .collect()
}

/// Drops the worst quartile by type-averaged expected return (never more
/// than would leave fewer than `keep`), then keeps the best policy of each
/// performance cluster and fills the remaining slots with the policies
/// farthest in total variation from those already kept.
pub fn prune_library(candidates: &PolicyLibrary, perf: &PerformanceModel, keep: usize) -> Result<PolicyLibrary> {
    let n = candidates.len();
    if keep == 0 || keep > n {
        return Err(config(format!("cannot keep {keep} of {n} policies")));
    }
    let ids = candidates.ids();
    let prof = profiles(perf, &ids)?;

    // Best first; ties go to the lower id.
    let mut ranked: Vec<usize> = (0..n).collect();
    ranked.sort_by(|&a, &b| prof[b].1.total_cmp(&prof[a].1).then(ids[a].cmp(&ids[b])));
    let drop = (n / 4).min(n - keep);
    let pool: Vec<usize> = ranked[..n - drop].to_vec();

    // Single-linkage clusters over the pool; each cluster's representative
    // is its first member in rank order.
    let mut cluster = vec![usize::MAX; n];
    let mut reps = Vec::new();
    for &i in &pool {
        if cluster[i] != usize::MAX {
            continue;
        }
        let c = reps.len();
        reps.push(i);
        let mut stack = vec![i];
        cluster[i] = c;
        while let Some(j) = stack.pop() {
            for &k in &pool {
                if cluster[k] == usize::MAX && total_variation(&prof[j].0, &prof[k].0) < TV_CLUSTER_THRESHOLD {
                    cluster[k] = c;
                    stack.push(k);
                }
            }
        }
    }

    // With more clusters than slots, spread over the representatives;
    // otherwise keep them all and spread over the rest of the pool.
    let (mut chosen, source) = if reps.len() >= keep { (vec![reps[0]], reps) } else { (reps, pool) };
    while chosen.len() < keep {
        let mut best: Option<(usize, f64)> = None;
        for &i in source.iter().filter(|i| !chosen.contains(i)) {
            let d = chosen.iter().map(|&c| total_variation(&prof[i].0, &prof[c].0)).fold(f64::INFINITY, f64::min);
            if best.map_or(true, |(_, b)| d > b) {
                best = Some((i, d));
            }
        }
        chosen.push(best.expect("pool has enough policies").0);
    }
    let kept: Vec<PolicyId> = chosen.iter().map(|&i| ids[i]).collect();
    candidates.subset(&kept)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abps::{generate_library, PolicyLibrary};
    use crate::apomdp::{build_base_model, RewardSpec};
    use crate::human::make_type_space;

    fn library(n: usize) -> PolicyLibrary {
        let base = build_base_model(RewardSpec::default(), 0.95).unwrap();
        generate_library(&base, n, &[0.5], 3).unwrap()
    }

    /// One type; each policy puts all its mass in the given bin of 4.
    fn perf(bins: &[usize]) -> PerformanceModel {
        let masses = bins
            .iter()
            .map(|&k| {
                let mut m = vec![0.0; 4];
                m[k] = 1.0;
                m
            })
            .collect();
        PerformanceModel::from_histograms(
            make_type_space()[..1].to_vec(),
            (0..bins.len()).collect(),
            vec![0.0, 1.0, 2.0, 3.0, 4.0],
            masses,
        )
        .unwrap()
    }

    #[test]
    fn keeping_everything_is_the_identity() {
        let lib = library(4);
        assert_eq!(prune_library(&lib, &perf(&[0, 1, 2, 3]), 4).unwrap(), lib);
    }

    #[test]
    fn duplicates_go_before_distinct_policies() {
        // Policies 1 and 2 are identical; 0 is the worst and falls in the
        // bottom quartile with n = 5.
        let lib = library(5);
        let out = prune_library(&lib, &perf(&[0, 3, 3, 1, 2]), 3).unwrap();
        assert_eq!(out.ids(), vec![1, 3, 4]);
    }

    #[test]
    fn worst_quartile_is_dropped_first() {
        let lib = library(8);
        let out = prune_library(&lib, &perf(&[0, 0, 3, 3, 2, 2, 1, 1]), 6).unwrap();
        assert_eq!(out.ids(), vec![2, 3, 4, 5, 6, 7]);
    }

    #[test]
    fn every_cluster_keeps_a_member() {
        let lib = library(6);
        // Policy 5 is the bottom quartile; the rest form two clusters.
        let out = prune_library(&lib, &perf(&[3, 3, 3, 2, 2, 1]), 3).unwrap();
        assert_eq!(out.ids(), vec![0, 1, 3]);
        let out = prune_library(&lib, &perf(&[3, 3, 2, 1, 0, 0]), 4).unwrap();
        assert_eq!(out.ids(), vec![0, 2, 3, 4]);
    }

    #[test]
    fn impossible_sizes_are_rejected() {
        let lib = library(3);
        assert!(prune_library(&lib, &perf(&[0, 1, 2]), 4).is_err());
        assert!(prune_library(&lib, &perf(&[0, 1, 2]), 0).is_err());
    }

    #[test]
    fn total_variation_of_duplicates_is_zero() {
        assert_eq!(total_variation(&[0.2, 0.8], &[0.2, 0.8]), 0.0);
        assert!((total_variation(&[1.0, 0.0], &[0.0, 1.0]) - 1.0).abs() < 1e-12);
    }
}
