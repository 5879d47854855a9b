//! Clustering evaluation: accuracy under optimal label matching, normalized
//! mutual information, adjusted Rand index, and macro F1.

use serde::{Deserialize, Serialize};

use crate::error::{Result, ScgcError};

/// The four headline scores plus the cluster-to-class mapping accuracy was
/// computed under, so the number can be recomputed from raw labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub acc: f64,
    pub nmi: f64,
    pub ari: f64,
    pub f1: f64,
    pub mapping: Vec<usize>,
}

/// Contingency counts: rows are truth classes, columns are predicted
/// clusters, padded square so a permutation always exists.
fn contingency(pred: &[usize], truth: &[usize]) -> Vec<Vec<usize>> {
    let c = pred.iter().chain(truth).copied().max().map_or(0, |m| m + 1);
    let mut counts = vec![vec![0usize; c]; c];
    for (&p, &t) in pred.iter().zip(truth) {
        counts[t][p] += 1;
    }
    counts
}

/// Minimum-cost assignment over a square cost matrix (Jonker-style
/// potentials, O(n^3)). Returns column chosen for each row.
fn hungarian_min(cost: &[Vec<i64>]) -> Vec<usize> {
    let n = cost.len();
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut matched = vec![0usize; n + 1]; // matched[j] = row on column j, 1-based
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        matched[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![i64::MAX; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = matched[j0];
            let mut delta = i64::MAX;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[matched[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if matched[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            matched[j0] = matched[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut answer = vec![0usize; n];
    for j in 1..=n {
        if matched[j] > 0 {
            answer[matched[j] - 1] = j - 1;
        }
    }
    answer
}

/// Cluster-to-class permutation maximizing the total matched count via
/// optimal bipartite matching on the contingency table.
pub fn optimal_mapping(pred: &[usize], truth: &[usize]) -> Result<Vec<usize>> {
    if pred.is_empty() || pred.len() != truth.len() {
        return Err(ScgcError::InvalidInput(format!(
            "label vectors must be non-empty and equal length: {} vs {}",
            pred.len(),
            truth.len()
        )));
    }
    let counts = contingency(pred, truth);
    let c = counts.len();
    // maximize matches == minimize negated counts; rows are clusters here
    let cost: Vec<Vec<i64>> = (0..c)
        .map(|p| (0..c).map(|t| -(counts[t][p] as i64)).collect())
        .collect();
    Ok(hungarian_min(&cost))
}

fn entropy(sizes: &[usize], n: f64) -> f64 {
    sizes
        .iter()
        .filter(|&&s| s > 0)
        .map(|&s| {
            let p = s as f64 / n;
            -p * p.ln()
        })
        .sum()
}

fn comb2(x: usize) -> f64 {
    let x = x as f64;
    x * (x - 1.0) / 2.0
}

/// Full evaluation under the paper-style protocol: ACC via optimal
/// matching, NMI with arithmetic-mean normalization, ARI with the expected
/// index correction, macro F1 on the mapped predictions.
pub fn clustering_metrics(pred: &[usize], truth: &[usize]) -> Result<MetricReport> {
    let mapping = optimal_mapping(pred, truth)?;
    let n = pred.len();
    let nf = n as f64;
    let counts = contingency(pred, truth);
    let c = counts.len();

    let truth_sizes: Vec<usize> = (0..c).map(|t| counts[t].iter().sum()).collect();
    let pred_sizes: Vec<usize> = (0..c).map(|p| (0..c).map(|t| counts[t][p]).sum()).collect();

    let acc = (0..c).map(|p| counts[mapping[p]][p]).sum::<usize>() as f64 / nf;

    // mutual information over the joint distribution
    let h_truth = entropy(&truth_sizes, nf);
    let h_pred = entropy(&pred_sizes, nf);
    let mut mi = 0.0;
    for t in 0..c {
        for p in 0..c {
            let joint = counts[t][p];
            if joint == 0 {
                continue;
            }
            let pij = joint as f64 / nf;
            mi += pij * (nf * joint as f64 / (truth_sizes[t] as f64 * pred_sizes[p] as f64)).ln();
        }
    }
    let nmi = if h_truth == 0.0 && h_pred == 0.0 {
        1.0 // both partitions are a single cluster: identical
    } else {
        mi / ((h_truth + h_pred) / 2.0)
    };

    let index: f64 = counts
        .iter()
        .flat_map(|row| row.iter())
        .map(|&x| comb2(x))
        .sum();
    let sum_truth: f64 = truth_sizes.iter().map(|&x| comb2(x)).sum();
    let sum_pred: f64 = pred_sizes.iter().map(|&x| comb2(x)).sum();
    let total_pairs = comb2(n);
    let expected = if total_pairs > 0.0 {
        sum_truth * sum_pred / total_pairs
    } else {
        0.0
    };
    let max_index = (sum_truth + sum_pred) / 2.0;
    let ari = if (max_index - expected).abs() == 0.0 {
        1.0 // degenerate: both partitions trivially identical
    } else {
        (index - expected) / (max_index - expected)
    };

    // macro F1 on mapped predictions over classes observed in either side
    let mapped: Vec<usize> = pred.iter().map(|&p| mapping[p]).collect();
    let mut observed = vec![false; c];
    for &t in truth.iter().chain(&mapped) {
        observed[t] = true;
    }
    let mut f1_sum = 0.0;
    let mut f1_classes = 0usize;
    for class in 0..c {
        if !observed[class] {
            continue;
        }
        f1_classes += 1;
        let tp = truth
            .iter()
            .zip(&mapped)
            .filter(|&(&t, &m)| t == class && m == class)
            .count() as f64;
        let fp = mapped.iter().filter(|&&m| m == class).count() as f64 - tp;
        let fn_ = truth.iter().filter(|&&t| t == class).count() as f64 - tp;
        if 2.0 * tp + fp + fn_ > 0.0 {
            f1_sum += 2.0 * tp / (2.0 * tp + fp + fn_);
        }
    }
    let f1 = f1_sum / f1_classes as f64;

    let report = MetricReport {
        acc,
        nmi,
        ari,
        f1,
        mapping,
    };
    if !(report.acc.is_finite()
        && report.nmi.is_finite()
        && report.ari.is_finite()
        && report.f1.is_finite())
    {
        return Err(ScgcError::NonFinite("metric report".into()));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngState;

    // ------- independent reference implementations (contingency based) ----

    fn permutations(c: usize) -> Vec<Vec<usize>> {
        fn rec(current: &mut Vec<usize>, remaining: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if remaining.is_empty() {
                out.push(current.clone());
                return;
            }
            for k in 0..remaining.len() {
                let v = remaining.remove(k);
                current.push(v);
                rec(current, remaining, out);
                current.pop();
                remaining.insert(k, v);
            }
        }
        let mut out = Vec::new();
        rec(&mut Vec::new(), &mut (0..c).collect(), &mut out);
        out
    }

    fn brute_force_best_matches(pred: &[usize], truth: &[usize]) -> usize {
        let c = pred.iter().chain(truth).copied().max().unwrap() + 1;
        permutations(c)
            .iter()
            .map(|perm| {
                pred.iter()
                    .zip(truth)
                    .filter(|&(&p, &t)| perm[p] == t)
                    .count()
            })
            .max()
            .unwrap()
    }

    fn reference_nmi(pred: &[usize], truth: &[usize]) -> f64 {
        let n = pred.len() as f64;
        let c = pred.iter().chain(truth).copied().max().unwrap() + 1;
        let mut joint = vec![vec![0usize; c]; c];
        let mut pt = vec![0usize; c];
        let mut pp = vec![0usize; c];
        for (&p, &t) in pred.iter().zip(truth) {
            joint[t][p] += 1;
            pt[t] += 1;
            pp[p] += 1;
        }
        let mut mi = 0.0;
        for t in 0..c {
            for p in 0..c {
                if joint[t][p] > 0 {
                    let pij = joint[t][p] as f64 / n;
                    mi += pij * (joint[t][p] as f64 * n / (pt[t] as f64 * pp[p] as f64)).ln();
                }
            }
        }
        let h = |counts: &[usize]| -> f64 {
            counts
                .iter()
                .filter(|&&x| x > 0)
                .map(|&x| {
                    let q = x as f64 / n;
                    -q * q.ln()
                })
                .sum()
        };
        let (ht, hp) = (h(&pt), h(&pp));
        if ht == 0.0 && hp == 0.0 {
            1.0
        } else {
            mi / ((ht + hp) / 2.0)
        }
    }

    fn reference_ari(pred: &[usize], truth: &[usize]) -> f64 {
        let n = pred.len();
        // pair counting, straight from the definition
        let (mut both, mut truth_only, mut pred_only) = (0.0, 0.0, 0.0);
        for i in 0..n {
            for j in (i + 1)..n {
                let same_t = truth[i] == truth[j];
                let same_p = pred[i] == pred[j];
                if same_t && same_p {
                    both += 1.0;
                }
                if same_t {
                    truth_only += 1.0;
                }
                if same_p {
                    pred_only += 1.0;
                }
            }
        }
        let total = comb2(n);
        let expected = truth_only * pred_only / total;
        let max_index = (truth_only + pred_only) / 2.0;
        if (max_index - expected).abs() == 0.0 {
            1.0
        } else {
            (both - expected) / (max_index - expected)
        }
    }

    fn reference_f1(pred: &[usize], truth: &[usize], mapping: &[usize]) -> f64 {
        let c = mapping.len();
        let mapped: Vec<usize> = pred.iter().map(|&p| mapping[p]).collect();
        let mut sum = 0.0;
        let mut classes = 0;
        for class in 0..c {
            let in_truth = truth.contains(&class);
            let in_pred = mapped.contains(&class);
            if !in_truth && !in_pred {
                continue;
            }
            classes += 1;
            let tp = truth
                .iter()
                .zip(&mapped)
                .filter(|&(&t, &m)| t == class && m == class)
                .count() as f64;
            let precision_den = mapped.iter().filter(|&&m| m == class).count() as f64;
            let recall_den = truth.iter().filter(|&&t| t == class).count() as f64;
            if precision_den == 0.0 || recall_den == 0.0 || tp == 0.0 {
                continue;
            }
            let precision = tp / precision_den;
            let recall = tp / recall_den;
            sum += 2.0 * precision * recall / (precision + recall);
        }
        sum / classes as f64
    }

    #[test]
    fn identical_labels_identity_mapping() {
        let labels = vec![0, 1, 2, 1, 0];
        let mapping = optimal_mapping(&labels, &labels).unwrap();
        assert_eq!(mapping, vec![0, 1, 2]);
    }

    #[test]
    fn swapped_labels_swap_mapping() {
        let truth = vec![0, 0, 1, 1];
        let pred = vec![1, 1, 0, 0];
        let mapping = optimal_mapping(&pred, &truth).unwrap();
        assert_eq!(mapping, vec![1, 0]);
    }

    #[test]
    fn mapping_matches_brute_force_over_permutations() {
        let mut rng = RngState::new(1);
        for _ in 0..30 {
            let n = 30;
            let pred: Vec<usize> = (0..n).map(|_| rng.next_index(6)).collect();
            let truth: Vec<usize> = (0..n).map(|_| rng.next_index(6)).collect();
            let mapping = optimal_mapping(&pred, &truth).unwrap();
            let got: usize = pred
                .iter()
                .zip(&truth)
                .filter(|&(&p, &t)| mapping[p] == t)
                .count();
            assert_eq!(got, brute_force_best_matches(&pred, &truth));
        }
    }

    #[test]
    fn empty_input_rejected() {
        assert!(optimal_mapping(&[], &[]).is_err());
        assert!(optimal_mapping(&[0], &[0, 1]).is_err());
    }

    #[test]
    fn perfect_prediction_scores_one_everywhere() {
        let truth = vec![0, 0, 1, 1, 2, 2];
        let report = clustering_metrics(&truth, &truth).unwrap();
        assert_eq!(report.acc, 1.0);
        assert!((report.nmi - 1.0).abs() < 1e-12);
        assert!((report.ari - 1.0).abs() < 1e-12);
        assert!((report.f1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn crossed_partition_frozen_case() {
        // truth [0,0,1,1] vs pred [0,1,0,1]: half right under any mapping;
        // the pair-counting oracle gives ARI = -0.5 for this configuration
        let truth = vec![0, 0, 1, 1];
        let pred = vec![0, 1, 0, 1];
        let report = clustering_metrics(&pred, &truth).unwrap();
        assert!((report.acc - 0.5).abs() < 1e-12);
        let oracle = reference_ari(&pred, &truth);
        assert!((report.ari - oracle).abs() < 1e-12);
        assert!((report.ari + 0.5).abs() < 1e-12, "ari {}", report.ari);
        assert!(
            report.nmi.abs() < 1e-12,
            "independent partitions carry no information"
        );
    }

    #[test]
    fn metrics_match_reference_implementations() {
        let mut rng = RngState::new(2);
        for round in 0..200 {
            let n = 2 + rng.next_index(11);
            let c = 1 + rng.next_index(6);
            let pred: Vec<usize> = (0..n).map(|_| rng.next_index(c)).collect();
            let truth: Vec<usize> = (0..n).map(|_| rng.next_index(c)).collect();
            let report = clustering_metrics(&pred, &truth).unwrap();

            let acc_want = brute_force_best_matches(&pred, &truth) as f64 / n as f64;
            assert!((report.acc - acc_want).abs() < 1e-10, "round {round} acc");
            assert!(
                (report.nmi - reference_nmi(&pred, &truth)).abs() < 1e-10,
                "round {round} nmi: {} vs {} for pred {pred:?} truth {truth:?}",
                report.nmi,
                reference_nmi(&pred, &truth)
            );
            assert!(
                (report.ari - reference_ari(&pred, &truth)).abs() < 1e-10,
                "round {round} ari"
            );
            assert!(
                (report.f1 - reference_f1(&pred, &truth, &report.mapping)).abs() < 1e-10,
                "round {round} f1"
            );
        }
    }

    #[test]
    fn metrics_invariant_under_prediction_relabeling() {
        let mut rng = RngState::new(3);
        let truth: Vec<usize> = (0..40).map(|_| rng.next_index(4)).collect();
        let pred: Vec<usize> = (0..40).map(|_| rng.next_index(4)).collect();
        let base = clustering_metrics(&pred, &truth).unwrap();
        for perm in [[1usize, 2, 3, 0], [3, 2, 1, 0], [2, 0, 3, 1]] {
            let relabeled: Vec<usize> = pred.iter().map(|&p| perm[p]).collect();
            let got = clustering_metrics(&relabeled, &truth).unwrap();
            assert!((got.acc - base.acc).abs() < 1e-12);
            assert!((got.nmi - base.nmi).abs() < 1e-12);
            assert!((got.ari - base.ari).abs() < 1e-12);
            assert!((got.f1 - base.f1).abs() < 1e-12);
        }
    }

    #[test]
    fn balanced_truth_accuracy_at_least_one_over_c() {
        let mut rng = RngState::new(4);
        let c = 4;
        let truth: Vec<usize> = (0..80).map(|i| i % c).collect();
        for _ in 0..20 {
            let pred: Vec<usize> = (0..80).map(|_| rng.next_index(c)).collect();
            let report = clustering_metrics(&pred, &truth).unwrap();
            assert!(report.acc >= 1.0 / c as f64 - 1e-12);
        }
    }

    #[test]
    fn shuffled_truth_ari_centers_on_zero() {
        let mut rng = RngState::new(5);
        let truth: Vec<usize> = (0..30).map(|i| i % 3).collect();
        let mut total = 0.0;
        for _ in 0..1000 {
            let mut pred = truth.clone();
            rng.shuffle(&mut pred);
            total += clustering_metrics(&pred, &truth).unwrap().ari;
        }
        let mean = total / 1000.0;
        assert!(mean.abs() < 0.05, "mean ari {mean}");
    }

    #[test]
    fn degenerate_single_cluster_cases() {
        // both constant: identical partitions regardless of label values
        let report = clustering_metrics(&[3, 3, 3], &[0, 0, 0]).unwrap();
        assert!((report.nmi - 1.0).abs() < 1e-12);
        assert!((report.ari - 1.0).abs() < 1e-12);
        // one side constant, the other not: no shared information
        let report = clustering_metrics(&[0, 0, 0], &[0, 1, 2]).unwrap();
        assert_eq!(report.nmi, 0.0);
    }

    #[test]
    fn accuracy_is_recomputable_from_its_mapping() {
        let mut rng = RngState::new(6);
        let truth: Vec<usize> = (0..25).map(|_| rng.next_index(3)).collect();
        let pred: Vec<usize> = (0..25).map(|_| rng.next_index(3)).collect();
        let report = clustering_metrics(&pred, &truth).unwrap();
        let recomputed = pred
            .iter()
            .zip(&truth)
            .filter(|&(&p, &t)| report.mapping[p] == t)
            .count() as f64
            / 25.0;
        assert_eq!(report.acc, recomputed);
    }

    #[test]
    fn single_point_is_well_defined() {
        let report = clustering_metrics(&[0], &[0]).unwrap();
        assert_eq!(report.acc, 1.0);
        assert_eq!(report.nmi, 1.0);
        assert_eq!(report.ari, 1.0);
    }

    #[test]
    fn report_serializes_flat() {
        let report = MetricReport {
            acc: 0.5,
            nmi: 0.25,
            ari: 0.1,
            f1: 0.4,
            mapping: vec![1, 0],
        };
        let json = serde_json::to_value(&report).unwrap();
        assert_eq!(json["acc"], 0.5);
        assert_eq!(json["mapping"][0], 1);
    }
}
