//! Centroid initialization by K-means on embeddings, and hard label
//! extraction from soft assignments.

use crate::error::{Result, ScgcError};
use crate::matrix::Matrix;
use crate::rng::RngState;

/// Output of one K-means run.
#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub centroids: Matrix,
    pub assignments: Vec<usize>,
    pub inertia: f64,
    pub iterations: usize,
    /// Inertia after each Lloyd iteration; non-increasing.
    pub inertia_history: Vec<f64>,
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest centroid index, ties toward the lower index.
fn nearest(point: &[f64], centroids: &Matrix) -> (usize, f64) {
    let mut best = (0usize, squared_distance(point, centroids.row(0)));
    for u in 1..centroids.rows() {
        let d = squared_distance(point, centroids.row(u));
        if d < best.1 {
            best = (u, d);
        }
    }
    best
}

/// Weighted seeding: each next centroid is drawn proportionally to the
/// squared distance from the already chosen ones. Falls back to a uniform
/// draw when every candidate sits on a chosen centroid.
fn seed_plus_plus(z: &Matrix, c: usize, rng: &mut RngState) -> Matrix {
    let n = z.rows();
    let mut centroids = Matrix::zeros(c, z.cols());
    let first = rng.next_index(n);
    centroids.row_mut(0).copy_from_slice(z.row(first));

    let mut d2: Vec<f64> = (0..n)
        .map(|i| squared_distance(z.row(i), centroids.row(0)))
        .collect();
    for u in 1..c {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.next_f64() * total;
            let mut cum = 0.0;
            let mut chosen = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                cum += w;
                if cum > target {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.next_index(n)
        };
        centroids.row_mut(u).copy_from_slice(z.row(pick));
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(squared_distance(z.row(i), centroids.row(u)));
        }
    }
    centroids
}

/// Lloyd iterations from weighted seeding until the centroid shift drops
/// below `tol` or `max_iter` is hit. An empty cluster is repaired by
/// re-seeding its centroid at the point farthest from its nearest centroid.
pub fn kmeans(
    z: &Matrix,
    c: usize,
    rng: &mut RngState,
    max_iter: usize,
    tol: f64,
) -> Result<KMeansResult> {
    let n = z.rows();
    if c < 2 {
        return Err(ScgcError::InvalidInput(
            "kmeans needs at least 2 clusters".into(),
        ));
    }
    if n < c {
        return Err(ScgcError::InvalidInput(format!(
            "kmeans needs at least as many points as clusters: {n} < {c}"
        )));
    }
    if !z.is_finite() {
        return Err(ScgcError::NonFinite("kmeans input".into()));
    }

    let mut centroids = seed_plus_plus(z, c, rng);
    let mut assignments = vec![0usize; n];
    let mut inertia = f64::INFINITY;
    let mut history = Vec::new();
    let mut iterations = 0;

    for _ in 0..max_iter {
        iterations += 1;

        let mut dist = vec![0.0f64; n];
        for i in 0..n {
            let (u, d) = nearest(z.row(i), &centroids);
            assignments[i] = u;
            dist[i] = d;
        }

        // repair empty clusters deterministically before measuring inertia
        let mut counts = vec![0usize; c];
        for &a in &assignments {
            counts[a] += 1;
        }
        for u in 0..c {
            if counts[u] > 0 {
                continue;
            }
            let mut far = 0usize;
            for i in 1..n {
                if dist[i] > dist[far] {
                    far = i;
                }
            }
            counts[assignments[far]] -= 1;
            assignments[far] = u;
            counts[u] = 1;
            centroids.row_mut(u).copy_from_slice(z.row(far));
            dist[far] = 0.0;
        }

        let new_inertia: f64 = dist.iter().sum();
        assert!(
            new_inertia <= inertia * (1.0 + 1e-12) + 1e-12,
            "inertia must not increase: {new_inertia} after {inertia}"
        );
        inertia = new_inertia;
        history.push(inertia);

        let mut next = Matrix::zeros(c, z.cols());
        for i in 0..n {
            let row = next.row_mut(assignments[i]);
            for (acc, v) in row.iter_mut().zip(z.row(i)) {
                *acc += v;
            }
        }
        let mut shift: f64 = 0.0;
        for u in 0..c {
            let count = counts[u] as f64;
            for v in next.row_mut(u) {
                *v /= count;
            }
            shift = shift.max(squared_distance(next.row(u), centroids.row(u)).sqrt());
        }
        centroids = next;
        if shift < tol {
            break;
        }
    }

    // final assignment against the converged centroids
    let mut final_inertia = 0.0;
    for i in 0..n {
        let (u, d) = nearest(z.row(i), &centroids);
        assignments[i] = u;
        final_inertia += d;
    }
    assert!(
        final_inertia <= inertia * (1.0 + 1e-12) + 1e-12,
        "inertia must not increase: {final_inertia} after {inertia}"
    );
    inertia = final_inertia;
    history.push(inertia);

    Ok(KMeansResult {
        centroids,
        assignments,
        inertia,
        iterations,
        inertia_history: history,
    })
}

/// Argmax per row; exact ties break toward the lower cluster index.
pub fn hard_labels(q: &Matrix) -> Vec<usize> {
    (0..q.rows())
        .map(|i| {
            let row = q.row(i);
            let mut best = 0usize;
            for (u, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = u;
                }
            }
            best
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_separated_pairs_find_midpoints() {
        let z = Matrix::from_rows(&[
            vec![0.0, 0.0],
            vec![0.0, 1.0],
            vec![10.0, 0.0],
            vec![10.0, 1.0],
        ])
        .unwrap();
        let mut rng = RngState::new(1);
        let got = kmeans(&z, 2, &mut rng, 100, 1e-6).unwrap();

        // oracle: enumerate all 2-partitions, pick minimum inertia
        let mut best = f64::INFINITY;
        for mask in 1u32..(1 << 4) - 1 {
            let (mut sum_a, mut sum_b) = (vec![0.0; 2], vec![0.0; 2]);
            let (mut n_a, mut n_b) = (0.0, 0.0);
            for i in 0..4 {
                let row = z.row(i);
                if mask & (1 << i) != 0 {
                    sum_a[0] += row[0];
                    sum_a[1] += row[1];
                    n_a += 1.0;
                } else {
                    sum_b[0] += row[0];
                    sum_b[1] += row[1];
                    n_b += 1.0;
                }
            }
            let mu_a = [sum_a[0] / n_a, sum_a[1] / n_a];
            let mu_b = [sum_b[0] / n_b, sum_b[1] / n_b];
            let mut inertia = 0.0;
            for i in 0..4 {
                let row = z.row(i);
                let target = if mask & (1 << i) != 0 { mu_a } else { mu_b };
                inertia += squared_distance(row, &target);
            }
            best = best.min(inertia);
        }
        assert!(
            (got.inertia - best).abs() < 1e-12,
            "{} vs {best}",
            got.inertia
        );
        // midpoints of the two pairs, in some order
        let mut centroid_rows: Vec<Vec<f64>> =
            (0..2).map(|u| got.centroids.row(u).to_vec()).collect();
        centroid_rows.sort_by(|a, b| a[0].partial_cmp(&b[0]).unwrap());
        assert_eq!(centroid_rows[0], vec![0.0, 0.5]);
        assert_eq!(centroid_rows[1], vec![10.0, 0.5]);
        // inertia equals the sum of within-pair half-distances squared
        assert!((got.inertia - 4.0 * 0.25).abs() < 1e-12);
    }

    #[test]
    fn identical_points_have_zero_inertia() {
        let z = Matrix::from_rows(&vec![vec![3.0, -1.0]; 5]).unwrap();
        let mut rng = RngState::new(2);
        let got = kmeans(&z, 2, &mut rng, 50, 1e-6).unwrap();
        assert_eq!(got.inertia, 0.0);
    }

    #[test]
    fn n_equals_c_gives_singletons() {
        let z = Matrix::from_rows(&[vec![0.0], vec![5.0], vec![9.0]]).unwrap();
        let mut rng = RngState::new(3);
        let got = kmeans(&z, 3, &mut rng, 50, 1e-6).unwrap();
        assert_eq!(got.inertia, 0.0);
        let mut sorted = got.assignments.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), 3);
    }

    #[test]
    fn same_seed_bitwise_identical() {
        let z = Matrix::from_rows(&[
            vec![0.1, 0.0],
            vec![0.2, 0.4],
            vec![5.0, 5.1],
            vec![5.2, 4.9],
            vec![-3.0, 2.0],
            vec![-3.1, 2.2],
        ])
        .unwrap();
        let a = kmeans(&z, 3, &mut RngState::new(7), 100, 1e-6).unwrap();
        let b = kmeans(&z, 3, &mut RngState::new(7), 100, 1e-6).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn inertia_history_is_non_increasing() {
        let mut rng = RngState::new(4);
        let data: Vec<f64> = (0..60).map(|_| rng.next_f64_in(-2.0, 2.0)).collect();
        let z = Matrix::from_vec(30, 2, data).unwrap();
        let got = kmeans(&z, 4, &mut rng, 100, 0.0).unwrap();
        for pair in got.inertia_history.windows(2) {
            assert!(pair[1] <= pair[0] * (1.0 + 1e-12) + 1e-12);
        }
        assert!(got.iterations >= 1);
    }

    #[test]
    fn preconditions_enforced() {
        let z = Matrix::zeros(3, 2);
        let mut rng = RngState::new(5);
        assert!(kmeans(&z, 1, &mut rng, 10, 1e-4).is_err());
        assert!(kmeans(&z, 4, &mut rng, 10, 1e-4).is_err());
    }

    #[test]
    fn hard_labels_picks_argmax() {
        let q = Matrix::from_rows(&[vec![0.9, 0.1]]).unwrap();
        assert_eq!(hard_labels(&q), vec![0]);
    }

    #[test]
    fn hard_labels_tie_goes_low() {
        let q = Matrix::from_rows(&[vec![0.5, 0.5], vec![0.2, 0.8]]).unwrap();
        assert_eq!(hard_labels(&q), vec![0, 1]);
    }

    #[test]
    fn hard_labels_matches_scan_oracle() {
        let mut rng = RngState::new(6);
        let data: Vec<f64> = (0..40).map(|_| rng.next_f64()).collect();
        let q = Matrix::from_vec(10, 4, data).unwrap();
        let got = hard_labels(&q);
        for i in 0..10 {
            let row = q.row(i);
            let mut best = 0;
            for u in 1..4 {
                if row[u] > row[best] {
                    best = u;
                }
            }
            assert_eq!(got[i], best);
        }
    }

    #[test]
    fn hard_labels_invariant_under_monotone_transform() {
        let q = Matrix::from_rows(&[vec![0.1, 0.6, 0.3], vec![0.5, 0.2, 0.3]]).unwrap();
        let base = hard_labels(&q);
        let transformed = q.map(|v| (v * 3.0).exp());
        assert_eq!(hard_labels(&transformed), base);
    }
}
