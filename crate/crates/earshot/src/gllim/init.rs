//! Deterministic initialization for the mixture fit: project features to a
//! few principal components with seeded block power iteration, z-score,
//! and run seeded k-means++ on the joint (parameter, projection) vectors.

use crate::math::derive_seed;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

/// Maximum number of feature principal components used for clustering.
pub const INIT_MAX_PCS: usize = 20;

/// Row-major N×D matrix times D×P matrix → N×P.
fn mat_mul_nd_dp(x: &[f64], n: usize, d: usize, basis: &[f64], p: usize) -> Vec<f64> {
    let mut out = vec![0.0f64; n * p];
    for i in 0..n {
        let row = &x[i * d..(i + 1) * d];
        let out_row = &mut out[i * p..(i + 1) * p];
        for (idx, &v) in row.iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            let brow = &basis[idx * p..(idx + 1) * p];
            for j in 0..p {
                out_row[j] += v * brow[j];
            }
        }
    }
    out
}

/// Transpose-multiply: (N×D)ᵀ · (N×P) → D×P.
fn mat_tmul(x: &[f64], n: usize, d: usize, scores: &[f64], p: usize) -> Vec<f64> {
    let mut out = vec![0.0f64; d * p];
    for i in 0..n {
        let row = &x[i * d..(i + 1) * d];
        let srow = &scores[i * p..(i + 1) * p];
        for (idx, &v) in row.iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            let orow = &mut out[idx * p..(idx + 1) * p];
            for j in 0..p {
                orow[j] += v * srow[j];
            }
        }
    }
    out
}

/// Orthonormalize the columns of a D×P matrix in place (modified
/// Gram-Schmidt; deterministic). Columns that collapse numerically are
/// replaced with zero and skipped by callers implicitly.
fn orthonormalize_columns(b: &mut [f64], d: usize, p: usize) {
    for j in 0..p {
        for prev in 0..j {
            let mut dot = 0.0;
            for r in 0..d {
                dot += b[r * p + j] * b[r * p + prev];
            }
            for r in 0..d {
                b[r * p + j] -= dot * b[r * p + prev];
            }
        }
        let mut norm = 0.0;
        for r in 0..d {
            norm += b[r * p + j] * b[r * p + j];
        }
        let norm = norm.sqrt();
        if norm > 1e-12 {
            for r in 0..d {
                b[r * p + j] /= norm;
            }
        } else {
            for r in 0..d {
                b[r * p + j] = 0.0;
            }
        }
    }
}

/// Leading principal-component scores of a row-major N×D matrix
/// (assumed centered/standardized by the caller), via seeded block power
/// iteration on the implicit covariance XᵀX. Returns (scores N×P, P).
pub fn pca_scores(x: &[f64], n: usize, d: usize, max_pcs: usize, seed: u64) -> (Vec<f64>, usize) {
    let p = max_pcs.min(d).min(n).max(1);
    let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(seed, &[0x50_43_41]));
    let mut basis: Vec<f64> = (0..d * p)
        .map(|_| rng.random::<f64>() * 2.0 - 1.0)
        .collect();
    orthonormalize_columns(&mut basis, d, p);
    // A handful of power steps separates the leading subspace well enough
    // for clustering; exact eigenvectors are not needed.
    for _ in 0..12 {
        let scores = mat_mul_nd_dp(x, n, d, &basis, p);
        basis = mat_tmul(x, n, d, &scores, p);
        orthonormalize_columns(&mut basis, d, p);
    }
    (mat_mul_nd_dp(x, n, d, &basis, p), p)
}

/// Z-score each column of a row-major N×P matrix in place; constant
/// columns are left centered at zero.
pub fn zscore_columns(x: &mut [f64], n: usize, p: usize) {
    for j in 0..p {
        let mut mean = 0.0;
        for i in 0..n {
            mean += x[i * p + j];
        }
        mean /= n as f64;
        let mut var = 0.0;
        for i in 0..n {
            let v = x[i * p + j] - mean;
            var += v * v;
        }
        var /= n as f64;
        let std = if var > 1e-24 { var.sqrt() } else { 1.0 };
        for i in 0..n {
            x[i * p + j] = (x[i * p + j] - mean) / std;
        }
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Seeded k-means++ followed by Lloyd iterations on row-major N×P data.
/// Fully deterministic: ties in assignment go to the lower center index,
/// empty clusters adopt the point farthest from its center (lowest index
/// on ties). Returns per-point labels in 0..k.
pub fn kmeans_labels(data: &[f64], n: usize, p: usize, k: usize, seed: u64) -> Vec<usize> {
    assert!(k >= 1 && n >= k, "need at least as many points as clusters");
    let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(seed, &[0x4b_4d]));
    let point = |i: usize| &data[i * p..(i + 1) * p];

    // k-means++ seeding.
    let mut centers: Vec<f64> = Vec::with_capacity(k * p);
    let first = rng.random_range(0..n);
    centers.extend_from_slice(point(first));
    let mut best_d: Vec<f64> = (0..n).map(|i| sq_dist(point(i), &centers[..p])).collect();
    while centers.len() / p < k {
        let total: f64 = best_d.iter().sum();
        let chosen = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &w) in best_d.iter().enumerate() {
                if target < w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            pick
        } else {
            // All points coincide with a center; spread deterministically.
            centers.len() / p % n
        };
        let c0 = centers.len();
        centers.extend_from_slice(point(chosen));
        for i in 0..n {
            let dnew = sq_dist(point(i), &centers[c0..c0 + p]);
            if dnew < best_d[i] {
                best_d[i] = dnew;
            }
        }
    }

    // Lloyd iterations.
    let mut labels = vec![0usize; n];
    for _ in 0..60 {
        let mut changed = false;
        for i in 0..n {
            let mut best = 0usize;
            let mut bd = f64::INFINITY;
            for c in 0..k {
                let dist = sq_dist(point(i), &centers[c * p..(c + 1) * p]);
                if dist < bd {
                    bd = dist;
                    best = c;
                }
            }
            if labels[i] != best {
                labels[i] = best;
                changed = true;
            }
        }
        // Recompute centers; resurrect empty clusters deterministically.
        let mut counts = vec![0usize; k];
        let mut sums = vec![0.0f64; k * p];
        for i in 0..n {
            counts[labels[i]] += 1;
            let s = &mut sums[labels[i] * p..(labels[i] + 1) * p];
            for (a, &b) in s.iter_mut().zip(point(i)) {
                *a += b;
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                let mut far = 0usize;
                let mut fd = -1.0;
                for i in 0..n {
                    let dist = sq_dist(point(i), &centers[labels[i] * p..(labels[i] + 1) * p]);
                    if dist > fd && counts[labels[i]] > 1 {
                        fd = dist;
                        far = i;
                    }
                }
                let donor = labels[far];
                counts[donor] -= 1;
                labels[far] = c;
                counts[c] = 1;
                for (j, &v) in point(far).iter().enumerate() {
                    sums[donor * p + j] -= v;
                    sums[c * p + j] = v;
                }
                changed = true;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                for j in 0..p {
                    centers[c * p + j] = sums[c * p + j] / counts[c] as f64;
                }
            }
        }
        if !changed {
            break;
        }
    }
    labels
}

/// Initial hard cluster labels for the EM fit: joint vectors of the
/// (already standardized) parameters and z-scored feature principal
/// components, clustered with seeded k-means.
pub fn initial_labels(
    u_std: &[f64],
    y_std: &[f64],
    n: usize,
    l: usize,
    d: usize,
    k: usize,
    seed: u64,
) -> Vec<usize> {
    let (mut scores, p) = pca_scores(y_std, n, d, INIT_MAX_PCS, seed);
    zscore_columns(&mut scores, n, p);
    let mut joint = vec![0.0f64; n * (l + p)];
    for i in 0..n {
        joint[i * (l + p)..i * (l + p) + l].copy_from_slice(&u_std[i * l..(i + 1) * l]);
        joint[i * (l + p) + l..(i + 1) * (l + p)].copy_from_slice(&scores[i * p..(i + 1) * p]);
    }
    kmeans_labels(&joint, n, l + p, k, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pca_finds_the_dominant_direction() {
        // Points hugging the diagonal of a 5-D space: the first PC score
        // should carry nearly all the variance.
        let n = 200;
        let d = 5;
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let mut x = vec![0.0f64; n * d];
        for i in 0..n {
            let t = rng.random::<f64>() * 10.0 - 5.0;
            for j in 0..d {
                x[i * d + j] = t + 0.01 * (rng.random::<f64>() - 0.5);
            }
        }
        let (scores, p) = pca_scores(&x, n, d, 3, 1);
        assert_eq!(p, 3);
        let col_var = |j: usize| -> f64 {
            let mean: f64 = (0..n).map(|i| scores[i * p + j]).sum::<f64>() / n as f64;
            (0..n)
                .map(|i| (scores[i * p + j] - mean).powi(2))
                .sum::<f64>()
                / n as f64
        };
        let v0 = col_var(0);
        let rest = col_var(1) + col_var(2);
        assert!(
            v0 > 100.0 * rest,
            "first PC should dominate: var0 {v0:.4}, rest {rest:.6}"
        );
    }

    #[test]
    fn kmeans_separates_obvious_clusters() {
        // Three tight blobs on a line.
        let mut data = Vec::new();
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let centers = [-10.0, 0.0, 10.0];
        let mut truth = Vec::new();
        for i in 0..90 {
            let c = i % 3;
            truth.push(c);
            data.push(centers[c] + 0.1 * (rng.random::<f64>() - 0.5));
        }
        let labels = kmeans_labels(&data, 90, 1, 3, 7);
        // Same-blob points share a label; different blobs never do.
        for i in 0..90 {
            for j in 0..90 {
                assert_eq!(
                    labels[i] == labels[j],
                    truth[i] == truth[j],
                    "points {i} and {j} disagree with blob structure"
                );
            }
        }
    }

    #[test]
    fn kmeans_is_deterministic_in_the_seed() {
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let data: Vec<f64> = (0..300).map(|_| rng.random::<f64>()).collect();
        let a = kmeans_labels(&data, 100, 3, 4, 11);
        let b = kmeans_labels(&data, 100, 3, 4, 11);
        assert_eq!(a, b);
    }

    #[test]
    fn every_cluster_gets_at_least_one_point() {
        // Fewer distinct values than clusters forces the resurrect path.
        let data = vec![0.0f64; 12]; // 12 identical 1-D points
        let labels = kmeans_labels(&data, 12, 1, 3, 5);
        for c in 0..3 {
            assert!(labels.contains(&c), "cluster {c} ended up empty");
        }
    }

    #[test]
    fn zscore_normalizes_columns() {
        let mut x = vec![1.0, 100.0, 2.0, 200.0, 3.0, 300.0, 4.0, 400.0];
        zscore_columns(&mut x, 4, 2);
        for j in 0..2 {
            let mean: f64 = (0..4).map(|i| x[i * 2 + j]).sum::<f64>() / 4.0;
            let var: f64 = (0..4).map(|i| x[i * 2 + j].powi(2)).sum::<f64>() / 4.0;
            assert!(mean.abs() < 1e-12);
            assert!((var - 1.0).abs() < 1e-12);
        }
    }
}
