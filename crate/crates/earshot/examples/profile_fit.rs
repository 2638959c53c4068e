//! Times a desk-scale mixture fit on synthetic data shaped like the full
//! four-parameter experiment (N=945, D=1443, L=4, K=8).

use earshot::gllim::{fit, EmConfig, TrainingSet};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use std::time::Instant;

fn main() {
    let (n, d, l, k) = (945usize, 1443usize, 4usize, 8usize);
    let mut rng = ChaCha12Rng::seed_from_u64(7);
    // Piecewise-affine data: parameters drawn uniformly, features from one
    // of 8 random affine maps plus noise.
    let mut maps = Vec::new();
    for _ in 0..k {
        let a: Vec<f64> = (0..d * l).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        maps.push((a, b));
    }
    let mut y = vec![0.0; n * d];
    let mut u = vec![0.0; n * l];
    for i in 0..n {
        for j in 0..l {
            u[i * l + j] = rng.random_range(-1.0..1.0);
        }
        let (a, b) = &maps[i % k];
        for r in 0..d {
            let mut acc = b[r];
            for j in 0..l {
                acc += a[r * l + j] * u[i * l + j];
            }
            y[i * d + r] = acc + 0.01 * rng.random_range(-1.0..1.0);
        }
    }
    let set = TrainingSet::new(y, u, n, d, l).unwrap();
    let t = Instant::now();
    let (model, report) = fit(&set, k, &EmConfig::default(), 42).unwrap();
    println!(
        "fit took {:?}: {} iterations, converged {}, K={} D={} L={}",
        t.elapsed(),
        report.n_iterations,
        report.converged,
        model.n_components,
        model.feature_dim,
        model.param_dim
    );
}
