//! Expectation-maximization fit of the joint mixture model. All moments
//! are accumulated in deterministic order (ascending example index and
//! component index), so a fit is bit-reproducible for a given seed
//! regardless of thread count.

use super::init;
use super::{
    invert_spd, ln_2pi, log_gaussian_full, log_sum_exp, CovarianceKind, GllimModel, TrainingSet,
};
use crate::error::{Error, Result};
use log::warn;
use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

/// Eigenvalue floor for all fitted covariances, relative to the unit
/// variance of the z-scored fit space.
const EIG_FLOOR: f64 = 1e-8;

/// Responsibilities below this contribute nothing measurable to any
/// moment and are skipped in the accumulation loops.
const RESP_SKIP: f64 = 1e-14;

/// Settings for the EM fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmConfig {
    /// Maximum number of EM iterations.
    pub max_iter: usize,
    /// Relative log-likelihood change below which the fit stops.
    pub tol: f64,
    /// Constraint on the feature noise covariance.
    pub covariance: CovarianceKind,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            max_iter: 200,
            tol: 1e-6,
            covariance: CovarianceKind::Diagonal,
        }
    }
}

/// Diagnostics from one EM fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    /// Data-unit log-likelihood after each EM iteration.
    pub log_likelihood_trace: Vec<f64>,
    /// Number of EM iterations run.
    pub n_iterations: usize,
    /// Whether the relative-change criterion was met before `max_iter`.
    pub converged: bool,
    /// (iteration, component) pairs where a starved component was reseeded.
    pub reinitialized: Vec<(usize, usize)>,
}

/// Mutable mixture parameters in the z-scored fit space.
struct Params {
    k: usize,
    d: usize,
    l: usize,
    weights: Vec<f64>,
    c: Vec<f64>,     // K×L
    gamma: Vec<f64>, // K×L×L
    a: Vec<f64>,     // K×D×L
    b: Vec<f64>,     // K×D
    sig: Vec<f64>,   // K×D
}

fn column_standardization(x: &[f64], n: usize, cols: usize) -> (Vec<f64>, Vec<f64>) {
    let mut mean = vec![0.0f64; cols];
    for i in 0..n {
        for j in 0..cols {
            mean[j] += x[i * cols + j];
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut var = vec![0.0f64; cols];
    for i in 0..n {
        for j in 0..cols {
            let v = x[i * cols + j] - mean[j];
            var[j] += v * v;
        }
    }
    let std: Vec<f64> = var
        .iter()
        .map(|&v| {
            let s = (v / n as f64).sqrt();
            if s > 1e-12 {
                s
            } else {
                1.0
            }
        })
        .collect();
    (mean, std)
}

fn standardize(x: &[f64], n: usize, cols: usize, mean: &[f64], std: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0f64; x.len()];
    for i in 0..n {
        for j in 0..cols {
            out[i * cols + j] = (x[i * cols + j] - mean[j]) / std[j];
        }
    }
    out
}

/// Clamps the eigenvalues of a symmetric matrix from below and rebuilds it.
fn floor_eigenvalues(flat: &mut [f64], l: usize, floor: f64) {
    // Symmetrize against accumulation round-off before decomposing.
    for i in 0..l {
        for j in (i + 1)..l {
            let s = 0.5 * (flat[i * l + j] + flat[j * l + i]);
            flat[i * l + j] = s;
            flat[j * l + i] = s;
        }
    }
    let m = DMatrix::from_row_slice(l, l, flat);
    let eig = SymmetricEigen::new(m);
    if eig.eigenvalues.iter().all(|&v| v >= floor) {
        return;
    }
    let vals: Vec<f64> = eig.eigenvalues.iter().map(|&v| v.max(floor)).collect();
    for i in 0..l {
        for j in 0..l {
            let mut acc = 0.0;
            for (e, &val) in vals.iter().enumerate() {
                acc += eig.eigenvectors[(i, e)] * val * eig.eigenvectors[(j, e)];
            }
            flat[i * l + j] = acc;
        }
    }
}

/// E-step: fills `resp` (N×K, rows sum to 1) and returns the z-scored-space
/// log-likelihood together with each example's log-density.
fn e_step(p: &Params, y: &[f64], u: &[f64], resp: &mut [f64]) -> Result<(f64, Vec<f64>)> {
    let (k, d, l) = (p.k, p.d, p.l);
    let mut gamma_invs: Vec<(Vec<f64>, f64)> = Vec::with_capacity(k);
    for c in 0..k {
        gamma_invs.push(invert_spd(&p.gamma[c * l * l..(c + 1) * l * l], l)?);
    }
    let mut inv_sig = vec![0.0f64; k * d];
    let mut sig_logdet = vec![0.0f64; k];
    for c in 0..k {
        for dd in 0..d {
            let s = p.sig[c * d + dd];
            inv_sig[c * d + dd] = 1.0 / s;
            sig_logdet[c] += s.ln();
        }
    }
    let log_pi: Vec<f64> = p.weights.iter().map(|&w| w.max(1e-300).ln()).collect();
    let half_norm_y = 0.5 * d as f64 * ln_2pi();

    let lses: Vec<f64> = resp
        .par_chunks_mut(k)
        .enumerate()
        .map(|(i, row)| {
            let ui = &u[i * l..(i + 1) * l];
            let yi = &y[i * d..(i + 1) * d];
            for c in 0..k {
                let (ginv, glogdet) = &gamma_invs[c];
                let log_nu = log_gaussian_full(ui, &p.c[c * l..(c + 1) * l], ginv, *glogdet, l);
                let a = &p.a[c * d * l..(c + 1) * d * l];
                let b = &p.b[c * d..(c + 1) * d];
                let isig = &inv_sig[c * d..(c + 1) * d];
                let mut quad = 0.0;
                for dd in 0..d {
                    let arow = &a[dd * l..(dd + 1) * l];
                    let mut mu = b[dd];
                    for (j, &aj) in arow.iter().enumerate() {
                        mu += aj * ui[j];
                    }
                    let delta = yi[dd] - mu;
                    quad += delta * delta * isig[dd];
                }
                row[c] = log_pi[c] + log_nu - half_norm_y - 0.5 * (sig_logdet[c] + quad);
            }
            let lse = log_sum_exp(row);
            for v in row.iter_mut() {
                *v = (*v - lse).exp();
            }
            lse
        })
        .collect();
    let ll: f64 = lses.iter().sum();
    if !ll.is_finite() {
        return Err(Error::Training(
            "log-likelihood became non-finite during EM".into(),
        ));
    }
    Ok((ll, lses))
}

struct ComponentUpdate {
    weight: f64,
    c: Vec<f64>,
    gamma: Vec<f64>,
    a: Vec<f64>,
    b: Vec<f64>,
    sig: Vec<f64>,
    starved: bool,
}

fn m_step_component(
    comp: usize,
    resp: &[f64],
    y: &[f64],
    u: &[f64],
    n: usize,
    d: usize,
    l: usize,
    k: usize,
    covariance: CovarianceKind,
) -> Result<ComponentUpdate> {
    let mut r_total = 0.0;
    for i in 0..n {
        r_total += resp[i * k + comp];
    }
    if !(r_total > 1e-12) {
        // Nothing assigned here; caller reseeds.
        return Ok(ComponentUpdate {
            weight: 0.0,
            c: vec![0.0; l],
            gamma: identity_flat(l),
            a: vec![0.0; d * l],
            b: vec![0.0; d],
            sig: vec![1.0; d],
            starved: true,
        });
    }

    // Parameter mean.
    let mut cmean = vec![0.0f64; l];
    for i in 0..n {
        let w = resp[i * k + comp];
        if w < RESP_SKIP {
            continue;
        }
        for j in 0..l {
            cmean[j] += w * u[i * l + j];
        }
    }
    for v in &mut cmean {
        *v /= r_total;
    }

    // Parameter covariance and the affine-regression moments.
    let lx = l + 1; // design vector x = [u, 1]
    let mut gamma = vec![0.0f64; l * l];
    let mut s_xx = vec![0.0f64; lx * lx];
    let mut s_yx = vec![0.0f64; d * lx];
    for i in 0..n {
        let w = resp[i * k + comp];
        if w < RESP_SKIP {
            continue;
        }
        let ui = &u[i * l..(i + 1) * l];
        for a_i in 0..l {
            let da = w * (ui[a_i] - cmean[a_i]);
            for b_i in 0..l {
                gamma[a_i * l + b_i] += da * (ui[b_i] - cmean[b_i]);
            }
        }
        for a_i in 0..l {
            let wa = w * ui[a_i];
            for b_i in 0..l {
                s_xx[a_i * lx + b_i] += wa * ui[b_i];
            }
            s_xx[a_i * lx + l] += wa;
            s_xx[l * lx + a_i] += wa;
        }
        s_xx[l * lx + l] += w;
        let yi = &y[i * d..(i + 1) * d];
        for dd in 0..d {
            let wy = w * yi[dd];
            let row = &mut s_yx[dd * lx..(dd + 1) * lx];
            for j in 0..l {
                row[j] += wy * ui[j];
            }
            row[l] += wy;
        }
    }
    for v in &mut gamma {
        *v /= r_total;
    }
    floor_eigenvalues(&mut gamma, l, EIG_FLOOR);

    // Weighted least-squares solve for [A | b].
    let (s_xx_inv, _) = invert_spd(&s_xx, lx)?;
    let mut a = vec![0.0f64; d * l];
    let mut b = vec![0.0f64; d];
    for dd in 0..d {
        let row = &s_yx[dd * lx..(dd + 1) * lx];
        for i in 0..lx {
            let mut acc = 0.0;
            for j in 0..lx {
                acc += s_xx_inv[i * lx + j] * row[j];
            }
            if i < l {
                a[dd * l + i] = acc;
            } else {
                b[dd] = acc;
            }
        }
    }

    // Residual noise variances.
    let mut sig = vec![0.0f64; d];
    for i in 0..n {
        let w = resp[i * k + comp];
        if w < RESP_SKIP {
            continue;
        }
        let ui = &u[i * l..(i + 1) * l];
        let yi = &y[i * d..(i + 1) * d];
        for dd in 0..d {
            let arow = &a[dd * l..(dd + 1) * l];
            let mut mu = b[dd];
            for (j, &aj) in arow.iter().enumerate() {
                mu += aj * ui[j];
            }
            let e = yi[dd] - mu;
            sig[dd] += w * e * e;
        }
    }
    for v in &mut sig {
        *v = (*v / r_total).max(EIG_FLOOR);
    }
    if covariance == CovarianceKind::Isotropic {
        let shared = sig.iter().sum::<f64>() / d as f64;
        sig.fill(shared);
    }

    Ok(ComponentUpdate {
        weight: r_total / n as f64,
        c: cmean,
        gamma,
        a,
        b,
        sig,
        starved: false,
    })
}

fn identity_flat(l: usize) -> Vec<f64> {
    let mut m = vec![0.0f64; l * l];
    for i in 0..l {
        m[i * l + i] = 1.0;
    }
    m
}

/// Reseeds one mixture component on the given example: unit covariances
/// centered there, zero slope. Used when a component starves.
fn reseed_component(p: &mut Params, comp: usize, y: &[f64], u: &[f64], example: usize, n: usize) {
    let (d, l) = (p.d, p.l);
    p.weights[comp] = 1.0 / n as f64;
    p.c[comp * l..(comp + 1) * l].copy_from_slice(&u[example * l..(example + 1) * l]);
    p.gamma[comp * l * l..(comp + 1) * l * l].copy_from_slice(&identity_flat(l));
    p.a[comp * d * l..(comp + 1) * d * l].fill(0.0);
    p.b[comp * d..(comp + 1) * d].copy_from_slice(&y[example * d..(example + 1) * d]);
    p.sig[comp * d..(comp + 1) * d].fill(1.0);
    let total: f64 = p.weights.iter().sum();
    for w in &mut p.weights {
        *w /= total;
    }
}

/// Fits a GLLiM model to paired (features, parameters) data with EM.
///
/// Returns the fitted model and a report carrying the per-iteration
/// data-unit log-likelihood trace. The fit is deterministic in `seed`.
pub fn fit(
    data: &TrainingSet,
    k: usize,
    config: &EmConfig,
    seed: u64,
) -> Result<(GllimModel, FitReport)> {
    let (n, d, l) = (data.n, data.d, data.l);
    if k == 0 {
        return Err(Error::InvalidConfig("need at least one component".into()));
    }
    if config.max_iter == 0 {
        return Err(Error::InvalidConfig("max_iter must be at least 1".into()));
    }
    if !(config.tol >= 0.0) {
        return Err(Error::InvalidConfig("tol must be non-negative".into()));
    }
    let min_n = k * (l + 1);
    if n < min_n {
        return Err(Error::Training(format!(
            "{n} examples cannot support {k} components over {l} parameters (need at least {min_n})"
        )));
    }
    if data.y.iter().any(|v| !v.is_finite()) || data.u.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("training data".into()));
    }

    let (y_mean, y_std) = column_standardization(&data.y, n, d);
    let (u_mean, u_std) = column_standardization(&data.u, n, l);
    let y = standardize(&data.y, n, d, &y_mean, &y_std);
    let u = standardize(&data.u, n, l, &u_mean, &u_std);
    // Converts z-scored-space log-density totals into data units.
    let jac_total = n as f64
        * (y_std.iter().map(|v| v.ln()).sum::<f64>() + u_std.iter().map(|v| v.ln()).sum::<f64>());

    // Hard initial responsibilities from seeded clustering.
    let labels = init::initial_labels(&u, &y, n, l, d, k, seed);
    let mut resp = vec![0.0f64; n * k];
    for (i, &lab) in labels.iter().enumerate() {
        resp[i * k + lab] = 1.0;
    }

    let mut params = Params {
        k,
        d,
        l,
        weights: vec![1.0 / k as f64; k],
        c: vec![0.0; k * l],
        gamma: vec![0.0; k * l * l],
        a: vec![0.0; k * d * l],
        b: vec![0.0; k * d],
        sig: vec![1.0; k * d],
    };

    let weight_floor = 1.0 / (10.0 * n as f64);
    let mut report = FitReport {
        log_likelihood_trace: Vec::new(),
        n_iterations: 0,
        converged: false,
        reinitialized: Vec::new(),
    };

    let run_m_step = |params: &mut Params,
                      resp: &[f64],
                      lses: Option<&[f64]>,
                      iter: usize,
                      report: &mut FitReport|
     -> Result<()> {
        let updates: Vec<ComponentUpdate> = (0..k)
            .into_par_iter()
            .map(|c| m_step_component(c, resp, &y, &u, n, d, l, k, config.covariance))
            .collect::<Result<Vec<_>>>()?;
        let mut needy: Vec<usize> = Vec::new();
        for (c, upd) in updates.into_iter().enumerate() {
            params.weights[c] = upd.weight;
            params.c[c * l..(c + 1) * l].copy_from_slice(&upd.c);
            params.gamma[c * l * l..(c + 1) * l * l].copy_from_slice(&upd.gamma);
            params.a[c * d * l..(c + 1) * d * l].copy_from_slice(&upd.a);
            params.b[c * d..(c + 1) * d].copy_from_slice(&upd.b);
            params.sig[c * d..(c + 1) * d].copy_from_slice(&upd.sig);
            if upd.starved || upd.weight < weight_floor {
                needy.push(c);
            }
        }
        if !needy.is_empty() {
            // Reseed each starved component on a distinct worst-fit example
            // (lowest per-example log-density; example order breaks ties).
            let mut order: Vec<usize> = (0..n).collect();
            if let Some(lses) = lses {
                order.sort_by(|&a, &b| {
                    lses[a]
                        .partial_cmp(&lses[b])
                        .unwrap_or(std::cmp::Ordering::Equal)
                        .then(a.cmp(&b))
                });
            }
            for (slot, &comp) in needy.iter().enumerate() {
                let example = order[slot.min(n - 1)];
                warn!(
                    "mixture component {comp} starved (weight below {weight_floor:.3e}); reseeding on example {example}"
                );
                reseed_component(params, comp, &y, &u, example, n);
                report.reinitialized.push((iter, comp));
            }
        }
        Ok(())
    };

    run_m_step(&mut params, &resp, None, 0, &mut report)?;

    let mut prev_ll = f64::NEG_INFINITY;
    for iter in 0..config.max_iter {
        let (ll_std, lses) = e_step(&params, &y, &u, &mut resp)?;
        let ll = ll_std - jac_total;
        report.log_likelihood_trace.push(ll);
        report.n_iterations = iter + 1;
        if iter > 0 {
            let denom = prev_ll.abs().max(1e-12);
            if (ll - prev_ll).abs() <= config.tol * denom {
                report.converged = true;
                break;
            }
        }
        prev_ll = ll;
        run_m_step(&mut params, &resp, Some(&lses), iter + 1, &mut report)?;
    }

    let model = GllimModel {
        n_components: k,
        feature_dim: d,
        param_dim: l,
        covariance: config.covariance,
        weights: params.weights,
        param_means: params.c,
        param_covs: params.gamma,
        maps: params.a,
        offsets: params.b,
        noise_vars: params.sig,
        feature_mean: y_mean,
        feature_std: y_std,
        param_mean: u_mean,
        param_std: u_std,
        param_names: data.param_names.clone(),
    };
    Ok((model, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    /// Three affine experts over a scalar parameter, features in R^3.
    fn three_expert_fixture(seed: u64) -> (TrainingSet, [[f64; 3]; 3], [[f64; 3]; 3], [f64; 3]) {
        let centers = [-4.0, 0.0, 4.0];
        let slopes = [[1.0, -0.5, 2.0], [-2.0, 1.5, 0.5], [0.5, 3.0, -1.0]];
        let offsets = [[0.0, 1.0, -1.0], [5.0, -2.0, 2.0], [-5.0, 0.0, 3.0]];
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let n = 600;
        let mut y = Vec::with_capacity(n * 3);
        let mut u = Vec::with_capacity(n);
        for i in 0..n {
            let c = i % 3;
            let ui = centers[c] + 0.5 * crate::math::standard_normal(&mut rng);
            u.push(ui);
            for dd in 0..3 {
                let noise = 0.01 * crate::math::standard_normal(&mut rng);
                y.push(slopes[c][dd] * ui + offsets[c][dd] + noise);
            }
        }
        (
            TrainingSet::new(y, u, n, 3, 1).unwrap(),
            slopes,
            offsets,
            centers,
        )
    }

    #[test]
    fn log_likelihood_never_decreases() {
        let (set, _, _, _) = three_expert_fixture(11);
        let (_, report) = fit(&set, 3, &EmConfig::default(), 1).unwrap();
        let trace = &report.log_likelihood_trace;
        assert!(trace.len() >= 2, "fit should take more than one iteration");
        for w in trace.windows(2) {
            assert!(
                w[1] >= w[0] - 1e-8 * w[0].abs(),
                "log-likelihood dropped: {} -> {}",
                w[0],
                w[1]
            );
        }
        assert!(report.converged, "fixture fit should converge");
        assert!(report.reinitialized.is_empty());
    }

    #[test]
    fn final_trace_entry_matches_model_log_likelihood() {
        let (set, _, _, _) = three_expert_fixture(12);
        let (model, report) = fit(&set, 3, &EmConfig::default(), 2).unwrap();
        let ll = model.log_likelihood(&set).unwrap();
        let last = *report.log_likelihood_trace.last().unwrap();
        assert!(
            (ll - last).abs() <= 1e-6 * last.abs(),
            "recomputed {ll} vs trace {last}"
        );
    }

    #[test]
    fn recovers_a_single_noiseless_affine_map() {
        // y = A u + b exactly; a one-component fit must recover A and b to
        // high precision and invert exactly.
        let a_true = [[1.0, 0.5], [-0.3, 2.0], [0.8, -1.0], [2.0, 0.1]];
        let b_true = [0.5, -1.0, 2.0, 0.0];
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let n = 200;
        let mut y = Vec::with_capacity(n * 4);
        let mut u = Vec::with_capacity(n * 2);
        for _ in 0..n {
            let ui = [
                rng.random::<f64>() * 4.0 - 2.0,
                rng.random::<f64>() * 4.0 - 2.0,
            ];
            u.extend_from_slice(&ui);
            for dd in 0..4 {
                y.push(a_true[dd][0] * ui[0] + a_true[dd][1] * ui[1] + b_true[dd]);
            }
        }
        let set = TrainingSet::new(y, u.clone(), n, 4, 2).unwrap();
        let (model, _) = fit(&set, 1, &EmConfig::default(), 9).unwrap();

        let comp = model.component_in_data_units(0);
        for dd in 0..4 {
            for j in 0..2 {
                let got = comp.map[dd * 2 + j];
                let want = a_true[dd][j];
                assert!(
                    (got - want).abs() <= 1e-6 * want.abs().max(1.0),
                    "A[{dd}][{j}]: {got} vs {want}"
                );
            }
            assert!(
                (comp.offset[dd] - b_true[dd]).abs() <= 1e-6,
                "b[{dd}]: {} vs {}",
                comp.offset[dd],
                b_true[dd]
            );
        }
        // Inverting a clean feature vector recovers the parameters.
        for i in (0..n).step_by(17) {
            let yi = &set.y[i * 4..(i + 1) * 4];
            let (u_hat, _) = model.inverse_predict(yi).unwrap();
            for j in 0..2 {
                assert!(
                    (u_hat[j] - u[i * 2 + j]).abs() < 1e-5,
                    "example {i} slot {j}: {} vs {}",
                    u_hat[j],
                    u[i * 2 + j]
                );
            }
        }
    }

    #[test]
    fn recovers_three_well_separated_experts() {
        let (set, slopes, offsets, centers) = three_expert_fixture(21);
        let (model, _) = fit(&set, 3, &EmConfig::default(), 4).unwrap();

        // Match fitted components to ground truth by parameter mean.
        let mut used = [false; 3];
        for c in 0..3 {
            let comp = model.component_in_data_units(c);
            let mut best = 0usize;
            let mut bd = f64::INFINITY;
            for (t, &ct) in centers.iter().enumerate() {
                let dist = (comp.mean[0] - ct).abs();
                if dist < bd {
                    bd = dist;
                    best = t;
                }
            }
            assert!(!used[best], "two components matched the same expert");
            used[best] = true;
            assert!(
                bd < 0.2,
                "component {c} mean {} is far from {}",
                comp.mean[0],
                centers[best]
            );
            for dd in 0..3 {
                let slope = comp.map[dd];
                let want_slope = slopes[best][dd];
                assert!(
                    (slope - want_slope).abs() <= 0.05 * want_slope.abs().max(0.2),
                    "slope[{dd}] of expert {best}: {slope} vs {want_slope}"
                );
                // Judge the intercept through the prediction at the expert's
                // center: the raw intercept sits at u = 0, far outside this
                // expert's data, where slope error is amplified by the lever
                // arm. At the center the error is set by observation noise.
                let off = comp.offset[dd];
                let want_off = offsets[best][dd];
                let got_at_center = slope * centers[best] + off;
                let want_at_center = want_slope * centers[best] + want_off;
                assert!(
                    (got_at_center - want_at_center).abs() <= 0.02,
                    "expert {best} feature {dd} at center: {got_at_center} vs {want_at_center}"
                );
                assert!(
                    (off - want_off).abs() <= 0.05 * want_off.abs().max(1.0),
                    "offset[{dd}] of expert {best}: {off} vs {want_off}"
                );
            }
        }

        // Held-out inversion: fresh draws from the same generator.
        let (held, _, _, _) = three_expert_fixture(77);
        let mut abs_err = 0.0;
        for i in 0..held.n {
            let (u_hat, w) = model.inverse_predict(&held.y[i * 3..(i + 1) * 3]).unwrap();
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            abs_err += (u_hat[0] - held.u[i]).abs();
        }
        abs_err /= held.n as f64;
        assert!(
            abs_err < 0.05,
            "held-out mean absolute inversion error too large: {abs_err}"
        );
    }

    #[test]
    fn fit_is_deterministic_in_the_seed() {
        let (set, _, _, _) = three_expert_fixture(5);
        let cfg = EmConfig {
            max_iter: 40,
            ..EmConfig::default()
        };
        let (m1, r1) = fit(&set, 3, &cfg, 123).unwrap();
        let (m2, r2) = fit(&set, 3, &cfg, 123).unwrap();
        assert_eq!(m1, m2, "same seed must give a bitwise-identical model");
        assert_eq!(r1.log_likelihood_trace, r2.log_likelihood_trace);
    }

    #[test]
    fn isotropic_constraint_ties_noise_variances() {
        let (set, _, _, _) = three_expert_fixture(8);
        let cfg = EmConfig {
            covariance: CovarianceKind::Isotropic,
            max_iter: 30,
            ..EmConfig::default()
        };
        let (model, _) = fit(&set, 3, &cfg, 6).unwrap();
        for c in 0..3 {
            let sig = &model.noise_vars[c * 3..(c + 1) * 3];
            assert!((sig[0] - sig[1]).abs() < 1e-15 && (sig[1] - sig[2]).abs() < 1e-15);
        }
        // The diagonal fit on the same data is free to differ per dimension.
        let (diag_model, _) = fit(
            &set,
            3,
            &EmConfig {
                max_iter: 30,
                ..EmConfig::default()
            },
            6,
        )
        .unwrap();
        let any_untied = (0..3).any(|c| {
            let sig = &diag_model.noise_vars[c * 3..(c + 1) * 3];
            (sig[0] - sig[1]).abs() > 1e-12 || (sig[1] - sig[2]).abs() > 1e-12
        });
        assert!(
            any_untied,
            "diagonal noise collapsed to isotropic unexpectedly"
        );
    }

    #[test]
    fn supports_two_three_and_four_parameter_slots() {
        let mut rng = ChaCha12Rng::seed_from_u64(40);
        for l in [2usize, 3, 4] {
            let n = 150;
            let d = 6;
            let mut u = Vec::with_capacity(n * l);
            let mut y = Vec::with_capacity(n * d);
            for _ in 0..n {
                let ui: Vec<f64> = (0..l).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
                for dd in 0..d {
                    let mut v = 0.1 * dd as f64;
                    for (j, &uj) in ui.iter().enumerate() {
                        v += ((dd + j) as f64).sin() * uj;
                    }
                    y.push(v + 0.05 * crate::math::standard_normal(&mut rng));
                }
                u.extend_from_slice(&ui);
            }
            let set = TrainingSet::new(y, u, n, d, l).unwrap();
            let (model, report) = fit(
                &set,
                2,
                &EmConfig {
                    max_iter: 60,
                    ..EmConfig::default()
                },
                7,
            )
            .unwrap();
            assert_eq!(model.param_dim, l);
            assert_eq!(model.feature_dim, d);
            let (u_hat, w) = model.inverse_predict(&set.y[0..d]).unwrap();
            assert_eq!(u_hat.len(), l);
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(u_hat.iter().all(|v| v.is_finite()));
            assert!(report.log_likelihood_trace.iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn rejects_undersized_or_bad_training_data() {
        let set = TrainingSet::new(vec![0.0; 20], vec![0.0; 10], 10, 2, 1).unwrap();
        // 10 < 6·(1+1): too few examples for six components.
        match fit(&set, 6, &EmConfig::default(), 1) {
            Err(Error::Training(_)) => {}
            other => panic!("expected a training error, got {other:?}"),
        }
        let mut bad = set.clone();
        bad.y[3] = f64::NAN;
        match fit(&bad, 2, &EmConfig::default(), 1) {
            Err(Error::NonFinite(_)) => {}
            other => panic!("expected a non-finite error, got {other:?}"),
        }
        assert!(fit(&set, 0, &EmConfig::default(), 1).is_err());
        assert!(fit(
            &set,
            2,
            &EmConfig {
                max_iter: 0,
                ..EmConfig::default()
            },
            1
        )
        .is_err());
    }

    #[test]
    fn reseeding_resets_a_component_cleanly() {
        let mut p = Params {
            k: 2,
            d: 2,
            l: 1,
            weights: vec![0.999, 0.001],
            c: vec![5.0, 9.0],
            gamma: vec![3.0, 3.0],
            a: vec![1.0, 2.0, 3.0, 4.0],
            b: vec![1.0, 1.0, 1.0, 1.0],
            sig: vec![0.5, 0.5, 0.5, 0.5],
        };
        let y = vec![10.0, 20.0, 30.0, 40.0, 50.0, 60.0]; // 3 examples, D=2
        let u = vec![-1.0, 0.0, 1.0];
        reseed_component(&mut p, 1, &y, &u, 2, 3);
        assert!((p.c[1] - 1.0).abs() < 1e-15, "mean moves to the example");
        assert_eq!(&p.b[2..4], &[50.0, 60.0]);
        assert_eq!(&p.a[2..4], &[0.0, 0.0]);
        assert_eq!(&p.gamma[1..2], &[1.0]);
        assert!((p.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p.weights[1] > 0.0);
    }

    #[test]
    fn weights_stay_at_or_above_the_floor_or_get_reseeded() {
        let (set, _, _, _) = three_expert_fixture(33);
        let (model, report) = fit(
            &set,
            4,
            &EmConfig {
                max_iter: 60,
                ..EmConfig::default()
            },
            15,
        )
        .unwrap();
        let floor = 1.0 / (10.0 * set.n as f64);
        for (c, &w) in model.weights.iter().enumerate() {
            assert!(
                w >= floor - 1e-12 || report.reinitialized.iter().any(|&(_, rc)| rc == c),
                "component {c} ended below the floor without a recorded reseed"
            );
        }
        assert!((model.weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}
