//! Gaussian locally-linear mapping (GLLiM): a mixture of affine experts
//! that is fitted jointly over (parameters, features) and then inverted in
//! closed form, so a high-dimensional feature vector can be mapped back to
//! the low-dimensional parameters that produced it.
//!
//! The joint density is
//!
//! ```text
//! p(u, y) = Σ_k  π_k · N(u; c_k, Γ_k) · N(y; A_k u + b_k, Σ_k)
//! ```
//!
//! with `u ∈ R^L` the parameter vector, `y ∈ R^D` the feature vector, and
//! `Σ_k` constrained to be diagonal (optionally isotropic). Inversion uses
//! exact Gaussian conditioning per component and blends the component
//! posteriors with their responsibilities.
//!
//! Internally everything is fitted and stored in a z-scored coordinate
//! system; the standardization vectors live in the model and every public
//! method speaks original data units (densities include the Jacobian of
//! the standardization).

mod em;
mod init;

pub use em::{fit, EmConfig, FitReport};

use crate::error::{Error, Result};
use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use nalgebra::{Cholesky, DMatrix};
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

/// Constraint on the per-component feature noise covariance Σ_k.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovarianceKind {
    /// Independent variance per feature dimension.
    Diagonal,
    /// A single shared variance across feature dimensions.
    Isotropic,
}

/// Paired (features, parameters) training data, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    /// Number of examples.
    pub n: usize,
    /// Feature dimension D.
    pub d: usize,
    /// Parameter dimension L.
    pub l: usize,
    /// Features, N×D row-major.
    pub y: Vec<f64>,
    /// Parameters, N×L row-major.
    pub u: Vec<f64>,
    /// Names of the L parameter slots (annotation mask record).
    pub param_names: Vec<String>,
}

impl TrainingSet {
    /// Builds a training set, validating the array shapes.
    pub fn new(y: Vec<f64>, u: Vec<f64>, n: usize, d: usize, l: usize) -> Result<Self> {
        if y.len() != n * d {
            return Err(Error::ShapeMismatch(format!(
                "feature array has {} values, expected {}×{}",
                y.len(),
                n,
                d
            )));
        }
        if u.len() != n * l {
            return Err(Error::ShapeMismatch(format!(
                "parameter array has {} values, expected {}×{}",
                u.len(),
                n,
                l
            )));
        }
        if n == 0 || d == 0 || l == 0 {
            return Err(Error::ShapeMismatch(
                "training set dimensions must all be nonzero".into(),
            ));
        }
        Ok(Self {
            n,
            d,
            l,
            y,
            u,
            param_names: (0..l).map(|i| format!("param{i}")).collect(),
        })
    }

    /// Sets the parameter slot names (must match L).
    pub fn with_names(mut self, names: &[&str]) -> Result<Self> {
        if names.len() != self.l {
            return Err(Error::ShapeMismatch(format!(
                "{} names for {} parameter slots",
                names.len(),
                self.l
            )));
        }
        self.param_names = names.iter().map(|s| s.to_string()).collect();
        Ok(self)
    }

    /// Keeps only the given parameter columns, in the given order —
    /// used to train on a subset of the annotated parameters.
    pub fn select_params(&self, cols: &[usize]) -> Result<TrainingSet> {
        if cols.is_empty() {
            return Err(Error::InvalidConfig(
                "parameter selection must keep at least one column".into(),
            ));
        }
        for &c in cols {
            if c >= self.l {
                return Err(Error::InvalidConfig(format!(
                    "parameter column {c} out of range (L = {})",
                    self.l
                )));
            }
        }
        let l2 = cols.len();
        let mut u = vec![0.0f64; self.n * l2];
        for i in 0..self.n {
            for (j, &c) in cols.iter().enumerate() {
                u[i * l2 + j] = self.u[i * self.l + c];
            }
        }
        Ok(TrainingSet {
            n: self.n,
            d: self.d,
            l: l2,
            y: self.y.clone(),
            u,
            param_names: cols.iter().map(|&c| self.param_names[c].clone()).collect(),
        })
    }
}

/// A fitted GLLiM model. All parameter arrays are stored flat, row-major,
/// in the internal z-scored coordinate system; `feature_mean/std` and
/// `param_mean/std` map between data units and that system.
#[derive(Debug, Clone, PartialEq)]
pub struct GllimModel {
    /// Number of mixture components K.
    pub n_components: usize,
    /// Feature dimension D.
    pub feature_dim: usize,
    /// Parameter dimension L.
    pub param_dim: usize,
    /// Noise covariance constraint used at fit time.
    pub covariance: CovarianceKind,
    /// Mixture weights π, length K.
    pub weights: Vec<f64>,
    /// Component parameter means c_k, K×L.
    pub param_means: Vec<f64>,
    /// Component parameter covariances Γ_k, K×L×L.
    pub param_covs: Vec<f64>,
    /// Affine map matrices A_k, K×D×L.
    pub maps: Vec<f64>,
    /// Affine offsets b_k, K×D.
    pub offsets: Vec<f64>,
    /// Diagonal feature noise variances Σ_k, K×D (isotropic models store
    /// the shared value repeated).
    pub noise_vars: Vec<f64>,
    /// Feature standardization (mean, std), each length D.
    pub feature_mean: Vec<f64>,
    /// Feature standardization scale, length D.
    pub feature_std: Vec<f64>,
    /// Parameter standardization (mean, std), each length L.
    pub param_mean: Vec<f64>,
    /// Parameter standardization scale, length L.
    pub param_std: Vec<f64>,
    /// Names of the L parameter slots.
    pub param_names: Vec<String>,
}

/// One component's parameters expressed in original data units.
#[derive(Debug, Clone)]
pub struct ComponentParams {
    /// Mixture weight π_k.
    pub weight: f64,
    /// Parameter mean c_k, length L.
    pub mean: Vec<f64>,
    /// Parameter covariance Γ_k, L×L row-major.
    pub cov: Vec<f64>,
    /// Affine map A_k, D×L row-major.
    pub map: Vec<f64>,
    /// Affine offset b_k, length D.
    pub offset: Vec<f64>,
    /// Diagonal feature noise variances, length D.
    pub noise: Vec<f64>,
}

const MODEL_MAGIC: &[u8; 4] = b"ERGL";
const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelHeader {
    n_components: usize,
    feature_dim: usize,
    param_dim: usize,
    covariance: CovarianceKind,
    param_names: Vec<String>,
    feature_mean: Vec<f64>,
    feature_std: Vec<f64>,
    param_mean: Vec<f64>,
    param_std: Vec<f64>,
}

pub(crate) fn ln_2pi() -> f64 {
    (2.0 * std::f64::consts::PI).ln()
}

/// Inverts a symmetric positive-definite matrix given as a flat row-major
/// slice, returning (inverse, log-determinant). A tiny diagonal jitter is
/// escalated if the Cholesky factorization fails outright.
pub(crate) fn invert_spd(flat: &[f64], n: usize) -> Result<(Vec<f64>, f64)> {
    let m = DMatrix::from_row_slice(n, n, flat);
    let scale = flat
        .iter()
        .step_by(n + 1)
        .fold(0.0f64, |a, &v| a.max(v.abs()))
        .max(1e-300);
    for &jitter in &[0.0, 1e-12, 1e-10, 1e-8, 1e-6] {
        let mut attempt = m.clone();
        for i in 0..n {
            attempt[(i, i)] += jitter * scale;
        }
        if let Some(chol) = Cholesky::new(attempt) {
            let logdet: f64 = chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>() * 2.0;
            let inv = chol.inverse();
            let mut flat_inv = vec![0.0f64; n * n];
            for i in 0..n {
                for j in 0..n {
                    flat_inv[i * n + j] = inv[(i, j)];
                }
            }
            return Ok((flat_inv, logdet));
        }
    }
    Err(Error::Training(
        "covariance matrix is not positive definite".into(),
    ))
}

/// Log-density of a full-covariance Gaussian given the precomputed
/// inverse covariance and log-determinant.
pub(crate) fn log_gaussian_full(
    x: &[f64],
    mean: &[f64],
    cov_inv: &[f64],
    logdet: f64,
    l: usize,
) -> f64 {
    let mut quad = 0.0;
    for i in 0..l {
        let di = x[i] - mean[i];
        for j in 0..l {
            quad += di * cov_inv[i * l + j] * (x[j] - mean[j]);
        }
    }
    -0.5 * (l as f64 * ln_2pi() + logdet + quad)
}

/// Numerically stable log(Σ exp(v_i)).
pub(crate) fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + v.iter().map(|&x| (x - m).exp()).sum::<f64>().ln()
}

impl GllimModel {
    /// Builds a model directly from component parameters expressed in data
    /// units (identity standardization). Intended for analytical setups.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        weights: Vec<f64>,
        param_means: Vec<f64>,
        param_covs: Vec<f64>,
        maps: Vec<f64>,
        offsets: Vec<f64>,
        noise_vars: Vec<f64>,
        feature_dim: usize,
        param_dim: usize,
        covariance: CovarianceKind,
    ) -> Result<Self> {
        let k = weights.len();
        let (d, l) = (feature_dim, param_dim);
        let checks = [
            (param_means.len(), k * l, "component means"),
            (param_covs.len(), k * l * l, "component covariances"),
            (maps.len(), k * d * l, "affine maps"),
            (offsets.len(), k * d, "affine offsets"),
            (noise_vars.len(), k * d, "noise variances"),
        ];
        for (got, want, what) in checks {
            if got != want {
                return Err(Error::ShapeMismatch(format!(
                    "{what}: {got} values, expected {want}"
                )));
            }
        }
        Ok(Self {
            n_components: k,
            feature_dim: d,
            param_dim: l,
            covariance,
            weights,
            param_means,
            param_covs,
            maps,
            offsets,
            noise_vars,
            feature_mean: vec![0.0; d],
            feature_std: vec![1.0; d],
            param_mean: vec![0.0; l],
            param_std: vec![1.0; l],
            param_names: (0..l).map(|i| format!("param{i}")).collect(),
        })
    }

    fn param_mean_of(&self, k: usize) -> &[f64] {
        &self.param_means[k * self.param_dim..(k + 1) * self.param_dim]
    }

    fn param_cov_of(&self, k: usize) -> &[f64] {
        let sz = self.param_dim * self.param_dim;
        &self.param_covs[k * sz..(k + 1) * sz]
    }

    fn map_of(&self, k: usize) -> &[f64] {
        let sz = self.feature_dim * self.param_dim;
        &self.maps[k * sz..(k + 1) * sz]
    }

    fn offset_of(&self, k: usize) -> &[f64] {
        &self.offsets[k * self.feature_dim..(k + 1) * self.feature_dim]
    }

    fn noise_of(&self, k: usize) -> &[f64] {
        &self.noise_vars[k * self.feature_dim..(k + 1) * self.feature_dim]
    }

    fn standardize_feature(&self, y: &[f64]) -> Vec<f64> {
        (0..self.feature_dim)
            .map(|i| (y[i] - self.feature_mean[i]) / self.feature_std[i])
            .collect()
    }

    fn standardize_param(&self, u: &[f64]) -> Vec<f64> {
        (0..self.param_dim)
            .map(|i| (u[i] - self.param_mean[i]) / self.param_std[i])
            .collect()
    }

    /// One component's parameters converted to original data units.
    pub fn component_in_data_units(&self, k: usize) -> ComponentParams {
        let (d, l) = (self.feature_dim, self.param_dim);
        let c = self.param_mean_of(k);
        let gamma = self.param_cov_of(k);
        let a = self.map_of(k);
        let b = self.offset_of(k);
        let sig = self.noise_of(k);
        let mean: Vec<f64> = (0..l)
            .map(|i| self.param_mean[i] + self.param_std[i] * c[i])
            .collect();
        let mut cov = vec![0.0f64; l * l];
        for i in 0..l {
            for j in 0..l {
                cov[i * l + j] = self.param_std[i] * self.param_std[j] * gamma[i * l + j];
            }
        }
        let mut map = vec![0.0f64; d * l];
        for dd in 0..d {
            for j in 0..l {
                map[dd * l + j] = self.feature_std[dd] * a[dd * l + j] / self.param_std[j];
            }
        }
        let mut offset = vec![0.0f64; d];
        for dd in 0..d {
            let mut v = self.feature_mean[dd] + self.feature_std[dd] * b[dd];
            for j in 0..l {
                v -= map[dd * l + j] * self.param_mean[j];
            }
            offset[dd] = v;
        }
        let noise: Vec<f64> = (0..d)
            .map(|dd| self.feature_std[dd] * self.feature_std[dd] * sig[dd])
            .collect();
        ComponentParams {
            weight: self.weights[k],
            mean,
            cov,
            map,
            offset,
            noise,
        }
    }

    /// Maps a feature vector back to an estimate of the parameters that
    /// produced it. Returns the blended posterior mean and the posterior
    /// component responsibilities (length K, summing to 1).
    pub fn inverse_predict(&self, y: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let (d, l, k) = (self.feature_dim, self.param_dim, self.n_components);
        if y.len() != d {
            return Err(Error::ShapeMismatch(format!(
                "feature vector has {} values, model expects {}",
                y.len(),
                d
            )));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature vector".into()));
        }
        let y_std = self.standardize_feature(y);
        let mut log_w = vec![0.0f64; k];
        let mut post_means = vec![0.0f64; k * l];
        for c in 0..k {
            let a = self.map_of(c);
            let b = self.offset_of(c);
            let sig = self.noise_of(c);
            let cmean = self.param_mean_of(c);
            let (gamma_inv, logdet_gamma) = invert_spd(self.param_cov_of(c), l)?;
            // Posterior precision M = Γ⁻¹ + AᵀΣ⁻¹A.
            let mut m = gamma_inv.clone();
            for dd in 0..d {
                let arow = &a[dd * l..(dd + 1) * l];
                let w = 1.0 / sig[dd];
                for i in 0..l {
                    let aiw = arow[i] * w;
                    for j in 0..l {
                        m[i * l + j] += aiw * arow[j];
                    }
                }
            }
            let (m_inv, logdet_m) = invert_spd(&m, l)?;
            // rhs = Γ⁻¹c + AᵀΣ⁻¹(y − b); s = AᵀΣ⁻¹(y − Ac − b).
            let mut rhs = vec![0.0f64; l];
            for i in 0..l {
                for j in 0..l {
                    rhs[i] += gamma_inv[i * l + j] * cmean[j];
                }
            }
            let mut s = vec![0.0f64; l];
            let mut quad = 0.0;
            let mut sum_log_sig = 0.0;
            for dd in 0..d {
                let arow = &a[dd * l..(dd + 1) * l];
                let mut mu = b[dd];
                for j in 0..l {
                    mu += arow[j] * cmean[j];
                }
                let w = 1.0 / sig[dd];
                let delta = y_std[dd] - mu;
                quad += delta * delta * w;
                sum_log_sig += sig[dd].ln();
                let dw = delta * w;
                let yb = (y_std[dd] - b[dd]) * w;
                for j in 0..l {
                    s[j] += arow[j] * dw;
                    rhs[j] += arow[j] * yb;
                }
            }
            // Woodbury correction of the marginal quadratic form and the
            // matrix determinant lemma for log|Σ + AΓAᵀ|.
            let mut corr = 0.0;
            for i in 0..l {
                for j in 0..l {
                    corr += s[i] * m_inv[i * l + j] * s[j];
                }
            }
            let logdet_v = sum_log_sig + logdet_gamma + logdet_m;
            log_w[c] = self.weights[c].max(1e-300).ln()
                - 0.5 * (quad - corr + logdet_v + d as f64 * ln_2pi());
            for i in 0..l {
                let mut acc = 0.0;
                for j in 0..l {
                    acc += m_inv[i * l + j] * rhs[j];
                }
                post_means[c * l + i] = acc;
            }
        }
        let lse = log_sum_exp(&log_w);
        let weights_post: Vec<f64> = log_w.iter().map(|&v| (v - lse).exp()).collect();
        let mut u_std = vec![0.0f64; l];
        for c in 0..k {
            for i in 0..l {
                u_std[i] += weights_post[c] * post_means[c * l + i];
            }
        }
        let u = (0..l)
            .map(|i| self.param_mean[i] + self.param_std[i] * u_std[i])
            .collect();
        Ok((u, weights_post))
    }

    /// Maps a parameter vector to the expected feature vector.
    pub fn forward_predict(&self, u: &[f64]) -> Result<Vec<f64>> {
        let (d, l, k) = (self.feature_dim, self.param_dim, self.n_components);
        if u.len() != l {
            return Err(Error::ShapeMismatch(format!(
                "parameter vector has {} values, model expects {}",
                u.len(),
                l
            )));
        }
        if u.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("parameter vector".into()));
        }
        let u_std = self.standardize_param(u);
        let mut log_w = vec![0.0f64; k];
        for c in 0..k {
            let (gamma_inv, logdet) = invert_spd(self.param_cov_of(c), l)?;
            log_w[c] = self.weights[c].max(1e-300).ln()
                + log_gaussian_full(&u_std, self.param_mean_of(c), &gamma_inv, logdet, l);
        }
        let lse = log_sum_exp(&log_w);
        let mut y_std = vec![0.0f64; d];
        for c in 0..k {
            let w = (log_w[c] - lse).exp();
            if w == 0.0 {
                continue;
            }
            let a = self.map_of(c);
            let b = self.offset_of(c);
            for dd in 0..d {
                let arow = &a[dd * l..(dd + 1) * l];
                let mut v = b[dd];
                for j in 0..l {
                    v += arow[j] * u_std[j];
                }
                y_std[dd] += w * v;
            }
        }
        Ok((0..d)
            .map(|dd| self.feature_mean[dd] + self.feature_std[dd] * y_std[dd])
            .collect())
    }

    /// Total log-likelihood of a dataset under the model, in data units.
    pub fn log_likelihood(&self, set: &TrainingSet) -> Result<f64> {
        if set.d != self.feature_dim || set.l != self.param_dim {
            return Err(Error::ShapeMismatch(format!(
                "dataset is D={} L={}, model is D={} L={}",
                set.d, set.l, self.feature_dim, self.param_dim
            )));
        }
        let (d, l, k) = (self.feature_dim, self.param_dim, self.n_components);
        // Per-component precomputation in the standardized system.
        let mut gamma_invs = Vec::with_capacity(k);
        let mut noise_inv = vec![0.0f64; k * d];
        let mut noise_logdet = vec![0.0f64; k];
        for c in 0..k {
            gamma_invs.push(invert_spd(self.param_cov_of(c), l)?);
            let sig = self.noise_of(c);
            for dd in 0..d {
                noise_inv[c * d + dd] = 1.0 / sig[dd];
                noise_logdet[c] += sig[dd].ln();
            }
        }
        let mut total = 0.0;
        let mut log_terms = vec![0.0f64; k];
        for i in 0..set.n {
            let u_std = self.standardize_param(&set.u[i * l..(i + 1) * l]);
            let y_std = self.standardize_feature(&set.y[i * d..(i + 1) * d]);
            for c in 0..k {
                let (gamma_inv, logdet_gamma) = &gamma_invs[c];
                let a = self.map_of(c);
                let b = self.offset_of(c);
                let mut quad = 0.0;
                for dd in 0..d {
                    let arow = &a[dd * l..(dd + 1) * l];
                    let mut mu = b[dd];
                    for j in 0..l {
                        mu += arow[j] * u_std[j];
                    }
                    let delta = y_std[dd] - mu;
                    quad += delta * delta * noise_inv[c * d + dd];
                }
                let log_ny = -0.5 * (d as f64 * ln_2pi() + noise_logdet[c] + quad);
                log_terms[c] = self.weights[c].max(1e-300).ln()
                    + log_gaussian_full(&u_std, self.param_mean_of(c), gamma_inv, *logdet_gamma, l)
                    + log_ny;
            }
            total += log_sum_exp(&log_terms);
        }
        // Jacobian of the z-scoring, so the value is in data units.
        let jac: f64 = self.feature_std.iter().map(|v| v.ln()).sum::<f64>()
            + self.param_std.iter().map(|v| v.ln()).sum::<f64>();
        Ok(total - set.n as f64 * jac)
    }

    /// Serializes the model: a small binary envelope with a JSON header
    /// (shape, constraint, standardization) followed by all parameter
    /// arrays as little-endian 64-bit floats. Round-trips bit-exactly.
    pub fn save(&self, path: &Path) -> Result<()> {
        let header = ModelHeader {
            n_components: self.n_components,
            feature_dim: self.feature_dim,
            param_dim: self.param_dim,
            covariance: self.covariance,
            param_names: self.param_names.clone(),
            feature_mean: self.feature_mean.clone(),
            feature_std: self.feature_std.clone(),
            param_mean: self.param_mean.clone(),
            param_std: self.param_std.clone(),
        };
        let header_json = serde_json::to_vec(&header)?;
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(MODEL_MAGIC)?;
        w.write_u32::<LittleEndian>(MODEL_VERSION)?;
        w.write_u64::<LittleEndian>(header_json.len() as u64)?;
        w.write_all(&header_json)?;
        for arr in [
            &self.weights,
            &self.param_means,
            &self.param_covs,
            &self.maps,
            &self.offsets,
            &self.noise_vars,
        ] {
            for &v in arr.iter() {
                w.write_f64::<LittleEndian>(v)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Loads a model written by [`GllimModel::save`].
    pub fn load(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MODEL_MAGIC {
            return Err(Error::Format(format!(
                "{} is not a model file (bad magic)",
                path.display()
            )));
        }
        let version = r.read_u32::<LittleEndian>()?;
        if version != MODEL_VERSION {
            return Err(Error::Format(format!(
                "unsupported model version {version}"
            )));
        }
        let header_len = r.read_u64::<LittleEndian>()? as usize;
        if header_len > 64 * 1024 * 1024 {
            return Err(Error::Format("model header is implausibly large".into()));
        }
        let mut header_json = vec![0u8; header_len];
        r.read_exact(&mut header_json)?;
        let header: ModelHeader = serde_json::from_slice(&header_json)?;
        let (k, d, l) = (header.n_components, header.feature_dim, header.param_dim);
        if header.feature_mean.len() != d
            || header.feature_std.len() != d
            || header.param_mean.len() != l
            || header.param_std.len() != l
            || header.param_names.len() != l
        {
            return Err(Error::Format(
                "model header arrays disagree with declared dimensions".into(),
            ));
        }
        let mut read_block = |len: usize| -> Result<Vec<f64>> {
            let mut v = vec![0.0f64; len];
            r.read_f64_into::<LittleEndian>(&mut v)?;
            Ok(v)
        };
        let weights = read_block(k)?;
        let param_means = read_block(k * l)?;
        let param_covs = read_block(k * l * l)?;
        let maps = read_block(k * d * l)?;
        let offsets = read_block(k * d)?;
        let noise_vars = read_block(k * d)?;
        Ok(Self {
            n_components: k,
            feature_dim: d,
            param_dim: l,
            covariance: header.covariance,
            weights,
            param_means,
            param_covs,
            maps,
            offsets,
            noise_vars,
            feature_mean: header.feature_mean,
            feature_std: header.feature_std,
            param_mean: header.param_mean,
            param_std: header.param_std,
            param_names: header.param_names,
        })
    }
}
