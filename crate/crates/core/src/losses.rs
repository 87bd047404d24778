//! Clustering losses on latent codes and the combined training objective.
//!
//! Three clustering terms are provided, all averaged over the batch:
//!
//! * **CT** (centering): `Σ_k d_ik · w_ik` with inverse-power weights
//!   `w_ik ∝ d_ik^(−α)`, where `d_ik = max(‖z_i − r_k‖², ε)`.
//! * **DKM**: the same weighted sum with softmax weights `w_ik ∝ exp(−α·d_ik)`.
//! * **DCN**: `½‖z_i − r_{s_i}‖²` against the nearest (hard-assigned) center.
//!
//! Gradients flow through both the distance factor and the weights.

use ndarray::{Array2, ArrayView2, Axis, Zip};
use serde::{Deserialize, Serialize};

use crate::clustering::{assign, Assignment, Centroids};
use crate::error::{Error, Result};
use crate::nn::{Autoencoder, Gradients};

/// Distance floor applied before raising to `−α`.
pub const DEFAULT_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Ct,
    Dkm,
    Dcn,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub lambda: f64,
    pub alpha: f64,
    pub epsilon: f64,
    pub variant: Variant,
}

impl LossConfig {
    pub fn new(variant: Variant, lambda: f64, alpha: f64) -> Result<Self> {
        let config = Self {
            lambda,
            alpha,
            epsilon: DEFAULT_EPSILON,
            variant,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("lambda must be ≥ 0, got {}", self.lambda)));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!("alpha must be > 0, got {}", self.alpha)));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Config(format!("epsilon must be > 0, got {}", self.epsilon)));
        }
        Ok(())
    }
}

/// Row-stochastic `B × K` soft memberships.
#[derive(Debug, Clone, PartialEq)]
pub struct MembershipWeights(Array2<f64>);

impl MembershipWeights {
    pub fn as_array(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.0
    }

    /// Highest-weight cluster per row (lowest index on ties).
    pub fn argmax(&self) -> Vec<usize> {
        self.0
            .rows()
            .into_iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |best, (k, &w)| if w > best.1 { (k, w) } else { best })
                    .0
            })
            .collect()
    }

    /// Largest membership of each row.
    pub fn max_per_row(&self) -> Vec<f64> {
        self.0
            .rows()
            .into_iter()
            .map(|row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max))
            .collect()
    }
}

/// Value and gradients of a batch-averaged clustering term.
#[derive(Debug, Clone)]
pub struct ClusterLoss {
    pub value: f64,
    pub grad_latent: Array2<f64>,
    pub grad_centroids: Array2<f64>,
}

/// `B × K` squared distances between latent rows and centers.
pub fn squared_distances(latent: ArrayView2<'_, f64>, centroids: &Centroids) -> Result<Array2<f64>> {
    if latent.ncols() != centroids.dim() {
        return Err(Error::shape(
            "latent vs centroids",
            format!("{} columns", centroids.dim()),
            format!("{} columns", latent.ncols()),
        ));
    }
    let centers = centroids.as_array();
    let mut out = Array2::zeros((latent.nrows(), centers.nrows()));
    for (i, z) in latent.rows().into_iter().enumerate() {
        for (k, r) in centers.rows().into_iter().enumerate() {
            out[[i, k]] = z.iter().zip(r.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
        }
    }
    Ok(out)
}

/// Softmax of each row of `logits`, shifted by the row max.
fn row_softmax(mut logits: Array2<f64>) -> Array2<f64> {
    for mut row in logits.rows_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    logits
}

fn ct_weights_from(dists: &Array2<f64>, alpha: f64, epsilon: f64) -> Array2<f64> {
    // d^(−α) = exp(−α·ln d), normalized in log space
    row_softmax(dists.mapv(|d| -alpha * d.max(epsilon).ln()))
}

/// Inverse-power memberships `w_ik = d_ik^(−α) / Σ_k' d_ik'^(−α)`.
pub fn ct_weights(
    latent: ArrayView2<'_, f64>,
    centroids: &Centroids,
    alpha: f64,
    epsilon: f64,
) -> Result<MembershipWeights> {
    let dists = squared_distances(latent, centroids)?;
    Ok(MembershipWeights(ct_weights_from(&dists, alpha, epsilon)))
}

/// Softmax memberships `w_ik ∝ exp(−α·d_ik)`.
pub fn dkm_weights(latent: ArrayView2<'_, f64>, centroids: &Centroids, alpha: f64) -> Result<MembershipWeights> {
    let dists = squared_distances(latent, centroids)?;
    Ok(MembershipWeights(row_softmax(dists.mapv(|d| -alpha * d))))
}

/// Scatters `∂L/∂d_ik` into latent and centroid gradients via
/// `∂d_ik/∂z_i = 2(z_i − r_k)` and `∂d_ik/∂r_k = −2(z_i − r_k)`.
fn chain_distance_grad(
    latent: ArrayView2<'_, f64>,
    centroids: &Centroids,
    dl_dd: &Array2<f64>,
) -> (Array2<f64>, Array2<f64>) {
    let centers = centroids.as_array();
    let mut grad_latent = Array2::zeros(latent.raw_dim());
    let mut grad_centroids = Array2::zeros(centers.raw_dim());
    for (i, z) in latent.rows().into_iter().enumerate() {
        for (k, r) in centers.rows().into_iter().enumerate() {
            let g = dl_dd[[i, k]];
            if g == 0.0 {
                continue;
            }
            for j in 0..z.len() {
                let v = 2.0 * g * (z[j] - r[j]);
                grad_latent[[i, j]] += v;
                grad_centroids[[k, j]] -= v;
            }
        }
    }
    (grad_latent, grad_centroids)
}

/// Centering loss, `(1/B) Σ_i Σ_k d_ik·w_ik` with inverse-power weights.
pub fn ct_loss(latent: ArrayView2<'_, f64>, centroids: &Centroids, config: &LossConfig) -> Result<ClusterLoss> {
    let raw = squared_distances(latent, centroids)?;
    let (alpha, epsilon) = (config.alpha, config.epsilon);
    let weights = ct_weights_from(&raw, alpha, epsilon);
    let floored = raw.mapv(|d| d.max(epsilon));
    let batch = latent.nrows().max(1) as f64;

    let per_sample = (&floored * &weights).sum_axis(Axis(1));
    let value = per_sample.sum() / batch;

    // ∂L_i/∂d_ij = w_ij·(1 − α + α·L_i/d_ij); zero where the floor is active.
    let mut dl_dd = Array2::zeros(raw.raw_dim());
    for i in 0..raw.nrows() {
        let l = per_sample[i];
        for k in 0..raw.ncols() {
            if raw[[i, k]] > epsilon {
                let w = weights[[i, k]];
                dl_dd[[i, k]] = w * (1.0 - alpha + alpha * l / floored[[i, k]]) / batch;
            }
        }
    }
    let (grad_latent, grad_centroids) = chain_distance_grad(latent, centroids, &dl_dd);
    Ok(ClusterLoss {
        value,
        grad_latent,
        grad_centroids,
    })
}

/// Softmax-weighted loss, `(1/B) Σ_i Σ_k d_ik·w_ik` with `w ∝ exp(−α·d)`.
pub fn dkm_loss(latent: ArrayView2<'_, f64>, centroids: &Centroids, config: &LossConfig) -> Result<ClusterLoss> {
    let dists = squared_distances(latent, centroids)?;
    let alpha = config.alpha;
    let weights = row_softmax(dists.mapv(|d| -alpha * d));
    let batch = latent.nrows().max(1) as f64;

    let per_sample = (&dists * &weights).sum_axis(Axis(1));
    let value = per_sample.sum() / batch;

    // ∂L_i/∂d_ij = w_ij·(1 − α·(d_ij − L_i))
    let mut dl_dd = Array2::zeros(dists.raw_dim());
    Zip::indexed(&mut dl_dd)
        .and(&dists)
        .and(&weights)
        .for_each(|(i, _), g, &d, &w| *g = w * (1.0 - alpha * (d - per_sample[i])) / batch);
    let (grad_latent, grad_centroids) = chain_distance_grad(latent, centroids, &dl_dd);
    Ok(ClusterLoss {
        value,
        grad_latent,
        grad_centroids,
    })
}

/// Hard-assignment penalty `(1/B) Σ_i ½‖z_i − r_{s_i}‖²`.
pub fn dcn_penalty(
    latent: ArrayView2<'_, f64>,
    centroids: &Centroids,
    assignment: &Assignment,
) -> Result<ClusterLoss> {
    if latent.ncols() != centroids.dim() {
        return Err(Error::shape(
            "latent vs centroids",
            format!("{} columns", centroids.dim()),
            format!("{} columns", latent.ncols()),
        ));
    }
    if assignment.len() != latent.nrows() {
        return Err(Error::Input(format!(
            "assignment has {} labels for a batch of {}",
            assignment.len(),
            latent.nrows()
        )));
    }
    if let Some(&bad) = assignment.labels().iter().find(|&&l| l >= centroids.k()) {
        return Err(Error::Input(format!("label {bad} is not below K = {}", centroids.k())));
    }
    let batch = latent.nrows().max(1) as f64;
    let centers = centroids.as_array();
    let mut value = 0.0;
    let mut grad_latent = Array2::zeros(latent.raw_dim());
    let mut grad_centroids = Array2::zeros(centers.raw_dim());
    for (i, (z, &s)) in latent.rows().into_iter().zip(assignment.labels()).enumerate() {
        let r = centers.row(s);
        for j in 0..z.len() {
            let diff = z[j] - r[j];
            value += 0.5 * diff * diff;
            grad_latent[[i, j]] = diff / batch;
            grad_centroids[[s, j]] -= diff / batch;
        }
    }
    Ok(ClusterLoss {
        value: value / batch,
        grad_latent,
        grad_centroids,
    })
}

/// Everything one optimizer step needs from a batch.
#[derive(Debug, Clone)]
pub struct Objective {
    /// `reconstruction + λ·clustering`.
    pub total: f64,
    pub reconstruction: f64,
    /// Unscaled clustering term (zero when no centroids are given).
    pub clustering: f64,
    pub gradients: Gradients,
    /// `∂total/∂R`, present whenever centroids were given.
    pub grad_centroids: Option<Array2<f64>>,
    /// Hard labels used by the DCN term.
    pub assignment: Option<Assignment>,
    pub latent: Array2<f64>,
}

/// Batch-mean squared reconstruction error, `(1/B) Σ_i ‖x̂_i − x_i‖²`.
pub fn reconstruction_loss(reconstruction: ArrayView2<'_, f64>, batch: ArrayView2<'_, f64>) -> (f64, Array2<f64>) {
    let b = batch.nrows().max(1) as f64;
    let residual = &reconstruction - &batch;
    let value = residual.iter().map(|r| r * r).sum::<f64>() / b;
    let grad = residual.mapv(|r| 2.0 * r / b);
    (value, grad)
}

/// Reconstruction plus `λ ×` the configured clustering term, with full
/// parameter gradients. Passing no centroids gives the plain reconstruction
/// objective used for pretraining.
pub fn combined_objective(
    ae: &Autoencoder,
    batch: ArrayView2<'_, f64>,
    centroids: Option<&Centroids>,
    config: &LossConfig,
) -> Result<Objective> {
    config.validate()?;
    let pass = ae.forward(batch)?;
    let (reconstruction, grad_recon) = reconstruction_loss(pass.reconstruction(), batch);

    let Some(centroids) = centroids else {
        let gradients = ae.backward(&pass, Some(grad_recon.view()), None)?;
        return Ok(Objective {
            total: reconstruction,
            reconstruction,
            clustering: 0.0,
            gradients,
            grad_centroids: None,
            assignment: None,
            latent: pass.latent().to_owned(),
        });
    };

    let latent = pass.latent();
    let (term, assignment) = match config.variant {
        Variant::Ct => (ct_loss(latent, centroids, config)?, None),
        Variant::Dkm => (dkm_loss(latent, centroids, config)?, None),
        Variant::Dcn => {
            let assignment = assign(latent, centroids)?;
            (dcn_penalty(latent, centroids, &assignment)?, Some(assignment))
        }
    };
    let lambda = config.lambda;
    let grad_latent = term.grad_latent * lambda;
    let gradients = ae.backward(&pass, Some(grad_recon.view()), Some(grad_latent.view()))?;
    Ok(Objective {
        total: reconstruction + lambda * term.value,
        reconstruction,
        clustering: term.value,
        gradients,
        grad_centroids: Some(term.grad_centroids * lambda),
        assignment,
        latent: latent.to_owned(),
    })
}
