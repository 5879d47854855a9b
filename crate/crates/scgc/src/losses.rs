//! Scalar training objectives: reconstruction, influence-weighted
//! contrastive structure loss, soft cluster assignment, target
//! distribution, KL cluster loss, and the two joint objectives.

use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{Result, ScgcError};
use crate::graph::{InfluenceMatrix, InfluenceMode};
use crate::matrix::{matmul, Matrix};

/// Which joint objective trains the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    /// Full autoencoder: contrastive term on a single adjacency power plus
    /// cluster loss plus reconstruction.
    #[serde(rename = "scgc")]
    Scgc,
    /// Encoder-only: contrastive term on cumulative influence plus cluster
    /// loss; no reconstruction.
    #[serde(rename = "scgc-star")]
    ScgcStar,
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Variant::Scgc => write!(f, "scgc"),
            Variant::ScgcStar => write!(f, "scgc-star"),
        }
    }
}

/// Similarity used inside the contrastive exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Similarity {
    /// Cosine keeps the exponent bounded; the default.
    #[default]
    Cosine,
    /// Raw dot product, for literal-formula experiments.
    Dot,
}

/// Loss weighting: alpha scales structure incorporation, beta scales
/// cluster optimization, tau is the contrastive temperature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub alpha: f64,
    pub beta: f64,
    pub tau: f64,
    pub variant: Variant,
}

impl LossWeights {
    pub fn new(alpha: f64, beta: f64, tau: f64, variant: Variant) -> Result<Self> {
        if !(alpha > 0.0 && beta > 0.0 && tau > 0.0) {
            return Err(ScgcError::InvalidInput(format!(
                "loss weights must be strictly positive: alpha={alpha}, beta={beta}, tau={tau}"
            )));
        }
        Ok(Self {
            alpha,
            beta,
            tau,
            variant,
        })
    }
}

/// Denominator guard printed in the contrastive formula.
pub const DENOMINATOR_GUARD: f64 = 1e-8;
/// Numerator guard added so a node with no influential partners yields a
/// large finite penalty instead of -log(0).
pub const NUMERATOR_GUARD: f64 = 1e-8;

static DEGENERATE_ROWS: AtomicU64 = AtomicU64::new(0);

/// Zero-norm embedding rows seen by cosine similarity since the last reset.
pub fn degenerate_row_count() -> u64 {
    DEGENERATE_ROWS.load(Ordering::Relaxed)
}

pub fn reset_degenerate_row_count() {
    DEGENERATE_ROWS.store(0, Ordering::Relaxed);
}

/// Mean squared reconstruction error: |X - X_hat|_F^2 / n.
pub fn reconstruction_loss(x: &Matrix, x_hat: &Matrix) -> Result<f64> {
    Ok(squared_frobenius(x, x_hat)? / x.rows() as f64)
}

/// Unnormalized |X - X_hat|_F^2, for literal parity with the raw formula.
pub fn reconstruction_loss_sum(x: &Matrix, x_hat: &Matrix) -> Result<f64> {
    squared_frobenius(x, x_hat)
}

fn squared_frobenius(x: &Matrix, x_hat: &Matrix) -> Result<f64> {
    if x.shape() != x_hat.shape() {
        return Err(ScgcError::DimMismatch {
            op: "reconstruction_loss",
            lhs: format!("{:?}", x.shape()),
            rhs: format!("{:?}", x_hat.shape()),
        });
    }
    Ok(x.data()
        .iter()
        .zip(x_hat.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum())
}

/// Gradient of the reconstruction loss w.r.t. X_hat.
pub fn reconstruction_grad(x: &Matrix, x_hat: &Matrix, sum_mode: bool) -> Result<Matrix> {
    let scale = if sum_mode { 2.0 } else { 2.0 / x.rows() as f64 };
    Ok(x_hat.sub(x)?.scale(scale))
}

/// Cosine similarity matrix: S_ij = z_i . z_j / (|z_i| |z_j|), symmetric,
/// unit diagonal. A zero-norm row gets all-zero similarities and bumps the
/// degenerate-row diagnostic counter.
pub fn pairwise_similarity(z: &Matrix) -> Result<Matrix> {
    pairwise_similarity_with(z, Similarity::Cosine)
}

pub fn pairwise_similarity_with(z: &Matrix, sim: Similarity) -> Result<Matrix> {
    if z.rows() < 2 {
        return Err(ScgcError::InvalidInput(
            "pairwise similarity needs at least 2 rows".into(),
        ));
    }
    match sim {
        Similarity::Dot => matmul(z, &z.transpose()),
        Similarity::Cosine => {
            let (u, norms) = normalize_rows(z);
            let mut s = matmul(&u, &u.transpose())?;
            let n = z.rows();
            for i in 0..n {
                if norms[i] == 0.0 {
                    DEGENERATE_ROWS.fetch_add(1, Ordering::Relaxed);
                    for j in 0..n {
                        s.set(i, j, 0.0);
                        s.set(j, i, 0.0);
                    }
                } else {
                    s.set(i, i, 1.0);
                }
            }
            Ok(s)
        }
    }
}

fn normalize_rows(z: &Matrix) -> (Matrix, Vec<f64>) {
    let mut u = z.clone();
    let mut norms = Vec::with_capacity(z.rows());
    for i in 0..z.rows() {
        let norm = z.row(i).iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for v in u.row_mut(i) {
                *v /= norm;
            }
        }
        norms.push(norm);
    }
    (u, norms)
}

/// Batch contrastive loss over an influence slice: mean over nodes of
/// -log((eps + sum_j gamma_ij exp(S_ij / tau)) / (eps + sum_k exp(S_ik / tau)))
/// with j, k ranging over the other nodes in the batch. The influence mode
/// (single power vs cumulative) chooses the neighbour-contrast or
/// influence-augmented semantics; the formula is the same.
pub fn contrastive_loss(z: &Matrix, gamma: &InfluenceMatrix, weights: &LossWeights) -> Result<f64> {
    let s = pairwise_similarity(z)?;
    contrastive_from_similarity(&s, gamma.gamma(), weights.tau)
}

/// Contrastive loss from an explicit similarity matrix. Exponentials are
/// stabilized by subtracting the per-row max from both numerator and
/// denominator, which cancels exactly.
pub fn contrastive_from_similarity(s: &Matrix, gamma: &Matrix, tau: f64) -> Result<f64> {
    contrastive_core(s, gamma, tau, None)
}

/// Loss, filling d(loss)/dS when a gradient buffer is given.
fn contrastive_core(
    s: &Matrix,
    gamma: &Matrix,
    tau: f64,
    mut d_s: Option<&mut Matrix>,
) -> Result<f64> {
    let b = s.rows();
    if b < 2 {
        return Err(ScgcError::InvalidInput(
            "contrastive loss needs a batch of at least 2 nodes".into(),
        ));
    }
    if s.cols() != b || gamma.shape() != (b, b) {
        return Err(ScgcError::DimMismatch {
            op: "contrastive_loss",
            lhs: format!("{:?}", s.shape()),
            rhs: format!("{:?}", gamma.shape()),
        });
    }
    if tau <= 0.0 {
        return Err(ScgcError::InvalidInput(format!(
            "temperature must be positive, got {tau}"
        )));
    }
    if gamma.data().iter().any(|&g| g < 0.0) {
        return Err(ScgcError::InvalidInput("negative influence weight".into()));
    }

    let mut total = 0.0;
    for i in 0..b {
        let mut m = f64::NEG_INFINITY;
        for j in 0..b {
            if j != i {
                m = m.max(s.get(i, j) / tau);
            }
        }
        let guard = |eps: f64| eps * (-m).exp();
        let mut denom = 0.0;
        let mut numer = 0.0;
        for j in 0..b {
            if j == i {
                continue;
            }
            let e = (s.get(i, j) / tau - m).exp();
            denom += e;
            numer += gamma.get(i, j) * e;
        }
        let log_denom = m + (guard(DENOMINATOR_GUARD) + denom).ln();
        // a node with no influential partner falls back to the bare guard,
        // keeping the penalty large but finite
        let log_numer = if numer > 0.0 {
            m + (guard(NUMERATOR_GUARD) + numer).ln()
        } else {
            NUMERATOR_GUARD.ln()
        };
        let li = log_denom - log_numer;
        if !li.is_finite() {
            return Err(ScgcError::NonFinite(format!(
                "contrastive loss at node {i}"
            )));
        }
        total += li;

        if let Some(g) = d_s.as_deref_mut() {
            let denom_full = guard(DENOMINATOR_GUARD) + denom;
            let numer_full = guard(NUMERATOR_GUARD) + numer;
            for j in 0..b {
                if j == i {
                    continue;
                }
                let e = (s.get(i, j) / tau - m).exp();
                let mut d = e / denom_full;
                let gij = gamma.get(i, j);
                if gij > 0.0 {
                    d -= gij * e / numer_full;
                }
                g.set(i, j, g.get(i, j) + d / (b as f64 * tau));
            }
        }
    }
    Ok(total / b as f64)
}

/// Contrastive loss and its gradient w.r.t. the embeddings.
pub fn contrastive_loss_and_grad(
    z: &Matrix,
    gamma: &Matrix,
    tau: f64,
    sim: Similarity,
) -> Result<(f64, Matrix)> {
    let s = pairwise_similarity_with(z, sim)?;
    let b = z.rows();
    let mut d_s = Matrix::zeros(b, b);
    let loss = contrastive_core(&s, gamma, tau, Some(&mut d_s))?;

    // chain through the similarity: accumulate both orientations of each pair
    let mut h = d_s.clone();
    for i in 0..b {
        for j in 0..b {
            h.set(i, j, d_s.get(i, j) + d_s.get(j, i));
        }
    }
    let d_z = match sim {
        Similarity::Dot => matmul(&h, z)?,
        Similarity::Cosine => {
            let (u, norms) = normalize_rows(z);
            let d_u = matmul(&h, &u)?;
            let mut d_z = Matrix::zeros(b, z.cols());
            for i in 0..b {
                if norms[i] == 0.0 {
                    continue; // degenerate row: similarities are constant 0
                }
                let ui = u.row(i);
                let di = d_u.row(i);
                let proj: f64 = di.iter().zip(ui).map(|(a, b)| a * b).sum();
                for (k, out) in d_z.row_mut(i).iter_mut().enumerate() {
                    *out = (di[k] - proj * ui[k]) / norms[i];
                }
            }
            d_z
        }
    };
    Ok((loss, d_z))
}

/// Soft cluster assignments from a Student-t kernel on embedding-centroid
/// distances. Rows are strictly positive and sum to 1.
pub fn soft_assign(z: &Matrix, centroids: &Matrix, eta: f64) -> Result<Matrix> {
    if centroids.rows() < 2 {
        return Err(ScgcError::InvalidInput("need at least 2 centroids".into()));
    }
    if z.cols() != centroids.cols() {
        return Err(ScgcError::DimMismatch {
            op: "soft_assign",
            lhs: format!("embed {}", z.cols()),
            rhs: format!("centroid {}", centroids.cols()),
        });
    }
    if eta <= 0.0 {
        return Err(ScgcError::InvalidInput(format!(
            "eta must be positive, got {eta}"
        )));
    }
    let (n, c) = (z.rows(), centroids.rows());
    let power = -(eta + 1.0) / 2.0;
    let mut q = Matrix::zeros(n, c);
    for i in 0..n {
        let zi = z.row(i);
        let mut row_sum = 0.0;
        for u in 0..c {
            let d2: f64 = zi
                .iter()
                .zip(centroids.row(u))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            let kernel = (1.0 + d2 / eta).powf(power);
            q.set(i, u, kernel);
            row_sum += kernel;
        }
        for v in q.row_mut(i) {
            *v /= row_sum;
        }
    }
    Ok(q)
}

/// Target distribution: square the assignments, normalize by soft cluster
/// frequency, re-normalize rows. Sharpens confident assignments.
pub fn target_distribution(q: &Matrix) -> Result<Matrix> {
    let (n, c) = q.shape();
    if q.data().iter().any(|&v| v <= 0.0) {
        return Err(ScgcError::InvalidInput(
            "target_distribution needs strictly positive assignments".into(),
        ));
    }
    let mut freq = vec![0.0f64; c];
    for i in 0..n {
        for (u, f) in freq.iter_mut().enumerate() {
            *f += q.get(i, u);
        }
    }
    let mut p = Matrix::zeros(n, c);
    for i in 0..n {
        let mut row_sum = 0.0;
        for u in 0..c {
            let v = q.get(i, u) * q.get(i, u) / freq[u];
            p.set(i, u, v);
            row_sum += v;
        }
        for v in p.row_mut(i) {
            *v /= row_sum;
        }
    }
    Ok(p)
}

/// KL(P || Q) = sum_i sum_u p_iu log(p_iu / q_iu), with 0 log 0 = 0.
/// A zero q entry facing a positive p entry means an upstream invariant
/// broke, and is rejected rather than returned as infinity.
pub fn kl_cluster_loss(p: &Matrix, q: &Matrix) -> Result<f64> {
    if p.shape() != q.shape() {
        return Err(ScgcError::DimMismatch {
            op: "kl_cluster_loss",
            lhs: format!("{:?}", p.shape()),
            rhs: format!("{:?}", q.shape()),
        });
    }
    for m in [p, q] {
        for i in 0..m.rows() {
            let sum: f64 = m.row(i).iter().sum();
            if (sum - 1.0).abs() > 1e-6 {
                return Err(ScgcError::InvalidInput(format!(
                    "row {i} sums to {sum}, expected 1"
                )));
            }
        }
    }
    let mut total = 0.0;
    for (idx, (&pi, &qi)) in p.data().iter().zip(q.data()).enumerate() {
        if pi == 0.0 {
            continue;
        }
        if qi == 0.0 {
            return Err(ScgcError::InvalidInput(format!(
                "q is exactly 0 where p > 0 at flat index {idx}"
            )));
        }
        total += pi * (pi / qi).ln();
    }
    Ok(total)
}

/// Gradients of KL(P || Q) w.r.t. embeddings and centroids, with P held
/// constant. Closed form of the Student-t chain:
/// dKL/dz_i = (eta+1)/eta * sum_v (p_iv - q_iv) / (1 + d_iv/eta) * (z_i - mu_v)
/// and the centroid gradient is its negation accumulated over i.
pub fn kl_cluster_grads(
    p: &Matrix,
    q: &Matrix,
    z: &Matrix,
    centroids: &Matrix,
    eta: f64,
) -> Result<(Matrix, Matrix)> {
    let (n, c) = q.shape();
    if p.shape() != (n, c) || z.rows() != n || centroids.rows() != c {
        return Err(ScgcError::DimMismatch {
            op: "kl_cluster_grads",
            lhs: format!("p {:?} z {:?}", p.shape(), z.shape()),
            rhs: format!("q {:?} mu {:?}", q.shape(), centroids.shape()),
        });
    }
    let factor = (eta + 1.0) / eta;
    let mut d_z = Matrix::zeros(n, z.cols());
    let mut d_mu = Matrix::zeros(c, centroids.cols());
    for i in 0..n {
        let zi = z.row(i);
        for v in 0..c {
            let mu = centroids.row(v);
            let d2: f64 = zi.iter().zip(mu).map(|(a, b)| (a - b) * (a - b)).sum();
            let coef = factor * (p.get(i, v) - q.get(i, v)) / (1.0 + d2 / eta);
            for k in 0..zi.len() {
                let diff = zi[k] - mu[k];
                d_z.set(i, k, d_z.get(i, k) + coef * diff);
                d_mu.set(v, k, d_mu.get(v, k) - coef * diff);
            }
        }
    }
    Ok((d_z, d_mu))
}

/// Everything a batch step needs to score and differentiate.
pub struct BatchInputs<'a> {
    pub x: &'a Matrix,
    /// Decoder output; required for the full-AE variant, forbidden for the
    /// encoder-only variant.
    pub x_hat: Option<&'a Matrix>,
    pub z: &'a Matrix,
    /// Influence sub-block aligned with the rows of `z`.
    pub gamma: &'a InfluenceMatrix,
    /// Target distribution rows for this batch (constant within an epoch).
    pub p: &'a Matrix,
    pub centroids: &'a Matrix,
    pub eta: f64,
    pub similarity: Similarity,
    /// Use the unnormalized reconstruction objective.
    pub recon_sum: bool,
}

/// Per-term values of one batch objective evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub contrastive: f64,
    pub cluster: f64,
    pub recon: f64,
}

/// Gradient contributions of the joint objective, in embedding /
/// reconstruction / centroid space.
pub struct LossGrads {
    pub d_z: Matrix,
    pub d_xhat: Option<Matrix>,
    pub d_centroids: Matrix,
}

/// Joint objective for one batch under the given variant:
/// full AE:      alpha * contrastive(single power) + beta * cluster + recon
/// encoder-only: alpha * contrastive(cumulative)   + beta * cluster
pub fn total_loss(
    batch: &BatchInputs<'_>,
    weights: &LossWeights,
) -> Result<(LossBreakdown, LossGrads)> {
    match weights.variant {
        Variant::Scgc => {
            if batch.x_hat.is_none() {
                return Err(ScgcError::InvalidInput(
                    "full-AE variant needs decoder outputs".into(),
                ));
            }
            if batch.gamma.mode() != InfluenceMode::SinglePower {
                return Err(ScgcError::InvalidInput(
                    "full-AE variant contrasts against a single adjacency power".into(),
                ));
            }
        }
        Variant::ScgcStar => {
            if batch.x_hat.is_some() {
                return Err(ScgcError::InvalidInput(
                    "encoder-only variant must not touch a decoder".into(),
                ));
            }
            if batch.gamma.mode() != InfluenceMode::Cumulative {
                return Err(ScgcError::InvalidInput(
                    "encoder-only variant contrasts against cumulative influence".into(),
                ));
            }
        }
    }

    let (con, d_z_con) =
        contrastive_loss_and_grad(batch.z, batch.gamma.gamma(), weights.tau, batch.similarity)?;

    let q = soft_assign(batch.z, batch.centroids, batch.eta)?;
    let cluster = kl_cluster_loss(batch.p, &q)?;
    let (d_z_kl, d_mu) = kl_cluster_grads(batch.p, &q, batch.z, batch.centroids, batch.eta)?;

    let mut d_z = d_z_con.scale(weights.alpha);
    d_z.add_assign(&d_z_kl.scale(weights.beta));
    let d_centroids = d_mu.scale(weights.beta);

    let (recon, d_xhat) = match batch.x_hat {
        Some(x_hat) => {
            let value = if batch.recon_sum {
                reconstruction_loss_sum(batch.x, x_hat)?
            } else {
                reconstruction_loss(batch.x, x_hat)?
            };
            (
                value,
                Some(reconstruction_grad(batch.x, x_hat, batch.recon_sum)?),
            )
        }
        None => (0.0, None),
    };

    let total = weights.alpha * con + weights.beta * cluster + recon;
    if !total.is_finite() {
        return Err(ScgcError::NonFinite("total loss".into()));
    }
    Ok((
        LossBreakdown {
            total,
            contrastive: con,
            cluster,
            recon,
        },
        LossGrads {
            d_z,
            d_xhat,
            d_centroids,
        },
    ))
}

/// Largest |row sum - 1| over a row-stochastic matrix, for invariant checks.
pub fn max_row_sum_error(m: &Matrix) -> f64 {
    (0..m.rows())
        .map(|i| (m.row(i).iter().sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max)
}
