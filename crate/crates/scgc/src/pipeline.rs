//! Two-phase training protocol: reconstruction pretraining with K-means
//! centroid initialization, then joint self-supervised training of either
//! variant, with batching and per-epoch history.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::clustering::{hard_labels, kmeans};
use crate::error::{Result, ScgcError};
use crate::graph::{
    cumulative_influence, normalize_adjacency, single_power_influence, SparseGraph,
};
use crate::inference::TrainedModel;
use crate::losses::{
    max_row_sum_error, reconstruction_grad, reconstruction_loss, reconstruction_loss_sum,
    soft_assign, target_distribution, total_loss, BatchInputs, LossWeights, Similarity, Variant,
};
use crate::matrix::Matrix;
use crate::metrics::{clustering_metrics, MetricReport};
use crate::model::{
    adam_step, ae_blocks, backward, decode_with_cache, encode, encode_with_cache, init_autoencoder,
    AutoencoderParams, OptimizerState, ParamBlockMut,
};
use crate::rng::RngState;

/// All hyper-parameters of a run. Deserializes from JSON; unknown keys are
/// rejected so typos fail loudly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub variant: Variant,
    pub alpha: f64,
    pub beta: f64,
    pub tau: f64,
    /// Influence hop depth R (the K of the per-dataset presets).
    #[serde(alias = "k")]
    pub hops: usize,
    pub eta: f64,
    pub lr_pretrain: f64,
    pub lr_train: f64,
    pub pretrain_epochs: usize,
    pub train_epochs: usize,
    pub batch_size: usize,
    pub full_batch: bool,
    pub seed: u64,
    /// Number of clusters C; must be set (>= 2) before running.
    pub cluster_count: usize,
    /// Hidden layer widths followed by the embedding width.
    pub ae_dims: Vec<usize>,
    pub similarity: Similarity,
    /// Use the raw-sum reconstruction objective instead of the mean.
    pub recon_sum: bool,
    pub kmeans_max_iter: usize,
    pub kmeans_tol: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            variant: Variant::ScgcStar,
            alpha: 1.0,
            beta: 0.1,
            tau: 0.25,
            hops: 1,
            eta: 1.0,
            lr_pretrain: 1e-3,
            lr_train: 1e-3,
            pretrain_epochs: 30,
            train_epochs: 200,
            batch_size: 256,
            full_batch: true,
            seed: 0,
            cluster_count: 0,
            ae_dims: vec![500, 500, 2000, 10],
            similarity: Similarity::Cosine,
            recon_sum: false,
            kmeans_max_iter: 300,
            kmeans_tol: 1e-4,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.cluster_count < 2 {
            return Err(ScgcError::InvalidInput(format!(
                "cluster_count must be at least 2, got {}",
                self.cluster_count
            )));
        }
        if self.ae_dims.len() < 2 {
            return Err(ScgcError::InvalidInput(
                "ae_dims needs at least one hidden width plus the embedding width".into(),
            ));
        }
        if self.ae_dims.contains(&0) {
            return Err(ScgcError::InvalidInput(
                "ae_dims entries must be >= 1".into(),
            ));
        }
        if self.hops == 0
            || self.pretrain_epochs == 0
            || self.train_epochs == 0
            || self.batch_size == 0
            || self.kmeans_max_iter == 0
        {
            return Err(ScgcError::InvalidInput("all counts must be >= 1".into()));
        }
        if !(self.lr_pretrain > 0.0
            && self.lr_train > 0.0
            && self.eta > 0.0
            && self.kmeans_tol >= 0.0)
        {
            return Err(ScgcError::InvalidInput(
                "learning rates and eta must be positive".into(),
            ));
        }
        // alpha, beta, tau checked where the weights are built
        LossWeights::new(self.alpha, self.beta, self.tau, self.variant)?;
        Ok(())
    }

    pub fn loss_weights(&self) -> Result<LossWeights> {
        LossWeights::new(self.alpha, self.beta, self.tau, self.variant)
    }

    pub fn from_json_str(json: &str) -> Result<Self> {
        let config: TrainConfig = serde_json::from_str(json)?;
        Ok(config)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    fn hidden_dims(&self) -> &[usize] {
        &self.ae_dims[..self.ae_dims.len() - 1]
    }

    fn embed_dim(&self) -> usize {
        *self.ae_dims.last().unwrap()
    }
}

/// Output of the pretraining phase.
#[derive(Debug, Clone)]
pub struct Pretrained {
    pub params: AutoencoderParams,
    pub centroids: Matrix,
    /// Mean reconstruction loss per pretraining epoch.
    pub recon_history: Vec<f64>,
}

/// One epoch of the joint training history.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub total: f64,
    pub contrastive: f64,
    pub cluster: f64,
    pub recon: f64,
    /// Largest |row sum - 1| of the full-dataset Q at epoch start.
    pub q_row_sum_err: f64,
    pub p_row_sum_err: f64,
    /// Smallest per-batch cluster loss this epoch; must stay >= 0.
    pub min_batch_cluster: f64,
    pub skipped_batches: usize,
    pub wall_secs: f64,
    pub metrics: Option<MetricReport>,
}

/// Per-epoch records plus run-level counters.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct RunHistory {
    pub epochs: Vec<EpochRecord>,
    /// Times the influence matrix was formed; exactly 1 per run.
    pub influence_builds: usize,
}

/// Uniform sample of `batch_size` distinct node indices.
pub fn sample_batch(n: usize, batch_size: usize, rng: &mut RngState) -> Result<Vec<usize>> {
    if batch_size == 0 || batch_size > n {
        return Err(ScgcError::InvalidInput(format!(
            "batch_size must be in 1..={n}, got {batch_size}"
        )));
    }
    Ok(rng.sample_indices(n, batch_size))
}

/// Batches for one epoch. With `full` (or a batch size that covers the
/// dataset) the sampler degenerates to the identity and no randomness is
/// consumed.
fn epoch_batches(
    n: usize,
    batch_size: usize,
    full: bool,
    rng: &mut RngState,
) -> Result<Vec<Vec<usize>>> {
    if full || batch_size >= n {
        return Ok(vec![(0..n).collect()]);
    }
    let count = n.div_ceil(batch_size);
    (0..count).map(|_| sample_batch(n, batch_size, rng)).collect()
}

/// Phase one: train the full autoencoder on reconstruction only, then run
/// K-means on the embeddings (single weighted-seed run) for the initial
/// centroids.
pub fn pretrain(x: &Matrix, config: &TrainConfig) -> Result<Pretrained> {
    config.validate()?;
    if !x.is_finite() {
        return Err(ScgcError::NonFinite("pretraining features".into()));
    }
    let n = x.rows();
    if n < config.cluster_count {
        return Err(ScgcError::InvalidInput(format!(
            "{n} samples cannot form {} clusters",
            config.cluster_count
        )));
    }

    let mut rng = RngState::new(config.seed);
    let mut params = init_autoencoder(
        x.cols(),
        config.hidden_dims(),
        config.embed_dim(),
        true,
        &mut rng,
    );
    let mut state = OptimizerState::new(config.lr_pretrain);
    let mut recon_history = Vec::with_capacity(config.pretrain_epochs);

    for epoch in 0..config.pretrain_epochs {
        // pretraining always runs mini-batches; full_batch governs only
        // the joint training loop
        let batches = epoch_batches(n, config.batch_size, false, &mut rng)?;
        let mut epoch_loss = 0.0;
        for (batch_idx, batch) in batches.iter().enumerate() {
            let x_b = x.select_rows(batch);
            let (z, enc_cache) = encode_with_cache(&params, &x_b)?;
            let (x_hat, dec_cache) = decode_with_cache(&params, &z)?;
            let loss = if config.recon_sum {
                reconstruction_loss_sum(&x_b, &x_hat)?
            } else {
                reconstruction_loss(&x_b, &x_hat)?
            };
            if !loss.is_finite() {
                return Err(ScgcError::Diverged {
                    phase: "pretrain",
                    epoch,
                    batch: batch_idx,
                    detail: format!("reconstruction loss {loss}"),
                });
            }
            epoch_loss += loss;
            let d_xhat = reconstruction_grad(&x_b, &x_hat, config.recon_sum)?;
            let grads = backward(&params, &enc_cache, Some(&dec_cache), Some(&d_xhat), None)?;
            let mut blocks = ae_blocks(&mut params, &grads);
            adam_step(&mut state, &mut blocks)?;
        }
        recon_history.push(epoch_loss / batches.len() as f64);
    }

    let z = encode(&params, x)?;
    let km = kmeans(
        &z,
        config.cluster_count,
        &mut rng,
        config.kmeans_max_iter,
        config.kmeans_tol,
    )?;
    Ok(Pretrained {
        params,
        centroids: km.centroids,
        recon_history,
    })
}

/// Phase two: joint self-supervised training. The influence matrix is
/// formed once up front; each epoch recomputes the target distribution P
/// from the full-dataset Q, then steps the optimizer per batch. Centroids
/// are trainable parameters updated alongside the network weights.
pub fn train(
    x: &Matrix,
    graph: &SparseGraph,
    labels: Option<&[usize]>,
    config: &TrainConfig,
    pretrained: AutoencoderParams,
    centroids: Matrix,
) -> Result<(TrainedModel, RunHistory)> {
    config.validate()?;
    let n = x.rows();
    if graph.node_count() != n {
        return Err(ScgcError::DimMismatch {
            op: "train",
            lhs: format!("{n} feature rows"),
            rhs: format!("{} graph nodes", graph.node_count()),
        });
    }
    if let Some(t) = labels {
        if t.len() != n {
            return Err(ScgcError::InvalidInput(format!(
                "{} labels for {n} nodes",
                t.len()
            )));
        }
    }
    if centroids.rows() != config.cluster_count {
        return Err(ScgcError::InvalidInput(format!(
            "{} centroids for cluster_count {}",
            centroids.rows(),
            config.cluster_count
        )));
    }
    let weights = config.loss_weights()?;

    let mut params = match config.variant {
        Variant::Scgc => {
            if !pretrained.has_decoder() {
                return Err(ScgcError::InvalidInput(
                    "full-AE variant needs pretrained decoder parameters".into(),
                ));
            }
            pretrained
        }
        // encoder-only variant: drop the decoder half entirely
        Variant::ScgcStar => pretrained.into_encoder_only(),
    };
    params.validate()?;
    let mut centroids = centroids;

    // formed exactly once, before the epoch loop
    let a_hat = normalize_adjacency(graph);
    let influence = match config.variant {
        Variant::Scgc => single_power_influence(&a_hat, config.hops)?,
        Variant::ScgcStar => cumulative_influence(&a_hat, config.hops)?,
    };
    let mut history = RunHistory {
        epochs: Vec::with_capacity(config.train_epochs),
        influence_builds: 1,
    };

    let mut rng = RngState::new(config.seed).derive(1);
    let mut state = OptimizerState::new(config.lr_train);

    for epoch in 0..config.train_epochs {
        let started = Instant::now();

        // target distribution from the full dataset, fixed for this epoch
        let z_full = encode(&params, x)?;
        let q_full = soft_assign(&z_full, &centroids, config.eta)?;
        let p_full = target_distribution(&q_full)?;
        let q_row_sum_err = max_row_sum_error(&q_full);
        let p_row_sum_err = max_row_sum_error(&p_full);
        let metrics = labels
            .map(|t| clustering_metrics(&hard_labels(&q_full), t))
            .transpose()?;

        let batches = epoch_batches(n, config.batch_size, config.full_batch, &mut rng)?;
        let mut sums = (0.0, 0.0, 0.0, 0.0);
        let mut min_batch_cluster = f64::INFINITY;
        let mut skipped = 0usize;
        let mut stepped = 0usize;
        for (batch_idx, batch) in batches.iter().enumerate() {
            if batch.len() < 2 {
                eprintln!(
                    "warning: skipping batch {batch_idx} with {} node(s)",
                    batch.len()
                );
                skipped += 1;
                continue;
            }
            let x_b = x.select_rows(batch);
            let p_b = p_full.select_rows(batch);
            let gamma_b = influence.slice(batch);

            let (z_b, enc_cache) = encode_with_cache(&params, &x_b)?;
            let decoded = match config.variant {
                Variant::Scgc => Some(decode_with_cache(&params, &z_b)?),
                Variant::ScgcStar => None,
            };
            let (x_hat, dec_cache) = match &decoded {
                Some((x_hat, cache)) => (Some(x_hat), Some(cache)),
                None => (None, None),
            };

            let batch_inputs = BatchInputs {
                x: &x_b,
                x_hat,
                z: &z_b,
                gamma: &gamma_b,
                p: &p_b,
                centroids: &centroids,
                eta: config.eta,
                similarity: config.similarity,
                recon_sum: config.recon_sum,
            };
            let (breakdown, loss_grads) =
                total_loss(&batch_inputs, &weights).map_err(|e| ScgcError::Diverged {
                    phase: "train",
                    epoch,
                    batch: batch_idx,
                    detail: e.to_string(),
                })?;
            if !breakdown.total.is_finite() || breakdown.cluster < 0.0 {
                return Err(ScgcError::Diverged {
                    phase: "train",
                    epoch,
                    batch: batch_idx,
                    detail: format!("loss breakdown {breakdown:?}"),
                });
            }

            let param_grads = backward(
                &params,
                &enc_cache,
                dec_cache,
                loss_grads.d_xhat.as_ref(),
                Some(&loss_grads.d_z),
            )?;
            let mut blocks = ae_blocks(&mut params, &param_grads);
            blocks.push(ParamBlockMut {
                name: "centroids".into(),
                data: centroids.data_mut(),
                grad: loss_grads.d_centroids.data(),
            });
            adam_step(&mut state, &mut blocks)?;

            sums.0 += breakdown.total;
            sums.1 += breakdown.contrastive;
            sums.2 += breakdown.cluster;
            sums.3 += breakdown.recon;
            min_batch_cluster = min_batch_cluster.min(breakdown.cluster);
            stepped += 1;
        }

        let denom = stepped.max(1) as f64;
        history.epochs.push(EpochRecord {
            epoch,
            total: sums.0 / denom,
            contrastive: sums.1 / denom,
            cluster: sums.2 / denom,
            recon: sums.3 / denom,
            q_row_sum_err,
            p_row_sum_err,
            min_batch_cluster,
            skipped_batches: skipped,
            wall_secs: started.elapsed().as_secs_f64(),
            metrics,
        });
    }

    Ok((
        TrainedModel {
            params,
            centroids,
            eta: config.eta,
        },
        history,
    ))
}

/// Convenience wrapper running the whole protocol on one dataset.
pub struct FullRun {
    pub pretrain_recon: Vec<f64>,
    pub model: TrainedModel,
    pub history: RunHistory,
    pub evaluation: crate::inference::Evaluation,
}

pub fn run_full(
    x: &Matrix,
    graph: &SparseGraph,
    labels: Option<&[usize]>,
    config: &TrainConfig,
) -> Result<FullRun> {
    let pre = pretrain(x, config)?;
    let (model, history) = train(x, graph, labels, config, pre.params, pre.centroids)?;
    let evaluation = crate::inference::evaluate(&model, x, labels)?;
    Ok(FullRun {
        pretrain_recon: pre.recon_history,
        model,
        history,
        evaluation,
    })
}
