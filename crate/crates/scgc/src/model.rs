//! MLP autoencoder with explicit forward/backward passes and an
//! adaptive-moment optimizer.
//!
//! Hidden layers use ReLU; the embedding layer and the final reconstruction
//! layer are linear so embeddings stay unbounded for K-means.

use serde::{Deserialize, Serialize};

use crate::error::{Result, ScgcError};
use crate::matrix::{matmul, Matrix};
use crate::rng::RngState;

/// Hidden-layer nonlinearity tag, recorded in checkpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
}

/// One affine layer: weight is input_dim x output_dim, bias has output_dim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub w: Matrix,
    pub b: Vec<f64>,
}

impl Layer {
    fn zeros_like(&self) -> Layer {
        Layer {
            w: Matrix::zeros(self.w.rows(), self.w.cols()),
            b: vec![0.0; self.b.len()],
        }
    }

    pub fn param_count(&self) -> usize {
        self.w.rows() * self.w.cols() + self.b.len()
    }
}

/// Encoder plus optional mirrored decoder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutoencoderParams {
    pub encoder: Vec<Layer>,
    pub decoder: Vec<Layer>,
    pub activation: Activation,
}

impl AutoencoderParams {
    pub fn input_dim(&self) -> usize {
        self.encoder[0].w.rows()
    }

    pub fn embed_dim(&self) -> usize {
        self.encoder.last().unwrap().w.cols()
    }

    pub fn has_decoder(&self) -> bool {
        !self.decoder.is_empty()
    }

    pub fn param_count(&self) -> usize {
        self.encoder
            .iter()
            .chain(&self.decoder)
            .map(Layer::param_count)
            .sum()
    }

    /// Drop the decoder half; the encoder-only model keeps exactly the
    /// encoder's parameters.
    pub fn into_encoder_only(mut self) -> AutoencoderParams {
        self.decoder.clear();
        self
    }

    /// Verify layer dimensions chain and the decoder mirrors the encoder.
    pub fn validate(&self) -> Result<()> {
        if self.encoder.is_empty() {
            return Err(ScgcError::InvalidInput("encoder has no layers".into()));
        }
        for stack in [&self.encoder, &self.decoder] {
            for pair in stack.windows(2) {
                if pair[0].w.cols() != pair[1].w.rows() {
                    return Err(ScgcError::DimMismatch {
                        op: "AutoencoderParams::validate",
                        lhs: format!("layer out {}", pair[0].w.cols()),
                        rhs: format!("next in {}", pair[1].w.rows()),
                    });
                }
            }
            for layer in stack.iter() {
                if layer.b.len() != layer.w.cols() {
                    return Err(ScgcError::DimMismatch {
                        op: "AutoencoderParams::validate",
                        lhs: format!("bias {}", layer.b.len()),
                        rhs: format!("weight out {}", layer.w.cols()),
                    });
                }
            }
        }
        if self.has_decoder()
            && (self.decoder[0].w.rows() != self.embed_dim()
                || self.decoder.last().unwrap().w.cols() != self.input_dim())
        {
            return Err(ScgcError::InvalidInput(
                "decoder does not mirror encoder dims".into(),
            ));
        }
        Ok(())
    }
}

/// Fresh autoencoder. Weights are uniform in +/- sqrt(1/fan_in); biases are
/// zero. With `decoder` false only the encoder half is built.
pub fn init_autoencoder(
    input_dim: usize,
    hidden_dims: &[usize],
    embed_dim: usize,
    decoder: bool,
    rng: &mut RngState,
) -> AutoencoderParams {
    assert!(input_dim >= 1 && embed_dim >= 1 && hidden_dims.iter().all(|&d| d >= 1));

    let mut dims = Vec::with_capacity(hidden_dims.len() + 2);
    dims.push(input_dim);
    dims.extend_from_slice(hidden_dims);
    dims.push(embed_dim);

    let make_stack = |dims: &[usize], rng: &mut RngState| -> Vec<Layer> {
        dims.windows(2)
            .map(|d| {
                let (fan_in, fan_out) = (d[0], d[1]);
                let bound = (1.0 / fan_in as f64).sqrt();
                let data = (0..fan_in * fan_out)
                    .map(|_| rng.next_f64_in(-bound, bound))
                    .collect();
                Layer {
                    w: Matrix::from_vec(fan_in, fan_out, data).unwrap(),
                    b: vec![0.0; fan_out],
                }
            })
            .collect()
    };

    let encoder = make_stack(&dims, rng);
    let decoder = if decoder {
        let rev: Vec<usize> = dims.iter().rev().copied().collect();
        make_stack(&rev, rng)
    } else {
        Vec::new()
    };

    AutoencoderParams {
        encoder,
        decoder,
        activation: Activation::Relu,
    }
}

/// Activations recorded during a forward pass, needed for backprop.
/// `inputs[k]` is what entered layer k; `preacts[k]` is x W + b before the
/// nonlinearity.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    inputs: Vec<Matrix>,
    preacts: Vec<Matrix>,
}

fn forward_stack(layers: &[Layer], x: &Matrix, op: &'static str) -> Result<(Matrix, ForwardCache)> {
    if x.cols() != layers[0].w.rows() {
        return Err(ScgcError::DimMismatch {
            op,
            lhs: format!("input cols {}", x.cols()),
            rhs: format!("layer in {}", layers[0].w.rows()),
        });
    }
    let last = layers.len() - 1;
    let mut inputs = Vec::with_capacity(layers.len());
    let mut preacts = Vec::with_capacity(layers.len());
    let mut h = x.clone();
    for (k, layer) in layers.iter().enumerate() {
        inputs.push(h.clone());
        let mut pre = matmul(&h, &layer.w)?;
        for i in 0..pre.rows() {
            let row = pre.row_mut(i);
            for (p, b) in row.iter_mut().zip(&layer.b) {
                *p += b;
            }
        }
        preacts.push(pre.clone());
        // ReLU on hidden layers, identity on the stack's last layer
        h = if k < last {
            pre.map(|v| v.max(0.0))
        } else {
            pre
        };
    }
    Ok((h, ForwardCache { inputs, preacts }))
}

/// Embeddings for a batch: rows of `x` through the encoder.
pub fn encode(params: &AutoencoderParams, x: &Matrix) -> Result<Matrix> {
    Ok(forward_stack(&params.encoder, x, "encode")?.0)
}

pub fn encode_with_cache(params: &AutoencoderParams, x: &Matrix) -> Result<(Matrix, ForwardCache)> {
    forward_stack(&params.encoder, x, "encode")
}

/// Reconstruction from embeddings; requires the decoder half.
pub fn decode(params: &AutoencoderParams, z: &Matrix) -> Result<Matrix> {
    Ok(decode_with_cache(params, z)?.0)
}

pub fn decode_with_cache(params: &AutoencoderParams, z: &Matrix) -> Result<(Matrix, ForwardCache)> {
    if !params.has_decoder() {
        return Err(ScgcError::InvalidInput(
            "decode called on encoder-only parameters".into(),
        ));
    }
    forward_stack(&params.decoder, z, "decode")
}

/// Parameter gradients, same shapes as the parameters themselves.
#[derive(Debug, Clone)]
pub struct ParamGrads {
    pub encoder: Vec<Layer>,
    pub decoder: Vec<Layer>,
}

impl ParamGrads {
    pub fn zeros_like(params: &AutoencoderParams) -> Self {
        ParamGrads {
            encoder: params.encoder.iter().map(Layer::zeros_like).collect(),
            decoder: params.decoder.iter().map(Layer::zeros_like).collect(),
        }
    }
}

/// Backprop through one stack. Returns (per-layer grads, gradient on the
/// stack input).
fn backward_stack(
    layers: &[Layer],
    cache: &ForwardCache,
    d_out: &Matrix,
) -> Result<(Vec<Layer>, Matrix)> {
    if cache.inputs.len() != layers.len() {
        return Err(ScgcError::InvalidInput(
            "forward cache does not match layer stack".into(),
        ));
    }
    let last = layers.len() - 1;
    let mut grads: Vec<Layer> = layers.iter().map(Layer::zeros_like).collect();
    let mut d_act = d_out.clone();
    for k in (0..layers.len()).rev() {
        let pre = &cache.preacts[k];
        if d_act.shape() != pre.shape() {
            return Err(ScgcError::DimMismatch {
                op: "backward",
                lhs: format!("{:?}", d_act.shape()),
                rhs: format!("{:?}", pre.shape()),
            });
        }
        // identity on the last layer of the stack, ReLU mask elsewhere
        let d_pre = if k == last {
            d_act
        } else {
            let mut d = d_act;
            for (g, p) in d.data_mut().iter_mut().zip(pre.data()) {
                if *p <= 0.0 {
                    *g = 0.0;
                }
            }
            d
        };
        grads[k].w = matmul(&cache.inputs[k].transpose(), &d_pre)?;
        for i in 0..d_pre.rows() {
            for (b, g) in grads[k].b.iter_mut().zip(d_pre.row(i)) {
                *b += g;
            }
        }
        d_act = matmul(&d_pre, &layers[k].w.transpose())?;
    }
    Ok((grads, d_act))
}

/// Exact gradients of a scalar loss w.r.t. every weight and bias, given the
/// upstream gradient on the reconstruction (`d_xhat`) and/or directly on the
/// embeddings (`d_z`). Decoder gradients exist only when `d_xhat` is given;
/// its chain contribution on z is added to `d_z` before the encoder pass.
pub fn backward(
    params: &AutoencoderParams,
    enc_cache: &ForwardCache,
    dec_cache: Option<&ForwardCache>,
    d_xhat: Option<&Matrix>,
    d_z: Option<&Matrix>,
) -> Result<ParamGrads> {
    let mut grads = ParamGrads::zeros_like(params);

    let embed = params.embed_dim();
    let batch = enc_cache.inputs[0].rows();
    let mut d_z_total = match d_z {
        Some(d) => {
            if d.shape() != (batch, embed) {
                return Err(ScgcError::DimMismatch {
                    op: "backward d_z",
                    lhs: format!("{:?}", d.shape()),
                    rhs: format!("({batch}, {embed})"),
                });
            }
            d.clone()
        }
        None => Matrix::zeros(batch, embed),
    };

    if let Some(d_xhat) = d_xhat {
        let dec_cache = dec_cache.ok_or_else(|| {
            ScgcError::InvalidInput("d_xhat given without a decoder forward cache".into())
        })?;
        let (dec_grads, d_z_from_dec) = backward_stack(&params.decoder, dec_cache, d_xhat)?;
        grads.decoder = dec_grads;
        d_z_total.add_assign(&d_z_from_dec);
    }

    let (enc_grads, _) = backward_stack(&params.encoder, enc_cache, &d_z_total)?;
    grads.encoder = enc_grads;
    Ok(grads)
}

/// One named parameter block paired with its gradient, the unit the
/// optimizer works on.
pub struct ParamBlockMut<'a> {
    pub name: String,
    pub data: &'a mut [f64],
    pub grad: &'a [f64],
}

/// Flatten autoencoder parameters and gradients into optimizer blocks.
pub fn ae_blocks<'a>(
    params: &'a mut AutoencoderParams,
    grads: &'a ParamGrads,
) -> Vec<ParamBlockMut<'a>> {
    let mut blocks = Vec::new();
    for (tag, layers, glayers) in [
        ("enc", &mut params.encoder, &grads.encoder),
        ("dec", &mut params.decoder, &grads.decoder),
    ] {
        for (k, (layer, grad)) in layers.iter_mut().zip(glayers).enumerate() {
            blocks.push(ParamBlockMut {
                name: format!("{tag}{k}.w"),
                data: layer.w.data_mut(),
                grad: grad.w.data(),
            });
            blocks.push(ParamBlockMut {
                name: format!("{tag}{k}.b"),
                data: &mut layer.b,
                grad: &grad.b,
            });
        }
    }
    blocks
}

/// Adam optimizer state: first/second moment accumulators per block plus a
/// shared step counter.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizerState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    moments: Vec<(Vec<f64>, Vec<f64>)>,
}

impl OptimizerState {
    pub fn new(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            moments: Vec::new(),
        }
    }

    pub fn step(&self) -> u64 {
        self.step
    }
}

/// One adaptive-moment update with bias correction over all blocks.
/// Blocks must be passed in the same order every step.
pub fn adam_step(state: &mut OptimizerState, blocks: &mut [ParamBlockMut<'_>]) -> Result<()> {
    for block in blocks.iter() {
        if block.grad.len() != block.data.len() {
            return Err(ScgcError::DimMismatch {
                op: "adam_step",
                lhs: format!("{} grad {}", block.name, block.grad.len()),
                rhs: format!("param {}", block.data.len()),
            });
        }
        if !block.grad.iter().all(|g| g.is_finite()) {
            return Err(ScgcError::NonFinite(format!(
                "gradient for block {}",
                block.name
            )));
        }
    }
    if state.moments.is_empty() {
        state.moments = blocks
            .iter()
            .map(|b| (vec![0.0; b.data.len()], vec![0.0; b.data.len()]))
            .collect();
    }
    if state.moments.len() != blocks.len() {
        return Err(ScgcError::InvalidInput(
            "optimizer state does not match block count".into(),
        ));
    }

    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    for (block, (m, v)) in blocks.iter_mut().zip(&mut state.moments) {
        for ((p, &g), (mi, vi)) in block
            .data
            .iter_mut()
            .zip(block.grad)
            .zip(m.iter_mut().zip(v.iter_mut()))
        {
            *mi = state.beta1 * *mi + (1.0 - state.beta1) * g;
            *vi = state.beta2 * *vi + (1.0 - state.beta2) * g * g;
            let m_hat = *mi / bc1;
            let v_hat = *vi / bc2;
            *p -= state.lr * m_hat / (v_hat.sqrt() + state.eps);
        }
    }
    Ok(())
}

/// Flatten all parameters (encoder then decoder, weights then bias per
/// layer) into one vector. Used by gradient checks.
pub fn params_to_flat(params: &AutoencoderParams) -> Vec<f64> {
    let mut flat = Vec::with_capacity(params.param_count());
    for layer in params.encoder.iter().chain(&params.decoder) {
        flat.extend_from_slice(layer.w.data());
        flat.extend_from_slice(&layer.b);
    }
    flat
}

/// Inverse of [`params_to_flat`], using `like` for the shape layout.
pub fn flat_to_params(like: &AutoencoderParams, flat: &[f64]) -> AutoencoderParams {
    assert_eq!(flat.len(), like.param_count());
    let mut out = like.clone();
    let mut pos = 0;
    for layer in out.encoder.iter_mut().chain(out.decoder.iter_mut()) {
        let wlen = layer.w.data().len();
        layer.w.data_mut().copy_from_slice(&flat[pos..pos + wlen]);
        pos += wlen;
        let blen = layer.b.len();
        layer.b.copy_from_slice(&flat[pos..pos + blen]);
        pos += blen;
    }
    out
}

/// Gradients flattened in the same layout as [`params_to_flat`].
pub fn grads_to_flat(grads: &ParamGrads) -> Vec<f64> {
    let mut flat = Vec::new();
    for layer in grads.encoder.iter().chain(&grads.decoder) {
        flat.extend_from_slice(layer.w.data());
        flat.extend_from_slice(&layer.b);
    }
    flat
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::{finite_difference_gradient, max_relative_error};

    fn toy_batch(rng: &mut RngState, n: usize, d: usize) -> Matrix {
        let data = (0..n * d).map(|_| rng.next_f64_in(-1.0, 1.0)).collect();
        Matrix::from_vec(n, d, data).unwrap()
    }

    #[test]
    fn full_ae_mirrors_encoder_weights_exactly() {
        let mut rng = RngState::new(1);
        let full = init_autoencoder(334, &[500, 500, 2000], 10, true, &mut rng);
        let mut rng2 = RngState::new(1);
        let enc_only = init_autoencoder(334, &[500, 500, 2000], 10, false, &mut rng2);

        let weight_count = |p: &AutoencoderParams, stack: &[Layer]| -> usize {
            let _ = p;
            stack.iter().map(|l| l.w.data().len()).sum()
        };
        let enc_w = weight_count(&full, &full.encoder);
        let dec_w = weight_count(&full, &full.decoder);
        assert_eq!(
            enc_w, dec_w,
            "mirrored dims transpose to equal weight counts"
        );

        // encoder-only is exactly the encoder half; bias totals differ by
        // input_dim - embed_dim because the mirrored stack ends at input_dim
        assert!(enc_only.decoder.is_empty());
        let enc_params: usize = full.encoder.iter().map(Layer::param_count).sum();
        assert_eq!(enc_only.param_count(), enc_params);
        assert_eq!(full.param_count(), 2 * enc_params + (334 - 10));
        full.validate().unwrap();
    }

    #[test]
    fn same_seed_same_parameters() {
        let mut a = RngState::new(9);
        let mut b = RngState::new(9);
        let pa = init_autoencoder(6, &[5], 3, true, &mut a);
        let pb = init_autoencoder(6, &[5], 3, true, &mut b);
        assert_eq!(pa, pb);
    }

    #[test]
    fn zero_weights_encode_to_zero() {
        let mut rng = RngState::new(2);
        let mut params = init_autoencoder(4, &[3], 2, false, &mut rng);
        for layer in &mut params.encoder {
            let z = Matrix::zeros(layer.w.rows(), layer.w.cols());
            layer.w = z;
            layer.b.iter_mut().for_each(|b| *b = 0.0);
        }
        let x = toy_batch(&mut rng, 5, 4);
        let z = encode(&params, &x).unwrap();
        assert!(z.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_single_layer_passes_input_through() {
        let params = AutoencoderParams {
            encoder: vec![Layer {
                w: Matrix::identity(3),
                b: vec![0.0; 3],
            }],
            decoder: vec![],
            activation: Activation::Relu,
        };
        let x = Matrix::from_vec(2, 3, vec![1.0, -2.0, 3.0, 0.5, 0.0, -1.0]).unwrap();
        // single layer is the embedding layer: identity activation
        let z = encode(&params, &x).unwrap();
        assert_eq!(z, x);
    }

    /// Independent straight-line re-implementation of the forward recurrence.
    fn forward_oracle(params: &AutoencoderParams, x: &Matrix) -> Matrix {
        let mut rows: Vec<Vec<f64>> = (0..x.rows()).map(|i| x.row(i).to_vec()).collect();
        let last = params.encoder.len() - 1;
        for (k, layer) in params.encoder.iter().enumerate() {
            let mut next = Vec::with_capacity(rows.len());
            for r in &rows {
                let mut out = layer.b.clone();
                for (j, o) in out.iter_mut().enumerate() {
                    for (i, &xi) in r.iter().enumerate() {
                        *o += xi * layer.w.get(i, j);
                    }
                }
                if k < last {
                    out.iter_mut().for_each(|v| *v = v.max(0.0));
                }
                next.push(out);
            }
            rows = next;
        }
        Matrix::from_rows(&rows).unwrap()
    }

    #[test]
    fn encode_matches_independent_forward_oracle() {
        let mut rng = RngState::new(21);
        let params = init_autoencoder(6, &[5, 4], 3, false, &mut rng);
        let x = toy_batch(&mut rng, 4, 6);
        let got = encode(&params, &x).unwrap();
        let want = forward_oracle(&params, &x);
        for (g, w) in got.data().iter().zip(want.data()) {
            assert!((g - w).abs() < 1e-12);
        }
    }

    #[test]
    fn encode_is_deterministic() {
        let mut rng = RngState::new(3);
        let params = init_autoencoder(5, &[4], 2, false, &mut rng);
        let x = toy_batch(&mut rng, 6, 5);
        let z1 = encode(&params, &x).unwrap();
        let z2 = encode(&params, &x).unwrap();
        assert_eq!(z1, z2);
    }

    #[test]
    fn decode_requires_decoder() {
        let mut rng = RngState::new(4);
        let params = init_autoencoder(5, &[4], 2, false, &mut rng);
        let z = Matrix::zeros(1, 2);
        assert!(decode(&params, &z).is_err());
    }

    #[test]
    fn decode_round_trip_shapes() {
        let mut rng = RngState::new(5);
        let params = init_autoencoder(7, &[6, 5], 3, true, &mut rng);
        let x = toy_batch(&mut rng, 4, 7);
        let z = encode(&params, &x).unwrap();
        assert_eq!(z.shape(), (4, 3));
        let xh = decode(&params, &z).unwrap();
        assert_eq!(xh.shape(), (4, 7));
    }

    #[test]
    fn encode_rejects_wrong_width() {
        let mut rng = RngState::new(6);
        let params = init_autoencoder(5, &[4], 2, false, &mut rng);
        assert!(encode(&params, &Matrix::zeros(2, 4)).is_err());
    }

    #[test]
    fn zero_upstream_gradient_gives_zero_param_gradients() {
        let mut rng = RngState::new(7);
        let params = init_autoencoder(5, &[4], 2, true, &mut rng);
        let x = toy_batch(&mut rng, 3, 5);
        let (z, enc_cache) = encode_with_cache(&params, &x).unwrap();
        let (xh, dec_cache) = decode_with_cache(&params, &z).unwrap();
        let d_xhat = Matrix::zeros(xh.rows(), xh.cols());
        let grads = backward(&params, &enc_cache, Some(&dec_cache), Some(&d_xhat), None).unwrap();
        assert!(grads_to_flat(&grads).iter().all(|&g| g == 0.0));
    }

    #[test]
    fn single_linear_layer_squared_loss_closed_form() {
        // encoder = one linear layer, loss = |XW - Y|^2_F / batch
        // gradient in W: 2 X^T (XW - Y) / batch
        let mut rng = RngState::new(8);
        let x = toy_batch(&mut rng, 6, 3);
        let y = toy_batch(&mut rng, 6, 2);
        let params = init_autoencoder(3, &[], 2, false, &mut rng);
        let (z, cache) = encode_with_cache(&params, &x).unwrap();
        let resid = z.sub(&y).unwrap();
        let d_z = resid.scale(2.0 / 6.0);
        let grads = backward(&params, &cache, None, None, Some(&d_z)).unwrap();
        let want = matmul(&x.transpose(), &resid).unwrap().scale(2.0 / 6.0);
        for (g, w) in grads.encoder[0].w.data().iter().zip(want.data()) {
            assert!((g - w).abs() < 1e-12);
        }
    }

    #[test]
    fn reconstruction_gradient_matches_finite_differences() {
        let mut rng = RngState::new(40);
        let params = init_autoencoder(3, &[4], 2, true, &mut rng);
        let x = toy_batch(&mut rng, 4, 3);
        let n = x.rows() as f64;

        let flat = params_to_flat(&params);
        let mut loss_at = |p: &[f64]| -> f64 {
            let pp = flat_to_params(&params, p);
            let z = encode(&pp, &x).unwrap();
            let xh = decode(&pp, &z).unwrap();
            xh.sub(&x)
                .unwrap()
                .data()
                .iter()
                .map(|d| d * d)
                .sum::<f64>()
                / n
        };

        let (z, enc_cache) = encode_with_cache(&params, &x).unwrap();
        let (xh, dec_cache) = decode_with_cache(&params, &z).unwrap();
        let d_xhat = xh.sub(&x).unwrap().scale(2.0 / n);
        let grads = backward(&params, &enc_cache, Some(&dec_cache), Some(&d_xhat), None).unwrap();

        let numeric = finite_difference_gradient(&mut loss_at, &flat, 1e-5).unwrap();
        let analytic = grads_to_flat(&grads);
        let err = max_relative_error(&analytic, &numeric);
        assert!(err < 1e-4, "max relative error {err}");
    }

    #[test]
    fn adam_zero_gradient_leaves_parameters_unchanged() {
        let mut state = OptimizerState::new(0.01);
        let mut data = vec![1.0, -2.0, 3.0];
        let grad = vec![0.0; 3];
        let mut blocks = vec![ParamBlockMut {
            name: "w".into(),
            data: &mut data,
            grad: &grad,
        }];
        adam_step(&mut state, &mut blocks).unwrap();
        assert_eq!(data, vec![1.0, -2.0, 3.0]);
    }

    #[test]
    fn adam_first_step_is_signed_learning_rate_for_large_gradients() {
        let mut state = OptimizerState::new(0.05);
        let mut data = vec![0.0, 0.0];
        let grad = vec![1e6, -1e6];
        let mut blocks = vec![ParamBlockMut {
            name: "w".into(),
            data: &mut data,
            grad: &grad,
        }];
        adam_step(&mut state, &mut blocks).unwrap();
        assert!((data[0] + 0.05).abs() < 1e-9, "{}", data[0]);
        assert!((data[1] - 0.05).abs() < 1e-9, "{}", data[1]);
        assert_eq!(state.step(), 1);
    }

    #[test]
    fn adam_descends_a_convex_quadratic() {
        // f(x) = sum x_i^2, start away from the optimum
        let mut state = OptimizerState::new(0.01);
        let mut x = vec![5.0, -3.0, 2.0];
        let mut prev = f64::INFINITY;
        for _ in 0..100 {
            let loss: f64 = x.iter().map(|v| v * v).sum();
            assert!(loss < prev, "loss must strictly decrease: {loss} vs {prev}");
            prev = loss;
            let grad: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
            let mut blocks = vec![ParamBlockMut {
                name: "x".into(),
                data: &mut x,
                grad: &grad,
            }];
            adam_step(&mut state, &mut blocks).unwrap();
        }
    }

    #[test]
    fn adam_rejects_non_finite_gradient_naming_the_block() {
        let mut state = OptimizerState::new(0.01);
        let mut data = vec![1.0];
        let grad = vec![f64::NAN];
        let mut blocks = vec![ParamBlockMut {
            name: "enc0.w".into(),
            data: &mut data,
            grad: &grad,
        }];
        let err = adam_step(&mut state, &mut blocks).unwrap_err();
        assert!(err.to_string().contains("enc0.w"), "{err}");
    }
}
