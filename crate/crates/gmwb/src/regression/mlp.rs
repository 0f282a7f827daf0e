//! Feed-forward continuation-value regressor with hand-rolled
//! backpropagation and a decoupled-weight-decay Adam optimizer.
//!
//! The production architecture is three hidden layers of width 128 with
//! SiLU activations and a scalar linear head; the input is the post-decision
//! state (two covariates under a constant rate, three under a stochastic
//! rate). Inputs and targets are standardized to zero mean / unit variance
//! on the training set — SiLU nets train poorly on raw currency scales —
//! and the constants ride along with the model so prediction is
//! self-contained.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::rng::path_rng;
use crate::{GmwbError, Result};

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// SiLU activation `x * sigmoid(x)`.
#[inline]
pub fn silu(x: f64) -> f64 {
    x * sigmoid(x)
}

#[inline]
fn silu_grad(x: f64) -> f64 {
    let s = sigmoid(x);
    s * (1.0 + x * (1.0 - s))
}

/// Fitted multilayer perceptron with its standardization constants.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MlpModel {
    /// Layer widths, input first: `[d_in, H, ..., 1]`.
    pub dims: Vec<usize>,
    /// Per layer, row-major `out x in`.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub x_mean: Vec<f64>,
    pub x_std: Vec<f64>,
    pub y_mean: f64,
    pub y_std: f64,
}

impl MlpModel {
    /// Freshly initialized network: uniform `±1/sqrt(fan_in)` weights and
    /// biases, identity standardization.
    pub fn with_architecture(in_dim: usize, hidden_width: usize, hidden_layers: usize, seed: u64) -> Self {
        let mut dims = vec![in_dim];
        dims.extend(std::iter::repeat_n(hidden_width, hidden_layers));
        dims.push(1);
        let mut rng = path_rng(seed, 0);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for l in 0..dims.len() - 1 {
            let (fan_in, fan_out) = (dims[l], dims[l + 1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            weights.push(
                (0..fan_in * fan_out)
                    .map(|_| (rng.random::<f64>() * 2.0 - 1.0) * bound)
                    .collect(),
            );
            biases.push(
                (0..fan_out)
                    .map(|_| (rng.random::<f64>() * 2.0 - 1.0) * bound)
                    .collect(),
            );
        }
        MlpModel {
            dims,
            weights,
            biases,
            x_mean: vec![0.0; in_dim],
            x_std: vec![1.0; in_dim],
            y_mean: 0.0,
            y_std: 1.0,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn param_count(&self) -> usize {
        self.dims
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }

    /// Forward pass on already-standardized inputs, producing the
    /// standardized output.
    fn forward_standardized(&self, x: &[f64], scratch: &mut Vec<f64>) -> f64 {
        let n_layers = self.dims.len() - 1;
        scratch.clear();
        scratch.extend_from_slice(x);
        let mut next = Vec::new();
        for l in 0..n_layers {
            let (fan_in, fan_out) = (self.dims[l], self.dims[l + 1]);
            next.clear();
            next.reserve(fan_out);
            let w = &self.weights[l];
            for o in 0..fan_out {
                let row = &w[o * fan_in..(o + 1) * fan_in];
                let z = self.biases[l][o] + row.iter().zip(scratch.iter()).map(|(a, b)| a * b).sum::<f64>();
                next.push(if l + 1 < n_layers { silu(z) } else { z });
            }
            std::mem::swap(scratch, &mut next);
        }
        scratch[0]
    }

    /// Pointwise prediction in original units.
    pub fn predict(&self, covariates: &[f64]) -> Result<f64> {
        if covariates.len() != self.in_dim() {
            return Err(GmwbError::Regression(format!(
                "covariate dimension {} does not match model input {}",
                covariates.len(),
                self.in_dim()
            )));
        }
        let x: Vec<f64> = covariates
            .iter()
            .zip(self.x_mean.iter().zip(&self.x_std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect();
        let mut scratch = Vec::new();
        Ok(self.y_mean + self.y_std * self.forward_standardized(&x, &mut scratch))
    }

    /// Batched prediction; `xs` is row-major `n x in_dim`.
    pub fn predict_batch(&self, xs: &[f64], out: &mut [f64]) {
        let d = self.in_dim();
        let mut scratch = Vec::new();
        let mut x = vec![0.0; d];
        for (i, slot) in out.iter_mut().enumerate() {
            for j in 0..d {
                x[j] = (xs[i * d + j] - self.x_mean[j]) / self.x_std[j];
            }
            *slot = self.y_mean + self.y_std * self.forward_standardized(&x, &mut scratch);
        }
    }
}

/// Training schedule. Defaults follow the production settings: 2,000 epochs
/// of Adam with learning rate 1e-3, decoupled weight decay 1e-5, cosine
/// annealing to zero, full-batch gradients.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Decoupled weight decay (AdamW-style), not L2-in-gradient.
    pub weight_decay: f64,
    /// Cosine annealing floor.
    pub lr_min: f64,
    /// `None` = full batch.
    pub minibatch: Option<usize>,
    pub seed: u64,
    pub hidden_width: usize,
    pub hidden_layers: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 2000,
            learning_rate: 1e-3,
            weight_decay: 1e-5,
            lr_min: 0.0,
            minibatch: None,
            seed: 0,
            hidden_width: 128,
            hidden_layers: 3,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(GmwbError::Regression("epochs must be positive".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(GmwbError::Regression("learning rate must be positive".into()));
        }
        Ok(())
    }
}

/// Gradient of the batch-mean squared error with respect to every weight
/// and bias, computed by backpropagation. `xs` are standardized inputs,
/// `ys` standardized targets, both restricted to `idx`.
fn batch_gradient(
    model: &MlpModel,
    xs: &[f64],
    ys: &[f64],
    idx: &[usize],
    grad_w: &mut [Vec<f64>],
    grad_b: &mut [Vec<f64>],
) -> f64 {
    let d = model.in_dim();
    let n_layers = model.dims.len() - 1;
    for g in grad_w.iter_mut() {
        g.iter_mut().for_each(|v| *v = 0.0);
    }
    for g in grad_b.iter_mut() {
        g.iter_mut().for_each(|v| *v = 0.0);
    }

    let mut acts: Vec<Vec<f64>> = model.dims.iter().map(|&w| vec![0.0; w]).collect();
    let mut pre: Vec<Vec<f64>> = model.dims[1..].iter().map(|&w| vec![0.0; w]).collect();
    let mut delta: Vec<f64> = Vec::new();
    let mut delta_prev: Vec<f64> = Vec::new();

    let inv_b = 1.0 / idx.len() as f64;
    let mut loss = 0.0;

    for &i in idx {
        acts[0].copy_from_slice(&xs[i * d..(i + 1) * d]);
        for l in 0..n_layers {
            let (fan_in, fan_out) = (model.dims[l], model.dims[l + 1]);
            let w = &model.weights[l];
            for o in 0..fan_out {
                let row = &w[o * fan_in..(o + 1) * fan_in];
                let z = model.biases[l][o]
                    + row.iter().zip(acts[l].iter()).map(|(a, b)| a * b).sum::<f64>();
                pre[l][o] = z;
                acts[l + 1][o] = if l + 1 < n_layers { silu(z) } else { z };
            }
        }
        let err = acts[n_layers][0] - ys[i];
        loss += err * err * inv_b;

        delta.clear();
        delta.push(2.0 * err * inv_b);
        for l in (0..n_layers).rev() {
            let (fan_in, fan_out) = (model.dims[l], model.dims[l + 1]);
            let gw = &mut grad_w[l];
            for o in 0..fan_out {
                let dz = delta[o];
                grad_b[l][o] += dz;
                let row = &mut gw[o * fan_in..(o + 1) * fan_in];
                for (slot, a) in row.iter_mut().zip(acts[l].iter()) {
                    *slot += dz * a;
                }
            }
            if l > 0 {
                delta_prev.clear();
                delta_prev.resize(fan_in, 0.0);
                let w = &model.weights[l];
                for o in 0..fan_out {
                    let dz = delta[o];
                    let row = &w[o * fan_in..(o + 1) * fan_in];
                    for (dp, wv) in delta_prev.iter_mut().zip(row.iter()) {
                        *dp += dz * wv;
                    }
                }
                for (dp, z) in delta_prev.iter_mut().zip(pre[l - 1].iter()) {
                    *dp *= silu_grad(*z);
                }
                std::mem::swap(&mut delta, &mut delta_prev);
            }
        }
    }
    loss
}

/// Trained model plus the per-epoch loss trace (standardized units).
pub struct MlpFit {
    pub model: MlpModel,
    pub loss_history: Vec<f64>,
}

/// Gradient of the batch-mean squared error in *original* units with
/// respect to every weight and bias. Exposed for the finite-difference
/// verification battery; not part of the training loop.
#[allow(clippy::type_complexity)]
pub fn loss_gradient_for_check(
    model: &MlpModel,
    inputs: &[f64],
    targets: &[f64],
) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let d = model.in_dim();
    let n = targets.len();
    if inputs.len() != n * d {
        return Err(GmwbError::Regression("shape mismatch in gradient check".into()));
    }
    let mut xs = vec![0.0; n * d];
    for i in 0..n {
        for j in 0..d {
            xs[i * d + j] = (inputs[i * d + j] - model.x_mean[j]) / model.x_std[j];
        }
    }
    let ys: Vec<f64> = targets.iter().map(|y| (y - model.y_mean) / model.y_std).collect();
    let idx: Vec<usize> = (0..n).collect();
    let mut gw: Vec<Vec<f64>> = model.weights.iter().map(|w| vec![0.0; w.len()]).collect();
    let mut gb: Vec<Vec<f64>> = model.biases.iter().map(|b| vec![0.0; b.len()]).collect();
    batch_gradient(model, &xs, &ys, &idx, &mut gw, &mut gb);
    // The standardized loss is the original-unit loss divided by y_std^2.
    let scale = model.y_std * model.y_std;
    for g in gw.iter_mut().chain(gb.iter_mut()) {
        g.iter_mut().for_each(|v| *v *= scale);
    }
    Ok((gw, gb))
}

/// Fits the network to `(inputs, targets)` where `inputs` is row-major
/// `n_samples x in_dim`.
///
/// Deterministic for a fixed `cfg.seed`: initialization, shuffling and the
/// fixed-chunk parallel gradient reduction are all order-stable, so the
/// fitted weights do not depend on thread count.
pub fn mlp_fit(inputs: &[f64], in_dim: usize, targets: &[f64], cfg: &TrainConfig) -> Result<MlpFit> {
    cfg.validate()?;
    if in_dim == 0 || targets.is_empty() || inputs.len() != targets.len() * in_dim {
        return Err(GmwbError::Regression(format!(
            "shape mismatch: {} inputs for {} targets of dim {in_dim}",
            inputs.len(),
            targets.len()
        )));
    }
    if inputs.iter().any(|x| !x.is_finite()) || targets.iter().any(|x| !x.is_finite()) {
        return Err(GmwbError::Regression("non-finite training data".into()));
    }
    let n = targets.len();

    let mut model = MlpModel::with_architecture(in_dim, cfg.hidden_width, cfg.hidden_layers, cfg.seed);

    // Standardization constants from the training set.
    for j in 0..in_dim {
        let mean = (0..n).map(|i| inputs[i * in_dim + j]).sum::<f64>() / n as f64;
        let var = (0..n).map(|i| (inputs[i * in_dim + j] - mean).powi(2)).sum::<f64>() / n as f64;
        model.x_mean[j] = mean;
        model.x_std[j] = var.sqrt().max(1e-12);
    }
    let y_mean = targets.iter().sum::<f64>() / n as f64;
    let y_var = targets.iter().map(|y| (y - y_mean).powi(2)).sum::<f64>() / n as f64;
    model.y_mean = y_mean;
    model.y_std = y_var.sqrt().max(1e-12);

    let mut xs = vec![0.0; n * in_dim];
    for i in 0..n {
        for j in 0..in_dim {
            xs[i * in_dim + j] = (inputs[i * in_dim + j] - model.x_mean[j]) / model.x_std[j];
        }
    }
    let ys: Vec<f64> = targets.iter().map(|y| (y - model.y_mean) / model.y_std).collect();

    // Adam state.
    let mut m_w: Vec<Vec<f64>> = model.weights.iter().map(|w| vec![0.0; w.len()]).collect();
    let mut v_w = m_w.clone();
    let mut m_b: Vec<Vec<f64>> = model.biases.iter().map(|b| vec![0.0; b.len()]).collect();
    let mut v_b = m_b.clone();
    let (beta1, beta2, eps): (f64, f64, f64) = (0.9, 0.999, 1e-8);

    let mut order: Vec<usize> = (0..n).collect();
    let mut shuffle_rng = path_rng(cfg.seed, 1);
    let batch = cfg.minibatch.unwrap_or(n).max(1).min(n);
    let mut loss_history = Vec::with_capacity(cfg.epochs);
    let mut step = 0usize;

    const CHUNK: usize = 1024;

    for epoch in 0..cfg.epochs {
        let lr = if cfg.epochs == 1 {
            cfg.learning_rate
        } else {
            let phase = std::f64::consts::PI * epoch as f64 / (cfg.epochs - 1) as f64;
            cfg.lr_min + 0.5 * (cfg.learning_rate - cfg.lr_min) * (1.0 + phase.cos())
        };

        if cfg.minibatch.is_some() {
            // Fisher-Yates with the dedicated shuffle stream.
            for i in (1..n).rev() {
                let j = shuffle_rng.random_range(0..=i);
                order.swap(i, j);
            }
        }

        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for batch_idx in order.chunks(batch) {
            // Fixed-size chunks keep the gradient reduction order stable
            // regardless of the thread count.
            #[allow(clippy::type_complexity)]
            let partials: Vec<(Vec<Vec<f64>>, Vec<Vec<f64>>, f64)> = batch_idx
                .par_chunks(CHUNK)
                .map(|chunk| {
                    let mut gw: Vec<Vec<f64>> = model.weights.iter().map(|w| vec![0.0; w.len()]).collect();
                    let mut gb: Vec<Vec<f64>> = model.biases.iter().map(|b| vec![0.0; b.len()]).collect();
                    let loss = batch_gradient(&model, &xs, &ys, chunk, &mut gw, &mut gb);
                    // Per-chunk gradients are scaled by chunk size inside
                    // batch_gradient (1/|chunk|); reweight to the batch.
                    let w = chunk.len() as f64 / batch_idx.len() as f64;
                    for g in gw.iter_mut().chain(gb.iter_mut()) {
                        g.iter_mut().for_each(|v| *v *= w);
                    }
                    (gw, gb, loss * w)
                })
                .collect();

            let mut grad_w: Vec<Vec<f64>> = model.weights.iter().map(|w| vec![0.0; w.len()]).collect();
            let mut grad_b: Vec<Vec<f64>> = model.biases.iter().map(|b| vec![0.0; b.len()]).collect();
            let mut loss = 0.0;
            for (gw, gb, l) in partials {
                for (acc, g) in grad_w.iter_mut().zip(gw) {
                    for (a, v) in acc.iter_mut().zip(g) {
                        *a += v;
                    }
                }
                for (acc, g) in grad_b.iter_mut().zip(gb) {
                    for (a, v) in acc.iter_mut().zip(g) {
                        *a += v;
                    }
                }
                loss += l;
            }
            if !loss.is_finite() {
                return Err(GmwbError::Regression(format!(
                    "non-finite training loss at epoch {epoch}; check target scale and learning rate"
                )));
            }
            epoch_loss += loss;
            batches += 1;

            step += 1;
            let bc1 = 1.0 - beta1.powi(step as i32);
            let bc2 = 1.0 - beta2.powi(step as i32);
            let adam = |theta: &mut [f64], m: &mut [f64], v: &mut [f64], g: &[f64]| {
                for i in 0..theta.len() {
                    m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                    v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                    let m_hat = m[i] / bc1;
                    let v_hat = v[i] / bc2;
                    theta[i] -= lr * (m_hat / (v_hat.sqrt() + eps) + cfg.weight_decay * theta[i]);
                }
            };
            for l in 0..model.weights.len() {
                adam(&mut model.weights[l], &mut m_w[l], &mut v_w[l], &grad_w[l]);
                adam(&mut model.biases[l], &mut m_b[l], &mut v_b[l], &grad_b[l]);
            }
        }
        loss_history.push(epoch_loss / batches as f64);
    }

    Ok(MlpFit { model, loss_history })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn silu_definition() {
        assert_eq!(silu(0.0), 0.0);
        assert!((silu(30.0) - 30.0).abs() < 1e-10);
        assert!(silu(-30.0).abs() < 1e-10);
        assert!((silu(1.0) - 1.0 / (1.0 + (-1.0f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn production_parameter_counts() {
        let m2 = MlpModel::with_architecture(2, 128, 3, 0);
        let m3 = MlpModel::with_architecture(3, 128, 3, 0);
        assert_eq!(m2.param_count(), 33_537);
        assert_eq!(m3.param_count(), 33_665);
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn backprop_matches_central_finite_differences() {
        let cfg = TrainConfig {
            hidden_width: 8,
            hidden_layers: 3,
            seed: 5,
            ..TrainConfig::default()
        };
        let model = MlpModel::with_architecture(2, cfg.hidden_width, cfg.hidden_layers, cfg.seed);
        let n = 10usize;
        let mut rng = path_rng(55, 0);
        let xs: Vec<f64> = (0..n * 2).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let ys: Vec<f64> = (0..n).map(|i| xs[i * 2] - 0.5 * xs[i * 2 + 1]).collect();
        let idx: Vec<usize> = (0..n).collect();

        let mut gw: Vec<Vec<f64>> = model.weights.iter().map(|w| vec![0.0; w.len()]).collect();
        let mut gb: Vec<Vec<f64>> = model.biases.iter().map(|b| vec![0.0; b.len()]).collect();
        batch_gradient(&model, &xs, &ys, &idx, &mut gw, &mut gb);

        let loss_of = |m: &MlpModel| -> f64 {
            let mut scratch = Vec::new();
            idx.iter()
                .map(|&i| {
                    let out = m.forward_standardized(&xs[i * 2..(i + 1) * 2], &mut scratch);
                    (out - ys[i]).powi(2)
                })
                .sum::<f64>()
                / n as f64
        };

        let h = 1e-6;
        let mut worst: f64 = 0.0;
        for l in 0..model.weights.len() {
            for k in 0..model.weights[l].len() {
                let mut plus = model.clone();
                plus.weights[l][k] += h;
                let mut minus = model.clone();
                minus.weights[l][k] -= h;
                let fd = (loss_of(&plus) - loss_of(&minus)) / (2.0 * h);
                let an = gw[l][k];
                let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-6);
                worst = worst.max(rel);
            }
            for k in 0..model.biases[l].len() {
                let mut plus = model.clone();
                plus.biases[l][k] += h;
                let mut minus = model.clone();
                minus.biases[l][k] -= h;
                let fd = (loss_of(&plus) - loss_of(&minus)) / (2.0 * h);
                let an = gb[l][k];
                let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-6);
                worst = worst.max(rel);
            }
        }
        assert!(worst < 1e-4, "max relative gradient error {worst}");
    }

    #[test]
    fn sanity_fit_of_linear_function() {
        let n = 1000usize;
        let mut rng = path_rng(56, 0);
        let mut xs = vec![0.0; n * 2];
        let mut ys = vec![0.0; n];
        for i in 0..n {
            xs[i * 2] = rng.random::<f64>() * 2.0 - 1.0;
            xs[i * 2 + 1] = rng.random::<f64>() * 2.0 - 1.0;
            ys[i] = xs[i * 2];
        }
        let cfg = TrainConfig {
            epochs: 200,
            hidden_width: 32,
            seed: 7,
            ..TrainConfig::default()
        };
        let fit = mlp_fit(&xs, 2, &ys, &cfg).unwrap();
        let mut preds = vec![0.0; n];
        fit.model.predict_batch(&xs, &mut preds);
        let mse: f64 = preds.iter().zip(&ys).map(|(p, y)| (p - y).powi(2)).sum::<f64>() / n as f64;
        assert!(mse < 1e-3, "mse {mse}");

        // Smoothed loss must not increase start to finish.
        let head: f64 = fit.loss_history[..10].iter().sum::<f64>() / 10.0;
        let tail: f64 = fit.loss_history[fit.loss_history.len() - 10..].iter().sum::<f64>() / 10.0;
        assert!(tail <= head, "loss rose: head {head}, tail {tail}");
    }

    #[test]
    fn zeroed_head_predicts_target_mean() {
        let mut model = MlpModel::with_architecture(2, 16, 3, 1);
        model.y_mean = 0.42;
        model.y_std = 1.7;
        let last = model.weights.len() - 1;
        model.weights[last].iter_mut().for_each(|w| *w = 0.0);
        model.biases[last].iter_mut().for_each(|b| *b = 0.0);
        for &x in &[[0.0, 0.0], [1.0, -3.0], [100.0, 2.0]] {
            assert!((model.predict(&x).unwrap() - 0.42).abs() < 1e-15);
        }
    }

    #[test]
    fn fixed_seed_is_bitwise_deterministic() {
        let n = 64usize;
        let mut rng = path_rng(57, 0);
        let xs: Vec<f64> = (0..n * 2).map(|_| rng.random::<f64>()).collect();
        let ys: Vec<f64> = (0..n).map(|i| xs[i * 2] * 0.3).collect();
        let cfg = TrainConfig {
            epochs: 20,
            hidden_width: 8,
            minibatch: Some(16),
            seed: 11,
            ..TrainConfig::default()
        };
        let a = mlp_fit(&xs, 2, &ys, &cfg).unwrap();
        let b = mlp_fit(&xs, 2, &ys, &cfg).unwrap();
        assert_eq!(a.model.weights, b.model.weights);
        assert_eq!(a.model.biases, b.model.biases);
    }

    #[test]
    fn permuted_sample_order_leaves_full_batch_fit_unchanged() {
        let n = 128usize;
        let mut rng = path_rng(58, 0);
        let xs: Vec<f64> = (0..n * 2).map(|_| rng.random::<f64>()).collect();
        let ys: Vec<f64> = (0..n).map(|i| xs[i * 2] - xs[i * 2 + 1]).collect();

        let mut xs_rev = vec![0.0; n * 2];
        let mut ys_rev = vec![0.0; n];
        for i in 0..n {
            xs_rev[i * 2] = xs[(n - 1 - i) * 2];
            xs_rev[i * 2 + 1] = xs[(n - 1 - i) * 2 + 1];
            ys_rev[i] = ys[n - 1 - i];
        }
        let cfg = TrainConfig {
            epochs: 30,
            hidden_width: 8,
            seed: 3,
            ..TrainConfig::default()
        };
        let a = mlp_fit(&xs, 2, &ys, &cfg).unwrap();
        let b = mlp_fit(&xs_rev, 2, &ys_rev, &cfg).unwrap();
        // Full-batch gradients are permutation invariant up to summation
        // rounding; predictions agree to training tolerance.
        for i in 0..n {
            let pa = a.model.predict(&xs[i * 2..(i + 1) * 2]).unwrap();
            let pb = b.model.predict(&xs[i * 2..(i + 1) * 2]).unwrap();
            assert!((pa - pb).abs() < 1e-6, "{pa} vs {pb}");
        }
    }

    #[test]
    fn error_paths() {
        let cfg = TrainConfig::default();
        assert!(mlp_fit(&[], 2, &[], &cfg).is_err());
        assert!(mlp_fit(&[1.0, 2.0], 2, &[f64::NAN], &cfg).is_err());
        let bad = TrainConfig { epochs: 0, ..TrainConfig::default() };
        assert!(mlp_fit(&[1.0, 2.0], 2, &[1.0], &bad).is_err());
        let model = MlpModel::with_architecture(2, 8, 3, 0);
        assert!(model.predict(&[1.0, 2.0, 3.0]).is_err());
    }
}
