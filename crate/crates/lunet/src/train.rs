//! Mini-batch MSE training with deterministic seeding, plus the evaluation
//! metrics reported throughout the crate.
//!
//! The loop is single-threaded and reduces every sum in index order, so a
//! (config, seed) pair pins the trained parameters bit for bit. Two error
//! notions are kept strictly apart: the learning error compares forward
//! outputs against targets, while the inversion error compares the inverse
//! image of the *true* target against the original input. The latter is the
//! one that degrades when the fit is imperfect, because the inverse map
//! amplifies the output-space gap; the round-trip error of the net on its
//! own outputs stays near machine precision no matter how badly training
//! went.

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::checkpoint::FORMAT_VERSION;
use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::network::InvertibleNet;
use crate::optim::{Optimizer, OptimizerSpec};
use crate::rng;
use crate::tasks::DataSplit;

/// Hyperparameters of one training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Step size. Zero is allowed and leaves parameters untouched, which is
    /// useful for pipeline tests.
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerSpec,
    pub seed: u64,
}

impl TrainConfig {
    pub fn new(seed: u64) -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            epochs: 10,
            batch_size: 64,
            optimizer: OptimizerSpec::default(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "learning_rate must be finite and non-negative, got {}",
                self.learning_rate
            )));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidParameter("epochs must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidParameter("batch_size must be positive".into()));
        }
        self.optimizer.validate()
    }
}

/// One epoch's worth of metrics, emitted as a JSONL line by the front end.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    /// Schema version, shared with the checkpoint format.
    pub v: u32,
    pub epoch: usize,
    /// Mean training MSE over the epoch's batches.
    pub train_mse: f64,
    /// Learning error: mean MSE of forward outputs vs targets on the eval split.
    pub eval_mse: f64,
    /// Worst absolute output coordinate error on the eval split.
    pub eval_max_abs: f64,
    /// Inversion error: mean MSE of inverse(true target) vs input.
    pub inversion_error: f64,
    /// Worst absolute coordinate error of inverse(true target) vs input.
    pub inversion_max_abs: f64,
    /// Max infinity-norm residual of inverse(forward(x)) vs x on the eval split.
    pub round_trip_error: f64,
    /// Relative drift of the product of weight determinants since init.
    pub det_drift: f64,
    /// Per-block 1-norm condition estimates.
    pub condition: Vec<f64>,
}

/// Mean squared error and its gradient with respect to `pred`.
pub fn mse_loss(pred: &Vector, target: &Vector) -> Result<(f64, Vector)> {
    if pred.dim() != target.dim() {
        return Err(Error::DimensionMismatch {
            expected: target.dim(),
            got: pred.dim(),
        });
    }
    let n = pred.dim() as f64;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(pred.dim());
    for (p, t) in pred.iter().zip(target.iter()) {
        let d = p - t;
        loss += d * d;
        grad.push(2.0 * d / n);
    }
    Ok((loss / n, Vector::new(grad)))
}

/// Forward/inverse evaluation summary on one split. Shared by the training
/// loop and the eval command so both report identical numbers.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalSummary {
    pub eval_mse: f64,
    pub eval_max_abs: f64,
    pub inversion_error: f64,
    pub inversion_max_abs: f64,
    pub round_trip_error: f64,
}

fn mse_and_max(a: &Vector, b: &Vector) -> (f64, f64) {
    let mut sq = 0.0;
    let mut worst: f64 = 0.0;
    for (x, y) in a.iter().zip(b.iter()) {
        let d = x - y;
        sq += d * d;
        worst = worst.max(d.abs());
    }
    (sq / a.dim() as f64, worst)
}

/// Learning, inversion, and round-trip errors of `net` on `split`, reduced
/// in index order.
pub fn evaluate(net: &InvertibleNet, split: &DataSplit) -> Result<EvalSummary> {
    if split.is_empty() {
        return Err(Error::EmptyDataset("evaluation split".into()));
    }
    let count = split.len() as f64;
    let mut eval_mse = 0.0;
    let mut eval_max_abs: f64 = 0.0;
    let mut inv_mse = 0.0;
    let mut inv_max_abs: f64 = 0.0;
    let mut round_trip: f64 = 0.0;

    for (x, target) in split.inputs().iter().zip(split.targets()) {
        let y = net.forward(x)?;
        let (m, w) = mse_and_max(&y, target);
        eval_mse += m;
        eval_max_abs = eval_max_abs.max(w);

        let x_from_target = net.inverse(target)?;
        let (m, w) = mse_and_max(&x_from_target, x);
        inv_mse += m;
        inv_max_abs = inv_max_abs.max(w);

        let x_round = net.inverse(&y)?;
        round_trip = round_trip.max(x_round.inf_dist(x));
    }

    Ok(EvalSummary {
        eval_mse: eval_mse / count,
        eval_max_abs,
        inversion_error: inv_mse / count,
        inversion_max_abs: inv_max_abs,
        round_trip_error: round_trip,
    })
}

/// Learning error alone: mean MSE of forward outputs against targets.
pub fn evaluate_learning_error(net: &InvertibleNet, split: &DataSplit) -> Result<f64> {
    Ok(evaluate(net, split)?.eval_mse)
}

/// Inversion error alone: mean MSE of inverse(true target) against inputs.
pub fn evaluate_inversion_error(net: &InvertibleNet, split: &DataSplit) -> Result<f64> {
    Ok(evaluate(net, split)?.inversion_error)
}

/// Invert `y` after adding i.i.d. Gaussian noise of variance `sigma_sq`
/// per coordinate. Zero variance skips sampling entirely and is bit
/// identical to a plain inverse.
pub fn noise_perturbed_inversion(
    net: &InvertibleNet,
    y: &Vector,
    sigma_sq: f64,
    seed: u64,
) -> Result<Vector> {
    if !sigma_sq.is_finite() || sigma_sq < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "noise variance must be finite and non-negative, got {sigma_sq}"
        )));
    }
    if sigma_sq == 0.0 {
        return net.inverse(y);
    }
    let normal = Normal::new(0.0, sigma_sq.sqrt())
        .map_err(|e| Error::InvalidParameter(format!("noise distribution: {e}")))?;
    let mut rng = rng::stream(seed, rng::STREAM_NOISE);
    let perturbed = Vector::new(y.iter().map(|&v| v + normal.sample(&mut rng)).collect());
    net.inverse(&perturbed)
}

/// Flat layout of a network's trainable parameters: per block, the strict
/// lower triangle, then the strict upper triangle, then the bias.
fn trainable_param_count(net: &InvertibleNet) -> usize {
    net.blocks()
        .iter()
        .map(|b| b.linear.params().trainable_len() + b.linear.dim())
        .sum()
}

/// Train `net` in place; returns one MetricsRecord per epoch.
///
/// Per batch: traced forward, MSE, reverse sweep, one optimizer step over
/// l, u, and bias. The fixed diagonals are untouched by construction: the
/// sweep produces no gradient for them and the update never addresses them.
/// A non-finite batch loss aborts immediately, naming the epoch and batch.
pub fn fit(
    net: &mut InvertibleNet,
    train: &DataSplit,
    eval: &DataSplit,
    cfg: &TrainConfig,
) -> Result<Vec<MetricsRecord>> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyDataset("training split".into()));
    }
    if eval.is_empty() {
        return Err(Error::EmptyDataset("evaluation split".into()));
    }
    if train.dim() != net.dim() {
        return Err(Error::DimensionMismatch {
            expected: net.dim(),
            got: train.dim(),
        });
    }
    if eval.dim() != net.dim() {
        return Err(Error::DimensionMismatch {
            expected: net.dim(),
            got: eval.dim(),
        });
    }

    let det_at_init = net.determinant_product();
    let mut opt = Optimizer::from_spec(&cfg.optimizer, trainable_param_count(net))?;
    let mut grad_flat = vec![0.0; trainable_param_count(net)];
    let mut metrics = Vec::with_capacity(cfg.epochs);

    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 0..cfg.epochs {
        let mut shuffle_rng = rng::shuffle_stream(cfg.seed, epoch);
        order.shuffle(&mut shuffle_rng);

        let mut epoch_loss_sum = 0.0;
        for (batch_idx, batch) in order.chunks(cfg.batch_size).enumerate() {
            grad_flat.fill(0.0);
            let mut batch_loss_sum = 0.0;
            for &sample in batch {
                let trace = net.forward_traced(&train.inputs()[sample])?;
                let (loss, g) = mse_loss(trace.output(), &train.targets()[sample])?;
                batch_loss_sum += loss;
                let grads = net.backward(&trace, &g)?;
                let mut offset = 0;
                for bg in &grads.blocks {
                    for (slot, v) in grad_flat[offset..].iter_mut().zip(&bg.d_l) {
                        *slot += v;
                    }
                    offset += bg.d_l.len();
                    for (slot, v) in grad_flat[offset..].iter_mut().zip(&bg.d_u) {
                        *slot += v;
                    }
                    offset += bg.d_u.len();
                    for (slot, v) in grad_flat[offset..].iter_mut().zip(&bg.d_bias) {
                        *slot += v;
                    }
                    offset += bg.d_bias.len();
                }
            }
            let batch_loss = batch_loss_sum / batch.len() as f64;
            if !batch_loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: batch_idx,
                    value: batch_loss,
                });
            }
            epoch_loss_sum += batch_loss_sum;

            let inv_batch = 1.0 / batch.len() as f64;
            for g in grad_flat.iter_mut() {
                *g *= inv_batch;
            }
            opt.begin_step();
            let mut offset = 0;
            for block in net.blocks_mut() {
                let params = block.linear.params_mut();
                let m = params.l().len();
                opt.apply(
                    cfg.learning_rate,
                    offset,
                    params.l_mut(),
                    &grad_flat[offset..offset + m],
                );
                offset += m;
                opt.apply(
                    cfg.learning_rate,
                    offset,
                    params.u_mut(),
                    &grad_flat[offset..offset + m],
                );
                offset += m;
                let n = block.linear.dim();
                opt.apply(
                    cfg.learning_rate,
                    offset,
                    block.linear.bias_mut(),
                    &grad_flat[offset..offset + n],
                );
                offset += n;
            }
        }

        let summary = evaluate(net, eval)?;
        let det_now = net.determinant_product();
        let det_drift = (det_now - det_at_init).abs() / det_at_init.abs().max(f64::MIN_POSITIVE);
        metrics.push(MetricsRecord {
            v: FORMAT_VERSION,
            epoch,
            train_mse: epoch_loss_sum / train.len() as f64,
            eval_mse: summary.eval_mse,
            eval_max_abs: summary.eval_max_abs,
            inversion_error: summary.inversion_error,
            inversion_max_abs: summary.inversion_max_abs,
            round_trip_error: summary.round_trip_error,
            det_drift,
            condition: net.condition_estimates()?,
        });
    }
    Ok(metrics)
}
