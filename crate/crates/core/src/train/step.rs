use super::{AdamState, Segment, TrainConfig};
use crate::error::{arg_err, dim_err, Error, Result};
use crate::model::{
    acoustic_backward_with, acoustic_forward, acoustic_forward_cached, ClampGrad, Grads,
    ModelConfig, ModelParams,
};
use crate::tensor::Tensor;

/// Worker threads for per-item forward/backward: `SUSING_THREADS` when set
/// to a positive integer, otherwise the available parallelism.
pub fn worker_threads() -> usize {
    std::env::var("SUSING_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Sum of `|pred - target|` over the first `valid` frames, and the
/// gradient of that sum scaled by `scale` (`sign(0) = 0`).
pub fn masked_l1(
    pred: &Tensor<f32>,
    target: &Tensor<f32>,
    valid: usize,
    scale: f32,
) -> Result<(f64, Tensor<f32>)> {
    if pred.shape() != target.shape() || pred.rank() != 2 {
        return dim_err(format!(
            "masked_l1: prediction {:?} vs target {:?}",
            pred.shape(),
            target.shape()
        ));
    }
    let t_len = pred.dim(1);
    let mut grad = Tensor::zeros(pred.shape());
    let mut sum = 0.0f64;
    let (p, t, g) = (pred.data(), target.data(), grad.data_mut());
    for i in 0..p.len() {
        if i % t_len >= valid {
            continue;
        }
        let d = p[i] - t[i];
        sum += d.abs() as f64;
        g[i] = if d > 0.0 {
            scale
        } else if d < 0.0 {
            -scale
        } else {
            0.0
        };
    }
    Ok((sum, grad))
}

fn valid_scalars(batch: &[Segment], bins: usize) -> Result<usize> {
    let n: usize = batch.iter().map(|s| s.valid.min(s.frames())).sum::<usize>() * bins;
    if n == 0 {
        return arg_err("batch has no valid frames");
    }
    Ok(n)
}

/// Forward and backward for one item; returns the L1 sum and gradients.
/// The output clamp passes gradients through so dead outputs can recover.
fn item_grads(
    seg: &Segment,
    params: &ModelParams<f32>,
    model: &ModelConfig,
    scale: f32,
) -> Result<(f64, Grads<f32>)> {
    let (pred, cache) = acoustic_forward_cached(&seg.score, &seg.prev, params, model)?;
    let (sum, g) = masked_l1(&pred, &seg.target, seg.valid, scale)?;
    Ok((
        sum,
        acoustic_backward_with(params, model, &cache, &g, ClampGrad::PassThrough)?,
    ))
}

/// Mean masked L1 loss of a batch and its gradient. Items may run on
/// several threads; their gradients are summed in batch order.
pub fn batch_loss_and_grads(
    batch: &[Segment],
    params: &ModelParams<f32>,
    model: &ModelConfig,
) -> Result<(f64, Grads<f32>)> {
    let n = valid_scalars(batch, model.bins)?;
    let scale = 1.0 / n as f32;
    let threads = worker_threads().min(batch.len()).max(1);
    let results: Vec<Result<(f64, Grads<f32>)>> = if threads == 1 {
        batch
            .iter()
            .map(|s| item_grads(s, params, model, scale))
            .collect()
    } else {
        let per = batch.len().div_ceil(threads);
        std::thread::scope(|scope| {
            let handles: Vec<_> = batch
                .chunks(per)
                .map(|chunk| {
                    scope.spawn(move || {
                        chunk
                            .iter()
                            .map(|s| item_grads(s, params, model, scale))
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            handles
                .into_iter()
                .flat_map(|h| h.join().expect("worker panicked"))
                .collect()
        })
    };
    let mut total = 0.0;
    let mut grads: Option<Grads<f32>> = None;
    for r in results {
        let (sum, g) = r?;
        total += sum;
        match grads.as_mut() {
            None => grads = Some(g),
            Some(acc) => {
                for (name, t) in g.iter() {
                    acc.accumulate(name, t)?;
                }
            }
        }
    }
    let grads = grads.ok_or_else(|| Error::Argument("empty batch".into()))?;
    Ok((total / n as f64, grads))
}

/// Teacher-forced mean masked L1 over `segments`, without gradients.
pub fn evaluate_loss(
    segments: &[Segment],
    params: &ModelParams<f32>,
    model: &ModelConfig,
) -> Result<f64> {
    let n = valid_scalars(segments, model.bins)?;
    let mut total = 0.0;
    for s in segments {
        let pred = acoustic_forward(&s.score, &s.prev, params, model)?;
        total += masked_l1(&pred, &s.target, s.valid, 0.0)?.0;
    }
    Ok(total / n as f64)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepStats {
    pub loss: f64,
    /// Global gradient norm before clipping.
    pub grad_norm: f64,
    pub clipped: bool,
}

/// One optimization step on `batch`: masked L1, backward, global-norm
/// clipping and an Adam update.
///
/// A non-finite loss or gradient aborts before any parameter changes, naming
/// the first non-finite parameter (or gradient) tensor.
pub fn train_step(
    batch: &[Segment],
    params: &mut ModelParams<f32>,
    opt: &mut AdamState,
    model: &ModelConfig,
    cfg: &TrainConfig,
) -> Result<StepStats> {
    let (loss, mut grads) = batch_loss_and_grads(batch, params, model)?;
    let sq = grads.sq_norm();
    if !loss.is_finite() || !sq.is_finite() {
        let tensor = params
            .first_non_finite()
            .map(|n| format!("parameter {n}"))
            .or_else(|| grads.first_non_finite().map(|n| format!("gradient {n}")))
            .unwrap_or_else(|| "none (loss overflow)".into());
        return Err(Error::NonFinite {
            step: opt.t + 1,
            tensor,
        });
    }
    let grad_norm = sq.sqrt();
    let clipped = grad_norm > cfg.grad_clip_norm;
    if clipped {
        grads.scale((cfg.grad_clip_norm / grad_norm) as f32);
    }
    opt.update(params, &grads, cfg)?;
    Ok(StepStats {
        loss,
        grad_norm,
        clipped,
    })
}
