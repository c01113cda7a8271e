//! The finite-difference gradient suite behind `susing gradcheck`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{
    acoustic_backward, acoustic_forward, acoustic_forward_cached, stripe_pool,
    stripe_pool_backward, stripe_pool_forward, sunet_backward, sunet_forward, sunet_forward_cached,
    EmbedderConfig, ModelConfig, ModelParams, SUNetConfig, StripePoolParams,
};
use crate::error::Result;
use crate::score::FrameScore;
use crate::tensor::gradcheck::{check_gradient, CheckReport};
use crate::tensor::{Activation, Axis, Node, Op, Tensor};

/// Central-difference step used throughout the suite.
pub const GRADCHECK_EPS: f64 = 1e-5;
/// Pass threshold on the maximum relative error.
pub const GRADCHECK_TOL: f64 = 1e-4;

/// Result for one operation, maximized over its input and parameters.
#[derive(Clone, Debug)]
pub struct GradCheckRow {
    pub op: String,
    pub coords: usize,
    pub max_rel_error: f64,
    /// Tensor holding the worst coordinate.
    pub worst: String,
}

impl GradCheckRow {
    pub fn passed(&self) -> bool {
        self.max_rel_error < GRADCHECK_TOL
    }
}

struct Acc {
    row: GradCheckRow,
}

impl Acc {
    fn new(op: &str) -> Self {
        Self {
            row: GradCheckRow {
                op: op.to_string(),
                coords: 0,
                max_rel_error: 0.0,
                worst: String::new(),
            },
        }
    }

    fn add(&mut self, tensor: &str, rep: CheckReport) {
        self.row.coords += rep.coords;
        if rep.max_rel_error > self.row.max_rel_error || rep.max_rel_error.is_nan() {
            self.row.max_rel_error = rep.max_rel_error;
            self.row.worst = tensor.to_string();
        }
    }
}

fn param_mut<'a>(op: &'a mut Op<f64>, name: &str) -> Option<&'a mut Tensor<f64>> {
    match (op, name) {
        (Op::Conv2d { weight, .. }, "weight")
        | (Op::TransposedConv2d { weight, .. }, "weight")
        | (Op::Conv1d { weight, .. }, "weight")
        | (Op::Dense { weight, .. }, "weight") => Some(weight),
        (Op::Conv2d { bias, .. }, "bias")
        | (Op::TransposedConv2d { bias, .. }, "bias")
        | (Op::Conv1d { bias, .. }, "bias")
        | (Op::Dense { bias, .. }, "bias") => Some(bias),
        _ => None,
    }
}

/// `<r, y - y0>`: the projection loss shifted by its value at the base
/// point. The gradient is that of `<r, y>`, but the summands are small near
/// `y0`, so the final reduction adds no rounding noise at the scale of the
/// loss itself.
fn centered_dot(y: &Tensor<f64>, y0: &Tensor<f64>, r: &Tensor<f64>) -> Result<f64> {
    y.expect_same_shape(y0)?;
    y.expect_same_shape(r)?;
    Ok(y.data()
        .iter()
        .zip(y0.data())
        .zip(r.data())
        .map(|((a, b), w)| (a - b) * w)
        .sum())
}

/// Checks one op under the loss `<r, op(x)>` with a fixed random `r`.
fn check_op(name: &str, op: Op<f64>, x: Tensor<f64>, rng: &mut ChaCha8Rng) -> Result<GradCheckRow> {
    let mut node = Node::new(op.clone());
    let y = node.forward(&x)?;
    let r = Tensor::randn(y.shape(), 1.0, rng);
    let g = node.backward(&r)?;
    let mut acc = Acc::new(name);
    let rep = check_gradient(
        |xp| centered_dot(&Node::new(op.clone()).forward(xp)?, &y, &r),
        &x,
        &g.input,
        GRADCHECK_EPS,
    )?;
    acc.add("input", rep);
    for (pname, analytic) in &g.params {
        let mut probe = op.clone();
        let value = param_mut(&mut probe, pname)
            .expect("bundle names match op")
            .clone();
        let rep = check_gradient(
            |t| {
                let mut q = op.clone();
                *param_mut(&mut q, pname).expect("known parameter") = t.clone();
                centered_dot(&Node::new(q).forward(&x)?, &y, &r)
            },
            &value,
            analytic,
            GRADCHECK_EPS,
        )?;
        acc.add(pname, rep);
    }
    Ok(acc.row)
}

/// Random biases keep units away from activation kinks at initialization.
fn jitter_biases(p: &mut ModelParams<f64>, rng: &mut ChaCha8Rng) {
    for (name, t) in p.iter_mut() {
        if name.ends_with(".bias") {
            *t = Tensor::randn(t.shape(), 0.1, rng);
        }
    }
}

/// Depth-3, base-2 SU-net used by the mini-network checks.
pub fn mini_sunet_config() -> SUNetConfig {
    SUNetConfig {
        depth: 3,
        base_channels: 2,
        ..Default::default()
    }
}

fn check_stripe(rng: &mut ChaCha8Rng) -> Result<GradCheckRow> {
    let c = 2;
    let mut p = ModelParams::<f64>::new();
    p.insert("s.conv_h.weight", Tensor::randn(&[c, c, 3], 0.5, rng));
    p.insert("s.conv_h.bias", Tensor::randn(&[c], 0.5, rng));
    p.insert("s.conv_v.weight", Tensor::randn(&[c, c, 3], 0.5, rng));
    p.insert("s.conv_v.bias", Tensor::randn(&[c], 0.5, rng));
    p.insert("s.fuse.weight", Tensor::randn(&[c, c, 1, 1], 0.5, rng));
    p.insert("s.fuse.bias", Tensor::randn(&[c], 0.5, rng));
    let x = Tensor::randn(&[c, 6, 5], 1.0, rng);
    let sp = StripePoolParams::from_params(&p, "s")?;
    let (z, cache) = stripe_pool_forward(&x, &sp)?;
    let g = stripe_pool_backward(&sp, &cache, &Tensor::full(z.shape(), 1.0))?;
    let mut acc = Acc::new("stripe_pool");
    acc.add(
        "input",
        check_gradient(
            |xp| Ok(stripe_pool(xp, &sp)?.sum()),
            &x,
            &g.input,
            GRADCHECK_EPS,
        )?,
    );
    let mut grads = ModelParams::new();
    g.accumulate_into(&mut grads, "s")?;
    for name in p.names() {
        let rep = check_gradient(
            |t| {
                let mut q = p.clone();
                q.insert(name.clone(), t.clone());
                Ok(stripe_pool(&x, &StripePoolParams::from_params(&q, "s")?)?.sum())
            },
            p.get(name)?,
            grads.get(name)?,
            GRADCHECK_EPS,
        )?;
        acc.add(name, rep);
    }
    Ok(acc.row)
}

fn check_mini_sunet(seed: u64, rng: &mut ChaCha8Rng) -> Result<GradCheckRow> {
    let cfg = mini_sunet_config();
    let model = ModelConfig {
        sunet: cfg,
        bins: 33,
        ..Default::default()
    };
    let mut all = ModelParams::<f64>::init(&model, seed)?;
    jitter_biases(&mut all, rng);
    let mut params = ModelParams::new();
    for (name, t) in all.iter() {
        if !["embed.", "score.", "spec."]
            .iter()
            .any(|p| name.starts_with(p))
        {
            params.insert(name.clone(), t.clone());
        }
    }
    let x = Tensor::randn(&[2, 33, 8], 1.0, rng);
    let r = Tensor::randn(&[1, 33, 8], 1.0, rng);
    let (y0, cache) = sunet_forward_cached(&x, &params, &cfg)?;
    let mut grads = ModelParams::new();
    let gx = sunet_backward(&params, &cfg, &cache, &r, &mut grads)?;
    let loss = |x: &Tensor<f64>, p: &ModelParams<f64>| {
        centered_dot(&sunet_forward(x, p, &cfg)?.output, &y0, &r)
    };
    let mut acc = Acc::new("sunet_mini");
    acc.add(
        "input",
        check_gradient(|xp| loss(xp, &params), &x, &gx, GRADCHECK_EPS)?,
    );
    for name in params.names() {
        let rep = check_gradient(
            |t| {
                let mut q = params.clone();
                q.insert(name.clone(), t.clone());
                loss(&x, &q)
            },
            params.get(name)?,
            grads.get(name)?,
            GRADCHECK_EPS,
        )?;
        acc.add(name, rep);
    }
    Ok(acc.row)
}

/// Embedding and both pre-nets inside the full acoustic graph (SU-net
/// parameters are covered by the mini SU-net row).
fn check_acoustic_front(seed: u64, rng: &mut ChaCha8Rng) -> Result<GradCheckRow> {
    let cfg = ModelConfig {
        sunet: mini_sunet_config(),
        embed: EmbedderConfig {
            phoneme_dim: 6,
            note_dim: 3,
            phoneme_vocab: 5,
            note_vocab: 7,
        },
        bins: 33,
        prenet_kernel: 5,
    };
    let mut params = ModelParams::<f64>::init(&cfg, seed)?;
    jitter_biases(&mut params, rng);
    let fs = FrameScore::new(
        (0..8).map(|i| (i * 5 + 1) % 7).collect(),
        (0..8).map(|i| (i * 3) % 5).collect(),
    )?;
    let prev = Tensor::rand_uniform(&[33, 8], 0.0, 1.0, rng);
    let r = Tensor::randn(&[33, 8], 1.0, rng);
    let (y0, cache) = acoustic_forward_cached(&fs, &prev, &params, &cfg)?;
    let grads = acoustic_backward(&params, &cfg, &cache, &r)?;
    let mut acc = Acc::new("acoustic_front");
    for name in params.names().filter(|n| {
        ["embed.", "score.", "spec."]
            .iter()
            .any(|p| n.starts_with(p))
    }) {
        let rep = check_gradient(
            |t| {
                let mut q = params.clone();
                q.insert(name.clone(), t.clone());
                centered_dot(&acoustic_forward(&fs, &prev, &q, &cfg)?, &y0, &r)
            },
            params.get(name)?,
            grads.get(name)?,
            GRADCHECK_EPS,
        )?;
        acc.add(name, rep);
    }
    Ok(acc.row)
}

/// Runs every check in double precision with `eps = 1e-5`. All randomness
/// derives from `seed`.
pub fn gradient_suite(seed: u64) -> Result<Vec<GradCheckRow>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    let rng = &mut rng;

    let w = Tensor::randn(&[3, 2, 5, 5], 0.3, rng);
    let b = Tensor::randn(&[3], 0.3, rng);
    let x = Tensor::randn(&[2, 9, 8], 1.0, rng);
    rows.push(check_op(
        "conv2d",
        Op::Conv2d {
            weight: w,
            bias: b,
            stride: 2,
            padding: 2,
        },
        x,
        rng,
    )?);

    // mirrors the conv2d above: 3 x 5 x 4 back to 2 x 9 x 8
    let w = Tensor::randn(&[3, 2, 5, 5], 0.3, rng);
    let b = Tensor::randn(&[2], 0.3, rng);
    let x = Tensor::randn(&[3, 5, 4], 1.0, rng);
    rows.push(check_op(
        "transposed_conv2d",
        Op::TransposedConv2d {
            weight: w,
            bias: b,
            stride: 2,
            padding: 2,
            out_size: (9, 8),
        },
        x,
        rng,
    )?);

    let w = Tensor::randn(&[4, 3, 5], 0.3, rng);
    let b = Tensor::randn(&[4], 0.3, rng);
    let x = Tensor::randn(&[3, 11], 1.0, rng);
    rows.push(check_op(
        "conv1d",
        Op::Conv1d {
            weight: w,
            bias: b,
            stride: 1,
            padding: 2,
        },
        x,
        rng,
    )?);

    let w = Tensor::randn(&[5, 7], 0.3, rng);
    let b = Tensor::randn(&[5], 0.3, rng);
    let x = Tensor::randn(&[4, 7], 1.0, rng);
    rows.push(check_op("dense", Op::Dense { weight: w, bias: b }, x, rng)?);

    for (name, kind) in [
        ("relu", Activation::Relu),
        ("leaky_relu", Activation::LeakyRelu(0.2)),
        ("sigmoid", Activation::Sigmoid),
    ] {
        let x = Tensor::randn(&[3, 4, 5], 1.0, rng);
        rows.push(check_op(name, Op::Activation(kind), x, rng)?);
    }
    for (name, axis) in [("mean_width", Axis::Width), ("mean_height", Axis::Height)] {
        let x = Tensor::randn(&[2, 4, 5], 1.0, rng);
        rows.push(check_op(name, Op::AxisMean(axis), x, rng)?);
    }

    rows.push(check_stripe(rng)?);
    rows.push(check_mini_sunet(seed, rng)?);
    rows.push(check_acoustic_front(seed, rng)?);
    Ok(rows)
}
