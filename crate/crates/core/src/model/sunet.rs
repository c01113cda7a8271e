//! The stripe-pooling U-net on `(2, H, W)` inputs.
//!
//! Down layer `l`: conv (k5, s2, p2) -> leaky ReLU -> stripe pooling.
//! Up layer `l`: transposed conv back to the size recorded before down
//! layer `l` -> ReLU -> concat with that level's down activation (the raw
//! input at the last level). A final 1x1 conv and ReLU give one plane.

use super::config::SUNetConfig;
use super::params::{Grads, ModelParams};
use super::stripe::{stripe_pool_backward, stripe_pool_forward, StripeCache, StripePoolParams};
use crate::error::{dim_err, Result};
use crate::tensor::{
    activation, activation_backward, conv2d, conv2d_backward, conv_out_len, transposed_conv2d,
    transposed_conv2d_backward, Activation, ConvSpec, Scalar, Tensor,
};

/// Forward result plus the recorded pyramid.
#[derive(Clone, Debug)]
pub struct SUNetOutput<T: Scalar> {
    pub output: Tensor<T>,
    /// Spatial size after each down layer, top to bottom.
    pub down_sizes: Vec<(usize, usize)>,
    pub down_channels: Vec<usize>,
    /// Spatial size after each up layer, bottom to top.
    pub up_sizes: Vec<(usize, usize)>,
    pub up_channels: Vec<usize>,
}

/// Activations retained for [`sunet_backward`]. Vectors are indexed by
/// layer number; index 0 of `down_out` is the network input.
#[derive(Clone, Debug)]
pub struct SUNetCache<T: Scalar> {
    sizes: Vec<(usize, usize)>,
    down_pre: Vec<Tensor<T>>,
    down_act: Vec<Tensor<T>>,
    stripe: Vec<Option<StripeCache<T>>>,
    down_out: Vec<Tensor<T>>,
    up_in: Vec<Tensor<T>>,
    up_pre: Vec<Tensor<T>>,
    up_act: Vec<Tensor<T>>,
    head_in: Tensor<T>,
    head_pre: Tensor<T>,
    head_out: Tensor<T>,
}

fn leaky(cfg: &SUNetConfig) -> Activation {
    Activation::LeakyRelu(cfg.leaky_slope)
}

fn conv_spec<'a, T: Scalar>(
    p: &'a ModelParams<T>,
    name: &str,
    cfg: &SUNetConfig,
) -> Result<ConvSpec<'a, T>> {
    Ok(ConvSpec::new(
        p.get(&format!("{name}.weight"))?,
        Some(p.get(&format!("{name}.bias"))?),
        cfg.stride,
        cfg.padding,
    ))
}

fn head_spec<'a, T: Scalar>(p: &'a ModelParams<T>) -> Result<ConvSpec<'a, T>> {
    Ok(ConvSpec::new(
        p.get("output.weight")?,
        Some(p.get("output.bias")?),
        1,
        0,
    ))
}

/// Spatial sizes down the pyramid, starting with the input size.
pub fn pyramid_sizes(cfg: &SUNetConfig, h: usize, w: usize) -> Result<Vec<(usize, usize)>> {
    let mut sizes = vec![(h, w)];
    for l in 1..=cfg.depth {
        let (ph, pw) = sizes[l - 1];
        match (
            conv_out_len(ph, cfg.kernel, cfg.stride, cfg.padding),
            conv_out_len(pw, cfg.kernel, cfg.stride, cfg.padding),
        ) {
            (Some(a), Some(b)) => sizes.push((a, b)),
            _ => {
                return dim_err(format!(
                    "sunet: level {l} input {ph}x{pw} is smaller than the kernel"
                ))
            }
        }
    }
    Ok(sizes)
}

pub fn sunet_forward<T: Scalar>(
    x: &Tensor<T>,
    params: &ModelParams<T>,
    cfg: &SUNetConfig,
) -> Result<SUNetOutput<T>> {
    let (out, cache) = sunet_forward_cached(x, params, cfg)?;
    let depth = cfg.depth;
    Ok(SUNetOutput {
        output: out,
        down_sizes: cache.sizes[1..].to_vec(),
        down_channels: (1..=depth).map(|l| cache.down_out[l].dim(0)).collect(),
        up_sizes: (1..=depth)
            .rev()
            .map(|l| (cache.up_act[l].dim(1), cache.up_act[l].dim(2)))
            .collect(),
        up_channels: (1..=depth).rev().map(|l| cache.up_act[l].dim(0)).collect(),
    })
}

pub fn sunet_forward_cached<T: Scalar>(
    x: &Tensor<T>,
    params: &ModelParams<T>,
    cfg: &SUNetConfig,
) -> Result<(Tensor<T>, SUNetCache<T>)> {
    x.expect_rank(3, "sunet input")?;
    if x.dim(0) != cfg.in_channels {
        return dim_err(format!(
            "sunet: {} input planes, expected {}",
            x.dim(0),
            cfg.in_channels
        ));
    }
    let depth = cfg.depth;
    let sizes = pyramid_sizes(cfg, x.dim(1), x.dim(2))?;
    let empty = || Tensor::zeros(&[0]);
    let mut c = SUNetCache {
        sizes,
        down_pre: vec![empty()],
        down_act: vec![empty()],
        stripe: vec![None],
        down_out: vec![x.clone()],
        up_in: vec![empty(); depth + 1],
        up_pre: vec![empty(); depth + 1],
        up_act: vec![empty(); depth + 1],
        head_in: empty(),
        head_pre: empty(),
        head_out: empty(),
    };
    for l in 1..=depth {
        let pre = conv2d(
            &c.down_out[l - 1],
            &conv_spec(params, &format!("down.{l}"), cfg)?,
        )?;
        let act = activation(&pre, leaky(cfg));
        let (out, sc) = if cfg.use_stripe {
            let sp = StripePoolParams::from_params(params, &format!("stripe.{l}"))?;
            let (z, cache) = stripe_pool_forward(&act, &sp)?;
            (z, Some(cache))
        } else {
            (act.clone(), None)
        };
        c.down_pre.push(pre);
        c.down_act.push(act);
        c.stripe.push(sc);
        c.down_out.push(out);
    }
    let mut h = c.down_out[depth].clone();
    for l in (1..=depth).rev() {
        let pre = transposed_conv2d(
            &h,
            &conv_spec(params, &format!("up.{l}"), cfg)?,
            c.sizes[l - 1],
        )?;
        let act = activation(&pre, Activation::Relu);
        let next = if cfg.use_skips {
            Tensor::concat0(&[&act, &c.down_out[l - 1]])?
        } else {
            act.clone()
        };
        c.up_in[l] = std::mem::replace(&mut h, next);
        c.up_pre[l] = pre;
        c.up_act[l] = act;
    }
    c.head_pre = conv2d(&h, &head_spec(params)?)?;
    c.head_in = h;
    c.head_out = activation(&c.head_pre, Activation::Relu);
    Ok((c.head_out.clone(), c))
}

/// Accumulates parameter gradients into `grads` and returns the gradient
/// with respect to the network input.
pub fn sunet_backward<T: Scalar>(
    params: &ModelParams<T>,
    cfg: &SUNetConfig,
    cache: &SUNetCache<T>,
    grad_out: &Tensor<T>,
    grads: &mut Grads<T>,
) -> Result<Tensor<T>> {
    sunet_backward_with(params, cfg, cache, grad_out, ClampGrad::Exact, grads)
}

/// How the backward pass treats the output clamp.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ClampGrad {
    /// The true derivative: zero wherever the clamp is active.
    #[default]
    Exact,
    /// The incoming gradient goes straight to the pre-clamp values. Used for
    /// training: an L1 gradient at a clamped output is zero where the target
    /// is zero and pushes upward where it is positive, so outputs that fell
    /// below zero can recover instead of staying dead.
    PassThrough,
}

/// [`sunet_backward`] with a choice of output-clamp derivative.
pub fn sunet_backward_with<T: Scalar>(
    params: &ModelParams<T>,
    cfg: &SUNetConfig,
    cache: &SUNetCache<T>,
    grad_out: &Tensor<T>,
    clamp: ClampGrad,
    grads: &mut Grads<T>,
) -> Result<Tensor<T>> {
    let depth = cfg.depth;
    let g = match clamp {
        ClampGrad::Exact => {
            activation_backward(&cache.head_pre, &cache.head_out, Activation::Relu, grad_out)?
        }
        ClampGrad::PassThrough => {
            cache.head_pre.expect_same_shape(grad_out)?;
            grad_out.clone()
        }
    };
    let head = conv2d_backward(&cache.head_in, &head_spec(params)?, &g)?;
    grads.accumulate("output.weight", &head.weight)?;
    grads.accumulate("output.bias", &head.bias)?;

    let mut gd: Vec<Option<Tensor<T>>> = vec![None; depth + 1];
    let add = |gd: &mut Vec<Option<Tensor<T>>>, l: usize, t: Tensor<T>| -> Result<()> {
        match &mut gd[l] {
            Some(acc) => acc.axpy(T::one(), &t),
            slot => {
                *slot = Some(t);
                Ok(())
            }
        }
    };

    let mut gh = head.input;
    for l in 1..=depth {
        let gr = if cfg.use_skips {
            let own = cache.up_act[l].dim(0);
            let skip = cache.down_out[l - 1].dim(0);
            let mut parts = gh.split0(&[own, skip])?;
            let gs = parts.pop().expect("two parts");
            add(&mut gd, l - 1, gs)?;
            parts.pop().expect("two parts")
        } else {
            gh
        };
        let gpre = activation_backward(&cache.up_pre[l], &cache.up_act[l], Activation::Relu, &gr)?;
        let name = format!("up.{l}");
        let up = transposed_conv2d_backward(
            &cache.up_in[l],
            &conv_spec(params, &name, cfg)?,
            cache.sizes[l - 1],
            &gpre,
        )?;
        grads.accumulate(&format!("{name}.weight"), &up.weight)?;
        grads.accumulate(&format!("{name}.bias"), &up.bias)?;
        if l == depth {
            add(&mut gd, depth, up.input)?;
            gh = Tensor::zeros(&[0]);
        } else {
            gh = up.input;
        }
    }

    for l in (1..=depth).rev() {
        let gout = gd[l].take().expect("every level receives a gradient");
        let gact = match &cache.stripe[l] {
            Some(sc) => {
                let prefix = format!("stripe.{l}");
                let sp = StripePoolParams::from_params(params, &prefix)?;
                let sg = stripe_pool_backward(&sp, sc, &gout)?;
                sg.accumulate_into(grads, &prefix)?;
                sg.input
            }
            None => gout,
        };
        let gpre = activation_backward(&cache.down_pre[l], &cache.down_act[l], leaky(cfg), &gact)?;
        let name = format!("down.{l}");
        let down = conv2d_backward(
            &cache.down_out[l - 1],
            &conv_spec(params, &name, cfg)?,
            &gpre,
        )?;
        grads.accumulate(&format!("{name}.weight"), &down.weight)?;
        grads.accumulate(&format!("{name}.bias"), &down.bias)?;
        add(&mut gd, l - 1, down.input)?;
    }
    Ok(gd[0].take().expect("input gradient"))
}
