//! Stripe pooling: gates a `(C, H, W)` feature map by context pooled along
//! whole rows and whole columns.
//!
//! `y^h = conv_h(mean over W)` gives one value per row, `y^v = conv_v(mean
//! over H)` one per column; `y = y^h + y^v` broadcast over the plane;
//! `z = x * sigmoid(fuse(y))` with a 1x1 `fuse`.

use super::params::{Grads, ModelParams};
use crate::error::{dim_err, Result};
use crate::tensor::{
    activation, activation_backward, axis_mean, axis_mean_backward, conv1d, conv1d_backward,
    conv2d, conv2d_backward, Activation, Axis, ConvSpec, Scalar, Tensor,
};

/// Borrowed weights of one stripe-pooling layer.
#[derive(Clone, Copy, Debug)]
pub struct StripePoolParams<'a, T: Scalar> {
    pub conv_h_weight: &'a Tensor<T>,
    pub conv_h_bias: &'a Tensor<T>,
    pub conv_v_weight: &'a Tensor<T>,
    pub conv_v_bias: &'a Tensor<T>,
    pub fuse_weight: &'a Tensor<T>,
    pub fuse_bias: &'a Tensor<T>,
}

impl<'a, T: Scalar> StripePoolParams<'a, T> {
    /// Looks up `{prefix}.conv_h`, `{prefix}.conv_v` and `{prefix}.fuse`.
    pub fn from_params(p: &'a ModelParams<T>, prefix: &str) -> Result<Self> {
        let g = |s: &str| p.get(&format!("{prefix}.{s}"));
        Ok(Self {
            conv_h_weight: g("conv_h.weight")?,
            conv_h_bias: g("conv_h.bias")?,
            conv_v_weight: g("conv_v.weight")?,
            conv_v_bias: g("conv_v.bias")?,
            fuse_weight: g("fuse.weight")?,
            fuse_bias: g("fuse.bias")?,
        })
    }

    fn pad(&self) -> usize {
        self.conv_h_weight.dim(2) / 2
    }

    fn conv_h(&self) -> ConvSpec<'a, T> {
        ConvSpec::new(self.conv_h_weight, Some(self.conv_h_bias), 1, self.pad())
    }

    fn conv_v(&self) -> ConvSpec<'a, T> {
        ConvSpec::new(self.conv_v_weight, Some(self.conv_v_bias), 1, self.pad())
    }

    fn fuse(&self) -> ConvSpec<'a, T> {
        ConvSpec::new(self.fuse_weight, Some(self.fuse_bias), 1, 0)
    }
}

/// Intermediate values kept for the backward pass.
#[derive(Clone, Debug)]
pub struct StripeCache<T: Scalar> {
    x: Tensor<T>,
    row_mean: Tensor<T>,
    col_mean: Tensor<T>,
    combined: Tensor<T>,
    logits: Tensor<T>,
    gate: Tensor<T>,
}

#[derive(Clone, Debug)]
pub struct StripeGrads<T: Scalar> {
    pub input: Tensor<T>,
    pub conv_h_weight: Tensor<T>,
    pub conv_h_bias: Tensor<T>,
    pub conv_v_weight: Tensor<T>,
    pub conv_v_bias: Tensor<T>,
    pub fuse_weight: Tensor<T>,
    pub fuse_bias: Tensor<T>,
}

impl<T: Scalar> StripeGrads<T> {
    /// Moves the parameter gradients into `grads` under `prefix`.
    pub fn accumulate_into(&self, grads: &mut Grads<T>, prefix: &str) -> Result<()> {
        for (s, g) in [
            ("conv_h.weight", &self.conv_h_weight),
            ("conv_h.bias", &self.conv_h_bias),
            ("conv_v.weight", &self.conv_v_weight),
            ("conv_v.bias", &self.conv_v_bias),
            ("fuse.weight", &self.fuse_weight),
            ("fuse.bias", &self.fuse_bias),
        ] {
            grads.accumulate(&format!("{prefix}.{s}"), g)?;
        }
        Ok(())
    }
}

pub fn stripe_pool<T: Scalar>(x: &Tensor<T>, p: &StripePoolParams<'_, T>) -> Result<Tensor<T>> {
    Ok(stripe_pool_forward(x, p)?.0)
}

pub fn stripe_pool_forward<T: Scalar>(
    x: &Tensor<T>,
    p: &StripePoolParams<'_, T>,
) -> Result<(Tensor<T>, StripeCache<T>)> {
    x.expect_rank(3, "stripe_pool input")?;
    let (c, h, w) = (x.dim(0), x.dim(1), x.dim(2));
    if p.conv_h_weight.dim(0) != c || p.fuse_weight.dim(0) != c {
        return dim_err(format!(
            "stripe_pool: {c} input channels, parameters expect {}",
            p.conv_h_weight.dim(0)
        ));
    }
    let row_mean = axis_mean(x, Axis::Width)?;
    let col_mean = axis_mean(x, Axis::Height)?;
    let yh = conv1d(&row_mean, &p.conv_h())?;
    let yv = conv1d(&col_mean, &p.conv_v())?;
    let mut combined = vec![T::zero(); c * h * w];
    for ch in 0..c {
        for i in 0..h {
            let a = yh.data()[ch * h + i];
            let row = &mut combined[(ch * h + i) * w..(ch * h + i + 1) * w];
            for (j, v) in row.iter_mut().enumerate() {
                *v = a + yv.data()[ch * w + j];
            }
        }
    }
    let combined = Tensor::new(&[c, h, w], combined)?;
    let logits = conv2d(&combined, &p.fuse())?;
    let gate = activation(&logits, Activation::Sigmoid);
    let z = x.zip_map(&gate, |a, g| a * g)?;
    Ok((
        z,
        StripeCache {
            x: x.clone(),
            row_mean,
            col_mean,
            combined,
            logits,
            gate,
        },
    ))
}

pub fn stripe_pool_backward<T: Scalar>(
    p: &StripePoolParams<'_, T>,
    cache: &StripeCache<T>,
    grad_out: &Tensor<T>,
) -> Result<StripeGrads<T>> {
    let x = &cache.x;
    x.expect_same_shape(grad_out)?;
    let (c, h, w) = (x.dim(0), x.dim(1), x.dim(2));
    let mut gx = grad_out.zip_map(&cache.gate, |g, s| g * s)?;
    let ggate = grad_out.zip_map(x, |g, v| g * v)?;
    let glogits = activation_backward(&cache.logits, &cache.gate, Activation::Sigmoid, &ggate)?;
    let fuse = conv2d_backward(&cache.combined, &p.fuse(), &glogits)?;
    // the broadcast sum routes each combined gradient to its row and column
    let gc = fuse.input.data();
    let mut gyh = vec![T::zero(); c * h];
    let mut gyv = vec![T::zero(); c * w];
    for ch in 0..c {
        for i in 0..h {
            let row = &gc[(ch * h + i) * w..(ch * h + i + 1) * w];
            let mut acc = T::zero();
            for (j, &g) in row.iter().enumerate() {
                acc = acc + g;
                gyv[ch * w + j] = gyv[ch * w + j] + g;
            }
            gyh[ch * h + i] = acc;
        }
    }
    let conv_h = conv1d_backward(&cache.row_mean, &p.conv_h(), &Tensor::new(&[c, h], gyh)?)?;
    let conv_v = conv1d_backward(&cache.col_mean, &p.conv_v(), &Tensor::new(&[c, w], gyv)?)?;
    gx.axpy(
        T::one(),
        &axis_mean_backward(x.shape(), Axis::Width, &conv_h.input)?,
    )?;
    gx.axpy(
        T::one(),
        &axis_mean_backward(x.shape(), Axis::Height, &conv_v.input)?,
    )?;
    Ok(StripeGrads {
        input: gx,
        conv_h_weight: conv_h.weight,
        conv_h_bias: conv_h.bias,
        conv_v_weight: conv_v.weight,
        conv_v_bias: conv_v.bias,
        fuse_weight: fuse.weight,
        fuse_bias: fuse.bias,
    })
}
