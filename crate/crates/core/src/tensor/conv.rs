//! Convolutions via im2col + GEMM.
//!
//! Convention: cross-correlation, `y[o, i, j] = b[o] + sum_{c,u,v} w[o, c, u, v]
//! * x[c, i*s + u - p, j*s + v - p]` with zero padding. Kernels are laid out
//! `(out_ch, in_ch, kH, kW)`; 1-D kernels are `(out_ch, in_ch, k)`.
//!
//! A transposed convolution reuses the kernel of the convolution it mirrors,
//! so it maps `out_ch` channels back to `in_ch` channels and its bias has
//! `in_ch` entries. It is the exact adjoint of [`conv2d`] for that kernel.

use super::{Scalar, Tensor};
use crate::error::{arg_err, dim_err, Result};

/// Kernel, bias and geometry of one convolution.
#[derive(Clone, Copy, Debug)]
pub struct ConvSpec<'a, T: Scalar> {
    pub weight: &'a Tensor<T>,
    pub bias: Option<&'a Tensor<T>>,
    pub stride: usize,
    pub padding: usize,
    /// Only 1 is supported.
    pub dilation: usize,
}

impl<'a, T: Scalar> ConvSpec<'a, T> {
    pub fn new(
        weight: &'a Tensor<T>,
        bias: Option<&'a Tensor<T>>,
        stride: usize,
        padding: usize,
    ) -> Self {
        Self {
            weight,
            bias,
            stride,
            padding,
            dilation: 1,
        }
    }
}

/// Gradients of a convolution with respect to its input and parameters.
#[derive(Clone, Debug)]
pub struct ConvGrads<T: Scalar> {
    pub input: Tensor<T>,
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

/// Output length `floor((n + 2p - k) / s) + 1`, or `None` if the padded
/// input is shorter than the kernel.
pub fn conv_out_len(n: usize, kernel: usize, stride: usize, padding: usize) -> Option<usize> {
    let padded = n + 2 * padding;
    if padded < kernel || stride == 0 {
        None
    } else {
        Some((padded - kernel) / stride + 1)
    }
}

#[derive(Clone, Copy, Debug)]
struct Geom {
    cin: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    sh: usize,
    sw: usize,
    ph: usize,
    pw: usize,
    ho: usize,
    wo: usize,
}

impl Geom {
    fn rows(&self) -> usize {
        self.cin * self.kh * self.kw
    }

    fn cols(&self) -> usize {
        self.ho * self.wo
    }

    /// Range of output columns `ox` whose tap `kj` lands inside the input.
    fn valid_ox(&self, kj: usize) -> (usize, usize) {
        let lo = if self.pw > kj {
            (self.pw - kj).div_ceil(self.sw)
        } else {
            0
        };
        // ox * sw + kj - pw <= w - 1
        let limit = self.w + self.pw;
        let hi = if limit > kj {
            ((limit - kj - 1) / self.sw + 1).min(self.wo)
        } else {
            0
        };
        (lo.min(hi), hi)
    }
}

fn im2col<T: Scalar>(x: &[T], g: &Geom) -> Vec<T> {
    let n = g.cols();
    let mut cols = vec![T::zero(); g.rows() * n];
    for c in 0..g.cin {
        for ki in 0..g.kh {
            for kj in 0..g.kw {
                let row = (c * g.kh + ki) * g.kw + kj;
                let dst = &mut cols[row * n..(row + 1) * n];
                let (lo, hi) = g.valid_ox(kj);
                for oy in 0..g.ho {
                    let iy = (oy * g.sh + ki) as isize - g.ph as isize;
                    if iy < 0 || iy as usize >= g.h {
                        continue;
                    }
                    let src = &x[(c * g.h + iy as usize) * g.w..][..g.w];
                    let drow = &mut dst[oy * g.wo..(oy + 1) * g.wo];
                    for ox in lo..hi {
                        drow[ox] = src[ox * g.sw + kj - g.pw];
                    }
                }
            }
        }
    }
    cols
}

/// Scatter-adds columns back onto an image of shape `(cin, h, w)`.
fn col2im<T: Scalar>(cols: &[T], g: &Geom, x: &mut [T]) {
    let n = g.cols();
    for c in 0..g.cin {
        for ki in 0..g.kh {
            for kj in 0..g.kw {
                let row = (c * g.kh + ki) * g.kw + kj;
                let src = &cols[row * n..(row + 1) * n];
                let (lo, hi) = g.valid_ox(kj);
                for oy in 0..g.ho {
                    let iy = (oy * g.sh + ki) as isize - g.ph as isize;
                    if iy < 0 || iy as usize >= g.h {
                        continue;
                    }
                    let dst = &mut x[(c * g.h + iy as usize) * g.w..][..g.w];
                    let srow = &src[oy * g.wo..(oy + 1) * g.wo];
                    for ox in lo..hi {
                        let ix = ox * g.sw + kj - g.pw;
                        dst[ix] = dst[ix] + srow[ox];
                    }
                }
            }
        }
    }
}

fn add_bias<T: Scalar>(y: &mut [T], bias: Option<&Tensor<T>>, per_channel: usize) {
    if let Some(b) = bias {
        for (chunk, &bv) in y.chunks_mut(per_channel).zip(b.data()) {
            for v in chunk {
                *v = *v + bv;
            }
        }
    }
}

fn channel_sums<T: Scalar>(g: &[T], channels: usize) -> Vec<T> {
    let per = g.len() / channels.max(1);
    g.chunks(per.max(1))
        .take(channels)
        .map(|c| c.iter().fold(T::zero(), |a, &v| a + v))
        .collect()
}

fn check_common<T: Scalar>(spec: &ConvSpec<'_, T>, bias_len: usize, what: &str) -> Result<()> {
    if spec.dilation != 1 {
        return arg_err(format!(
            "{what}: dilation {} unsupported (must be 1)",
            spec.dilation
        ));
    }
    if spec.stride == 0 {
        return arg_err(format!("{what}: stride must be positive"));
    }
    if let Some(b) = spec.bias {
        if b.shape() != [bias_len] {
            return dim_err(format!(
                "{what}: bias has shape {:?}, expected [{bias_len}]",
                b.shape()
            ));
        }
    }
    Ok(())
}

fn conv2d_geom<T: Scalar>(x: &Tensor<T>, spec: &ConvSpec<'_, T>) -> Result<(Geom, usize)> {
    x.expect_rank(3, "conv2d input")?;
    spec.weight.expect_rank(4, "conv2d kernel")?;
    let w = spec.weight.shape();
    let (cout, cin, kh, kw) = (w[0], w[1], w[2], w[3]);
    if x.dim(0) != cin {
        return dim_err(format!(
            "conv2d: input has {} channels but kernel expects {cin}",
            x.dim(0)
        ));
    }
    check_common(spec, cout, "conv2d")?;
    let (h, wd) = (x.dim(1), x.dim(2));
    let (Some(ho), Some(wo)) = (
        conv_out_len(h, kh, spec.stride, spec.padding),
        conv_out_len(wd, kw, spec.stride, spec.padding),
    ) else {
        return dim_err(format!(
            "conv2d: input {h}x{wd} with padding {} is smaller than kernel {kh}x{kw}",
            spec.padding
        ));
    };
    Ok((
        Geom {
            cin,
            h,
            w: wd,
            kh,
            kw,
            sh: spec.stride,
            sw: spec.stride,
            ph: spec.padding,
            pw: spec.padding,
            ho,
            wo,
        },
        cout,
    ))
}

fn forward_raw<T: Scalar>(
    x: &[T],
    weight: &[T],
    bias: Option<&Tensor<T>>,
    g: &Geom,
    cout: usize,
) -> Vec<T> {
    let cols = im2col(x, g);
    let n = g.cols();
    let mut y = vec![T::zero(); cout * n];
    T::gemm(
        cout,
        g.rows(),
        n,
        weight,
        false,
        &cols,
        false,
        &mut y,
        false,
    );
    add_bias(&mut y, bias, n);
    y
}

fn backward_raw<T: Scalar>(
    x: &[T],
    weight: &[T],
    gy: &[T],
    g: &Geom,
    cout: usize,
) -> (Vec<T>, Vec<T>, Vec<T>) {
    let cols = im2col(x, g);
    let (k, n) = (g.rows(), g.cols());
    let mut gw = vec![T::zero(); cout * k];
    T::gemm(cout, n, k, gy, false, &cols, true, &mut gw, false);
    let mut gcols = cols;
    T::gemm(k, cout, n, weight, true, gy, false, &mut gcols, false);
    let mut gx = vec![T::zero(); g.cin * g.h * g.w];
    col2im(&gcols, g, &mut gx);
    (gx, gw, channel_sums(gy, cout))
}

/// 2-D convolution of a `(C_in, H, W)` input.
pub fn conv2d<T: Scalar>(x: &Tensor<T>, spec: &ConvSpec<'_, T>) -> Result<Tensor<T>> {
    let (g, cout) = conv2d_geom(x, spec)?;
    let y = forward_raw(x.data(), spec.weight.data(), spec.bias, &g, cout);
    Tensor::new(&[cout, g.ho, g.wo], y)
}

pub fn conv2d_backward<T: Scalar>(
    x: &Tensor<T>,
    spec: &ConvSpec<'_, T>,
    grad_out: &Tensor<T>,
) -> Result<ConvGrads<T>> {
    let (g, cout) = conv2d_geom(x, spec)?;
    if grad_out.shape() != [cout, g.ho, g.wo] {
        return dim_err(format!(
            "conv2d backward: upstream grad {:?}, expected {:?}",
            grad_out.shape(),
            [cout, g.ho, g.wo]
        ));
    }
    let (gx, gw, gb) = backward_raw(x.data(), spec.weight.data(), grad_out.data(), &g, cout);
    Ok(ConvGrads {
        input: Tensor::new(x.shape(), gx)?,
        weight: Tensor::new(spec.weight.shape(), gw)?,
        bias: Tensor::new(&[cout], gb)?,
    })
}

fn transposed_geom<T: Scalar>(
    x: &Tensor<T>,
    spec: &ConvSpec<'_, T>,
    out_size: (usize, usize),
) -> Result<(Geom, usize)> {
    x.expect_rank(3, "transposed_conv2d input")?;
    spec.weight.expect_rank(4, "transposed_conv2d kernel")?;
    let w = spec.weight.shape();
    let (cin_t, cout_t, kh, kw) = (w[0], w[1], w[2], w[3]);
    if x.dim(0) != cin_t {
        return dim_err(format!(
            "transposed_conv2d: input has {} channels but kernel expects {cin_t}",
            x.dim(0)
        ));
    }
    check_common(spec, cout_t, "transposed_conv2d")?;
    let (h, wd) = out_size;
    let mirrored = (
        conv_out_len(h, kh, spec.stride, spec.padding),
        conv_out_len(wd, kw, spec.stride, spec.padding),
    );
    if mirrored != (Some(x.dim(1)), Some(x.dim(2))) {
        return dim_err(format!(
            "transposed_conv2d: out_size {h}x{wd} is not reachable from input {}x{} \
             with kernel {kh}x{kw}, stride {}, padding {}",
            x.dim(1),
            x.dim(2),
            spec.stride,
            spec.padding
        ));
    }
    Ok((
        Geom {
            cin: cout_t,
            h,
            w: wd,
            kh,
            kw,
            sh: spec.stride,
            sw: spec.stride,
            ph: spec.padding,
            pw: spec.padding,
            ho: x.dim(1),
            wo: x.dim(2),
        },
        cin_t,
    ))
}

/// Transposed 2-D convolution producing exactly `out_size` spatially.
///
/// `out_size` must be a size the mirrored [`conv2d`] maps onto the input's
/// spatial size; the U-net passes the sizes it recorded on the way down.
pub fn transposed_conv2d<T: Scalar>(
    x: &Tensor<T>,
    spec: &ConvSpec<'_, T>,
    out_size: (usize, usize),
) -> Result<Tensor<T>> {
    let (g, cin_t) = transposed_geom(x, spec, out_size)?;
    let n = g.cols();
    let mut cols = vec![T::zero(); g.rows() * n];
    T::gemm(
        g.rows(),
        cin_t,
        n,
        spec.weight.data(),
        true,
        x.data(),
        false,
        &mut cols,
        false,
    );
    let mut y = vec![T::zero(); g.cin * g.h * g.w];
    col2im(&cols, &g, &mut y);
    add_bias(&mut y, spec.bias, g.h * g.w);
    Tensor::new(&[g.cin, g.h, g.w], y)
}

pub fn transposed_conv2d_backward<T: Scalar>(
    x: &Tensor<T>,
    spec: &ConvSpec<'_, T>,
    out_size: (usize, usize),
    grad_out: &Tensor<T>,
) -> Result<ConvGrads<T>> {
    let (g, cin_t) = transposed_geom(x, spec, out_size)?;
    if grad_out.shape() != [g.cin, g.h, g.w] {
        return dim_err(format!(
            "transposed_conv2d backward: upstream grad {:?}, expected {:?}",
            grad_out.shape(),
            [g.cin, g.h, g.w]
        ));
    }
    let gcols = im2col(grad_out.data(), &g);
    let (k, n) = (g.rows(), g.cols());
    let mut gx = vec![T::zero(); cin_t * n];
    T::gemm(
        cin_t,
        k,
        n,
        spec.weight.data(),
        false,
        &gcols,
        false,
        &mut gx,
        false,
    );
    let mut gw = vec![T::zero(); cin_t * k];
    T::gemm(cin_t, n, k, x.data(), false, &gcols, true, &mut gw, false);
    Ok(ConvGrads {
        input: Tensor::new(x.shape(), gx)?,
        weight: Tensor::new(spec.weight.shape(), gw)?,
        bias: Tensor::new(&[g.cin], channel_sums(grad_out.data(), g.cin))?,
    })
}

fn conv1d_geom<T: Scalar>(x: &Tensor<T>, spec: &ConvSpec<'_, T>) -> Result<(Geom, usize)> {
    x.expect_rank(2, "conv1d input")?;
    spec.weight.expect_rank(3, "conv1d kernel")?;
    let w = spec.weight.shape();
    let (cout, cin, k) = (w[0], w[1], w[2]);
    if x.dim(0) != cin {
        return dim_err(format!(
            "conv1d: input has {} channels but kernel expects {cin}",
            x.dim(0)
        ));
    }
    check_common(spec, cout, "conv1d")?;
    let len = x.dim(1);
    let Some(lo) = conv_out_len(len, k, spec.stride, spec.padding) else {
        return dim_err(format!(
            "conv1d: input length {len} with padding {} is shorter than kernel {k}",
            spec.padding
        ));
    };
    Ok((
        Geom {
            cin,
            h: 1,
            w: len,
            kh: 1,
            kw: k,
            sh: 1,
            sw: spec.stride,
            ph: 0,
            pw: spec.padding,
            ho: 1,
            wo: lo,
        },
        cout,
    ))
}

/// 1-D convolution of a `(C_in, L)` input.
pub fn conv1d<T: Scalar>(x: &Tensor<T>, spec: &ConvSpec<'_, T>) -> Result<Tensor<T>> {
    let (g, cout) = conv1d_geom(x, spec)?;
    let y = forward_raw(x.data(), spec.weight.data(), spec.bias, &g, cout);
    Tensor::new(&[cout, g.wo], y)
}

pub fn conv1d_backward<T: Scalar>(
    x: &Tensor<T>,
    spec: &ConvSpec<'_, T>,
    grad_out: &Tensor<T>,
) -> Result<ConvGrads<T>> {
    let (g, cout) = conv1d_geom(x, spec)?;
    if grad_out.shape() != [cout, g.wo] {
        return dim_err(format!(
            "conv1d backward: upstream grad {:?}, expected {:?}",
            grad_out.shape(),
            [cout, g.wo]
        ));
    }
    let (gx, gw, gb) = backward_raw(x.data(), spec.weight.data(), grad_out.data(), &g, cout);
    Ok(ConvGrads {
        input: Tensor::new(x.shape(), gx)?,
        weight: Tensor::new(spec.weight.shape(), gw)?,
        bias: Tensor::new(&[cout], gb)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ones(shape: &[usize]) -> Tensor<f64> {
        Tensor::full(shape, 1.0)
    }

    #[test]
    fn all_ones_3x3_counts_overlap() {
        let x = ones(&[1, 3, 3]);
        let k = ones(&[1, 1, 3, 3]);
        let y = conv2d(&x, &ConvSpec::new(&k, None, 1, 1)).unwrap();
        assert_eq!(y.shape(), &[1, 3, 3]);
        assert_eq!(y.data(), &[4.0, 6.0, 4.0, 6.0, 9.0, 6.0, 4.0, 6.0, 4.0]);
    }

    #[test]
    fn identity_kernel_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = Tensor::<f64>::randn(&[1, 5, 5], 1.0, &mut rng);
        let k = ones(&[1, 1, 1, 1]);
        let y = conv2d(&x, &ConvSpec::new(&k, None, 1, 0)).unwrap();
        assert_eq!(y, x);
        let t = transposed_conv2d(&x, &ConvSpec::new(&k, None, 1, 0), (5, 5)).unwrap();
        assert_eq!(t, x);
    }

    #[test]
    fn conv1d_preserves_length_with_k5_p2() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = Tensor::<f64>::randn(&[4, 128], 1.0, &mut rng);
        let k = Tensor::<f64>::randn(&[4, 4, 5], 0.1, &mut rng);
        let y = conv1d(&x, &ConvSpec::new(&k, None, 1, 2)).unwrap();
        assert_eq!(y.shape(), &[4, 128]);
    }

    #[test]
    fn channel_mismatch_is_dimension_error() {
        let x = ones(&[2, 4, 4]);
        let k = ones(&[1, 3, 3, 3]);
        let err = conv2d(&x, &ConvSpec::new(&k, None, 1, 1)).unwrap_err();
        assert!(matches!(err, crate::Error::Dimension(_)), "{err}");
    }

    #[test]
    fn dilation_other_than_one_is_rejected() {
        let x = ones(&[1, 4, 4]);
        let k = ones(&[1, 1, 3, 3]);
        let mut spec = ConvSpec::new(&k, None, 1, 1);
        spec.dilation = 2;
        assert!(matches!(conv2d(&x, &spec), Err(crate::Error::Argument(_))));
    }

    #[test]
    fn transposed_output_sizes_follow_the_inverse_size_formula() {
        let x = ones(&[512, 5, 1]);
        let k = Tensor::<f64>::full(&[512, 3, 5, 5], 0.01);
        let spec = ConvSpec::new(&k, None, 2, 2);
        let y = transposed_conv2d(&x, &spec, (9, 1)).unwrap();
        assert_eq!(y.shape(), &[3, 9, 1]);
        // 10 is also a valid preimage of 5; 11 is not.
        assert!(transposed_conv2d(&x, &spec, (10, 1)).is_ok());
        assert!(matches!(
            transposed_conv2d(&x, &spec, (11, 1)),
            Err(crate::Error::Dimension(_))
        ));
    }

    #[test]
    fn output_smaller_than_kernel_is_rejected() {
        let x = ones(&[1, 1, 1]);
        let k = ones(&[1, 1, 5, 5]);
        assert!(conv2d(&x, &ConvSpec::new(&k, None, 1, 1)).is_err());
        assert!(conv2d(&x, &ConvSpec::new(&k, None, 2, 2)).is_ok());
    }
}
