use super::{Scalar, Tensor};
use crate::error::{dim_err, Result};

#[derive(Clone, Debug)]
pub struct DenseGrads<T: Scalar> {
    pub input: Tensor<T>,
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

fn check<T: Scalar>(
    x: &Tensor<T>,
    weight: &Tensor<T>,
    bias: &Tensor<T>,
) -> Result<(usize, usize, usize)> {
    weight.expect_rank(2, "dense weight")?;
    let (d_out, d_in) = (weight.dim(0), weight.dim(1));
    if x.rank() == 0 || x.shape()[x.rank() - 1] != d_in {
        return dim_err(format!(
            "dense: input {:?} does not end in {d_in}",
            x.shape()
        ));
    }
    if bias.shape() != [d_out] {
        return dim_err(format!(
            "dense: bias {:?}, expected [{d_out}]",
            bias.shape()
        ));
    }
    Ok((x.len() / d_in, d_in, d_out))
}

/// Affine map `x W^T + b` along the trailing dimension of `x`.
pub fn dense<T: Scalar>(x: &Tensor<T>, weight: &Tensor<T>, bias: &Tensor<T>) -> Result<Tensor<T>> {
    let (rows, d_in, d_out) = check(x, weight, bias)?;
    let mut y = vec![T::zero(); rows * d_out];
    T::gemm(
        rows,
        d_in,
        d_out,
        x.data(),
        false,
        weight.data(),
        true,
        &mut y,
        false,
    );
    for row in y.chunks_mut(d_out.max(1)) {
        for (v, &b) in row.iter_mut().zip(bias.data()) {
            *v = *v + b;
        }
    }
    let mut shape = x.shape().to_vec();
    *shape.last_mut().expect("rank >= 1") = d_out;
    Tensor::new(&shape, y)
}

pub fn dense_backward<T: Scalar>(
    x: &Tensor<T>,
    weight: &Tensor<T>,
    bias: &Tensor<T>,
    grad_out: &Tensor<T>,
) -> Result<DenseGrads<T>> {
    let (rows, d_in, d_out) = check(x, weight, bias)?;
    if grad_out.len() != rows * d_out || grad_out.shape().last() != Some(&d_out) {
        return dim_err(format!(
            "dense backward: upstream grad {:?} for input {:?}",
            grad_out.shape(),
            x.shape()
        ));
    }
    let mut gx = vec![T::zero(); rows * d_in];
    T::gemm(
        rows,
        d_out,
        d_in,
        grad_out.data(),
        false,
        weight.data(),
        false,
        &mut gx,
        false,
    );
    let mut gw = vec![T::zero(); d_out * d_in];
    T::gemm(
        d_out,
        rows,
        d_in,
        grad_out.data(),
        true,
        x.data(),
        false,
        &mut gw,
        false,
    );
    let mut gb = vec![T::zero(); d_out];
    for row in grad_out.data().chunks(d_out.max(1)) {
        for (acc, &g) in gb.iter_mut().zip(row) {
            *acc = *acc + g;
        }
    }
    Ok(DenseGrads {
        input: Tensor::new(x.shape(), gx)?,
        weight: Tensor::new(weight.shape(), gw)?,
        bias: Tensor::new(&[d_out], gb)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_arithmetic() {
        let x = Tensor::new(&[2], vec![1.0, 2.0]).unwrap();
        let w = Tensor::new(&[2, 2], vec![1.0, 1.0, 1.0, -1.0]).unwrap();
        let b = Tensor::new(&[2], vec![0.0, 1.0]).unwrap();
        assert_eq!(dense(&x, &w, &b).unwrap().data(), &[3.0, 0.0]);
    }

    #[test]
    fn identity_weight_passes_input_and_grad() {
        let x = Tensor::<f64>::from_fn(&[3, 4], |i| i as f64 - 5.0);
        let w = Tensor::from_fn(&[4, 4], |i| if i % 5 == 0 { 1.0 } else { 0.0 });
        let b = Tensor::zeros(&[4]);
        assert_eq!(dense(&x, &w, &b).unwrap(), x);
        let g = Tensor::from_fn(&[3, 4], |i| (i as f64).sin());
        assert_eq!(dense_backward(&x, &w, &b, &g).unwrap().input, g);
    }

    #[test]
    fn trailing_dim_mismatch() {
        let x = Tensor::<f64>::zeros(&[3, 5]);
        let w = Tensor::zeros(&[2, 4]);
        let b = Tensor::zeros(&[2]);
        assert!(matches!(dense(&x, &w, &b), Err(crate::Error::Dimension(_))));
    }
}
