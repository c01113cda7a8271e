use super::{Scalar, Tensor};
use crate::error::{dim_err, Result};

/// Axis reduced by [`axis_mean`] on a `(C, H, W)` tensor.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    /// Mean over columns: one value per row, `(C, H)`.
    Width,
    /// Mean over rows: one value per column, `(C, W)`.
    Height,
}

/// Stripe means of a `(C, H, W)` tensor along one spatial axis.
pub fn axis_mean<T: Scalar>(x: &Tensor<T>, axis: Axis) -> Result<Tensor<T>> {
    x.expect_rank(3, "axis_mean input")?;
    let (c, h, w) = (x.dim(0), x.dim(1), x.dim(2));
    if h == 0 || w == 0 {
        return dim_err("axis_mean over an empty axis");
    }
    let d = x.data();
    match axis {
        Axis::Width => {
            let inv = T::from_f64(1.0 / w as f64);
            let out = d
                .chunks(w)
                .map(|row| row.iter().fold(T::zero(), |a, &v| a + v) * inv)
                .collect();
            Tensor::new(&[c, h], out)
        }
        Axis::Height => {
            let inv = T::from_f64(1.0 / h as f64);
            let mut out = vec![T::zero(); c * w];
            for ch in 0..c {
                let acc = &mut out[ch * w..(ch + 1) * w];
                for row in d[ch * h * w..(ch + 1) * h * w].chunks(w) {
                    for (a, &v) in acc.iter_mut().zip(row) {
                        *a = *a + v;
                    }
                }
                for a in acc {
                    *a = *a * inv;
                }
            }
            Tensor::new(&[c, w], out)
        }
    }
}

/// Broadcasts the upstream gradient of [`axis_mean`] back to `input_shape`.
pub fn axis_mean_backward<T: Scalar>(
    input_shape: &[usize],
    axis: Axis,
    grad_out: &Tensor<T>,
) -> Result<Tensor<T>> {
    let [c, h, w] = *input_shape else {
        return dim_err(format!("axis_mean backward: input shape {input_shape:?}"));
    };
    let expected = match axis {
        Axis::Width => [c, h],
        Axis::Height => [c, w],
    };
    if grad_out.shape() != expected {
        return dim_err(format!(
            "axis_mean backward: upstream grad {:?}, expected {expected:?}",
            grad_out.shape()
        ));
    }
    let g = grad_out.data();
    let out = match axis {
        Axis::Width => {
            let inv = T::from_f64(1.0 / w as f64);
            Tensor::from_fn(input_shape, |idx| g[idx / w] * inv)
        }
        Axis::Height => {
            let inv = T::from_f64(1.0 / h as f64);
            Tensor::from_fn(input_shape, |idx| g[(idx / (h * w)) * w + idx % w] * inv)
        }
    };
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two_means() {
        let x = Tensor::new(&[1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(axis_mean(&x, Axis::Width).unwrap().data(), &[1.5, 3.5]);
        assert_eq!(axis_mean(&x, Axis::Height).unwrap().data(), &[2.0, 3.0]);
    }

    #[test]
    fn constant_input_gives_constant_means() {
        let x = Tensor::full(&[3, 7, 5], 2.5f64);
        for axis in [Axis::Width, Axis::Height] {
            assert!(axis_mean(&x, axis)
                .unwrap()
                .data()
                .iter()
                .all(|&v| (v - 2.5).abs() < 1e-15));
        }
    }
}
