use super::{Scalar, Tensor};
use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Activation {
    Relu,
    LeakyRelu(f64),
    Sigmoid,
}

impl Activation {
    pub fn apply<T: Scalar>(self, v: T) -> T {
        match self {
            Activation::Relu => {
                if v > T::zero() {
                    v
                } else {
                    T::zero()
                }
            }
            Activation::LeakyRelu(alpha) => {
                if v > T::zero() {
                    v
                } else {
                    v * T::from_f64(alpha)
                }
            }
            Activation::Sigmoid => sigmoid(v),
        }
    }

    /// Derivative given the input `x` and the output `y` of the forward pass.
    pub fn derivative<T: Scalar>(self, x: T, y: T) -> T {
        match self {
            Activation::Relu => {
                if x > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::LeakyRelu(alpha) => {
                if x > T::zero() {
                    T::one()
                } else {
                    T::from_f64(alpha)
                }
            }
            Activation::Sigmoid => y * (T::one() - y),
        }
    }
}

/// Logistic function, clamped so the result stays strictly inside (0, 1)
/// even where the exact value rounds to 0 or 1.
pub(crate) fn sigmoid<T: Scalar>(v: T) -> T {
    let s = if v >= T::zero() {
        T::one() / (T::one() + (-v).exp())
    } else {
        let e = v.exp();
        e / (T::one() + e)
    };
    s.max(T::min_positive_value()).min(T::below_one())
}

pub fn activation<T: Scalar>(x: &Tensor<T>, kind: Activation) -> Tensor<T> {
    x.map(|v| kind.apply(v))
}

pub fn activation_backward<T: Scalar>(
    x: &Tensor<T>,
    y: &Tensor<T>,
    kind: Activation,
    grad_out: &Tensor<T>,
) -> Result<Tensor<T>> {
    x.expect_same_shape(grad_out)?;
    x.expect_same_shape(y)?;
    let data = x
        .data()
        .iter()
        .zip(y.data())
        .zip(grad_out.data())
        .map(|((&xv, &yv), &g)| g * kind.derivative(xv, yv))
        .collect();
    Tensor::new(x.shape(), data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_values() {
        assert_eq!(sigmoid(0.0f64), 0.5);
        assert_eq!(Activation::Relu.apply(-3.0f64), 0.0);
        assert_eq!(Activation::Relu.apply(3.0f64), 3.0);
        assert!((Activation::LeakyRelu(0.2).apply(-2.0f64) + 0.4).abs() < 1e-15);
        assert_eq!(Activation::Sigmoid.derivative(0.0f64, 0.5), 0.25);
    }

    #[test]
    fn sigmoid_stays_open_interval_at_extremes() {
        for v in [-1e300, -800.0, -40.0, 40.0, 800.0, 1e300f64] {
            let s = sigmoid(v);
            assert!(s > 0.0 && s < 1.0, "sigmoid({v}) = {s}");
        }
        for v in [-200.0f32, 50.0, 200.0] {
            let s = sigmoid(v);
            assert!(s > 0.0 && s < 1.0);
        }
    }
}
