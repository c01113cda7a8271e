use std::collections::BTreeMap;

use super::{
    activation, activation_backward, axis_mean, axis_mean_backward, conv1d, conv1d_backward,
    conv2d, conv2d_backward, dense, dense_backward, transposed_conv2d, transposed_conv2d_backward,
    Activation, Axis, ConvGrads, ConvSpec, Scalar, Tensor,
};
use crate::error::{Error, Result};

/// A single forward operation together with the parameters it owns.
#[derive(Clone, Debug)]
pub enum Op<T: Scalar> {
    Conv2d {
        weight: Tensor<T>,
        bias: Tensor<T>,
        stride: usize,
        padding: usize,
    },
    TransposedConv2d {
        weight: Tensor<T>,
        bias: Tensor<T>,
        stride: usize,
        padding: usize,
        out_size: (usize, usize),
    },
    Conv1d {
        weight: Tensor<T>,
        bias: Tensor<T>,
        stride: usize,
        padding: usize,
    },
    Dense {
        weight: Tensor<T>,
        bias: Tensor<T>,
    },
    Activation(Activation),
    AxisMean(Axis),
}

/// Gradients of one operation: w.r.t. its input and each named parameter.
#[derive(Clone, Debug)]
pub struct GradBundle<T: Scalar> {
    pub input: Tensor<T>,
    pub params: BTreeMap<String, Tensor<T>>,
}

impl<T: Scalar> GradBundle<T> {
    fn from_conv(g: ConvGrads<T>) -> Self {
        let mut params = BTreeMap::new();
        params.insert("weight".to_string(), g.weight);
        params.insert("bias".to_string(), g.bias);
        Self {
            input: g.input,
            params,
        }
    }
}

/// An [`Op`] that retains what its backward pass needs.
#[derive(Clone, Debug)]
pub struct Node<T: Scalar> {
    op: Op<T>,
    input: Option<Tensor<T>>,
    output: Option<Tensor<T>>,
}

impl<T: Scalar> Node<T> {
    pub fn new(op: Op<T>) -> Self {
        Self {
            op,
            input: None,
            output: None,
        }
    }

    pub fn op(&self) -> &Op<T> {
        &self.op
    }

    pub fn forward(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let y = match &self.op {
            Op::Conv2d {
                weight,
                bias,
                stride,
                padding,
            } => conv2d(x, &ConvSpec::new(weight, Some(bias), *stride, *padding))?,
            Op::TransposedConv2d {
                weight,
                bias,
                stride,
                padding,
                out_size,
            } => transposed_conv2d(
                x,
                &ConvSpec::new(weight, Some(bias), *stride, *padding),
                *out_size,
            )?,
            Op::Conv1d {
                weight,
                bias,
                stride,
                padding,
            } => conv1d(x, &ConvSpec::new(weight, Some(bias), *stride, *padding))?,
            Op::Dense { weight, bias } => dense(x, weight, bias)?,
            Op::Activation(kind) => activation(x, *kind),
            Op::AxisMean(axis) => axis_mean(x, *axis)?,
        };
        self.input = Some(x.clone());
        self.output = Some(y.clone());
        Ok(y)
    }

    pub fn backward(&self, grad_out: &Tensor<T>) -> Result<GradBundle<T>> {
        let (Some(x), Some(y)) = (&self.input, &self.output) else {
            return Err(Error::State("backward requested before forward".into()));
        };
        let bundle = match &self.op {
            Op::Conv2d {
                weight,
                bias,
                stride,
                padding,
            } => GradBundle::from_conv(conv2d_backward(
                x,
                &ConvSpec::new(weight, Some(bias), *stride, *padding),
                grad_out,
            )?),
            Op::TransposedConv2d {
                weight,
                bias,
                stride,
                padding,
                out_size,
            } => GradBundle::from_conv(transposed_conv2d_backward(
                x,
                &ConvSpec::new(weight, Some(bias), *stride, *padding),
                *out_size,
                grad_out,
            )?),
            Op::Conv1d {
                weight,
                bias,
                stride,
                padding,
            } => GradBundle::from_conv(conv1d_backward(
                x,
                &ConvSpec::new(weight, Some(bias), *stride, *padding),
                grad_out,
            )?),
            Op::Dense { weight, bias } => {
                let g = dense_backward(x, weight, bias, grad_out)?;
                let mut params = BTreeMap::new();
                params.insert("weight".to_string(), g.weight);
                params.insert("bias".to_string(), g.bias);
                GradBundle {
                    input: g.input,
                    params,
                }
            }
            Op::Activation(kind) => GradBundle {
                input: activation_backward(x, y, *kind, grad_out)?,
                params: BTreeMap::new(),
            },
            Op::AxisMean(axis) => GradBundle {
                input: axis_mean_backward(x.shape(), *axis, grad_out)?,
                params: BTreeMap::new(),
            },
        };
        Ok(bundle)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backward_before_forward_is_state_error() {
        let node = Node::<f64>::new(Op::Activation(Activation::Sigmoid));
        let g = Tensor::zeros(&[2]);
        assert!(matches!(node.backward(&g), Err(Error::State(_))));
    }

    #[test]
    fn sigmoid_node_derivative_at_zero() {
        let mut node = Node::<f64>::new(Op::Activation(Activation::Sigmoid));
        let x = Tensor::zeros(&[1]);
        node.forward(&x).unwrap();
        let g = node.backward(&Tensor::full(&[1], 1.0)).unwrap();
        assert_eq!(g.input.data(), &[0.25]);
    }

    #[test]
    fn bundle_shapes_match_values() {
        let weight = Tensor::<f64>::full(&[3, 2, 3, 3], 0.1);
        let bias = Tensor::zeros(&[3]);
        let mut node = Node::new(Op::Conv2d {
            weight: weight.clone(),
            bias: bias.clone(),
            stride: 2,
            padding: 1,
        });
        let x = Tensor::full(&[2, 6, 5], 1.0);
        let y = node.forward(&x).unwrap();
        let g = node.backward(&Tensor::full(y.shape(), 1.0)).unwrap();
        assert_eq!(g.input.shape(), x.shape());
        assert_eq!(g.params["weight"].shape(), weight.shape());
        assert_eq!(g.params["bias"].shape(), bias.shape());
    }
}
