use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::ModelConfig;
use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Named tensors: model weights, or gradients with the same names.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ModelParams<T: Scalar = f32> {
    tensors: BTreeMap<String, Tensor<T>>,
}

/// Gradients share the parameter layout.
pub type Grads<T> = ModelParams<T>;

/// Bias of the final 1x1 conv; positive so the output ReLU starts active.
const OUTPUT_BIAS_INIT: f64 = 0.1;

impl<T: Scalar> ModelParams<T> {
    pub fn new() -> Self {
        Self {
            tensors: BTreeMap::new(),
        }
    }

    /// Seeded initialization. Convolution and dense weights are drawn from
    /// `N(0, 2 / fan_in)` (effective fan-in for transposed convolutions), embeddings from `N(0, 1)`, biases are zero.
    pub fn init(cfg: &ModelConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut tensors = BTreeMap::new();
        for (name, shape) in cfg.param_shapes() {
            let t = if name.ends_with(".bias") {
                let v = if name == "output.bias" {
                    OUTPUT_BIAS_INIT
                } else {
                    0.0
                };
                Tensor::full(&shape, T::from_f64(v))
            } else if name.starts_with("embed.") {
                Tensor::randn(&shape, 1.0, &mut rng)
            } else {
                // transposed kernels fan in over their input channels (dim 0)
                // a strided transposed conv reaches each output with only
                // about k^2 / stride^2 taps per input channel
                let fan_in = if name.starts_with("up.") {
                    let s = cfg.sunet.stride * cfg.sunet.stride;
                    (shape[0] * shape[2..].iter().product::<usize>()) as f64 / s as f64
                } else {
                    shape[1..].iter().product::<usize>() as f64
                };
                Tensor::randn(&shape, (2.0 / fan_in).sqrt(), &mut rng)
            };
            tensors.insert(name, t);
        }
        Ok(Self { tensors })
    }

    /// All tensors of `cfg` set to zero.
    pub fn zeros(cfg: &ModelConfig) -> Self {
        Self {
            tensors: cfg
                .param_shapes()
                .into_iter()
                .map(|(n, s)| {
                    let t = Tensor::zeros(&s);
                    (n, t)
                })
                .collect(),
        }
    }

    pub fn zeros_like(other: &Self) -> Self {
        Self {
            tensors: other
                .tensors
                .iter()
                .map(|(n, t)| (n.clone(), Tensor::zeros_like(t)))
                .collect(),
        }
    }

    pub fn get(&self, name: &str) -> Result<&Tensor<T>> {
        self.tensors
            .get(name)
            .ok_or_else(|| Error::MissingTensor(name.to_string()))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Tensor<T>> {
        self.tensors
            .get_mut(name)
            .ok_or_else(|| Error::MissingTensor(name.to_string()))
    }

    pub fn insert(&mut self, name: impl Into<String>, t: Tensor<T>) -> Option<Tensor<T>> {
        self.tensors.insert(name.into(), t)
    }

    /// Adds `g` into the tensor called `name`, creating it if absent.
    pub fn accumulate(&mut self, name: &str, g: &Tensor<T>) -> Result<()> {
        match self.tensors.get_mut(name) {
            Some(t) => t.axpy(T::one(), g),
            None => {
                self.tensors.insert(name.to_string(), g.clone());
                Ok(())
            }
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor<T>)> {
        self.tensors.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&String, &mut Tensor<T>)> {
        self.tensors.iter_mut()
    }

    pub fn names(&self) -> impl Iterator<Item = &String> {
        self.tensors.keys()
    }

    /// Number of named tensors.
    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    /// Total scalar count.
    pub fn n_scalars(&self) -> usize {
        self.tensors.values().map(Tensor::len).sum()
    }

    pub fn sq_norm(&self) -> f64 {
        self.tensors.values().map(Tensor::sq_norm).sum()
    }

    pub fn scale(&mut self, alpha: T) {
        self.tensors.values_mut().for_each(|t| t.scale(alpha));
    }

    /// First tensor (in name order) holding a NaN or infinity.
    pub fn first_non_finite(&self) -> Option<&str> {
        self.tensors
            .iter()
            .find(|(_, t)| !t.all_finite())
            .map(|(n, _)| n.as_str())
    }

    pub fn cast<U: Scalar>(&self) -> ModelParams<U> {
        ModelParams {
            tensors: self
                .tensors
                .iter()
                .map(|(n, t)| (n.clone(), t.cast()))
                .collect(),
        }
    }

    /// Checks names and shapes against `cfg`: shape mismatches first (in
    /// name order), then missing, then unexpected tensors.
    pub fn validate(&self, cfg: &ModelConfig) -> Result<()> {
        let shapes = cfg.param_shapes();
        for (name, expected) in &shapes {
            if let Some(t) = self.tensors.get(name) {
                if t.shape() != expected.as_slice() {
                    return Err(Error::ShapeMismatch {
                        name: name.clone(),
                        expected: expected.clone(),
                        found: t.shape().to_vec(),
                    });
                }
            }
        }
        if let Some(name) = shapes.keys().find(|n| !self.tensors.contains_key(*n)) {
            return Err(Error::MissingTensor(name.clone()));
        }
        if let Some(name) = self.tensors.keys().find(|n| !shapes.contains_key(*n)) {
            return Err(Error::UnexpectedTensor(name.clone()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SUNetConfig;

    fn small() -> ModelConfig {
        ModelConfig {
            sunet: SUNetConfig {
                depth: 3,
                base_channels: 2,
                ..Default::default()
            },
            bins: 33,
            ..Default::default()
        }
    }

    #[test]
    fn init_matches_config_and_is_seeded() {
        let cfg = small();
        let a = ModelParams::<f64>::init(&cfg, 1).unwrap();
        a.validate(&cfg).unwrap();
        assert_eq!(a, ModelParams::init(&cfg, 1).unwrap());
        assert_ne!(a, ModelParams::init(&cfg, 2).unwrap());
        assert_eq!(a.n_scalars(), cfg.n_params());
    }

    #[test]
    fn depth_mismatch_names_first_tensor() {
        let deep = ModelConfig {
            sunet: SUNetConfig {
                depth: 7,
                ..Default::default()
            },
            ..Default::default()
        };
        let shallow = ModelConfig {
            sunet: SUNetConfig {
                depth: 3,
                ..Default::default()
            },
            ..Default::default()
        };
        let p = ModelParams::<f32>::zeros(&deep);
        match p.validate(&shallow) {
            Err(Error::ShapeMismatch { name, .. }) => assert_eq!(name, "up.3.weight"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_and_unexpected() {
        let cfg = small();
        let mut p = ModelParams::<f64>::zeros(&cfg);
        p.insert("extra", Tensor::zeros(&[1]));
        assert!(matches!(p.validate(&cfg), Err(Error::UnexpectedTensor(n)) if n == "extra"));
        let mut q = ModelParams::<f64>::zeros(&cfg);
        q.tensors.remove("output.bias");
        assert!(matches!(q.validate(&cfg), Err(Error::MissingTensor(n)) if n == "output.bias"));
    }
}
