use super::TrainConfig;
use crate::error::{dim_err, Result};
use crate::model::ModelParams;

/// First and second moment estimates plus the update count.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: ModelParams<f32>,
    pub v: ModelParams<f32>,
    pub t: u64,
}

impl AdamState {
    pub fn new(params: &ModelParams<f32>) -> Self {
        Self {
            m: ModelParams::zeros_like(params),
            v: ModelParams::zeros_like(params),
            t: 0,
        }
    }

    /// One bias-corrected Adam update of `params` with `grads`.
    pub fn update(
        &mut self,
        params: &mut ModelParams<f32>,
        grads: &ModelParams<f32>,
        cfg: &TrainConfig,
    ) -> Result<()> {
        if grads.len() != params.len() || self.m.len() != params.len() {
            return dim_err(format!(
                "adam: {} parameters, {} gradients, {} moments",
                params.len(),
                grads.len(),
                self.m.len()
            ));
        }
        self.t += 1;
        let (b1, b2) = cfg.adam_betas;
        let c1 = (1.0 - b1.powi(self.t.min(i32::MAX as u64) as i32)) as f32;
        let c2 = (1.0 - b2.powi(self.t.min(i32::MAX as u64) as i32)) as f32;
        let (b1, b2, lr, eps) = (b1 as f32, b2 as f32, cfg.lr as f32, cfg.adam_eps as f32);
        for (name, p) in params.iter_mut() {
            let (m, v, g) = (
                self.m.get_mut(name)?,
                self.v.get_mut(name)?,
                grads.get(name)?,
            );
            if g.shape() != p.shape() || m.shape() != p.shape() || v.shape() != p.shape() {
                return dim_err(format!("adam: shape mismatch for `{name}`"));
            }
            let (p, m, v, g) = (p.data_mut(), m.data_mut(), v.data_mut(), g.data());
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                p[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
            }
        }
        Ok(())
    }
}
