use serde::{Deserialize, Serialize};

use crate::error::{arg_err, Result};

/// Optimization settings. The loss is always the masked L1 distance between
/// predicted and target linear magnitudes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub segment_frames: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub adam_betas: (f64, f64),
    pub adam_eps: f64,
    pub max_steps: u64,
    pub seed: u64,
    pub grad_clip_norm: f64,
    /// Periodic checkpoint interval in steps; 0 disables periodic saves.
    pub checkpoint_every: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            segment_frames: 128,
            batch_size: 4,
            lr: 1e-3,
            adam_betas: (0.9, 0.999),
            adam_eps: 1e-8,
            max_steps: 2000,
            seed: 0,
            grad_clip_norm: 5.0,
            checkpoint_every: 500,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.segment_frames < 2 {
            return arg_err(format!(
                "segment_frames must be at least 2, got {}",
                self.segment_frames
            ));
        }
        if self.batch_size == 0 {
            return arg_err("batch_size must be positive");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return arg_err(format!("lr must be positive, got {}", self.lr));
        }
        let (b1, b2) = self.adam_betas;
        if !((0.0..1.0).contains(&b1) && (0.0..1.0).contains(&b2)) {
            return arg_err(format!("adam betas must lie in [0, 1), got ({b1}, {b2})"));
        }
        if !(self.adam_eps > 0.0) {
            return arg_err(format!("adam_eps must be positive, got {}", self.adam_eps));
        }
        if !(self.grad_clip_norm > 0.0) {
            return arg_err(format!(
                "grad_clip_norm must be positive, got {}",
                self.grad_clip_norm
            ));
        }
        Ok(())
    }
}
