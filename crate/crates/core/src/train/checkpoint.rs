use std::collections::BTreeMap;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{AdamState, TrainConfig};
use crate::error::{Error, Result};
use crate::model::{ModelConfig, ModelParams};
use crate::tensor::io::{decode, encode};
use crate::tensor::Tensor;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"SUSG";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Serializable state of a ChaCha8 generator.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RngState {
    /// 32-byte key as hex.
    pub seed: String,
    pub stream: u64,
    /// 128-bit word position, decimal.
    pub word_pos: String,
}

impl RngState {
    pub fn capture(rng: &ChaCha8Rng) -> Self {
        Self {
            seed: rng.get_seed().iter().map(|b| format!("{b:02x}")).collect(),
            stream: rng.get_stream(),
            word_pos: rng.get_word_pos().to_string(),
        }
    }

    pub fn restore(&self) -> Result<ChaCha8Rng> {
        let bad = || Error::Integrity(format!("malformed RNG state {self:?}"));
        if self.seed.len() != 64 || !self.seed.is_ascii() {
            return Err(bad());
        }
        let mut seed = [0u8; 32];
        for (i, b) in seed.iter_mut().enumerate() {
            *b = u8::from_str_radix(&self.seed[2 * i..2 * i + 2], 16).map_err(|_| bad())?;
        }
        let pos: u128 = self.word_pos.parse().map_err(|_| bad())?;
        let mut rng = ChaCha8Rng::from_seed(seed);
        rng.set_stream(self.stream);
        rng.set_word_pos(pos);
        Ok(rng)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    model: ModelConfig,
    train: TrainConfig,
    step: u64,
    adam_t: u64,
    rng: RngState,
}

/// Everything needed to resume training or run inference.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub params: ModelParams<f32>,
    pub adam: AdamState,
    pub step: u64,
    /// Data-order generator at the start of the current epoch.
    pub rng: RngState,
}

const PARAM: &str = "param/";
const MOMENT1: &str = "adam.m/";
const MOMENT2: &str = "adam.v/";

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = serde_json::to_string(&Header {
            model: self.model,
            train: self.train,
            step: self.step,
            adam_t: self.adam.t,
            rng: self.rng.clone(),
        })?;
        let named: Vec<(String, &Tensor<f32>)> = [
            (PARAM, &self.params),
            (MOMENT1, &self.adam.m),
            (MOMENT2, &self.adam.v),
        ]
        .iter()
        .flat_map(|(prefix, p)| p.iter().map(move |(n, t)| (format!("{prefix}{n}"), t)))
        .collect();
        Ok(encode(
            CHECKPOINT_MAGIC,
            CHECKPOINT_VERSION,
            &header,
            named.iter().map(|(n, t)| (n.as_str(), *t)),
        ))
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let d = decode(bytes, CHECKPOINT_MAGIC, CHECKPOINT_VERSION)?;
        let h: Header = serde_json::from_str(&d.header)
            .map_err(|e| Error::Integrity(format!("checkpoint header: {e}")))?;
        h.model.validate()?;
        h.train.validate()?;
        let mut groups: BTreeMap<&str, ModelParams<f32>> = BTreeMap::new();
        for b in &d.blocks {
            let Some((prefix, name)) = [PARAM, MOMENT1, MOMENT2]
                .iter()
                .find_map(|p| b.name.strip_prefix(p).map(|n| (*p, n)))
            else {
                return Err(Error::UnexpectedTensor(b.name.clone()));
            };
            groups
                .entry(prefix)
                .or_default()
                .insert(name, b.to_tensor::<f32>());
        }
        let mut take = |p| groups.remove(p).unwrap_or_default();
        let (params, m, v) = (take(PARAM), take(MOMENT1), take(MOMENT2));
        params.validate(&h.model)?;
        m.validate(&h.model)?;
        v.validate(&h.model)?;
        h.rng.restore()?;
        Ok(Self {
            model: h.model,
            train: h.train,
            params,
            adam: AdamState { m, v, t: h.adam_t },
            step: h.step,
            rng: h.rng,
        })
    }

    /// Writes atomically via a temporary file in the same directory.
    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes()?;
        let tmp = path.with_extension("susg.tmp");
        std::fs::write(&tmp, bytes)?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    /// Loads and checks the parameters against an expected configuration;
    /// the error names the first offending tensor.
    pub fn load_for(path: &Path, expected: &ModelConfig) -> Result<Self> {
        let c = Self::load(path)?;
        c.params.validate(expected)?;
        Ok(c)
    }
}
