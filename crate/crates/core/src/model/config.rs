use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{arg_err, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmbedderConfig {
    pub phoneme_dim: usize,
    pub note_dim: usize,
    pub phoneme_vocab: usize,
    pub note_vocab: usize,
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        Self {
            phoneme_dim: 256,
            note_dim: 32,
            phoneme_vocab: 35,
            note_vocab: 129,
        }
    }
}

impl EmbedderConfig {
    pub fn concat_dim(&self) -> usize {
        self.phoneme_dim + self.note_dim
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SUNetConfig {
    pub depth: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    pub base_channels: usize,
    pub max_channels: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    pub use_stripe: bool,
    pub use_skips: bool,
    /// Kernel of the per-direction 1-D convolutions inside stripe pooling.
    pub stripe_kernel: usize,
    pub leaky_slope: f64,
}

impl Default for SUNetConfig {
    fn default() -> Self {
        Self {
            depth: 7,
            kernel: 5,
            stride: 2,
            padding: 2,
            base_channels: 16,
            max_channels: 512,
            in_channels: 2,
            out_channels: 1,
            use_stripe: true,
            use_skips: true,
            stripe_kernel: 3,
            leaky_slope: 0.2,
        }
    }
}

impl SUNetConfig {
    /// Output channels of down layer `l` (1-based); `l = 0` is the input.
    pub fn down_channels(&self, l: usize) -> usize {
        if l == 0 {
            self.in_channels
        } else {
            (self.base_channels << (l - 1).min(30)).min(self.max_channels)
        }
    }

    /// Output channels of up layer `l`, mirroring down layer `l - 1`; the
    /// last up layer keeps `base_channels`.
    pub fn up_out_channels(&self, l: usize) -> usize {
        if l == 1 {
            self.base_channels
        } else {
            self.down_channels(l - 1)
        }
    }

    /// Input channels of up layer `l`: the deepest activation at the top,
    /// otherwise the previous up output plus (with skips) the mirror.
    pub fn up_in_channels(&self, l: usize) -> usize {
        if l == self.depth {
            self.down_channels(l)
        } else {
            self.up_out_channels(l + 1)
                + if self.use_skips {
                    self.down_channels(l)
                } else {
                    0
                }
        }
    }

    pub fn output_in_channels(&self) -> usize {
        self.base_channels + if self.use_skips { self.in_channels } else { 0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth == 0 || self.kernel == 0 || self.stride == 0 {
            return arg_err("sunet: depth, kernel and stride must be positive");
        }
        if self.base_channels == 0 || self.max_channels < self.base_channels {
            return arg_err("sunet: need 0 < base_channels <= max_channels");
        }
        if self.in_channels != 2 || self.out_channels != 1 {
            return arg_err("sunet: the acoustic model uses 2 input planes and 1 output plane");
        }
        if self.stripe_kernel % 2 == 0 {
            return arg_err("sunet: stripe kernel must be odd to preserve length");
        }
        if !(self.leaky_slope >= 0.0 && self.leaky_slope < 1.0) {
            return arg_err("sunet: leaky slope must be in [0, 1)");
        }
        Ok(())
    }
}

/// Full acoustic-model configuration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub embed: EmbedderConfig,
    pub sunet: SUNetConfig,
    /// Frequency bins of the predicted spectrum.
    pub bins: usize,
    pub prenet_kernel: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            embed: EmbedderConfig::default(),
            sunet: SUNetConfig::default(),
            bins: crate::dsp::N_BINS,
            prenet_kernel: 5,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        self.sunet.validate()?;
        if self.bins == 0 || self.prenet_kernel % 2 == 0 {
            return arg_err("model: bins must be positive and the pre-net kernel odd");
        }
        if self.embed.phoneme_vocab == 0 || self.embed.note_vocab == 0 {
            return arg_err("model: empty embedding vocabulary");
        }
        Ok(())
    }

    /// Name and shape of every learnable tensor.
    pub fn param_shapes(&self) -> BTreeMap<String, Vec<usize>> {
        let e = &self.embed;
        let s = &self.sunet;
        let (b, k, pk) = (self.bins, s.kernel, self.prenet_kernel);
        let mut m = BTreeMap::new();
        let mut conv = |name: &str, w: Vec<usize>, bias: usize| {
            m.insert(format!("{name}.weight"), w);
            m.insert(format!("{name}.bias"), vec![bias]);
        };
        conv("score.dense", vec![b, e.concat_dim()], b);
        for name in ["score.conv1", "score.conv2", "spec.conv1", "spec.conv2"] {
            conv(name, vec![b, b, pk], b);
        }
        for l in 1..=s.depth {
            let (ci, co) = (s.down_channels(l - 1), s.down_channels(l));
            conv(&format!("down.{l}"), vec![co, ci, k, k], co);
            if s.use_stripe {
                let sk = s.stripe_kernel;
                conv(&format!("stripe.{l}.conv_h"), vec![co, co, sk], co);
                conv(&format!("stripe.{l}.conv_v"), vec![co, co, sk], co);
                conv(&format!("stripe.{l}.fuse"), vec![co, co, 1, 1], co);
            }
            // transposed kernels are stored as the mirrored convolution's
            let (ui, uo) = (s.up_in_channels(l), s.up_out_channels(l));
            conv(&format!("up.{l}"), vec![ui, uo, k, k], uo);
        }
        conv(
            "output",
            vec![s.out_channels, s.output_in_channels(), 1, 1],
            s.out_channels,
        );
        m.insert("embed.phoneme".into(), vec![e.phoneme_vocab, e.phoneme_dim]);
        m.insert("embed.note".into(), vec![e.note_vocab, e.note_dim]);
        m
    }

    /// Total number of learnable scalars.
    pub fn n_params(&self) -> usize {
        self.param_shapes()
            .values()
            .map(|s| s.iter().product::<usize>())
            .sum()
    }
}
